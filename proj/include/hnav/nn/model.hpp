#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/nn/network.hpp"
#include "hnav/nn/tensor.hpp"

namespace hnav::nn {

enum class LossKind : std::uint8_t { Huber, CrossEntropy, SquaredTd };

struct LossSpec {
  LossKind kind = LossKind::Huber;
  double delta = 1.0;  // Huber threshold

  static LossSpec huber(double delta = 1.0) { return {LossKind::Huber, delta}; }
  static LossSpec cross_entropy() { return {LossKind::CrossEntropy, 1.0}; }
  static LossSpec squared_td() { return {LossKind::SquaredTd, 1.0}; }
};

/// One training example. Target meaning depends on the loss:
///   huber          target has the output's length
///   cross-entropy  target is a 2-class distribution over the logits
///   squared-td     target[0] is the regression value for output `action`
struct Sample {
  Tensor input;
  Tensor target;
  int action = -1;
};

double huber(double error, double delta);
double huber_grad(double error, double delta);

/// Per-sample loss of one network output; writes dloss/doutput into grad.
double output_loss(const LossSpec& loss, std::span<const double> output, const Sample& sample,
                   std::span<double> grad);

/// A trainable network with a fixed architecture.
class Model {
 public:
  virtual ~Model() = default;

  virtual NetworkParams& params() = 0;
  virtual const NetworkParams& params() const = 0;

  /// Adds the gradient of the mean batch loss into the parameter gradient
  /// buffers and returns per-sample losses.
  virtual std::vector<double> accumulate_gradients(std::span<const Sample> batch,
                                                   const LossSpec& loss,
                                                   std::optional<std::uint64_t> noise_seed) = 0;

  /// Per-sample losses without touching gradients.
  virtual std::vector<double> losses(std::span<const Sample> batch, const LossSpec& loss,
                                     std::optional<std::uint64_t> noise_seed) const = 0;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

/// One optimizer step on the mean batch loss. Returns the pre-update loss.
/// Throws TrainingError (carrying batch_index) if any sample loss is not finite.
double train_step(Model& model, std::span<const Sample> batch, const LossSpec& loss,
                  const AdamConfig& adam, std::optional<std::uint64_t> noise_seed = std::nullopt,
                  std::int64_t batch_index = 0);

void adam_update(NetworkParams& params, const AdamConfig& adam);

double mean_loss(const Model& model, std::span<const Sample> batch, const LossSpec& loss,
                 std::optional<std::uint64_t> noise_seed = std::nullopt);

struct GradientCheckOptions {
  double step = 1e-4;
  /// Check at most this many coordinates (seeded subset); 0 checks all.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
  /// Extra passes at step/10, step/100, ... for coordinates whose relative
  /// error exceeds refine_above.
  int refinements = 2;
  double refine_above = 1e-5;
};

/// Max over parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
/// numeric from central differences (best over the refinement steps).
double gradient_check(Model& model, const Sample& sample, const LossSpec& loss,
                      const GradientCheckOptions& options = {});

}  // namespace hnav::nn
