#pragma once

#include <vector>

#include "hnav/nn/model.hpp"

namespace hnav::nn {

/// Plain chain of dense layers; hidden layers use `hidden`, the output layer
/// has no activation. Noisy layers are allowed when built by hand.
class Mlp : public Model {
 public:
  Mlp(const std::vector<std::size_t>& widths, Activation hidden, std::uint64_t seed);
  explicit Mlp(NetworkParams params) : params_(std::move(params)) {}

  Matrix forward(const Matrix& x, std::optional<std::uint64_t> noise_seed = std::nullopt) const;

  NetworkParams& params() override { return params_; }
  const NetworkParams& params() const override { return params_; }
  std::vector<double> accumulate_gradients(std::span<const Sample> batch, const LossSpec& loss,
                                           std::optional<std::uint64_t> noise_seed) override;
  std::vector<double> losses(std::span<const Sample> batch, const LossSpec& loss,
                             std::optional<std::uint64_t> noise_seed) const override;

 private:
  Matrix stack(std::span<const Sample> batch) const;
  NetworkParams params_;
};

}  // namespace hnav::nn
