#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hnav/nn/tensor.hpp"
#include "hnav/rng.hpp"

namespace hnav::nn {

inline constexpr double kDefaultLeak = 0.01;

enum class LayerKind : std::uint8_t { Conv2d = 0, Dense = 1, NoisyDense = 2 };
enum class Activation : std::uint8_t { None = 0, LeakyRelu = 1, Relu = 2 };

/// A parameter tensor together with its gradient and Adam moment buffers.
struct Param {
  Tensor value;
  std::vector<double> grad;
  std::vector<double> m;
  std::vector<double> v;

  Param() = default;
  explicit Param(Tensor t);
  void zero_grad();
};

/// One network layer.
///
/// Parameter layout:
///   conv2d       params = {weights [k, k, c_in, c_out], bias [c_out]}
///   dense        params = {weights [out, in], bias [out]}
///   noisy-dense  params = {mean weights [out, in], mean bias [out],
///                          sigma weights [out, in], sigma bias [out]}
struct Layer {
  LayerKind kind = LayerKind::Dense;
  Activation activation = Activation::None;
  int stride = 1;
  double leak = kDefaultLeak;
  std::vector<Param> params;

  Tensor& weights() { return params.at(0).value; }
  const Tensor& weights() const { return params.at(0).value; }
  Tensor& bias() { return params.at(1).value; }
  const Tensor& bias() const { return params.at(1).value; }
  const Tensor& weight_sigma() const { return params.at(2).value; }
  const Tensor& bias_sigma() const { return params.at(3).value; }

  std::size_t kernel() const { return weights().dim(0); }
  std::size_t in_channels() const { return weights().dim(2); }
  std::size_t out_channels() const { return weights().dim(3); }
  std::size_t in_features() const { return weights().dim(1); }
  std::size_t out_features() const { return weights().dim(0); }

  /// Throws ConfigError if parameter shapes disagree with the layer kind.
  void validate() const;
  std::size_t parameter_count() const;
};

Layer make_conv2d(std::size_t kernel, std::size_t in_channels, std::size_t out_channels, int stride,
                  Activation activation, Rng& rng);
Layer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng);
/// Factorized-Gaussian noisy layer; sigma initialised to sigma0 / sqrt(in).
Layer make_noisy_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng,
                       double sigma0 = 0.5);

double leaky_relu(double x, double alpha = kDefaultLeak);
double activate(double x, Activation act, double leak);
/// Derivative of the activation with respect to its pre-activation input.
double activate_grad(double pre, Activation act, double leak);

/// Output extent of a "same"-padded convolution: ceil(n / stride).
std::size_t conv_output_extent(std::size_t n, int stride);
/// Zero padding applied before the first row/column.
std::size_t conv_pad_before(std::size_t n, std::size_t kernel, int stride);

/// Input is H x W x C; returns ceil(H/s) x ceil(W/s) x C_out.
Tensor conv2d_forward(const Tensor& input, const Layer& layer);

/// Per-pass factorized noise vectors f(eps) = sign(eps) * sqrt(|eps|).
struct NoiseSample {
  std::vector<double> f_in;
  std::vector<double> f_out;
};

NoiseSample sample_noise(const Layer& layer, std::uint64_t seed);

/// Affine map plus activation. For noisy-dense layers a seed draws one noise
/// sample; without a seed the layer evaluates at its mean parameters.
std::vector<double> dense_forward(std::span<const double> input, const Layer& layer,
                                  std::optional<std::uint64_t> noise_seed = std::nullopt);

}  // namespace hnav::nn
