#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hnav/nn/layers.hpp"

namespace hnav::nn {

/// Ordered layers plus optimizer bookkeeping. Gradient and moment buffers
/// live inside each Param and always mirror the parameter shapes.
struct NetworkParams {
  std::vector<Layer> layers;
  std::int64_t adam_step = 0;

  std::size_t parameter_count() const;
  void zero_grad();
  /// Flat views over every parameter tensor, in layer order.
  std::vector<Param*> all_params();
  std::vector<const Param*> all_params() const;
  void validate() const;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Values saved by a dense layer's forward pass for its backward pass.
struct DenseTape {
  Matrix input;
  Matrix preact;
  std::optional<NoiseSample> noise;
};

/// Batched dense forward: rows of x are samples.
Matrix dense_batch_forward(const Layer& layer, const Matrix& x, const NoiseSample* noise,
                           DenseTape* tape);

/// d_out is the gradient with respect to the activated output. Accumulates
/// parameter gradients into layer and returns the gradient w.r.t. the input
/// (empty matrix when need_dx is false).
Matrix dense_batch_backward(Layer& layer, const DenseTape& tape, const Matrix& d_out, bool need_dx);

/// Runs layers [first, last) as a chain. The noise seed for layer i is
/// mix_seed(noise_seed, i); absent seed means evaluation mode.
Matrix dense_stack_forward(const NetworkParams& net, std::size_t first, std::size_t last,
                           const Matrix& x, std::optional<std::uint64_t> noise_seed,
                           std::vector<DenseTape>* tapes);

Matrix dense_stack_backward(NetworkParams& net, std::size_t first, std::size_t last,
                            const std::vector<DenseTape>& tapes, Matrix d_out, bool need_dx);

/// Conv pass state kept for backprop.
struct ConvTape {
  Tensor input;
  Matrix preact;  // (out_h * out_w) x c_out
};

Tensor conv2d_forward_taped(const Tensor& input, const Layer& layer, ConvTape* tape);

/// d_out is w.r.t. the activated output (H' x W' x C_out). Returns dL/dinput
/// when need_dx, otherwise an empty tensor.
Tensor conv2d_backward(Layer& layer, const ConvTape& tape, const Tensor& d_out, bool need_dx);

}  // namespace hnav::nn
