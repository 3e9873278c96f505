#include "hnav/nn/mlp.hpp"

#include "hnav/common.hpp"
#include "hnav/rng.hpp"

namespace hnav::nn {

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, std::uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    params_.layers.push_back(make_dense(widths[i], widths[i + 1], last ? Activation::None : hidden, rng));
  }
}

Matrix Mlp::forward(const Matrix& x, std::optional<std::uint64_t> noise_seed) const {
  return dense_stack_forward(params_, 0, params_.layers.size(), x, noise_seed, nullptr);
}

Matrix Mlp::stack(std::span<const Sample> batch) const {
  const std::size_t in = params_.layers.front().in_features();
  Matrix x(batch.size(), in);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].input.size() != in) throw ConfigError("MLP input width mismatch");
    for (std::size_t j = 0; j < in; ++j) x(b, j) = batch[b].input.data[j];
  }
  return x;
}

std::vector<double> Mlp::accumulate_gradients(std::span<const Sample> batch, const LossSpec& loss,
                                              std::optional<std::uint64_t> noise_seed) {
  std::vector<DenseTape> tapes;
  const Matrix y = dense_stack_forward(params_, 0, params_.layers.size(), stack(batch), noise_seed, &tapes);
  Matrix d(y.rows(), y.cols());
  std::vector<double> out(batch.size());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::span<double> g(d.row(b).data(), static_cast<std::size_t>(y.cols()));
    out[b] = output_loss(loss, std::span<const double>(y.row(b).data(), y.cols()), batch[b], g);
    for (double& v : g) v *= inv;
  }
  dense_stack_backward(params_, 0, params_.layers.size(), tapes, d, false);
  return out;
}

std::vector<double> Mlp::losses(std::span<const Sample> batch, const LossSpec& loss,
                                std::optional<std::uint64_t> noise_seed) const {
  const Matrix y = forward(stack(batch), noise_seed);
  std::vector<double> out(batch.size());
  std::vector<double> scratch(y.cols());
  for (std::size_t b = 0; b < batch.size(); ++b)
    out[b] = output_loss(loss, std::span<const double>(y.row(b).data(), y.cols()), batch[b], scratch);
  return out;
}

}  // namespace hnav::nn
