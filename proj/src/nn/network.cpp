#include "hnav/nn/network.hpp"

#include <cstring>

#include "hnav/common.hpp"

namespace hnav::nn {

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

void NetworkParams::zero_grad() {
  for (auto& l : layers)
    for (auto& p : l.params) p.zero_grad();
}

std::vector<Param*> NetworkParams::all_params() {
  std::vector<Param*> out;
  for (auto& l : layers)
    for (auto& p : l.params) out.push_back(&p);
  return out;
}

std::vector<const Param*> NetworkParams::all_params() const {
  std::vector<const Param*> out;
  for (const auto& l : layers)
    for (const auto& p : l.params) out.push_back(&p);
  return out;
}

void NetworkParams::validate() const {
  for (const auto& l : layers) l.validate();
}

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using RowMap = Eigen::Map<const Eigen::RowVectorXd>;

Matrix effective_weights(const Layer& layer, const NoiseSample* noise) {
  const auto out = static_cast<Eigen::Index>(layer.out_features());
  const auto in = static_cast<Eigen::Index>(layer.in_features());
  Matrix w = ConstMap(layer.weights().data.data(), out, in);
  if (layer.kind == LayerKind::NoisyDense && noise) {
    ConstMap sigma(layer.weight_sigma().data.data(), out, in);
    Eigen::Map<const Eigen::VectorXd> fo(noise->f_out.data(), out);
    Eigen::Map<const Eigen::RowVectorXd> fi(noise->f_in.data(), in);
    w.array() += sigma.array() * (fo * fi).array();
  }
  return w;
}

Eigen::RowVectorXd effective_bias(const Layer& layer, const NoiseSample* noise) {
  const auto out = static_cast<Eigen::Index>(layer.out_features());
  Eigen::RowVectorXd b = RowMap(layer.bias().data.data(), out);
  if (layer.kind == LayerKind::NoisyDense && noise) {
    RowMap sigma(layer.bias_sigma().data.data(), out);
    RowMap fo(noise->f_out.data(), out);
    b.array() += sigma.array() * fo.array();
  }
  return b;
}

void apply_activation(Matrix& m, Activation act, double leak) {
  if (act == Activation::None) return;
  double* p = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; ++i) p[i] = activate(p[i], act, leak);
}

/// d_pre = d_out * act'(pre), elementwise.
Matrix preact_grad(const Matrix& d_out, const Matrix& pre, Activation act, double leak) {
  if (act == Activation::None) return d_out;
  Matrix d = d_out;
  double* p = d.data();
  const double* z = pre.data();
  const Eigen::Index n = d.size();
  for (Eigen::Index i = 0; i < n; ++i) p[i] *= activate_grad(z[i], act, leak);
  return d;
}

}  // namespace

Matrix dense_batch_forward(const Layer& layer, const Matrix& x, const NoiseSample* noise,
                           DenseTape* tape) {
  if (layer.kind == LayerKind::Conv2d) throw ConfigError("dense op on conv layer");
  if (static_cast<std::size_t>(x.cols()) != layer.in_features())
    throw ConfigError("dense input width " + std::to_string(x.cols()) + " != " +
                      std::to_string(layer.in_features()));
  const Matrix w = effective_weights(layer, noise);
  const Eigen::RowVectorXd b = effective_bias(layer, noise);
  Matrix pre = x * w.transpose();
  pre.rowwise() += b;
  Matrix out = pre;
  apply_activation(out, layer.activation, layer.leak);
  if (tape) {
    tape->input = x;
    tape->preact = std::move(pre);
    if (noise && layer.kind == LayerKind::NoisyDense)
      tape->noise = *noise;
    else
      tape->noise.reset();
  }
  return out;
}

Matrix dense_batch_backward(Layer& layer, const DenseTape& tape, const Matrix& d_out, bool need_dx) {
  const auto out = static_cast<Eigen::Index>(layer.out_features());
  const auto in = static_cast<Eigen::Index>(layer.in_features());
  const Matrix d_pre = preact_grad(d_out, tape.preact, layer.activation, layer.leak);
  const Matrix d_w = d_pre.transpose() * tape.input;  // out x in
  const Eigen::RowVectorXd d_b = d_pre.colwise().sum();

  Eigen::Map<Matrix> gw(layer.params[0].grad.data(), out, in);
  Eigen::Map<Eigen::RowVectorXd> gb(layer.params[1].grad.data(), out);
  gw += d_w;
  gb += d_b;
  const NoiseSample* noise = tape.noise ? &*tape.noise : nullptr;
  if (layer.kind == LayerKind::NoisyDense && noise) {
    Eigen::Map<const Eigen::VectorXd> fo(noise->f_out.data(), out);
    Eigen::Map<const Eigen::RowVectorXd> fi(noise->f_in.data(), in);
    Eigen::Map<Matrix> gsw(layer.params[2].grad.data(), out, in);
    Eigen::Map<Eigen::RowVectorXd> gsb(layer.params[3].grad.data(), out);
    gsw.array() += d_w.array() * (fo * fi).array();
    gsb.array() += d_b.array() * fo.transpose().array();
  }
  if (!need_dx) return {};
  return d_pre * effective_weights(layer, noise);
}

Matrix dense_stack_forward(const NetworkParams& net, std::size_t first, std::size_t last,
                           const Matrix& x, std::optional<std::uint64_t> noise_seed,
                           std::vector<DenseTape>* tapes) {
  Matrix h = x;
  if (tapes) tapes->assign(last - first, DenseTape{});
  for (std::size_t i = first; i < last; ++i) {
    const Layer& layer = net.layers[i];
    std::optional<NoiseSample> noise;
    if (layer.kind == LayerKind::NoisyDense && noise_seed)
      noise = sample_noise(layer, mix_seed(*noise_seed, i));
    h = dense_batch_forward(layer, h, noise ? &*noise : nullptr,
                            tapes ? &(*tapes)[i - first] : nullptr);
  }
  return h;
}

Matrix dense_stack_backward(NetworkParams& net, std::size_t first, std::size_t last,
                            const std::vector<DenseTape>& tapes, Matrix d_out, bool need_dx) {
  for (std::size_t i = last; i-- > first;) {
    const bool want = need_dx || i > first;
    d_out = dense_batch_backward(net.layers[i], tapes[i - first], d_out, want);
  }
  return d_out;
}

namespace {

struct ConvGeometry {
  std::size_t h, w, c, k, out_h, out_w, pad_top, pad_left;
  int stride;
};

ConvGeometry geometry(const Tensor& input, const Layer& layer) {
  if (layer.kind != LayerKind::Conv2d) throw ConfigError("conv op on non-conv layer");
  if (input.rank() != 3) throw ConfigError("conv input must be H x W x C");
  if (input.dim(2) != layer.in_channels())
    throw ConfigError("conv input channels " + std::to_string(input.dim(2)) + " != " +
                      std::to_string(layer.in_channels()));
  ConvGeometry g{};
  g.h = input.dim(0);
  g.w = input.dim(1);
  g.c = input.dim(2);
  g.k = layer.kernel();
  g.stride = layer.stride;
  g.out_h = conv_output_extent(g.h, g.stride);
  g.out_w = conv_output_extent(g.w, g.stride);
  g.pad_top = conv_pad_before(g.h, g.k, g.stride);
  g.pad_left = conv_pad_before(g.w, g.k, g.stride);
  return g;
}

void im2col(const Tensor& input, const ConvGeometry& g, Matrix& cols) {
  const std::size_t kc = g.k * g.c;
  const auto rows = static_cast<Eigen::Index>(g.out_h * g.out_w);
  const auto width = static_cast<Eigen::Index>(g.k * kc);
  if (cols.rows() != rows || cols.cols() != width) cols.resize(rows, width);
  const double* src = input.data.data();
  const std::size_t row_bytes = g.c * sizeof(double);
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* dst = cols.row(static_cast<Eigen::Index>(oy * g.out_w + ox)).data();
      for (std::size_t kh = 0; kh < g.k; ++kh) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) -
                        static_cast<std::ptrdiff_t>(g.pad_top);
        double* drow = dst + kh * kc;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
          std::memset(drow, 0, kc * sizeof(double));
          continue;
        }
        const double* srow = src + static_cast<std::size_t>(iy) * g.w * g.c;
        for (std::size_t kw = 0; kw < g.k; ++kw) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) -
                          static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
            std::memset(drow + kw * g.c, 0, row_bytes);
          else
            std::memcpy(drow + kw * g.c, srow + static_cast<std::size_t>(ix) * g.c, row_bytes);
        }
      }
    }
  }
}

void col2im_add(const Matrix& cols, const ConvGeometry& g, Tensor& d_input) {
  const std::size_t kc = g.k * g.c;
  double* dst = d_input.data.data();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* src = cols.row(static_cast<Eigen::Index>(oy * g.out_w + ox)).data();
      for (std::size_t kh = 0; kh < g.k; ++kh) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) -
                        static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t kw = 0; kw < g.k; ++kw) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) -
                          static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
          double* d = dst + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.c;
          const double* s = src + kh * kc + kw * g.c;
          for (std::size_t ci = 0; ci < g.c; ++ci) d[ci] += s[ci];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward_taped(const Tensor& input, const Layer& layer, ConvTape* tape) {
  const ConvGeometry g = geometry(input, layer);
  const auto cout = static_cast<Eigen::Index>(layer.out_channels());
  const auto kdim = static_cast<Eigen::Index>(g.k * g.k * g.c);
  thread_local Matrix cols;
  im2col(input, g, cols);
  ConstMap w(layer.weights().data.data(), kdim, cout);
  Matrix pre(cols.rows(), cout);
  pre.noalias() = cols * w;
  pre.rowwise() += RowMap(layer.bias().data.data(), cout);
  Tensor out({g.out_h, g.out_w, layer.out_channels()});
  std::memcpy(out.data.data(), pre.data(), out.size() * sizeof(double));
  if (layer.activation == Activation::LeakyRelu) {
    const double a = layer.leak;
    for (double& v : out.data) v = v >= 0.0 ? v : a * v;
  } else if (layer.activation == Activation::Relu) {
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  }
  if (tape) {
    tape->input = input;
    tape->preact = std::move(pre);
  }
  return out;
}

Tensor conv2d_backward(Layer& layer, const ConvTape& tape, const Tensor& d_out, bool need_dx) {
  const ConvGeometry g = geometry(tape.input, layer);
  const auto cout = static_cast<Eigen::Index>(layer.out_channels());
  const auto kdim = static_cast<Eigen::Index>(g.k * g.k * g.c);
  const auto rows = static_cast<Eigen::Index>(g.out_h * g.out_w);
  if (d_out.size() != static_cast<std::size_t>(rows * cout))
    throw ConfigError("conv backward: upstream gradient shape mismatch");
  Matrix d_pre = Eigen::Map<const Matrix>(d_out.data.data(), rows, cout);
  if (layer.activation != Activation::None) {
    double* p = d_pre.data();
    const double* z = tape.preact.data();
    if (layer.activation == Activation::LeakyRelu) {
      const double a = layer.leak;
      for (Eigen::Index i = 0; i < d_pre.size(); ++i) p[i] *= z[i] >= 0.0 ? 1.0 : a;
    } else {
      for (Eigen::Index i = 0; i < d_pre.size(); ++i) p[i] *= z[i] > 0.0 ? 1.0 : 0.0;
    }
  }
  thread_local Matrix cols;
  im2col(tape.input, g, cols);
  Eigen::Map<Matrix> gw(layer.params[0].grad.data(), kdim, cout);
  Eigen::Map<Eigen::RowVectorXd> gb(layer.params[1].grad.data(), cout);
  gw.noalias() += cols.transpose() * d_pre;
  gb += d_pre.colwise().sum();
  if (!need_dx) return {};
  ConstMap w(layer.weights().data.data(), kdim, cout);
  thread_local Matrix d_cols;
  d_cols.resize(rows, kdim);
  d_cols.noalias() = d_pre * w.transpose();
  Tensor d_in(tape.input.shape, 0.0);
  col2im_add(d_cols, g, d_in);
  return d_in;
}

}  // namespace hnav::nn
