#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hnav/nn/checkpoint.hpp"
#include "hnav/nn/mlp.hpp"
#include "hnav/nn/model.hpp"

using namespace hnav;
using namespace hnav::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// straightforward zero-padded convolution, used as the oracle
Tensor naive_conv(const Tensor& x, const Layer& l) {
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2), k = l.kernel(), cout = l.out_channels();
  const int s = l.stride;
  const std::size_t oh = conv_output_extent(h, s), ow = conv_output_extent(w, s);
  const long ph = static_cast<long>(conv_pad_before(h, k, s)), pw = static_cast<long>(conv_pad_before(w, k, s));
  Tensor y({oh, ow, cout});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j)
      for (std::size_t co = 0; co < cout; ++co) {
        double acc = l.bias()[co];
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b < k; ++b) {
            const long r = static_cast<long>(i) * s + static_cast<long>(a) - ph;
            const long c = static_cast<long>(j) * s + static_cast<long>(b) - pw;
            if (r < 0 || c < 0 || r >= static_cast<long>(h) || c >= static_cast<long>(w)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci)
              acc += x.data[(r * w + c) * cin + ci] * l.weights().data[((a * k + b) * cin + ci) * cout + co];
          }
        y.data[(i * ow + j) * cout + co] = activate(acc, l.activation, l.leak);
      }
  return y;
}

}  // namespace

TEST(Huber, ClosedForms) {
  EXPECT_NEAR(huber(0.5, 1.0), 0.125, 1e-12);
  EXPECT_NEAR(huber(-0.5, 1.0), 0.125, 1e-12);
  EXPECT_NEAR(huber(2.0, 1.0), 1.5, 1e-12);
  EXPECT_NEAR(huber(1.0, 1.0), 0.5, 1e-12);  // both branches meet
  EXPECT_DOUBLE_EQ(huber_grad(3.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(huber_grad(-0.25, 1.0), -0.25);
}

TEST(Huber, OutputLossAveragesOverCells) {
  Sample s;
  s.target = Tensor({4}, 0.0);
  std::vector<double> out = {0.5, -0.5, 2.0, -2.0};
  std::vector<double> g(4);
  const double l = output_loss(LossSpec::huber(1.0), out, s, g);
  EXPECT_NEAR(l, (0.125 * 2 + 1.5 * 2) / 4.0, 1e-12);
  EXPECT_NEAR(g[0], 0.5 / 4.0, 1e-12);
  EXPECT_NEAR(g[2], 1.0 / 4.0, 1e-12);
  EXPECT_NEAR(g[3], -1.0 / 4.0, 1e-12);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusTarget) {
  Sample s;
  s.target = Tensor({2}, std::vector<double>{1.0, 0.0});
  std::vector<double> out = {0.3, -0.7};
  std::vector<double> g(2);
  const double l = output_loss(LossSpec::cross_entropy(), out, s, g);
  const double p0 = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(l, -std::log(p0), 1e-12);
  EXPECT_NEAR(g[0], p0 - 1.0, 1e-12);
  EXPECT_NEAR(g[1], 1.0 - p0, 1e-12);
}

TEST(SquaredTd, OnlyChosenActionGetsGradient) {
  Sample s;
  s.target = Tensor({1}, std::vector<double>{1.0});
  s.action = 2;
  std::vector<double> out = {5.0, 5.0, 3.0, 5.0};
  std::vector<double> g(4);
  EXPECT_DOUBLE_EQ(output_loss(LossSpec::squared_td(), out, s, g), 4.0);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0, 4.0, 0.0}));
  s.action = 4;
  EXPECT_THROW(output_loss(LossSpec::squared_td(), out, s, g), ConfigError);
}

TEST(Activation, LeakyAndRelu) {
  EXPECT_DOUBLE_EQ(activate(-2.0, Activation::LeakyRelu, 0.01), -0.02);
  EXPECT_DOUBLE_EQ(activate(-2.0, Activation::Relu, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(activate(3.0, Activation::Relu, 0.01), 3.0);
  EXPECT_DOUBLE_EQ(activate_grad(-1.0, Activation::LeakyRelu, 0.01), 0.01);
  EXPECT_DOUBLE_EQ(activate_grad(1.0, Activation::None, 0.01), 1.0);
}

TEST(Dense, HandComputed) {
  Rng rng(1);
  Layer l = make_dense(2, 2, Activation::LeakyRelu, rng);
  l.weights().data = {1.0, 2.0, 3.0, 4.0};
  l.bias().data = {0.5, -1.0};
  const std::vector<double> x = {1.0, -1.0};
  const auto y = dense_forward(x, l);
  EXPECT_NEAR(y[0], -0.005, 1e-15);
  EXPECT_NEAR(y[1], -0.02, 1e-15);
}

TEST(Dense, NoisyLayerMeanWithoutSeed) {
  Rng rng(2);
  Layer l = make_noisy_dense(5, 3, Activation::None, rng);
  Layer mean_only = make_dense(5, 3, Activation::None, rng);
  mean_only.params[0].value = l.params[0].value;
  mean_only.params[1].value = l.params[1].value;
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.4, -0.5};
  EXPECT_EQ(dense_forward(x, l), dense_forward(x, mean_only));
  const auto a = dense_forward(x, l, 42);
  EXPECT_EQ(a, dense_forward(x, l, 42));
  EXPECT_NE(a, dense_forward(x, l, 43));
  // sigma starts at sigma0 / sqrt(fan in)
  EXPECT_NEAR(l.weight_sigma()[0], 0.5 / std::sqrt(5.0), 1e-12);
}

TEST(Conv, OutputExtentIsCeil) {
  EXPECT_EQ(conv_output_extent(144, 2), 72u);
  EXPECT_EQ(conv_output_extent(9, 2), 5u);
  EXPECT_EQ(conv_output_extent(7, 1), 7u);
}

TEST(Conv, MatchesNaiveLoops) {
  Rng rng(3);
  for (int stride : {1, 2})
    for (std::size_t k : {3u, 5u}) {
      Layer l = make_conv2d(k, 3, 4, stride, Activation::LeakyRelu, rng);
      for (double& b : l.bias().data) b = rng.uniform(-0.1, 0.1);
      const Tensor x = random_tensor({11, 9, 3}, rng);
      const Tensor y = conv2d_forward(x, l);
      const Tensor want = naive_conv(x, l);
      ASSERT_EQ(y.shape, want.shape);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
    }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Mlp m({2, 1}, Activation::None, 4);
  Sample s;
  s.input = Tensor({2}, std::vector<double>{1.0, -2.0});
  s.target = Tensor({1}, std::vector<double>{10.0});
  const auto before = m.params().layers[0].weights().data;
  AdamConfig adam;
  adam.learning_rate = 1e-3;
  train_step(m, std::span<const Sample>(&s, 1), LossSpec::huber(1.0), adam);
  const auto& after = m.params().layers[0].weights().data;
  // error saturates the Huber branch: g = -x / n, so each weight moves by lr * sign(x)
  EXPECT_NEAR(after[0] - before[0], 1e-3, 1e-9);
  EXPECT_NEAR(after[1] - before[1], -1e-3, 1e-9);
  EXPECT_EQ(m.params().adam_step, 1);
}

TEST(Adam, ClipNormScalesGradient) {
  NetworkParams p;
  Rng rng(5);
  p.layers.push_back(make_dense(1, 1, Activation::None, rng));
  p.zero_grad();
  p.layers[0].params[0].grad[0] = 30.0;
  p.layers[0].params[1].grad[0] = 40.0;
  AdamConfig adam;
  adam.clip_norm = 5.0;
  adam.learning_rate = 0.0;  // only look at the moments
  adam_update(p, adam);
  EXPECT_NEAR(p.layers[0].params[0].m[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(p.layers[0].params[1].m[0], 0.1 * 4.0, 1e-12);
}

TEST(TrainStep, NonFiniteLossThrowsWithBatchIndex) {
  Mlp m({2, 1}, Activation::None, 6);
  Sample s;
  s.input = Tensor({2}, std::vector<double>{std::nan(""), 0.0});
  s.target = Tensor({1}, 0.0);
  try {
    train_step(m, std::span<const Sample>(&s, 1), LossSpec::huber(), {}, std::nullopt, 17);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.batch_index(), 17);
    EXPECT_EQ(e.sample_index(), 0);
  }
}

TEST(Mlp, FitsALinearMap) {
  Mlp m({3, 16, 1}, Activation::LeakyRelu, 7);
  Rng rng(8);
  std::vector<Sample> data(64);
  for (auto& s : data) {
    s.input = random_tensor({3}, rng);
    s.target = Tensor({1}, std::vector<double>{0.5 * s.input[0] - s.input[1] + 0.25 * s.input[2]});
  }
  AdamConfig adam;
  adam.learning_rate = 1e-2;
  const double first = mean_loss(m, data, LossSpec::huber());
  for (int it = 0; it < 300; ++it) train_step(m, data, LossSpec::huber(), adam, std::nullopt, it);
  EXPECT_LT(mean_loss(m, data, LossSpec::huber()), 0.05 * first);
}

TEST(GradientCheck, CatchesAWrongBackwardPass) {
  // Model whose gradient is deliberately doubled.
  class Broken : public Mlp {
   public:
    using Mlp::Mlp;
    std::vector<double> accumulate_gradients(std::span<const Sample> b, const LossSpec& l,
                                             std::optional<std::uint64_t> n) override {
      auto out = Mlp::accumulate_gradients(b, l, n);
      for (Param* p : params().all_params())
        for (double& g : p->grad) g *= 2.0;
      return out;
    }
  };
  Rng rng(9);
  Sample s;
  s.input = random_tensor({4}, rng);
  s.target = Tensor({2}, std::vector<double>{0.1, -0.1});
  Mlp good({4, 6, 2}, Activation::LeakyRelu, 10);
  Broken bad({4, 6, 2}, Activation::LeakyRelu, 10);
  EXPECT_LT(gradient_check(good, s, LossSpec::huber()), 1e-4);
  EXPECT_GT(gradient_check(bad, s, LossSpec::huber()), 0.3);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Rng rng(11);
  NetworkParams p;
  p.layers.push_back(make_conv2d(3, 3, 4, 2, Activation::LeakyRelu, rng));
  p.layers.push_back(make_noisy_dense(8, 4, Activation::Relu, rng));
  p.adam_step = 123;
  std::stringstream ss;
  save_params(p, ss);
  const NetworkParams q = load_params(ss);
  ASSERT_EQ(q.layers.size(), 2u);
  EXPECT_EQ(q.adam_step, 123);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(q.layers[l].kind, p.layers[l].kind);
    EXPECT_EQ(q.layers[l].stride, p.layers[l].stride);
    for (std::size_t k = 0; k < p.layers[l].params.size(); ++k)
      EXPECT_EQ(q.layers[l].params[k].value, p.layers[l].params[k].value);
  }
  const Tensor x = random_tensor({6, 6, 3}, rng);
  EXPECT_EQ(conv2d_forward(x, q.layers[0]), conv2d_forward(x, p.layers[0]));
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream bad("not a checkpoint at all");
  EXPECT_THROW(load_params(bad), ArtifactError);
  EXPECT_THROW(load_params(std::filesystem::path("/nonexistent/net.hnav")), ArtifactError);
}
