#include "hnav/harness/gradcheck.hpp"

#include "hnav/collision/collision_net.hpp"
#include "hnav/depth/depth_net.hpp"
#include "hnav/nn/mlp.hpp"
#include "hnav/policy/policy_net.hpp"

namespace hnav::harness {

namespace {

nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

nn::Sample collision_sample(Rng& rng, int action, bool positive) {
  nn::Sample s;
  s.input = random_tensor({collision::kCollisionInputSize}, rng);
  for (std::size_t a = 0; a < static_cast<std::size_t>(sim::kActionCount); ++a)
    s.input[policy::kObservationSize + a] = a == static_cast<std::size_t>(action) ? 1.0 : 0.0;
  s.target = positive ? nn::Tensor({2}, std::vector<double>{1.0, 0.0}) : nn::Tensor({2}, std::vector<double>{0.0, 1.0});
  return s;
}

nn::Sample td_sample(Rng& rng, int action) {
  nn::Sample s;
  s.input = random_tensor({policy::kObservationSize}, rng);
  s.target = nn::Tensor({1}, std::vector<double>{rng.uniform(-2.0, 2.0)});
  s.action = action;
  return s;
}

GradcheckCase check(std::string name, nn::Model& model, const nn::Sample& sample, const nn::LossSpec& loss,
                    double tolerance, std::size_t coordinates, std::uint64_t seed,
                    std::optional<std::uint64_t> noise_seed = std::nullopt, double step = 1e-4) {
  GradcheckCase c;
  c.name = std::move(name);
  c.parameters = model.params().parameter_count();
  c.checked = coordinates == 0 ? c.parameters : std::min(coordinates, c.parameters);
  c.tolerance = tolerance;
  nn::GradientCheckOptions opt;
  opt.max_coordinates = coordinates;
  opt.seed = seed;
  opt.noise_seed = noise_seed;
  opt.step = step;
  c.error = nn::gradient_check(model, sample, loss, opt);
  return c;
}

}  // namespace

std::vector<GradcheckCase> run_gradchecks(const GradcheckOptions& o) {
  std::vector<GradcheckCase> out;
  Rng rng(mix_seed(o.seed, 0x6763ull));

  {
    depth::DepthNetConfig cfg;
    cfg.channel_scale = 0.125;
    depth::DepthNet net(cfg, mix_seed(o.seed, 1));
    nn::Sample s;
    s.input = random_tensor({cfg.height, cfg.width, 3}, rng);
    s.target = random_tensor({cfg.out_rows() * cfg.out_cols()}, rng, -0.5, 0.5);
    // at 144x256 each weight feeds thousands of leaky units; a 1e-4 nudge
    // nearly always flips one of them across the kink, so use a finer step
    out.push_back(check("depth CNN, 1/8 channels", net, s, nn::LossSpec::huber(cfg.huber_delta), 1e-3,
                        o.cnn_coordinates, o.seed, std::nullopt, 1e-6));
  }
  {
    collision::CollisionNet net({}, mix_seed(o.seed, 2));
    out.push_back(check("collision MLP, full size", net, collision_sample(rng, 2, true), nn::LossSpec::cross_entropy(),
                        1e-3, o.dense_coordinates, o.seed));
  }
  {
    policy::QNet net({}, mix_seed(o.seed, 3));
    out.push_back(check("dueling Q-network, full size", net, td_sample(rng, 1), nn::LossSpec::squared_td(), 1e-3,
                        o.dense_coordinates, o.seed, mix_seed(o.seed, 4)));
  }
  {
    nn::Mlp net({12, 16, 16, 3}, nn::Activation::LeakyRelu, mix_seed(o.seed, 5));
    nn::Sample s;
    s.input = random_tensor({12}, rng);
    s.target = random_tensor({3}, rng, -0.3, 0.3);
    out.push_back(check("dense MLP, Huber", net, s, nn::LossSpec::huber(1.0), 1e-4, 0, o.seed));
  }
  {
    collision::CollisionNetConfig cfg;
    cfg.encoder = {24, 8};
    cfg.head = {8};
    collision::CollisionNet net(cfg, mix_seed(o.seed, 6));
    out.push_back(check("small collision MLP", net, collision_sample(rng, 0, false), nn::LossSpec::cross_entropy(),
                        1e-4, 0, o.seed));
  }
  {
    policy::PolicyNetConfig cfg;
    cfg.trunk_width = 16;
    cfg.trunk_layers = 2;
    cfg.stream_width = 8;
    cfg.stream_layers = 1;
    policy::QNet net(cfg, mix_seed(o.seed, 7));
    out.push_back(check("small dueling Q-network, noisy", net, td_sample(rng, 3), nn::LossSpec::squared_td(), 1e-4, 0,
                        o.seed, mix_seed(o.seed, 8)));
  }
  return out;
}

}  // namespace hnav::harness
