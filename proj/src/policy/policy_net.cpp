#include "hnav/policy/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace hnav::policy {

const std::array<double, sim::kKinematicSize>& kinematic_scale() {
  // p_y | v_x v_y v_z | a_x a_y a_z | roll pitch yaw | rates | yaw accels
  static const std::array<double, sim::kKinematicSize> scale = {
      6.0, 3.0, 3.0, 3.0, 10.0, 10.0, 10.0, std::numbers::pi, std::numbers::pi, std::numbers::pi,
      3.0, 3.0, 3.0, 30.0, 30.0, 30.0};
  return scale;
}

Observation make_observation(const perception::DepthMap& reduced_normalized, const sim::KinematicEstimate& kin) {
  if (reduced_normalized.values.size() != kDepthCells || reduced_normalized.units != perception::DepthUnits::Normalized)
    throw ConfigError("observation needs a 9x16 normalized depth map");
  Observation obs{};
  std::copy(reduced_normalized.values.begin(), reduced_normalized.values.end(), obs.begin());
  const auto& scale = kinematic_scale();
  for (std::size_t i = 0; i < sim::kKinematicSize; ++i) obs[kDepthCells + i] = kin[i] / scale[i];
  return obs;
}

Observation observe(const sim::VehicleState& state, const perception::Scene& scene,
                    const perception::DepthSensor& sensor, double kinematic_sigma, std::uint64_t seed,
                    perception::DepthMap* depth_out) {
  perception::DepthMap depth = sensor.sense(perception::pose_of(state), scene, mix_seed(seed, 1));
  const auto kin = sim::kinematic_estimate(state, kinematic_sigma, mix_seed(seed, 2));
  Observation obs = make_observation(depth, kin);
  if (depth_out) *depth_out = std::move(depth);
  return obs;
}

void PolicyNetConfig::validate() const {
  if (trunk_width == 0 || stream_width == 0 || trunk_layers == 0)
    throw ConfigError("policy network layers must be non-empty");
  if (sigma0 < 0.0) throw ConfigError("noisy sigma must be non-negative");
}

QValues dueling_combine(double value, const std::array<double, sim::kActionCount>& advantage) {
  double mean = 0.0;
  for (double a : advantage) mean += a;
  mean /= static_cast<double>(advantage.size());
  QValues q{};
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = value + advantage[i] - mean;
  return q;
}

int select_action(const QValues& q) {
  int best = 0;
  for (int i = 1; i < sim::kActionCount; ++i)
    if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  return best;
}

QNet::QNet(const PolicyNetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(seed, 0x716e6574ull));
  std::size_t in = kObservationSize;
  for (std::size_t i = 0; i < config_.trunk_layers; ++i) {
    params_.layers.push_back(nn::make_dense(in, config_.trunk_width, nn::Activation::Relu, rng));
    in = config_.trunk_width;
  }
  for (std::size_t out : {std::size_t{1}, static_cast<std::size_t>(sim::kActionCount)}) {
    std::size_t s_in = config_.trunk_width;
    for (std::size_t i = 0; i < config_.stream_layers; ++i) {
      params_.layers.push_back(nn::make_dense(s_in, config_.stream_width, nn::Activation::Relu, rng));
      s_in = config_.stream_width;
    }
    params_.layers.push_back(nn::make_noisy_dense(s_in, out, nn::Activation::None, rng, config_.sigma0));
  }
}

QNet::QNet(const PolicyNetConfig& config, nn::NetworkParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
  params_.validate();
  const std::size_t expect = config_.trunk_layers + 2 * (config_.stream_layers + 1);
  if (params_.layers.size() != expect) throw ConfigError("Q-network checkpoint has the wrong layer count");
  if (params_.layers.front().in_features() != kObservationSize)
    throw ConfigError("Q-network input width must be " + std::to_string(kObservationSize));
  if (params_.layers[advantage_begin() - 1].kind != nn::LayerKind::NoisyDense ||
      params_.layers[advantage_begin() - 1].out_features() != 1 ||
      params_.layers.back().kind != nn::LayerKind::NoisyDense ||
      params_.layers.back().out_features() != static_cast<std::size_t>(sim::kActionCount))
    throw ConfigError("Q-network heads must be noisy layers of width 1 and 4");
}

std::pair<nn::Matrix, nn::Matrix> QNet::streams(const nn::Matrix& x, std::optional<std::uint64_t> noise_seed) const {
  const nn::Matrix h = nn::dense_stack_forward(params_, 0, value_begin(), x, noise_seed, nullptr);
  nn::Matrix v = nn::dense_stack_forward(params_, value_begin(), advantage_begin(), h, noise_seed, nullptr);
  nn::Matrix a = nn::dense_stack_forward(params_, advantage_begin(), layer_end(), h, noise_seed, nullptr);
  return {std::move(v), std::move(a)};
}

namespace {

nn::Matrix combine(const nn::Matrix& v, const nn::Matrix& a) {
  nn::Matrix q = a;
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const double mean = a.row(r).mean();
    q.row(r).array() += v(r, 0) - mean;
  }
  return q;
}

nn::Matrix stack_inputs(std::span<const nn::Sample> batch) {
  nn::Matrix x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kObservationSize));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].input.size() != kObservationSize) throw ConfigError("Q-network sample has wrong input length");
    std::copy(batch[i].input.data.begin(), batch[i].input.data.end(), x.row(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

}  // namespace

nn::Matrix QNet::forward(const nn::Matrix& x, std::optional<std::uint64_t> noise_seed) const {
  auto [v, a] = streams(x, noise_seed);
  return combine(v, a);
}

QValues QNet::q_values(const Observation& obs, std::optional<std::uint64_t> noise_seed) const {
  nn::Matrix x(1, static_cast<Eigen::Index>(kObservationSize));
  std::copy(obs.begin(), obs.end(), x.data());
  const nn::Matrix q = forward(x, noise_seed);
  QValues out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q(0, static_cast<Eigen::Index>(i));
  return out;
}

std::vector<double> QNet::accumulate_gradients(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                               std::optional<std::uint64_t> noise_seed) {
  const nn::Matrix x = stack_inputs(batch);
  std::vector<nn::DenseTape> trunk_tape, v_tape, a_tape;
  const nn::Matrix h = nn::dense_stack_forward(params_, 0, value_begin(), x, noise_seed, &trunk_tape);
  const nn::Matrix v = nn::dense_stack_forward(params_, value_begin(), advantage_begin(), h, noise_seed, &v_tape);
  const nn::Matrix a = nn::dense_stack_forward(params_, advantage_begin(), layer_end(), h, noise_seed, &a_tape);
  const nn::Matrix q = combine(v, a);

  const auto B = static_cast<Eigen::Index>(batch.size());
  const double scale = 1.0 / static_cast<double>(batch.size());
  nn::Matrix dq(B, sim::kActionCount);
  std::vector<double> out(batch.size());
  std::vector<double> g(sim::kActionCount);
  for (Eigen::Index r = 0; r < B; ++r) {
    std::span<const double> row(q.row(r).data(), sim::kActionCount);
    out[static_cast<std::size_t>(r)] = nn::output_loss(loss, row, batch[static_cast<std::size_t>(r)], g);
    for (int j = 0; j < sim::kActionCount; ++j) dq(r, j) = g[static_cast<std::size_t>(j)] * scale;
  }
  nn::Matrix dv = dq.rowwise().sum();
  nn::Matrix da = dq;
  for (Eigen::Index r = 0; r < B; ++r) da.row(r).array() -= dq.row(r).mean();

  nn::Matrix dh = nn::dense_stack_backward(params_, value_begin(), advantage_begin(), v_tape, dv, true);
  dh += nn::dense_stack_backward(params_, advantage_begin(), layer_end(), a_tape, da, true);
  nn::dense_stack_backward(params_, 0, value_begin(), trunk_tape, dh, false);
  return out;
}

std::vector<double> QNet::losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                 std::optional<std::uint64_t> noise_seed) const {
  const nn::Matrix q = forward(stack_inputs(batch), noise_seed);
  std::vector<double> out(batch.size());
  std::vector<double> g(sim::kActionCount);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::span<const double> row(q.row(static_cast<Eigen::Index>(r)).data(), sim::kActionCount);
    out[r] = nn::output_loss(loss, row, batch[r], g);
  }
  return out;
}

double reward(double prev_x, double new_x, const sim::StepOutcome& outcome, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("reward penalty lambda must be positive");
  if (outcome.classification == sim::Outcome::Collision || outcome.classification == sim::Outcome::OutOfBounds)
    return -lambda;
  return new_x - prev_x;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  obs_.resize(capacity * kObservationSize);
  next_obs_.resize(capacity * kObservationSize);
  action_.resize(capacity);
  reward_.resize(capacity);
  terminal_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.action < 0 || t.action >= sim::kActionCount) throw ConfigError("transition action out of range");
  const std::size_t base = head_ * kObservationSize;
  for (std::size_t j = 0; j < kObservationSize; ++j) {
    obs_[base + j] = static_cast<float>(t.obs[j]);
    next_obs_[base + j] = static_cast<float>(t.next_obs[j]);
  }
  action_[head_] = static_cast<std::int8_t>(t.action);
  reward_[head_] = t.reward;
  terminal_[head_] = t.terminal ? 1 : 0;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t slot = (head_ + capacity_ - size_ + i) % capacity_;
  Transition t;
  const std::size_t base = slot * kObservationSize;
  for (std::size_t j = 0; j < kObservationSize; ++j) {
    t.obs[j] = obs_[base + j];
    t.next_obs[j] = next_obs_[base + j];
  }
  t.action = action_[slot];
  t.reward = reward_[slot];
  t.terminal = terminal_[slot] != 0;
  return t;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw DataError("cannot sample an empty replay buffer");
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(at(rng.index(size_)));
  return out;
}

std::vector<double> td_targets(std::span<const Transition> batch, const QNet& target, double gamma) {
  nn::Matrix x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kObservationSize));
  for (std::size_t i = 0; i < batch.size(); ++i)
    std::copy(batch[i].next_obs.begin(), batch[i].next_obs.end(), x.row(static_cast<Eigen::Index>(i)).data());
  const nn::Matrix q = target.forward(x, std::nullopt);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i].reward;
    if (!batch[i].terminal) y[i] += gamma * q.row(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  return y;
}

double dqn_update(QNet& online, const QNet& target, std::span<const Transition> batch, double gamma,
                  const nn::AdamConfig& adam, std::optional<std::uint64_t> noise_seed, std::int64_t step) {
  if (batch.empty()) throw ConfigError("dqn_update needs a non-empty batch");
  const std::vector<double> y = td_targets(batch, target, gamma);
  std::vector<nn::Sample> samples(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    samples[i].input = nn::Tensor({kObservationSize}, std::vector<double>(batch[i].obs.begin(), batch[i].obs.end()));
    samples[i].target = nn::Tensor({1}, y[i]);
    samples[i].action = batch[i].action;
  }
  return nn::train_step(online, samples, nn::LossSpec::squared_td(), adam, noise_seed, step);
}

void PolicyTrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (batch_size == 0 || replay_capacity == 0 || target_sync == 0) throw ConfigError("policy schedule sizes must be positive");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
}

PolicySelectionLog evaluate_greedy(const QNet& net, const RolloutSetup& setup, double kinematic_sigma,
                                   std::uint64_t seed, std::size_t episodes) {
  PolicySelectionLog out;
  out.episodes = episodes;
  double progress = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    sim::CourseConfig course = setup.course;
    course.seed = mix_seed(seed, 0x73656c656374ull, e);
    sim::World world(course, setup.dynamics);
    const perception::Scene scene = perception::make_scene(course, world.obstacles(), setup.side_walls);
    while (world.running()) {
      const auto k = static_cast<std::uint64_t>(world.outcome().step_index);
      const Observation obs = observe(world.state(), scene, *setup.sensor, kinematic_sigma, mix_seed(course.seed, k));
      const int a = select_action(net.q_values(obs));
      world.step(sim::apply_action(static_cast<sim::Action>(a), world.state(), setup.dynamics));
    }
    out.completions += world.outcome().classification == sim::Outcome::Completed;
    progress += world.state().position.x;
  }
  out.mean_progress = episodes ? progress / static_cast<double>(episodes) : 0.0;
  return out;
}

std::vector<PolicyEpisodeLog> train_policy(QNet& net, const RolloutSetup& setup, const PolicyTrainConfig& config,
                                           const PolicyEpisodeCallback& on_episode,
                                           std::vector<PolicySelectionLog>* selections) {
  config.validate();
  if (!setup.sensor) throw ConfigError("train_policy needs a depth sensor");
  ReplayBuffer buffer(config.replay_capacity);
  QNet target(net.config(), net.params());
  Rng replay_rng(mix_seed(config.seed, 0x7265706c6179ull));
  std::vector<PolicyEpisodeLog> log;
  // DQN returns drift after an early peak; keep the best held-out snapshot
  std::optional<nn::NetworkParams> best;
  PolicySelectionLog best_score;
  auto select = [&](std::size_t at) {
    PolicySelectionLog s = evaluate_greedy(net, setup, config.kinematic_sigma, config.seed, config.select_episodes);
    s.total_steps = at;
    if (!best || s.completions > best_score.completions ||
        (s.completions == best_score.completions && s.mean_progress > best_score.mean_progress)) {
      best = net.params();
      best_score = s;
      s.best = true;
    }
    if (selections) selections->push_back(s);
  };
  std::size_t step = 0;
  for (std::size_t episode = 0; step < config.total_steps; ++episode) {
    sim::CourseConfig course = setup.course;
    course.seed = mix_seed(config.seed, 0x747261696eull, episode);
    sim::World world(course, setup.dynamics);
    const perception::Scene scene = perception::make_scene(course, world.obstacles(), setup.side_walls);
    Observation obs = observe(world.state(), scene, *setup.sensor, config.kinematic_sigma, mix_seed(course.seed, 0));
    PolicyEpisodeLog entry;
    entry.episode = episode;
    entry.lambda = config.lambda;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    while (world.running() && step < config.total_steps) {
      const int a = select_action(net.q_values(obs, mix_seed(config.seed, 0x616374ull, step)));
      const double prev_x = world.state().position.x;
      const auto out = world.step(sim::apply_action(static_cast<sim::Action>(a), world.state(), setup.dynamics));
      Transition t;
      t.obs = obs;
      t.action = a;
      t.reward = reward(prev_x, world.state().position.x, out, config.lambda);
      t.next_obs = observe(world.state(), scene, *setup.sensor, config.kinematic_sigma,
                           mix_seed(course.seed, static_cast<std::uint64_t>(out.step_index)));
      t.terminal = out.terminal() && out.classification != sim::Outcome::Timeout;
      buffer.push(t);
      entry.episode_return += t.reward;
      obs = t.next_obs;
      if (step >= config.learning_starts && buffer.size() >= config.batch_size) {
        const auto batch = buffer.sample(config.batch_size, replay_rng);
        loss_sum += dqn_update(net, target, batch, config.gamma, config.adam, mix_seed(config.seed, 0x757064ull, step),
                               static_cast<std::int64_t>(step));
        ++loss_count;
      }
      ++step;
      if (step % config.target_sync == 0) target = QNet(net.config(), net.params());
      if (config.select_every > 0 && step >= config.learning_starts && step % config.select_every == 0) select(step);
    }
    entry.outcome = world.outcome().classification;
    entry.steps = world.outcome().step_index;
    entry.total_steps = step;
    entry.mean_td_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    log.push_back(entry);
    if (on_episode) on_episode(entry);
  }
  if (config.select_every > 0) {
    if (step % config.select_every != 0) select(step);
    net.params() = std::move(*best);
  }
  return log;
}

void write_policy_log_csv(const std::vector<PolicyEpisodeLog>& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << "episode,return,outcome,steps,lambda,total_steps,mean_td_loss\n";
  out.precision(10);
  for (const auto& e : log)
    out << e.episode << ',' << e.episode_return << ',' << sim::outcome_name(e.outcome) << ',' << e.steps << ','
        << e.lambda << ',' << e.total_steps << ',' << e.mean_td_loss << '\n';
}

}  // namespace hnav::policy
