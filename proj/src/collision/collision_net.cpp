#include "hnav/collision/collision_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

namespace hnav::collision {

void CollisionNetConfig::validate() const {
  if (encoder.empty() || head.empty()) throw ConfigError("collision network needs encoder and head layers");
  if (std::any_of(encoder.begin(), encoder.end(), [](std::size_t w) { return w == 0; }) ||
      std::any_of(head.begin(), head.end(), [](std::size_t w) { return w == 0; }))
    throw ConfigError("collision network widths must be positive");
  if (horizon < 1) throw ConfigError("collision horizon must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("collision threshold must lie in (0, 1)");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
    throw ConfigError("positive batch fraction must lie in (0, 1)");
}

CollisionNet::CollisionNet(const CollisionNetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(seed, 0x636f6c6cull));
  auto add = [&](std::size_t in, std::size_t out, nn::Activation act) {
    auto layer = nn::make_dense(in, out, act, rng);
    layer.leak = config_.leak;
    params_.layers.push_back(std::move(layer));
  };
  std::size_t in = policy::kObservationSize;
  for (std::size_t w : config_.encoder) {
    add(in, w, nn::Activation::LeakyRelu);
    in = w;
  }
  in = join_width();
  for (std::size_t w : config_.head) {
    add(in, w, nn::Activation::LeakyRelu);
    in = w;
  }
  add(in, 2, nn::Activation::None);
}

CollisionNet::CollisionNet(const CollisionNetConfig& config, nn::NetworkParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  params_.validate();
  if (params_.layers.size() != config_.encoder.size() + config_.head.size() + 1)
    throw ConfigError("collision checkpoint has the wrong layer count");
  if (params_.layers.front().in_features() != policy::kObservationSize ||
      params_.layers[encoder_layers()].in_features() != join_width() || params_.layers.back().out_features() != 2)
    throw ConfigError("collision checkpoint widths do not match the configured architecture");
}

namespace {

nn::Matrix join(const nn::Matrix& enc, const nn::Matrix& x) {
  nn::Matrix j(enc.rows(), enc.cols() + sim::kActionCount);
  j.leftCols(enc.cols()) = enc;
  j.rightCols(sim::kActionCount) = x.rightCols(sim::kActionCount);
  return j;
}

nn::Matrix stack(std::span<const nn::Sample> batch) {
  nn::Matrix x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kCollisionInputSize));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].input.size() != kCollisionInputSize) throw ConfigError("collision sample must have 164 inputs");
    std::copy(batch[i].input.data.begin(), batch[i].input.data.end(), x.row(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

}  // namespace

nn::Matrix CollisionNet::logits(const nn::Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != kCollisionInputSize) throw ConfigError("collision input must be 164 wide");
  const nn::Matrix enc =
      nn::dense_stack_forward(params_, 0, encoder_layers(), x.leftCols(policy::kObservationSize), std::nullopt, nullptr);
  return nn::dense_stack_forward(params_, encoder_layers(), params_.layers.size(), join(enc, x), std::nullopt, nullptr);
}

double collision_probability(double logit_collision, double logit_clear) {
  return 1.0 / (1.0 + std::exp(logit_clear - logit_collision));
}

double CollisionNet::predict(const policy::Observation& obs, int action) const {
  if (action < 0 || action >= sim::kActionCount) throw ConfigError("collision query action out of range");
  nn::Matrix x = nn::Matrix::Zero(1, static_cast<Eigen::Index>(kCollisionInputSize));
  std::copy(obs.begin(), obs.end(), x.data());
  x(0, static_cast<Eigen::Index>(policy::kObservationSize) + action) = 1.0;
  const nn::Matrix z = logits(x);
  return collision_probability(z(0, 0), z(0, 1));
}

std::vector<double> CollisionNet::accumulate_gradients(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                                       std::optional<std::uint64_t>) {
  const nn::Matrix x = stack(batch);
  std::vector<nn::DenseTape> enc_tape, head_tape;
  const nn::Matrix enc =
      nn::dense_stack_forward(params_, 0, encoder_layers(), x.leftCols(policy::kObservationSize), std::nullopt, &enc_tape);
  const nn::Matrix z =
      nn::dense_stack_forward(params_, encoder_layers(), params_.layers.size(), join(enc, x), std::nullopt, &head_tape);
  const double scale = 1.0 / static_cast<double>(batch.size());
  nn::Matrix dz(z.rows(), 2);
  std::vector<double> out(batch.size());
  std::vector<double> g(2);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    out[static_cast<std::size_t>(r)] =
        nn::output_loss(loss, std::span<const double>(z.row(r).data(), 2), batch[static_cast<std::size_t>(r)], g);
    dz(r, 0) = g[0] * scale;
    dz(r, 1) = g[1] * scale;
  }
  const nn::Matrix dj = nn::dense_stack_backward(params_, encoder_layers(), params_.layers.size(), head_tape, dz, true);
  nn::dense_stack_backward(params_, 0, encoder_layers(), enc_tape, dj.leftCols(enc.cols()), false);
  return out;
}

std::vector<double> CollisionNet::losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                         std::optional<std::uint64_t>) const {
  const nn::Matrix z = logits(stack(batch));
  std::vector<double> out(batch.size());
  std::vector<double> g(2);
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    out[static_cast<std::size_t>(r)] =
        nn::output_loss(loss, std::span<const double>(z.row(r).data(), 2), batch[static_cast<std::size_t>(r)], g);
  return out;
}

std::vector<std::uint8_t> label_window(std::span<const std::uint8_t> collided, int horizon) {
  if (horizon < 1) throw ConfigError("collision horizon must be at least 1");
  if (collided.empty()) return {};
  const std::size_t n = collided.size() - 1;
  std::vector<std::uint8_t> labels(n, 0);
  // sweep backwards keeping the nearest future collision step
  std::size_t next = 0;  // 0 = none seen yet
  for (std::size_t t = n; t-- > 0;) {
    if (collided[t + 1]) next = t + 1;
    if (next != 0 && next - t <= static_cast<std::size_t>(horizon)) labels[t] = 1;
  }
  return labels;
}

std::vector<std::uint8_t> label_episode(const EpisodeFrames& frames, int horizon) {
  if (frames.outcome == sim::Outcome::Running) throw DataError("cannot label an unfinished episode");
  const std::size_t n = frames.observations.size();
  std::vector<std::uint8_t> collided(n + 1, 0);
  // frame t precedes step t+1, so a collision ending the episode lands on index n
  if (frames.outcome == sim::Outcome::Collision) collided[n] = 1;
  return label_window(collided, horizon);
}

std::size_t CollisionDataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

void CollisionDataset::add_episode(const EpisodeFrames& frames, std::uint32_t episode_id) {
  if (frames.actions.size() != frames.observations.size()) throw DataError("episode frames and actions differ in length");
  const auto lab = label_episode(frames, horizon);
  for (std::size_t t = 0; t < frames.observations.size(); ++t) {
    for (double v : frames.observations[t]) observations.push_back(static_cast<float>(v));
    actions.push_back(static_cast<std::int8_t>(frames.actions[t]));
    labels.push_back(lab[t]);
    episodes.push_back(episode_id);
  }
}

policy::Observation CollisionDataset::observation(std::size_t i) const {
  policy::Observation o{};
  const float* src = observations.data() + i * policy::kObservationSize;
  for (std::size_t j = 0; j < policy::kObservationSize; ++j) o[j] = src[j];
  return o;
}

nn::Sample CollisionDataset::sample(std::size_t i) const {
  nn::Sample s;
  s.input = nn::Tensor({kCollisionInputSize}, 0.0);
  const float* src = observations.data() + i * policy::kObservationSize;
  for (std::size_t j = 0; j < policy::kObservationSize; ++j) s.input[j] = src[j];
  s.input[policy::kObservationSize + static_cast<std::size_t>(actions[i])] = 1.0;
  s.target = labels[i] ? nn::Tensor({2}, std::vector<double>{1.0, 0.0}) : nn::Tensor({2}, std::vector<double>{0.0, 1.0});
  s.action = actions[i];
  return s;
}

void save_collision_dataset(const CollisionDataset& data, const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto idx = stem;
  idx += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw ArtifactError("cannot write dataset: " + bin.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.write(reinterpret_cast<const char*>(data.observations.data() + i * policy::kObservationSize),
              static_cast<std::streamsize>(policy::kObservationSize * sizeof(float)));
    out.write(reinterpret_cast<const char*>(&data.actions[i]), 1);
    out.write(reinterpret_cast<const char*>(&data.labels[i]), 1);
    out.write(reinterpret_cast<const char*>(&data.episodes[i]), sizeof(std::uint32_t));
  }
  nlohmann::json j;
  j["format"] = "hnav-collision-frames";
  j["version"] = 1;
  j["count"] = data.size();
  j["positive"] = data.positives();
  j["negative"] = data.size() - data.positives();
  j["horizon"] = data.horizon;
  j["generator"] = data.generator;
  j["seed"] = data.seed;
  j["record"] = {{"observation", {{"type", "f32"}, {"length", policy::kObservationSize}}},
                 {"action", "i8"},
                 {"label", "u8"},
                 {"episode", "u32"}};
  std::ofstream js(idx);
  js << j.dump(2) << '\n';
  if (!out || !js) throw ArtifactError("failed writing dataset " + stem.string());
}

CollisionDataset load_collision_dataset(const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto idx = stem;
  idx += ".json";
  std::ifstream js(idx);
  if (!js) throw ArtifactError("missing dataset index: " + idx.string());
  nlohmann::json j;
  js >> j;
  if (j.value("format", "") != "hnav-collision-frames") throw ArtifactError("not a collision dataset index");
  CollisionDataset d;
  d.horizon = j["horizon"].get<int>();
  d.generator = j["generator"].get<std::string>();
  d.seed = j["seed"].get<std::uint64_t>();
  const auto count = j["count"].get<std::size_t>();
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw ArtifactError("missing dataset payload: " + bin.string());
  d.observations.resize(count * policy::kObservationSize);
  d.actions.resize(count);
  d.labels.resize(count);
  d.episodes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(d.observations.data() + i * policy::kObservationSize),
            static_cast<std::streamsize>(policy::kObservationSize * sizeof(float)));
    in.read(reinterpret_cast<char*>(&d.actions[i]), 1);
    in.read(reinterpret_cast<char*>(&d.labels[i]), 1);
    in.read(reinterpret_cast<char*>(&d.episodes[i]), sizeof(std::uint32_t));
    if (!in) throw ArtifactError("dataset payload truncated at frame " + std::to_string(i));
  }
  return d;
}

ClassPool make_pool(const CollisionDataset& data, std::span<const std::size_t> indices) {
  ClassPool p;
  for (std::size_t i : indices) (data.labels.at(i) ? p.positive : p.negative).push_back(i);
  return p;
}

std::vector<std::size_t> sample_balanced_batch(const ClassPool& pool, std::size_t batch_size, std::uint64_t seed,
                                               double positive_fraction) {
  if (pool.positive.empty() || pool.negative.empty())
    throw DataError("balanced batch needs at least one frame of each class");
  const auto n_pos = static_cast<std::size_t>(std::lround(positive_fraction * static_cast<double>(batch_size)));
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  for (std::size_t k = 0; k < n_pos; ++k) out.push_back(pool.positive[rng.index(pool.positive.size())]);
  for (std::size_t k = n_pos; k < batch_size; ++k) out.push_back(pool.negative[rng.index(pool.negative.size())]);
  return out;
}

CollisionSplit split_by_episode(const CollisionDataset& data, double validation_fraction, std::uint64_t seed) {
  std::vector<std::uint32_t> ids(data.episodes.begin(), data.episodes.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(mix_seed(seed, 0x73706c6974ull));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);
  const auto n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(ids.size())));
  std::map<std::uint32_t, bool> is_val;
  for (std::size_t i = 0; i < ids.size(); ++i) is_val[ids[i]] = i < n_val;
  CollisionSplit s;
  for (std::size_t i = 0; i < data.size(); ++i) (is_val[data.episodes[i]] ? s.validation : s.train).push_back(i);
  return s;
}

CollisionReport summarize(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn, double ce_sum) {
  CollisionReport r;
  r.tp = tp;
  r.tn = tn;
  r.fp = fp;
  r.fn = fn;
  r.frames = tp + tn + fp + fn;
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  const double n = static_cast<double>(r.frames);
  r.accuracy = ratio(static_cast<double>(tp + tn), n);
  r.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  r.cross_entropy = ratio(ce_sum, n);
  r.tp_mass = ratio(static_cast<double>(tp), n);
  r.tn_mass = ratio(static_cast<double>(tn), n);
  r.fp_mass = ratio(static_cast<double>(fp), n);
  r.fn_mass = ratio(static_cast<double>(fn), n);
  r.tp_rate = r.recall;
  r.fn_rate = ratio(static_cast<double>(fn), static_cast<double>(tp + fn));
  r.tn_rate = ratio(static_cast<double>(tn), static_cast<double>(tn + fp));
  r.fp_rate = ratio(static_cast<double>(fp), static_cast<double>(tn + fp));
  return r;
}

CollisionReport validate_collision(const CollisionNet& net, const CollisionDataset& data, const ClassPool& pool,
                                   std::size_t batches, std::size_t batch_size, std::uint64_t seed) {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double ce = 0.0;
  const double eps = 1e-12;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto idx = sample_balanced_batch(pool, batch_size, mix_seed(seed, 0x76616cull, b), net.config().positive_fraction);
    nn::Matrix x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kCollisionInputSize));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const nn::Sample s = data.sample(idx[k]);
      std::copy(s.input.data.begin(), s.input.data.end(), x.row(static_cast<Eigen::Index>(k)).data());
    }
    const nn::Matrix z = net.logits(x);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double p = collision_probability(z(static_cast<Eigen::Index>(k), 0), z(static_cast<Eigen::Index>(k), 1));
      const bool truth = data.labels[idx[k]] != 0;
      const bool pred = p > net.config().threshold;
      ce -= truth ? std::log(std::max(p, eps)) : std::log(std::max(1.0 - p, eps));
      if (truth && pred) ++tp;
      else if (truth) ++fn;
      else if (pred) ++fp;
      else ++tn;
    }
  }
  CollisionReport r = summarize(tp, tn, fp, fn, ce);
  r.batches = batches;
  return r;
}

CollisionTrainResult train_collision(CollisionNet& net, const CollisionDataset& data, const CollisionSchedule& schedule,
                                     const std::function<void(const CollisionLogEntry&)>& on_log) {
  if (data.size() == 0) throw DataError("train_collision: empty dataset");
  if (schedule.batch_size == 0) throw ConfigError("batch size must be positive");
  const CollisionSplit split = split_by_episode(data, schedule.validation_fraction, schedule.seed);
  const ClassPool train_pool = make_pool(data, split.train);
  const ClassPool val_pool = make_pool(data, split.validation);
  if (val_pool.positive.empty() || val_pool.negative.empty())
    throw DataError("validation split needs frames of both classes");
  CollisionTrainResult result;
  result.train_frames = split.train.size();
  result.validation_frames = split.validation.size();
  const auto loss = nn::LossSpec::cross_entropy();
  double running = 0.0;
  std::size_t running_n = 0;
  for (std::size_t b = 0; b < schedule.batches; ++b) {
    const auto idx = sample_balanced_batch(train_pool, schedule.batch_size, mix_seed(schedule.seed, 0x747261696eull, b),
                                           net.config().positive_fraction);
    std::vector<nn::Sample> batch;
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(data.sample(i));
    running += nn::train_step(net, batch, loss, schedule.adam, std::nullopt, static_cast<std::int64_t>(b));
    ++running_n;
    const bool last = b + 1 == schedule.batches;
    if ((schedule.log_every && (b + 1) % schedule.log_every == 0) || last) {
      const auto rep = validate_collision(net, data, val_pool, std::max<std::size_t>(1, schedule.validation_batches / 10),
                                          schedule.batch_size, mix_seed(schedule.seed, 0x6c6f67ull));
      CollisionLogEntry e{b + 1, running / static_cast<double>(running_n), rep.accuracy, rep.cross_entropy};
      result.log.push_back(e);
      if (on_log) on_log(e);
      running = 0.0;
      running_n = 0;
    }
  }
  result.validation = validate_collision(net, data, val_pool, schedule.validation_batches, schedule.batch_size,
                                         mix_seed(schedule.seed, 0x66696e616cull));
  return result;
}

std::string report_json(const CollisionReport& r, int indent) {
  nlohmann::ordered_json j;
  j["batches"] = r.batches;
  j["frames"] = r.frames;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["cross_entropy"] = r.cross_entropy;
  j["counts"] = {{"tp", r.tp}, {"tn", r.tn}, {"fp", r.fp}, {"fn", r.fn}};
  j["batch_mass"] = {{"true_positive", r.tp_mass},
                     {"true_negative", r.tn_mass},
                     {"false_positive", r.fp_mass},
                     {"false_negative", r.fn_mass}};
  j["conditional_rate"] = {{"true_positive", r.tp_rate},
                           {"true_negative", r.tn_rate},
                           {"false_positive", r.fp_rate},
                           {"false_negative", r.fn_rate}};
  return j.dump(indent);
}

}  // namespace hnav::collision
