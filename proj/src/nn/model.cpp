#include "hnav/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hnav/common.hpp"
#include "hnav/rng.hpp"

namespace hnav::nn {

double huber(double error, double delta) {
  const double a = std::abs(error);
  return a <= delta ? 0.5 * error * error : delta * a - 0.5 * delta * delta;
}

double huber_grad(double error, double delta) {
  if (std::abs(error) <= delta) return error;
  return error > 0.0 ? delta : -delta;
}

double output_loss(const LossSpec& loss, std::span<const double> output, const Sample& sample,
                   std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  switch (loss.kind) {
    case LossKind::Huber: {
      if (sample.target.size() != output.size())
        throw ConfigError("huber target length does not match network output");
      const double n = static_cast<double>(output.size());
      double total = 0.0;
      for (std::size_t j = 0; j < output.size(); ++j) {
        const double e = output[j] - sample.target[j];
        total += huber(e, loss.delta);
        grad[j] = huber_grad(e, loss.delta) / n;
      }
      return total / n;
    }
    case LossKind::CrossEntropy: {
      if (sample.target.size() != output.size())
        throw ConfigError("cross-entropy target must be a distribution over the logits");
      const double mx = *std::max_element(output.begin(), output.end());
      double z = 0.0;
      for (double o : output) z += std::exp(o - mx);
      const double log_z = mx + std::log(z);
      double total = 0.0;
      for (std::size_t j = 0; j < output.size(); ++j) {
        const double log_p = output[j] - log_z;
        total -= sample.target[j] * log_p;
        grad[j] = std::exp(log_p) - sample.target[j];
      }
      return total;
    }
    case LossKind::SquaredTd: {
      if (sample.action < 0 || static_cast<std::size_t>(sample.action) >= output.size())
        throw ConfigError("td sample action index out of range");
      const double e = output[static_cast<std::size_t>(sample.action)] - sample.target[0];
      grad[static_cast<std::size_t>(sample.action)] = 2.0 * e;
      return e * e;
    }
  }
  return 0.0;
}

void adam_update(NetworkParams& params, const AdamConfig& adam) {
  params.adam_step += 1;
  const double t = static_cast<double>(params.adam_step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  double scale = 1.0;
  if (adam.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Param* p : std::as_const(params).all_params())
      for (double g : p->grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > adam.clip_norm) scale = adam.clip_norm / norm;
  }
  for (Param* p : params.all_params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i] * scale;
      p->m[i] = adam.beta1 * p->m[i] + (1.0 - adam.beta1) * g;
      p->v[i] = adam.beta2 * p->v[i] + (1.0 - adam.beta2) * g * g;
      if (adam.learning_rate != 0.0) {
        const double m_hat = p->m[i] / c1;
        const double v_hat = p->v[i] / c2;
        p->value.data[i] -= adam.learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
      }
    }
  }
}

double train_step(Model& model, std::span<const Sample> batch, const LossSpec& loss,
                  const AdamConfig& adam, std::optional<std::uint64_t> noise_seed,
                  std::int64_t batch_index) {
  if (batch.empty()) throw ConfigError("train_step requires a non-empty batch");
  NetworkParams& params = model.params();
  params.zero_grad();
  const std::vector<double> losses = model.accumulate_gradients(batch, loss, noise_seed);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) {
      params.zero_grad();
      throw TrainingError("non-finite loss in batch " + std::to_string(batch_index) + " (sample " +
                              std::to_string(i) + ")",
                          batch_index, static_cast<std::int64_t>(i));
    }
  }
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) /
                      static_cast<double>(losses.size());
  adam_update(params, adam);
  return mean;
}

double mean_loss(const Model& model, std::span<const Sample> batch, const LossSpec& loss,
                 std::optional<std::uint64_t> noise_seed) {
  if (batch.empty()) return 0.0;
  const auto l = model.losses(batch, loss, noise_seed);
  return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
}

double gradient_check(Model& model, const Sample& sample, const LossSpec& loss,
                      const GradientCheckOptions& options) {
  NetworkParams& params = model.params();
  params.zero_grad();
  std::span<const Sample> one(&sample, 1);
  model.accumulate_gradients(one, loss, options.noise_seed);

  struct Coord {
    Param* param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (Param* p : params.all_params())
    for (std::size_t i = 0; i < p->value.size(); ++i) coords.push_back({p, i});
  if (options.max_coordinates > 0 && coords.size() > options.max_coordinates) {
    // Partial Fisher-Yates: seeded subset, deterministic.
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_coordinates; ++i) {
      const std::size_t j = i + rng.index(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(options.max_coordinates);
  }

  double worst = 0.0;
  for (const Coord& c : coords) {
    double& theta = c.param->value.data[c.index];
    const double saved = theta;
    const double analytic = c.param->grad[c.index];
    double best = std::numeric_limits<double>::infinity();
    // A difference quotient that straddles an activation kink mixes two
    // slopes; shrink the step before calling it a mismatch. A wrong
    // backward pass disagrees at every step size.
    double h = options.step;
    for (int attempt = 0; attempt <= options.refinements && best > options.refine_above; ++attempt, h *= 0.1) {
      theta = saved + h;
      const double plus = model.losses(one, loss, options.noise_seed)[0];
      theta = saved - h;
      const double minus = model.losses(one, loss, options.noise_seed)[0];
      theta = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      best = std::min(best, std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
    }
    worst = std::max(worst, best);
  }
  params.zero_grad();
  return worst;
}

}  // namespace hnav::nn
