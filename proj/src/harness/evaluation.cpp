#include "hnav/harness/evaluation.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace hnav::harness {

using nlohmann::ordered_json;
using contingency::ControlSource;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool is_contingency(ControlSource s) { return s == ControlSource::Expert || s == ControlSource::AStar; }

}  // namespace

EvaluationReport summarize_records(ControllerKind kind, std::span<const EpisodeRecord> records, std::uint64_t base_seed,
                                   std::uint64_t hash) {
  if (records.empty()) throw ConfigError("evaluation needs at least one episode");
  EvaluationReport r;
  r.controller = kind;
  r.episodes = records.size();
  r.base_seed = base_seed;
  r.config_hash = hash;
  std::vector<double> lengths;
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& rec : records) {
    const std::string rh = hex64(record_hash(rec));
    h = fnv1a(rh, h);
    r.engagements += rec.engagements.size();
    if (!rec.engagements.empty()) ++r.engaged_episodes;
    switch (rec.outcome) {
      case sim::Outcome::Collision:
        ++r.collisions;
        if (is_contingency(rec.terminal_source())) ++r.contingency_collisions;
        break;
      case sim::Outcome::OutOfBounds:
        ++r.out_of_bounds;
        break;
      case sim::Outcome::Timeout:
        ++r.timeouts;
        break;
      case sim::Outcome::Completed:
        ++r.completions;
        lengths.push_back(rec.step_count);
        break;
      case sim::Outcome::Running:
        throw DataError("episode record without a terminal classification");
    }
  }
  r.episodes_hash = h;
  const double n = static_cast<double>(r.episodes);
  r.collision_rate = r.collisions / n;
  r.out_of_bounds_rate = r.out_of_bounds / n;
  r.timeout_rate = r.timeouts / n;
  r.completion_rate = r.completions / n;
  r.contingency_collision_share = r.contingency_collisions / n;
  r.rl_collision_share = (r.collisions - r.contingency_collisions) / n;
  if (r.engagements > 0)
    r.contingency_collision_per_engagement = static_cast<double>(r.contingency_collisions) / r.engagements;
  if (r.engaged_episodes > 0)
    r.contingency_collision_per_engaged_episode = static_cast<double>(r.contingency_collisions) / r.engaged_episodes;
  r.completed_count = lengths.size();
  if (!lengths.empty()) {
    double sum = 0.0;
    for (double l : lengths) sum += l;
    const double mean = sum / lengths.size();
    double ss = 0.0;
    for (double l : lengths) ss += (l - mean) * (l - mean);
    r.mean_completed_length = mean;
    if (lengths.size() > 1) r.completed_length_se = std::sqrt(ss / (lengths.size() - 1)) / std::sqrt(lengths.size());
  }
  return r;
}

EvaluationRun run_evaluation(ControllerKind kind, std::size_t episodes, std::uint64_t base_seed,
                             const HarnessConfig& config, const Controllers& nets,
                             const perception::DepthSensor& sensor, std::size_t workers) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  workers = std::clamp<std::size_t>(workers, 1, episodes);
  EvaluationRun run;
  run.records.resize(episodes);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= episodes) return;
      try {
        run.records[i] = run_episode(kind, base_seed + i, config, nets, sensor);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = episodes;
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  run.report = summarize_records(kind, run.records, base_seed, config_hash(config));
  return run;
}

namespace {

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json report_object(const EvaluationReport& r) {
  ordered_json j;
  j["controller"] = controller_name(r.controller);
  j["episodes"] = r.episodes;
  j["base_seed"] = r.base_seed;
  j["config_hash"] = hex64(r.config_hash);
  j["counts"] = {{"collision", r.collisions},
                 {"out_of_bounds", r.out_of_bounds},
                 {"timeout", r.timeouts},
                 {"completed", r.completions}};
  j["collision_rate"] = r.collision_rate;
  j["out_of_bounds_rate"] = r.out_of_bounds_rate;
  j["timeout_rate"] = r.timeout_rate;
  j["completion_rate"] = r.completion_rate;
  j["contingency_collisions"] = r.contingency_collisions;
  j["contingency_collision_share_per_episode"] = r.contingency_collision_share;
  j["rl_collision_share_per_episode"] = r.rl_collision_share;
  j["engagements"] = r.engagements;
  j["engaged_episodes"] = r.engaged_episodes;
  j["contingency_collision_rate_per_engagement"] = optional_json(r.contingency_collision_per_engagement);
  j["contingency_collision_rate_per_engaged_episode"] = optional_json(r.contingency_collision_per_engaged_episode);
  j["completed_episode_length"] = {
      {"count", r.completed_count}, {"mean", r.mean_completed_length}, {"standard_error", r.completed_length_se}};
  j["episodes_hash"] = hex64(r.episodes_hash);
  return j;
}

}  // namespace

std::string report_to_json(const EvaluationReport& r, int indent) { return report_object(r).dump(indent); }

std::string reports_to_json(std::span<const EvaluationReport> reports, int indent) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_object(r));
  return arr.dump(indent);
}

std::string results_table_csv(std::span<const EvaluationReport> reports) {
  if (reports.empty()) throw ConfigError("results table needs at least one report");
  std::ostringstream out;
  out << "metric";
  for (const auto& r : reports) out << ",\"" << controller_label(r.controller) << '"';
  out << '\n';
  auto pct = [](double v) { return fmt("%.1f%%", 100.0 * v); };
  auto row = [&](const char* name, auto&& cell) {
    out << name;
    for (const auto& r : reports) out << ',' << cell(r);
    out << '\n';
  };
  row("Collision Rate", [&](const EvaluationReport& r) { return pct(r.collision_rate); });
  // per engagement; the per-episode share is in report.json
  row("Contingency Policy Collision Rate", [&](const EvaluationReport& r) {
    return r.contingency_collision_per_engagement ? pct(*r.contingency_collision_per_engagement) : std::string("--");
  });
  row("Out-of-Bounds Rate", [&](const EvaluationReport& r) { return pct(r.out_of_bounds_rate); });
  row("Timeout Rate", [&](const EvaluationReport& r) { return pct(r.timeout_rate); });
  row("Completion Rate", [&](const EvaluationReport& r) { return pct(r.completion_rate); });
  row("Episode Length", [&](const EvaluationReport& r) {
    if (r.completed_count == 0) return std::string("--");
    return fmt("%.1f", r.mean_completed_length) + " +- " + fmt("%.1f", r.completed_length_se);
  });
  return out.str();
}

std::string episodes_csv(std::span<const EpisodeRecord> records) {
  std::ostringstream out;
  out << "controller,seed,outcome,steps,engagements,terminal_source,final_x,final_y,record_hash\n";
  for (const auto& r : records) {
    const auto& s = r.steps.back().state;
    out << controller_name(r.controller) << ',' << r.seed << ',' << sim::outcome_name(r.outcome) << ','
        << r.step_count << ',' << r.engagements.size() << ',' << contingency::control_source_name(r.terminal_source())
        << ',' << fmt("%.4f", s.position.x) << ',' << fmt("%.4f", s.position.y) << ',' << hex64(record_hash(r))
        << '\n';
  }
  return out.str();
}

namespace {

const char* source_color(ControlSource s) {
  switch (s) {
    case ControlSource::Rl:
      return "#1f77b4";
    case ControlSource::Expert:
      return "#ff7f0e";
    case ControlSource::AStar:
      return "#2ca02c";
    case ControlSource::StraightLine:
      return "#7f7f7f";
  }
  return "#000000";
}

const char* outcome_color(sim::Outcome o) {
  switch (o) {
    case sim::Outcome::Completed:
      return "#2ca02c";
    case sim::Outcome::Collision:
      return "#d62728";
    case sim::Outcome::OutOfBounds:
      return "#9467bd";
    case sim::Outcome::Timeout:
      return "#8c564b";
    default:
      return "#000000";
  }
}

}  // namespace

std::string trajectory_svg(std::span<const EpisodeRecord> records, const HarnessConfig& config,
                           std::size_t max_episodes) {
  const double scale = 10.0;  // px per meter
  const double hw = config.course.half_width;
  const double x0 = -2.0, x1 = config.course.length + 6.0;
  const double panel_h = 2.0 * hw * scale + 30.0;
  const std::size_t n = std::min(max_episodes, records.size());
  const double width = (x1 - x0) * scale;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
    << fmt("%.0f", panel_h * static_cast<double>(n) + 10.0) << "\" font-family=\"monospace\" font-size=\"11\">\n";
  for (std::size_t e = 0; e < n; ++e) {
    const auto& r = records[e];
    const double top = e * panel_h + 20.0;
    // world (x, y) -> pixel; +y (left of travel) is drawn up
    auto px = [&](double x) { return fmt("%.2f", (x - x0) * scale); };
    auto py = [&](double y) { return fmt("%.2f", top + (hw - y) * scale); };
    s << "<text x=\"4\" y=\"" << fmt("%.1f", top - 5.0) << "\">" << controller_name(r.controller) << " seed "
      << r.seed << ": " << sim::outcome_name(r.outcome) << " after " << r.step_count << " steps, "
      << r.engagements.size() << " engagements</text>\n";
    s << "<rect x=\"" << px(x0) << "\" y=\"" << py(hw) << "\" width=\"" << fmt("%.2f", width) << "\" height=\""
      << fmt("%.2f", 2.0 * hw * scale) << "\" fill=\"#f7f7f7\" stroke=\"#999\"/>\n";
    s << "<line x1=\"" << px(config.course.length) << "\" y1=\"" << py(hw) << "\" x2=\"" << px(config.course.length)
      << "\" y2=\"" << py(-hw) << "\" stroke=\"#2ca02c\" stroke-dasharray=\"4 3\"/>\n";
    sim::CourseConfig course = config.course;
    course.seed = r.seed;
    for (const auto& box : sim::generate_course(course)) {
      s << "<polygon fill=\"#555\" points=\"";
      for (const Vec2& c : box.corners()) s << px(c.x) << ',' << py(c.y) << ' ';
      s << "\"/>\n";
    }
    // one polyline per run of consecutive steps from the same source
    Vec2 prev{0.0, 0.0};
    std::size_t i = 0;
    while (i < r.steps.size()) {
      const ControlSource src = r.steps[i].source;
      s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << source_color(src) << "\" points=\""
        << px(prev.x) << ',' << py(prev.y);
      while (i < r.steps.size() && r.steps[i].source == src) {
        prev = r.steps[i].state.position;
        s << ' ' << px(prev.x) << ',' << py(prev.y);
        ++i;
      }
      s << "\"/>\n";
    }
    for (const auto& ev : r.engagements) {
      const Vec2 p = ev.step_index == 0 ? Vec2{} : r.steps[ev.step_index - 1].state.position;
      s << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y) << "\" r=\"3\" fill=\"none\" stroke=\"#d62728\"/>\n";
    }
    if (!r.steps.empty()) {
      const Vec2 p = r.steps.back().state.position;
      s << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y) << "\" r=\"4\" fill=\"" << outcome_color(r.outcome)
        << "\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string outcome_svg(std::span<const EvaluationReport> reports) {
  const double bar_w = 90.0, gap = 40.0, h = 300.0, left = 60.0, top = 30.0;
  const double width = left + reports.size() * (bar_w + gap) + 150.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
    << fmt("%.0f", h + 80.0) << "\" font-family=\"monospace\" font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + h - h * t / 4.0;
    s << "<text x=\"10\" y=\"" << fmt("%.1f", y + 4.0) << "\">" << t * 25 << "%</text>\n";
    s << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt("%.1f", y) << "\" x2=\"" << fmt("%.1f", width - 150.0)
      << "\" y2=\"" << fmt("%.1f", y) << "\" stroke=\"#ddd\"/>\n";
  }
  const std::pair<sim::Outcome, const char*> parts[] = {{sim::Outcome::Completed, "completed"},
                                                        {sim::Outcome::Collision, "collision"},
                                                        {sim::Outcome::OutOfBounds, "out-of-bounds"},
                                                        {sim::Outcome::Timeout, "timeout"}};
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    const double x = left + k * (bar_w + gap);
    const double rates[] = {r.completion_rate, r.collision_rate, r.out_of_bounds_rate, r.timeout_rate};
    double base = top + h;
    for (int p = 0; p < 4; ++p) {
      const double bh = rates[p] * h;
      base -= bh;
      s << "<rect x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.2f", base) << "\" width=\"" << bar_w
        << "\" height=\"" << fmt("%.2f", bh) << "\" fill=\"" << outcome_color(parts[p].first) << "\"/>\n";
    }
    s << "<text x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", top + h + 18.0) << "\">"
      << controller_label(r.controller) << "</text>\n";
  }
  for (int p = 0; p < 4; ++p) {
    const double y = top + 20.0 * p;
    const double x = width - 140.0;
    s << "<rect x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", y) << "\" width=\"12\" height=\"12\" fill=\""
      << outcome_color(parts[p].first) << "\"/><text x=\"" << fmt("%.1f", x + 18.0) << "\" y=\""
      << fmt("%.1f", y + 10.0) << "\">" << parts[p].second << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + p.string());
  out << text;
  if (!out) throw ArtifactError("failed writing " + p.string());
}

}  // namespace

std::vector<std::filesystem::path> aggregate_and_emit(std::span<const EvaluationRun> runs, const HarnessConfig& config,
                                                      const std::filesystem::path& dir) {
  if (runs.empty()) throw ConfigError("nothing to emit: no evaluation runs");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ArtifactError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<EvaluationReport> reports;
  for (const auto& r : runs) reports.push_back(r.report);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    written.push_back(dir / name);
  };
  emit("results_table.csv", results_table_csv(reports));
  emit("report.json", reports_to_json(reports) + "\n");
  emit("outcomes.svg", outcome_svg(reports));
  for (const auto& run : runs) {
    const std::string name(controller_name(run.report.controller));
    emit("episodes_" + name + ".csv", episodes_csv(run.records));
    emit("trajectories_" + name + ".svg", trajectory_svg(run.records, config));
  }
  return written;
}

}  // namespace hnav::harness
