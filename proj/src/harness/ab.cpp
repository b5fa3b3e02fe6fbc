#include "grf/harness/ab.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace grf::harness {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

ArmMetrics summarize_arm(const std::vector<engine::SessionReport>& sessions, const AbConfig& cfg) {
  ArmMetrics m;
  if (sessions.empty()) return m;
  double wt = 0.0, wtp = 0.0, rep = 0.0, retention = 0.0;
  std::size_t choppy = 0;
  std::uint64_t h = sessions.size();
  for (const auto& s : sessions) {
    wt += s.watch_time_s;
    wtp += s.watch_time_poor_s;
    rep += s.replacements;
    choppy += std::size_t(s.choppy_count);
    m.impressions += s.impressions.size();
    retention += sim::sigmoid(cfg.retention_a - cfg.retention_b * s.choppy_rate());
    h = sim::mix64(h ^ s.trace_checksum);
  }
  const double n = double(sessions.size());
  m.values[kWatchTime] = wt / n;
  m.values[kWatchTimePoor] = wtp / n;
  m.values[kChoppyRate] = m.impressions ? double(choppy) / double(m.impressions) : 0.0;
  m.values[kReplacements] = rep / n;
  m.values[kRetentionProxy] = retention / n;
  m.trace_checksum = h;
  return m;
}

SeedResult run_ab_seed(const ExperimentConfig& cfg, const engine::Models& models, std::uint64_t seed,
                       std::vector<engine::SessionReport>* base_sessions) {
  SeedResult r;
  r.seed = seed;
  r.catalog_checksum = sim::gen_catalog(cfg.sim, seed).checksum();
  for (int a = 0; a < kArmCount; ++a) {
    auto sessions = simulate_arm(cfg, models, engine::kArms[a], cfg.ab.n_users, seed);
    r.arms[std::size_t(a)] = summarize_arm(sessions, cfg.ab);
    if (a == 0 && base_sessions) base_sessions->insert(base_sessions->end(), sessions.begin(), sessions.end());
  }
  for (const auto& arm : r.arms)
    if (arm.trace_checksum != r.arms[0].trace_checksum)
      throw std::logic_error("A/B arms saw different network traces for seed " + std::to_string(seed));
  return r;
}

AbReport run_ab(const ExperimentConfig& cfg, const engine::Models& models, int n_seeds) {
  if (n_seeds < 2) throw ConfigError("ab: need at least two seeds for a paired test");
  if (!models.gate || !models.rank) throw ConfigError("ab: both a gate and a rank model are required");
  AbReport report;
  report.users_per_seed = cfg.ab.n_users;
  report.retention_a = cfg.ab.retention_a;
  report.retention_b = cfg.ab.retention_b;
  std::vector<engine::SessionReport> base_sessions;
  for (int i = 0; i < n_seeds; ++i)
    report.seeds.push_back(run_ab_seed(cfg, models, cfg.ab.first_seed + std::uint64_t(i), &base_sessions));

  for (int m = 0; m < kMetricCount; ++m) {
    std::array<std::vector<double>, kArmCount> per_arm;
    for (const auto& s : report.seeds)
      for (int a = 0; a < kArmCount; ++a) per_arm[std::size_t(a)].push_back(s.arms[std::size_t(a)].values[std::size_t(m)]);
    for (int a = 0; a < kArmCount; ++a) {
      auto& summary = report.arms[std::size_t(a)];
      summary.mean[std::size_t(m)] = mean(per_arm[std::size_t(a)]);
      summary.vs_base[std::size_t(m)] = paired_t_test(per_arm[std::size_t(a)], per_arm[0]);
      const double base_mean = mean(per_arm[0]);
      summary.relative_delta[std::size_t(m)] =
          base_mean != 0.0 ? summary.vs_base[std::size_t(m)].mean_diff / base_mean : 0.0;
    }
  }
  report.base_curve = watch_time_curve(base_sessions, cfg.ab.curve_bucket_width, 1.0);
  return report;
}

std::string AbReport::to_text() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "A/B report: %zu paired seeds, %d users per seed\n", seeds.size(), users_per_seed);
  out += line;
  std::snprintf(line, sizeof line,
                "retention_proxy is a proxy, not measured retention: mean over users of "
                "sigmoid(%g - %g * session choppy rate)\n\n",
                retention_a, retention_b);
  out += line;
  std::snprintf(line, sizeof line, "%-16s %-5s %14s %14s %10s %10s %12s\n", "metric", "arm", "mean", "delta",
                "rel_delta", "t", "p");
  out += line;
  for (int m = 0; m < kMetricCount; ++m) {
    for (int a = 0; a < kArmCount; ++a) {
      const auto& s = arms[std::size_t(a)];
      const auto& t = s.vs_base[std::size_t(m)];
      std::snprintf(line, sizeof line, "%-16s %-5s %14.6f %+14.6f %+9.2f%% %10.4f %12.4g\n", kMetricNames[m],
                    engine::to_string(engine::kArms[a]), s.mean[std::size_t(m)], t.mean_diff,
                    100.0 * s.relative_delta[std::size_t(m)], t.t, t.p_value);
      out += line;
    }
  }
  return out;
}

std::string AbReport::to_records() const {
  using nlohmann::json;
  std::string out;
  out += json{{"format", "grf-ab-report"}, {"version", 1}, {"seeds", seeds.size()}, {"users_per_seed", users_per_seed}}
             .dump() +
         "\n";
  for (int a = 0; a < kArmCount; ++a) {
    for (int m = 0; m < kMetricCount; ++m) {
      const auto& s = arms[std::size_t(a)];
      const auto& t = s.vs_base[std::size_t(m)];
      json j = {{"type", "summary"},
                {"arm", engine::to_string(engine::kArms[a])},
                {"metric", kMetricNames[m]},
                {"mean", s.mean[std::size_t(m)]},
                {"delta", t.mean_diff},
                {"relative_delta", s.relative_delta[std::size_t(m)]},
                {"t", std::isfinite(t.t) ? json(t.t) : json(nullptr)},
                {"p", t.p_value}};
      out += j.dump() + "\n";
    }
  }
  for (const auto& s : seeds) {
    for (int a = 0; a < kArmCount; ++a) {
      const auto& arm = s.arms[std::size_t(a)];
      json values = json::object();
      for (int m = 0; m < kMetricCount; ++m) values[kMetricNames[m]] = arm.values[std::size_t(m)];
      json j = {{"type", "seed"},
                {"seed", s.seed},
                {"arm", engine::to_string(engine::kArms[a])},
                {"impressions", arm.impressions},
                {"trace_checksum", arm.trace_checksum},
                {"catalog_checksum", s.catalog_checksum},
                {"values", values}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

void write_ab_outputs(const AbReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "curves");
  write_file(root / "report.txt", report.to_text());
  write_file(root / "report.records", report.to_records());

  std::string wtp = "seed,base,gate,full\n";
  char line[160];
  for (const auto& s : report.seeds) {
    std::snprintf(line, sizeof line, "%llu,%.6f,%.6f,%.6f\n", static_cast<unsigned long long>(s.seed),
                  s.arms[0].values[kWatchTimePoor], s.arms[1].values[kWatchTimePoor], s.arms[2].values[kWatchTimePoor]);
    wtp += line;
  }
  write_file(root / "curves" / "wtp_by_seed.csv", wtp);

  std::string curve = "choppy_rate,mean_watch_time_s,sessions\n";
  for (const auto& b : report.base_curve) {
    std::snprintf(line, sizeof line, "%.4f,%.6f,%zu\n", b.choppy_rate, b.mean_watch_time_s, b.sessions);
    curve += line;
  }
  write_file(root / "curves" / "watch_time_vs_choppy_rate.csv", curve);
}

}  // namespace grf::harness
