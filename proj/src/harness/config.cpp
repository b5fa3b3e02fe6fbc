#include "grf/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace grf::harness {

namespace {

using boost::property_tree::ptree;

std::string format_value(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(long v) { return std::to_string(v); }
std::string format_value(unsigned long v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) throw ConfigError(where + ": cannot parse '" + text + "'");
  return v;
}

void parse_value(const std::string& t, double& out, const std::string& w) { out = parse_number<double>(t, w); }
void parse_value(const std::string& t, int& out, const std::string& w) { out = parse_number<int>(t, w); }
void parse_value(const std::string& t, long& out, const std::string& w) { out = parse_number<long>(t, w); }
void parse_value(const std::string& t, unsigned long& out, const std::string& w) {
  out = parse_number<unsigned long>(t, w);
}
void parse_value(const std::string& t, bool& out, const std::string& w) {
  if (t == "true" || t == "1") {
    out = true;
  } else if (t == "false" || t == "0") {
    out = false;
  } else {
    throw ConfigError(w + ": expected true or false, got '" + t + "'");
  }
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T, typename Ref>
Binding field(const std::string& section, const std::string& key, Ref ref) {
  const std::string where = section + "." + key;
  return {section, key, [ref](ExperimentConfig& c) { return format_value(static_cast<const T&>(ref(c))); },
          [ref, where](ExperimentConfig& c, const std::string& text) { parse_value(text, ref(c), where); }};
}

sim::Regime regime_from_string(const std::string& s) {
  for (int r = 0; r < sim::kRegimeCount; ++r)
    if (s == sim::to_string(sim::Regime(r))) return sim::Regime(r);
  throw ConfigError("sim.trace_start: unknown regime '" + s + "'");
}

#define GRF_FIELD(T, SEC, KEY, EXPR) field<T>(SEC, KEY, [](ExperimentConfig& c) -> T& { return EXPR; })

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    // [sim]
    b.push_back(GRF_FIELD(int, "sim", "catalog_size", c.sim.catalog_size));
    b.push_back(GRF_FIELD(int, "sim", "n_users", c.sim.n_users));
    b.push_back(GRF_FIELD(unsigned long, "sim", "seed", c.sim.seed));
    b.push_back(GRF_FIELD(double, "sim", "high_bitrate_share", c.sim.high_bitrate_share));
    b.push_back(GRF_FIELD(double, "sim", "size_tier_small_bytes", c.sim.size_tier_small_bytes));
    b.push_back(GRF_FIELD(double, "sim", "size_tier_large_bytes", c.sim.size_tier_large_bytes));
    static const char* regimes[] = {"good", "weak", "offline"};
    for (int r = 0; r < sim::kRegimeCount; ++r) {
      const std::string base = std::string("trace_") + regimes[r];
      b.push_back(field<double>("sim", base + "_mean_kbps", [r](ExperimentConfig& c) -> double& {
        return c.sim.trace.regimes[std::size_t(r)].mean_kbps;
      }));
      b.push_back(field<double>("sim", base + "_volatility_kbps",
                                [r](ExperimentConfig& c) -> double& {
                                  return c.sim.trace.regimes[std::size_t(r)].volatility_kbps;
                                }));
      for (int to = 0; to < sim::kRegimeCount; ++to) {
        const std::string key = "trace_p_" + std::string(regimes[r]) + "_to_" + regimes[to];
        b.push_back(field<double>("sim", key, [r, to](ExperimentConfig& c) -> double& {
          return c.sim.trace.transition[std::size_t(r)][std::size_t(to)];
        }));
      }
    }
    b.push_back({"sim", "trace_start", [](ExperimentConfig& c) { return std::string(sim::to_string(c.sim.trace.start)); },
                 [](ExperimentConfig& c, const std::string& t) { c.sim.trace.start = regime_from_string(t); }});
    for (int k = 0; k < 5; ++k) {
      const std::string key = "beta" + std::to_string(k);
      b.push_back(field<double>("sim", key,
                                [k](ExperimentConfig& c) -> double& { return c.sim.playback.beta[std::size_t(k)]; }));
    }
    b.push_back(GRF_FIELD(double, "sim", "playback_noise_sigma", c.sim.playback.noise_sigma));
    b.push_back(GRF_FIELD(double, "sim", "speed_epsilon_kbps", c.sim.playback.speed_epsilon_kbps));
    b.push_back(GRF_FIELD(double, "sim", "hard_floor_kbps", c.sim.playback.hard_floor_kbps));
    b.push_back(GRF_FIELD(double, "sim", "min_start_ratio", c.sim.playback.min_start_ratio));
    b.push_back(GRF_FIELD(double, "sim", "first_screen_s", c.sim.playback.first_screen_s));
    b.push_back(GRF_FIELD(int, "sim", "latent_dim", c.sim.engagement.latent_dim));
    b.push_back(GRF_FIELD(double, "sim", "affinity_scale", c.sim.engagement.affinity_scale));
    b.push_back(GRF_FIELD(double, "sim", "quality_weight", c.sim.engagement.quality_weight));
    b.push_back(GRF_FIELD(double, "sim", "user_bias_sd", c.sim.engagement.user_bias_sd));
    b.push_back(GRF_FIELD(double, "sim", "affinity_offset", c.sim.engagement.affinity_offset));
    b.push_back(GRF_FIELD(double, "sim", "watch_noise_sd", c.sim.engagement.watch_noise_sd));
    b.push_back(GRF_FIELD(double, "sim", "choppy_penalty", c.sim.engagement.choppy_penalty));
    b.push_back(GRF_FIELD(double, "sim", "t_effective_s", c.sim.engagement.t_effective_s));
    b.push_back(GRF_FIELD(double, "sim", "t_long_s", c.sim.engagement.t_long_s));
    b.push_back(GRF_FIELD(double, "sim", "t_short_s", c.sim.engagement.t_short_s));
    b.push_back(GRF_FIELD(double, "sim", "t_finish", c.sim.engagement.t_finish));
    b.push_back(GRF_FIELD(double, "sim", "server_rank_noise_sd", c.sim.server.rank_noise_sd));
    b.push_back(GRF_FIELD(double, "sim", "server_pxtr_noise_sd", c.sim.server.pxtr_noise_sd));
    b.push_back(GRF_FIELD(double, "sim", "device_score_lo", c.sim.device.score_lo));
    b.push_back(GRF_FIELD(double, "sim", "device_score_hi", c.sim.device.score_hi));
    b.push_back(GRF_FIELD(double, "sim", "device_load_lo", c.sim.device.load_lo));
    b.push_back(GRF_FIELD(double, "sim", "device_load_hi", c.sim.device.load_hi));
    b.push_back(GRF_FIELD(double, "sim", "device_load_jitter_sd", c.sim.device.load_jitter_sd));
    b.push_back(GRF_FIELD(int, "sim", "session_length", c.sim.session.length));
    b.push_back(GRF_FIELD(double, "sim", "step_seconds", c.sim.session.step_seconds));
    b.push_back(GRF_FIELD(double, "sim", "prefetch_window_s", c.sim.session.prefetch_window_s));
    b.push_back(GRF_FIELD(double, "sim", "abandon_after_choppy", c.sim.session.abandon_after_choppy));
    b.push_back(GRF_FIELD(int, "sim", "page_size", c.sim.session.page_size));
    b.push_back(GRF_FIELD(long, "sim", "history_lo", c.sim.session.history_lo));
    b.push_back(GRF_FIELD(long, "sim", "history_hi", c.sim.session.history_hi));
    b.push_back(GRF_FIELD(int, "sim", "data_users", c.data.users));
    b.push_back(GRF_FIELD(unsigned long, "sim", "data_seed", c.data.seed));
    b.push_back(GRF_FIELD(double, "sim", "data_split_train", c.data.split_train));
    b.push_back(GRF_FIELD(double, "sim", "data_split_valid", c.data.split_valid));
    b.push_back(GRF_FIELD(double, "sim", "data_split_test", c.data.split_test));

    // [features]
    b.push_back(GRF_FIELD(int, "features", "n_bins", c.features.n_bins));
    b.push_back(GRF_FIELD(int, "features", "embed_dim", c.features.embed_dim));
    b.push_back(GRF_FIELD(int, "features", "soft_meta", c.features.soft_meta));
    b.push_back(GRF_FIELD(double, "features", "soft_temperature", c.features.soft_temperature));
    b.push_back(GRF_FIELD(int, "features", "watched_len", c.features.watched_len));
    b.push_back(GRF_FIELD(int, "features", "dynamic_len", c.features.dynamic_len));
    b.push_back(GRF_FIELD(int, "features", "choppy_len", c.features.choppy_len));
    b.push_back(GRF_FIELD(int, "features", "upcoming_len", c.features.upcoming_len));
    auto bounds = [&b](const char* name, features::FieldBounds features::FeatureSchema::*m) {
      const std::string n(name);
      b.push_back(field<double>("features", n + "_lo",
                                [m](ExperimentConfig& c) -> double& { return (c.features.*m).lo; }));
      b.push_back(field<double>("features", n + "_hi",
                                [m](ExperimentConfig& c) -> double& { return (c.features.*m).hi; }));
      b.push_back(field<bool>("features", n + "_log",
                              [m](ExperimentConfig& c) -> bool& { return (c.features.*m).log_scale; }));
    };
    using FS = features::FeatureSchema;
    bounds("duration", &FS::duration);
    bounds("bitrate", &FS::bitrate);
    bounds("net_speed", &FS::net_speed);
    bounds("device_score", &FS::device_score);
    bounds("cpu_load", &FS::cpu_load);
    bounds("cached_ratio", &FS::cached_ratio);
    bounds("cached_duration", &FS::cached_duration);
    bounds("pxtr", &FS::pxtr);
    bounds("watch_ratio", &FS::watch_ratio);
    auto tiers = [&b](const char* name, features::TierThresholds features::FeatureSchema::*m) {
      const std::string n(name);
      b.push_back(field<double>("features", n + "_tier_low",
                                [m](ExperimentConfig& c) -> double& { return (c.features.*m).low; }));
      b.push_back(field<double>("features", n + "_tier_high",
                                [m](ExperimentConfig& c) -> double& { return (c.features.*m).high; }));
    };
    tiers("size", &FS::size_tiers);
    tiers("bitrate", &FS::bitrate_tiers);
    tiers("duration", &FS::duration_tiers);

    // [gate]
    b.push_back(GRF_FIELD(int, "gate", "n_mask_blocks", c.gate.n_mask_blocks));
    b.push_back(GRF_FIELD(int, "gate", "mask_hidden", c.gate.mask_hidden));
    b.push_back(GRF_FIELD(int, "gate", "mask_gen_hidden", c.gate.mask_gen_hidden));
    b.push_back(GRF_FIELD(int, "gate", "attn_dim", c.gate.attn_dim));
    b.push_back(GRF_FIELD(int, "gate", "attn_heads", c.gate.attn_heads));
    b.push_back(GRF_FIELD(double, "gate", "lr_initial", c.gate.lr.initial));
    b.push_back(GRF_FIELD(long, "gate", "lr_hold_steps", c.gate.lr.hold_steps));
    b.push_back(GRF_FIELD(double, "gate", "lr_decay_rate", c.gate.lr.decay_rate));
    b.push_back(GRF_FIELD(long, "gate", "lr_decay_interval", c.gate.lr.decay_interval));
    b.push_back(GRF_FIELD(double, "gate", "class_weight_pos", c.gate.class_weight_pos));
    b.push_back(GRF_FIELD(double, "gate", "class_weight_neg", c.gate.class_weight_neg));
    b.push_back(GRF_FIELD(int, "gate", "batch_size", c.gate.batch_size));
    b.push_back(GRF_FIELD(int, "gate", "epochs", c.gate.epochs));
    b.push_back(GRF_FIELD(long, "gate", "max_steps", c.gate.max_steps));
    b.push_back(GRF_FIELD(double, "gate", "threshold", c.gate.threshold));

    // [rank]
    b.push_back(GRF_FIELD(int, "rank", "n_heads", c.rank.n_heads));
    b.push_back(GRF_FIELD(int, "rank", "d_head", c.rank.d_head));
    b.push_back(GRF_FIELD(int, "rank", "attn_out", c.rank.attn_out));
    b.push_back(GRF_FIELD(int, "rank", "n_experts", c.rank.n_experts));
    b.push_back(GRF_FIELD(int, "rank", "expert_hidden", c.rank.expert_hidden));
    b.push_back(GRF_FIELD(int, "rank", "tower_hidden", c.rank.tower_hidden));
    b.push_back(GRF_FIELD(double, "rank", "lr", c.rank.lr));
    b.push_back(GRF_FIELD(int, "rank", "batch_size", c.rank.batch_size));
    for (int t = 0; t < kTaskCount; ++t) {
      const std::string key = std::string("weight_") + kTaskNames[t];
      b.push_back(field<double>("rank", key,
                                [t](ExperimentConfig& c) -> double& { return c.rank.score_weights[std::size_t(t)]; }));
    }
    b.push_back(GRF_FIELD(long, "rank", "checkpoint_interval_steps", c.rank.checkpoint_interval_steps));

    // [engine]
    b.push_back(GRF_FIELD(double, "engine", "threshold", c.engine.threshold));
    b.push_back({"engine", "arm", [](ExperimentConfig& c) { return std::string(engine::to_string(c.engine.arm)); },
                 [](ExperimentConfig& c, const std::string& t) {
                   try {
                     c.engine.arm = engine::arm_from_string(t);
                   } catch (const std::exception& e) {
                     throw ConfigError(std::string("engine.arm: ") + e.what());
                   }
                 }});
    b.push_back(GRF_FIELD(bool, "engine", "reshow_replaced", c.engine.reshow_replaced));
    b.push_back(GRF_FIELD(double, "engine", "min_playable_cached_s", c.engine.min_playable_cached_s));
    for (int t = 0; t < kTaskCount; ++t) {
      const std::string key = std::string("weight_") + kTaskNames[t];
      b.push_back(field<double>("engine", key,
                                [t](ExperimentConfig& c) -> double& { return c.engine.score_weights[std::size_t(t)]; }));
    }

    // [ab]
    b.push_back(GRF_FIELD(int, "ab", "n_users", c.ab.n_users));
    b.push_back(GRF_FIELD(int, "ab", "n_seeds", c.ab.n_seeds));
    b.push_back(GRF_FIELD(unsigned long, "ab", "first_seed", c.ab.first_seed));
    b.push_back(GRF_FIELD(double, "ab", "retention_a", c.ab.retention_a));
    b.push_back(GRF_FIELD(double, "ab", "retention_b", c.ab.retention_b));
    b.push_back(GRF_FIELD(int, "ab", "curve_sessions", c.ab.curve_sessions));
    b.push_back(GRF_FIELD(double, "ab", "curve_bucket_width", c.ab.curve_bucket_width));
    b.push_back(GRF_FIELD(double, "ab", "curve_max_rate", c.ab.curve_max_rate));
    b.push_back(GRF_FIELD(double, "ab", "curve_min_drop_at_10", c.ab.curve_min_drop_at_10));
    return b;
  }();
  return table;
}

#undef GRF_FIELD

const char* kSectionOrder[] = {"sim", "features", "gate", "rank", "engine", "ab"};

template <typename Fn>
void rethrow_as_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void AbConfig::validate() const {
  if (n_users < 1) throw ConfigError("ab: n_users must be positive");
  if (n_seeds < 2) throw ConfigError("ab: n_seeds must be at least 2 for a paired test");
  if (curve_sessions < 1) throw ConfigError("ab: curve_sessions must be positive");
  if (!(curve_bucket_width > 0.0 && curve_bucket_width < 1.0)) throw ConfigError("ab: curve_bucket_width in (0,1)");
  if (!(curve_max_rate > 0.0 && curve_max_rate <= 1.0)) throw ConfigError("ab: curve_max_rate in (0,1]");
  if (retention_b < 0.0) throw ConfigError("ab: retention_b must be non-negative");
}

void ExperimentConfig::validate() const {
  rethrow_as_config_error([&] { sim.validate(); });
  rethrow_as_config_error([&] { features.validate(); });
  rethrow_as_config_error([&] { gate.validate(); });
  rethrow_as_config_error([&] { rank.validate(); });
  rethrow_as_config_error([&] { engine.validate(); });
  ab.validate();
  if (data.users < 1) throw ConfigError("sim: data_users must be positive");
  const auto r = data.split();
  if (!(r[0] > 0.0 && r[1] > 0.0 && r[2] > 0.0) || std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9)
    throw ConfigError("sim: data split shares must be positive and sum to 1");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  // Desk-scale training: far fewer samples than production, so larger steps
  // and smaller batches.
  c.gate.batch_size = 256;
  c.gate.lr.initial = 1e-3;
  c.gate.lr.hold_steps = 300;
  c.gate.lr.decay_interval = 100;
  c.gate.lr.decay_rate = 0.9;
  c.rank.lr = 1e-3;
  c.rank.batch_size = 128;
  return c;
}

ExperimentConfig parse_config(const std::string& ini_text, const ExperimentConfig& base) {
  ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " at line " + std::to_string(e.line()));
  }
  ExperimentConfig cfg = base;
  for (const auto& [section, body] : tree) {
    if (std::find(std::begin(kSectionOrder), std::end(kSectionOrder), section) == std::end(kSectionOrder) &&
        section != "state") {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    if (section == "state") continue;  // checkpoint counters, read by the checkpoint loader
    for (const auto& [key, value] : body) {
      const auto& table = bindings();
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Binding& b) { return b.section == section && b.key == key; });
      if (it == table.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      it->set(cfg, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_ini(const ExperimentConfig& cfg, std::initializer_list<const char*> sections) {
  ExperimentConfig copy = cfg;
  std::set<std::string> wanted;
  for (const char* s : sections) wanted.insert(s);
  std::ostringstream out;
  bool first = true;
  for (const char* section : kSectionOrder) {
    if (!wanted.empty() && !wanted.count(section)) continue;
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& b : bindings())
      if (b.section == section) out << b.key << " = " << b.get(copy) << '\n';
  }
  return out.str();
}

}  // namespace grf::harness
