// Command-line front end: dataset generation, training, evaluation,
// simulation and the A/B experiment.

#include "grf/gate/metrics.hpp"
#include "grf/harness/ab.hpp"
#include "grf/harness/checkpoint.hpp"
#include "grf/harness/config.hpp"
#include "grf/harness/pipeline.hpp"
#include "grf/harness/records.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace grf;
using namespace grf::harness;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

ExperimentConfig load(const Globals& g) { return g.config_path.empty() ? default_config() : load_config(g.config_path); }

fs::path out_dir(const Globals& g) {
  fs::create_directories(g.out);
  return fs::path(g.out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string or_default(const std::string& given, const Globals& g, const char* name) {
  return given.empty() ? (fs::path(g.out) / name).string() : given;
}

Checkpoint require_checkpoint(const std::string& path, ModelKind kind) {
  if (!fs::exists(path))
    throw ConfigError("missing checkpoint '" + path + "' (run train-" + to_string(kind) + " first)");
  return load_checkpoint(path, kind);
}

int cmd_gen_data(const Globals& g, int users) {
  const ExperimentConfig cfg = load(g);
  const int n = users > 0 ? users : cfg.data.users;
  const std::uint64_t seed = g.seed.value_or(cfg.data.seed);
  const auto log = generate_samples(cfg, n, seed);
  const fs::path dir = out_dir(g);
  save_gate_records((dir / "gate_samples.jsonl").string(), log.gate);
  save_rank_records((dir / "rank_samples.jsonl").string(), log.rank);
  std::size_t positives = 0;
  for (const auto& s : log.gate) positives += s.label ? 1 : 0;
  std::printf("sessions=%d impressions=%zu choppy=%zu choppy_rate=%.4f\n", n, log.gate.size(), positives,
              log.gate.empty() ? 0.0 : double(positives) / double(log.gate.size()));
  return 0;
}

int cmd_train_gate(const Globals& g, const std::string& data) {
  const ExperimentConfig cfg = load(g);
  const auto samples = load_gate_records(or_default(data, g, "gate_samples.jsonl"));
  auto result = train_gate_pipeline(cfg, samples, g.seed.value_or(cfg.sim.seed));
  const fs::path dir = out_dir(g);
  save_checkpoint(to_checkpoint(result.model), (dir / "gate.grfc").string());
  write_text(dir / "gate_train_log.txt", result.log.to_text());
  write_text(dir / "gate_eval.txt", result.test.to_text());
  std::printf("train=%zu valid=%zu test=%zu steps=%lld\n%s", result.split_sizes[0], result.split_sizes[1],
              result.split_sizes[2], static_cast<long long>(result.model.step), result.test.to_text().c_str());
  return 0;
}

int cmd_train_rank(const Globals& g, const std::string& data) {
  const ExperimentConfig cfg = load(g);
  const auto samples = load_rank_records(or_default(data, g, "rank_samples.jsonl"));
  const fs::path dir = out_dir(g);
  fs::create_directories(dir / "rank_checkpoints");
  std::string log = "checkpoint_interval_steps=" + std::to_string(cfg.rank.checkpoint_interval_steps) + "\n";
  auto sink = [&](const rank::RankModel& m) {
    char name[64];
    std::snprintf(name, sizeof name, "rank_step_%06lld.grfc", static_cast<long long>(m.step));
    save_checkpoint(to_checkpoint(m), (dir / "rank_checkpoints" / name).string());
    log += std::string("checkpoint ") + name + " samples_seen=" + std::to_string(m.samples_seen) + "\n";
  };
  auto result = train_rank_pipeline(cfg, samples, g.seed.value_or(cfg.sim.seed), sink);
  save_checkpoint(to_checkpoint(result.model), (dir / "rank.grfc").string());
  char line[96];
  for (std::size_t i = 0; i < result.step_losses.size(); ++i) {
    std::snprintf(line, sizeof line, "step %zu loss %.6f\n", i + 1, result.step_losses[i]);
    log += line;
  }
  log += "skipped_missing_labels=" + std::to_string(result.skipped_missing_labels) + "\n";
  write_text(dir / "rank_train_log.txt", log);
  write_text(dir / "rank_eval.txt", result.test.to_text());
  std::printf("train=%zu valid=%zu test=%zu steps=%lld checkpoints=%d\n%s", result.split_sizes[0],
              result.split_sizes[1], result.split_sizes[2], static_cast<long long>(result.model.step),
              result.checkpoints_emitted, result.test.to_text().c_str());
  return 0;
}

int cmd_eval_gate(const Globals& g, const std::string& model, const std::string& data) {
  const auto m = gate_from_checkpoint(require_checkpoint(or_default(model, g, "gate.grfc"), ModelKind::gate));
  const auto samples = load_gate_records(or_default(data, g, "gate_samples.jsonl"));
  std::printf("%s", evaluate_gate(m, samples).to_text().c_str());
  return 0;
}

int cmd_eval_rank(const Globals& g, const std::string& model, const std::string& data) {
  const auto m = rank_from_checkpoint(require_checkpoint(or_default(model, g, "rank.grfc"), ModelKind::rank));
  const auto samples = load_rank_records(or_default(data, g, "rank_samples.jsonl"));
  std::printf("%s", evaluate_rank(m, samples).to_text().c_str());
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& arm_name, int users, const std::string& gate_path,
                 const std::string& rank_path) {
  ExperimentConfig cfg = load(g);
  const engine::Arm arm = engine::arm_from_string(arm_name);
  std::optional<gate::GateModel> gm;
  std::optional<rank::RankModel> rm;
  if (arm != engine::Arm::base)
    gm.emplace(gate_from_checkpoint(require_checkpoint(or_default(gate_path, g, "gate.grfc"), ModelKind::gate)));
  if (arm == engine::Arm::full)
    rm.emplace(rank_from_checkpoint(require_checkpoint(or_default(rank_path, g, "rank.grfc"), ModelKind::rank)));
  const engine::Models models{gm ? &*gm : nullptr, rm ? &*rm : nullptr};
  const int n = users > 0 ? users : cfg.ab.n_users;
  const std::uint64_t seed = g.seed.value_or(cfg.ab.first_seed);
  const auto sessions = simulate_arm(cfg, models, arm, n, seed);
  const ArmMetrics m = summarize_arm(sessions, cfg.ab);
  std::string text = std::string("arm=") + engine::to_string(arm) + " seed=" + std::to_string(seed) +
                     " users=" + std::to_string(n) + " impressions=" + std::to_string(m.impressions) + "\n";
  char line[96];
  for (int k = 0; k < kMetricCount; ++k) {
    std::snprintf(line, sizeof line, "%s=%.6f\n", kMetricNames[k], m.values[std::size_t(k)]);
    text += line;
  }
  write_text(out_dir(g) / (std::string("simulate_") + engine::to_string(arm) + ".txt"), text);
  std::printf("%s", text.c_str());
  return 0;
}

int cmd_ab(const Globals& g, int seeds, int users, const std::string& gate_path, const std::string& rank_path) {
  ExperimentConfig cfg = load(g);
  if (users > 0) cfg.ab.n_users = users;
  if (g.seed) cfg.ab.first_seed = *g.seed;
  const auto gm = gate_from_checkpoint(require_checkpoint(or_default(gate_path, g, "gate.grfc"), ModelKind::gate));
  const auto rm = rank_from_checkpoint(require_checkpoint(or_default(rank_path, g, "rank.grfc"), ModelKind::rank));
  const AbReport report = run_ab(cfg, {&gm, &rm}, seeds > 0 ? seeds : cfg.ab.n_seeds);
  write_ab_outputs(report, out_dir(g).string());
  std::printf("%s", report.to_text().c_str());
  return 0;
}

int cmd_inspect(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  std::size_t scalars = 0;
  for (const auto& t : c.tensors) scalars += t.data.size();
  std::printf("kind=%s version=%u tensors=%zu parameters=%zu\n", to_string(c.kind), kCheckpointVersion,
              c.tensors.size(), scalars);
  std::printf("%s\n", c.hyperparameters.c_str());
  for (const auto& t : c.tensors) {
    std::string dims;
    for (std::size_t i = 0; i < t.dims.size(); ++i) dims += (i ? "x" : "") + std::to_string(t.dims[i]);
    std::printf("%-48s %s\n", t.name.c_str(), dims.c_str());
  }
  return 0;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const CheckpointError*>(&e))
    return std::string("checkpoint_") + to_string(static_cast<const CheckpointError&>(e).code());
  if (dynamic_cast<const RecordError*>(&e)) return "records";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grf: gated cache replacement for short-video feeds"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed override for the chosen command");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  int users = 0, seeds = 0;
  std::string data, model, gate_path, rank_path, arm, ckpt;

  auto* gen = app.add_subcommand("gen-data", "Simulate base-arm sessions and write sample logs");
  gen->add_option("--users", users, "Number of sessions");

  auto* tg = app.add_subcommand("train-gate", "Train the gate model on a sample log");
  tg->add_option("--data", data, "Gate sample log");
  auto* tr = app.add_subcommand("train-rank", "Train the ranking model on a sample log");
  tr->add_option("--data", data, "Rank sample log");

  auto* eg = app.add_subcommand("eval-gate", "AUC and recall at precision 0.7");
  eg->add_option("--model", model, "Gate checkpoint");
  eg->add_option("--data", data, "Gate sample log");
  auto* er = app.add_subcommand("eval-rank", "Per-task AUC against the server pxtrs");
  er->add_option("--model", model, "Rank checkpoint");
  er->add_option("--data", data, "Rank sample log");

  auto* simc = app.add_subcommand("simulate", "Run one arm");
  simc->add_option("--arm", arm, "base, gate or full")->required();
  simc->add_option("--users", users, "Number of users");
  simc->add_option("--gate", gate_path, "Gate checkpoint");
  simc->add_option("--rank", rank_path, "Rank checkpoint");

  auto* ab = app.add_subcommand("ab", "Paired three-arm experiment");
  ab->add_option("--seeds", seeds, "Number of paired seeds");
  ab->add_option("--users", users, "Users per seed");
  ab->add_option("--gate", gate_path, "Gate checkpoint");
  ab->add_option("--rank", rank_path, "Rank checkpoint");

  auto* ins = app.add_subcommand("inspect-ckpt", "Print a checkpoint's header and tensor table");
  ins->add_option("path", ckpt, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(g, users);
    if (*tg) return cmd_train_gate(g, data);
    if (*tr) return cmd_train_rank(g, data);
    if (*eg) return cmd_eval_gate(g, model, data);
    if (*er) return cmd_eval_rank(g, model, data);
    if (*simc) return cmd_simulate(g, arm, users, gate_path, rank_path);
    if (*ab) return cmd_ab(g, seeds, users, gate_path, rank_path);
    if (*ins) return cmd_inspect(ckpt);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    const std::string kind = error_kind(e);
    std::cerr << "error: " << (kind.empty() ? "" : kind + ": ") << msg << "\n";
    return 1;
  }
  return 2;
}
