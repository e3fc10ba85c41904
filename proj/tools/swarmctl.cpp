// swarmctl: generate task corpora, evaluate and train orchestrator
// policies, verify traces and aggregate metrics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "swarm/harness.hpp"

namespace fs = std::filesystem;
using namespace swarm;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeFailure = 2, kReplayDivergence = 3 };

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> concurrency;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--concurrency", f.concurrency, "max episodes in flight")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const CommonFlags& f) {
  auto cfg = f.config.empty() ? ExperimentConfig{} : load_experiment_config(f.config);
  if (f.config.empty()) cfg.seeds = {0};
  if (f.seed) cfg.seeds = {*f.seed};
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.concurrency) cfg.concurrency_limit = *f.concurrency;
  cfg.validate();
  return cfg;
}

void print_summary(const RunSummary& s) {
  for (const auto& [label, e] : s.evaluations)
    std::printf("%-48s episodes=%zu r_perf=%.4f critical=%.2f width=%.2f zero_spawn=%.3f tokens=%.2f\n", label.c_str(),
                e.episodes, e.mean_r_perf, e.mean_critical_steps, e.mean_parallelism, e.zero_spawn_fraction,
                e.mean_tokens);
  for (const auto& f : s.files) std::printf("wrote %s\n", f.c_str());
}

int cmd_gen(const CommonFlags& f, std::uint32_t count) {
  auto cfg = load(f);
  fs::create_directories(cfg.output_dir);
  std::string lines;
  for (auto seed : cfg.seeds)
    for (const auto& t : sample_tasks(cfg.tasks, seed, count ? count : cfg.eval_tasks)) lines += json(t).dump() + "\n";
  const auto path = (fs::path(cfg.output_dir) / "tasks.jsonl").string();
  write_file(path, lines);
  std::printf("wrote %s\n", path.c_str());
  return kOk;
}

int cmd_replay(const std::string& traces, const std::vector<std::string>& snapshot_dirs) {
  SnapshotStore store;
  for (const auto& d : snapshot_dirs) load_snapshots(d, store);
  const auto records = read_trace_file(traces);
  std::size_t diverged = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto v = replay_trace(records[i], store);
    if (v.clean) continue;
    ++diverged;
    for (const auto& d : v.divergences)
      std::printf("record %zu (%s): %s\n", i, records[i].trace.task_id.c_str(), d.c_str());
  }
  std::printf("replayed %zu records, %zu diverged\n", records.size(), diverged);
  return diverged ? kReplayDivergence : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-agent orchestration experiments"};
  app.require_subcommand(1);

  CommonFlags gen_f, run_f, train_f;
  std::uint32_t gen_count = 0;
  auto* gen = app.add_subcommand("gen", "emit a task corpus (tasks.jsonl)");
  add_common(gen, gen_f, false);
  gen->add_option("--count", gen_count, "tasks per seed (default: eval_tasks)");

  auto* run = app.add_subcommand("run", "evaluate the configured policies");
  add_common(run, run_f, true);

  auto* train = app.add_subcommand("train", "train one policy per seed, then evaluate");
  add_common(train, train_f, true);

  std::string traces;
  std::vector<std::string> snapshot_dirs;
  auto* replay = app.add_subcommand("replay", "re-execute stored traces and report divergences");
  replay->add_option("--traces", traces, "trace file (JSONL)")->required();
  replay->add_option("--snapshots", snapshot_dirs, "directories of parameter snapshots or checkpoints");

  std::string metrics;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate a metrics CSV by task kind");
  report->add_option("--metrics", metrics, "metrics CSV")->required();
  report->add_option("--out", report_out, "write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_f, gen_count);
    if (run->parsed()) {
      auto cfg = load(run_f);
      if (cfg.policies.empty()) throw Error(ErrorCode::config_error, "no policies to evaluate");
      print_summary(run_evaluation(cfg));
      return kOk;
    }
    if (train->parsed()) {
      auto cfg = load(train_f);
      if (cfg.policies.empty()) cfg.policies = {"trained"};
      print_summary(run_training(cfg));
      return kOk;
    }
    if (replay->parsed()) return cmd_replay(traces, snapshot_dirs);
    if (report->parsed()) {
      const auto table = report_metrics(metrics);
      if (report_out.empty()) {
        std::fputs(table.c_str(), stdout);
      } else {
        write_file(report_out, table);
        std::printf("wrote %s\n", report_out.c_str());
      }
      return kOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::config_error ? kConfigError : kRuntimeFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
  return kOk;
}
