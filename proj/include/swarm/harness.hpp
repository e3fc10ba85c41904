#pragma once

// Experiment runner: configuration, the concurrent rollout manager,
// suspend/resume of in-flight episodes, JSONL trace records with replay
// verification, and report generation.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarm/metrics.hpp"
#include "swarm/optimizer.hpp"
#include "swarm/orchestrator.hpp"
#include "swarm/rewards.hpp"
#include "swarm/serialization.hpp"

namespace swarm {

enum class TraceLevel { summary, full };
const char* to_string(TraceLevel level);
TraceLevel trace_level_from_string(const std::string& s);

struct SpeedupConfig {
  std::vector<double> targets{0.3, 0.4, 0.5, 0.6, 0.7};
  std::string swarm = "scripted:swarm:worker:10:size_balanced";
  std::vector<std::string> serial{"scripted:serial", "scripted:serial_delegate:worker"};
};

struct InitConfig {
  std::string kind = "zero";  // zero | serial_prior
  double strength = 3.0;
};

struct ExperimentConfig {
  TaskDistribution tasks;
  std::uint32_t eval_tasks = 16;      // tasks per seed for evaluation
  std::uint32_t eval_episodes = 1;    // episodes per evaluation task
  RLConfig rl;
  PARLConfig parl;
  ToggleConfig toggle;
  std::vector<std::uint64_t> seeds;
  std::size_t concurrency_limit = 1;
  std::string output_dir = "out";
  TraceLevel trace_level = TraceLevel::full;
  VocabularyConfig vocabulary;
  EnvConfig env = EnvConfig::standard();
  InitConfig init;
  std::uint32_t pool_size = 64;
  std::uint32_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  /// Evaluated policies: snapshot ids of scripted policies, or "trained".
  std::vector<std::string> policies;
  std::optional<SpeedupConfig> speedup;

  /// Throws Error(config_error).
  void validate() const;
  RolloutContext context() const;
  PolicyParams initial_params() const;
  TrainerConfig trainer_config(std::uint64_t seed) const;
};

ExperimentConfig parse_experiment_config(const json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Held-out evaluation tasks for one seed; disjoint seeds from the
/// training pool.
std::vector<TaskSpec> eval_task_set(const ExperimentConfig& cfg, std::uint64_t seed);

struct RolloutRequest {
  TaskSpec task;
  std::uint64_t seed = 0;
};

/// Runs every request as an independent episode with at most `limit` in
/// flight. Output order equals input order and the traces equal a
/// sequential run. Episode exceptions are recorded in EpisodeTrace::error.
std::vector<EpisodeTrace> rollout_manager(std::span<const RolloutRequest> requests, const Policy& policy,
                                          const RolloutContext& ctx, std::size_t limit);
std::vector<EpisodeTrace> rollout_manager(std::span<const RolloutRequest> requests, const PolicyParams& params,
                                          const RolloutContext& ctx, std::size_t limit);

/// Everything needed to continue an in-flight episode elsewhere.
struct ResumeToken {
  TaskSpec task;
  std::uint64_t seed = 0;
  std::string snapshot_id;
  std::vector<TokenRecord> tokens;
  std::string rng_state;
  bool partial_rollout = false;
  bool operator==(const ResumeToken&) const = default;
};

void to_json(json& j, const ResumeToken& v);
void from_json(const json& j, ResumeToken& v);

ResumeToken suspend_episode(const EpisodeRunner& runner);

/// Rebuilds the episode. When `policy` has a different snapshot id than the
/// token, behaviour log-probabilities are re-recorded under the new
/// parameters and the trace is flagged as a partial rollout; with `strict`
/// the mismatch throws Error(stale_token) instead.
EpisodeRunner resume_episode(const ResumeToken& token, const RolloutContext& ctx, const Policy& policy,
                             bool strict = false);

inline constexpr int kTraceSchemaVersion = 1;

struct TraceRecord {
  int schema_version = kTraceSchemaVersion;
  TraceLevel trace_level = TraceLevel::full;
  TaskSpec task;
  EpisodeTrace trace;
  MetricsRow metrics;
  std::uint32_t parallel_cap = 8;
  VocabularyConfig vocabulary;
  EnvConfig env = EnvConfig::standard();
  bool operator==(const TraceRecord&) const = default;
};

TraceRecord make_trace_record(const TaskSpec& task, const EpisodeTrace& trace, const RolloutContext& ctx,
                              std::uint32_t parallel_cap, TraceLevel level);
/// One JSON line, no trailing newline.
std::string to_jsonl(const TraceRecord& record);
TraceRecord parse_trace_record(const std::string& line);
std::vector<TraceRecord> read_trace_file(const std::string& path);

/// Parameter snapshots addressable by snapshot id. Scripted ids resolve
/// without registration.
class SnapshotStore {
 public:
  void add(const PolicyParams& params);
  /// Throws Error(missing_snapshot).
  std::unique_ptr<Policy> resolve(const std::string& snapshot_id) const;
  bool contains(const std::string& snapshot_id) const;
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, PolicyParams> params_;
};

struct ReplayVerdict {
  bool clean = true;
  std::vector<std::string> divergences;
};

/// Re-executes (snapshot, task, seed) and compares tokens, stages, answer,
/// reward and metrics. Throws Error(missing_data) for summary-level records
/// and Error(missing_snapshot) for unknown snapshots.
ReplayVerdict replay_trace(const TraceRecord& record, const SnapshotStore& store);

/// Critical steps at which `policy` first reaches r_perf >= target, scoring
/// the provisional answer after every stage and charging one more step for
/// the submission. nullopt when the target is never reached.
std::optional<std::uint64_t> critical_steps_to_target(const Policy& policy, const TaskSpec& task,
                                                      std::uint64_t seed, const RolloutContext& ctx,
                                                      double target);

struct SpeedupRow {
  std::string task_id;
  double target_r_perf = 0.0;
  std::optional<std::uint64_t> serial_critical_steps;
  std::optional<std::uint64_t> swarm_critical_steps;
  /// serial / swarm; nullopt when either side never reaches the target.
  std::optional<double> speedup() const;
};

std::vector<SpeedupRow> speedup_table(const TaskSpec& task, std::uint64_t seed, const RolloutContext& ctx,
                                      const SpeedupConfig& cfg);
std::string speedup_csv_header();
std::string to_csv(const SpeedupRow& row);

struct RunSummary {
  std::size_t episodes = 0;
  std::vector<std::string> files;
  std::vector<SpeedupRow> speedup;
  std::map<std::uint64_t, std::vector<IterationStats>> curves;  // by seed
  std::map<std::string, EvalStats> evaluations;                 // by policy label
};

/// Evaluates the configured policies: traces.jsonl, metrics.csv and, when
/// configured, speedup.csv.
RunSummary run_evaluation(const ExperimentConfig& cfg);
/// Trains one policy per seed, then evaluates it and the configured
/// policies. Adds curve-seed<N>.csv and checkpoints/seed<N>.json; an
/// existing checkpoint is resumed.
RunSummary run_training(const ExperimentConfig& cfg);
/// run_training when any policy is "trained", otherwise run_evaluation.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// Aggregates a metrics CSV into per-kind means; returns the CSV text.
std::string report_metrics(const std::string& metrics_csv_path);

/// Loads every parameter file (*.json holding a PolicyParams or a
/// Checkpoint) in `dir` into `store`.
void load_snapshots(const std::string& dir, SnapshotStore& store);

}  // namespace swarm
