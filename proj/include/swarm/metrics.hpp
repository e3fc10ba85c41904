#pragma once

// Cost and behaviour accounting over stage records.

#include <cstdint>
#include <span>
#include <string>

#include "swarm/orchestrator.hpp"
#include "swarm/records.hpp"

namespace swarm {

/// Sum over stages of main steps plus the longest sub-agent in the stage's
/// group (0 for stages without a group).
std::uint64_t critical_steps(std::span<const StageRecord> stages);

/// Sum over stages of main steps plus every sub-agent's steps.
std::uint64_t total_steps(std::span<const StageRecord> stages);

struct ParallelismStats {
  std::uint32_t max_width = 0;
  double mean_width = 0.0;
  bool episodes_with_zero_spawn = true;  // no stage launched a group
};

ParallelismStats parallelism_degree(std::span<const StageRecord> stages);

/// Completed / assigned over the episode; 0 when nothing was assigned.
double finish_rate(std::span<const StageRecord> stages);

struct ContextModel {
  std::uint32_t per_step_tokens = 10;
};

struct ContextUsage {
  std::uint64_t orchestrator_tokens = 0;
  std::uint64_t max_subagent_tokens = 0;
};

/// Orchestrator context: routed-back result tokens plus a fixed cost per
/// orchestrator step. Sub-agent context: its steps times the per-step cost;
/// the largest single sub-agent is reported.
ContextUsage context_usage(const EpisodeTrace& trace, const ContextModel& model = {});

/// One CSV row per episode.
struct MetricsRow {
  std::string task_id;
  std::string kind;
  std::uint64_t critical_steps = 0;
  std::uint64_t total_steps = 0;
  std::uint32_t max_width = 0;
  double mean_width = 0.0;
  double finish_rate = 0.0;
  double r_perf = 0.0;
  std::string terminal_flag;

  bool operator==(const MetricsRow&) const = default;
};

MetricsRow metrics_row(const EpisodeTrace& trace, TaskKind kind);
std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);

}  // namespace swarm
