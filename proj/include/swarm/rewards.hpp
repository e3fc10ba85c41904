#pragma once

// Reward computation: rule-based task outcome, the parallel-agent composite
// with annealed auxiliary terms, and the Toggle budget transform.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swarm/metrics.hpp"
#include "swarm/orchestrator.hpp"
#include "swarm/records.hpp"
#include "swarm/task_gen.hpp"

namespace swarm {

struct PARLConfig {
  double lambda1_init = 0.0;         // instantiation reward weight
  double lambda2_init = 0.0;         // finish-rate reward weight
  std::uint32_t anneal_horizon = 1;  // iterations until both weights reach 0
  std::uint32_t parallel_cap = 8;    // width at which r_parallel saturates
  bool anneal = true;                // false keeps the weights fixed

  void validate() const;
  bool operator==(const PARLConfig&) const = default;
};

struct ToggleConfig {
  bool enabled = false;
  double accuracy_threshold = 0.5;  // Phase0 applies when mean reward >= this
  std::uint32_t m = 10;             // iterations per phase
  double rho = 50.0;                // percentile in (0, 100]
  std::uint32_t fallback_budget = 0;

  void validate() const;
  bool operator==(const ToggleConfig&) const = default;
};

using ItemSet = std::map<std::string, std::string>;

/// F1 over exact (key, value) matches. Throws Error(invalid_parameter) when
/// the truth set is empty.
double item_f1(const ItemSet& predicted, const ItemSet& truth);

/// Task outcome score of a submitted answer in [0, 1].
double score_answer(const TaskSpec& task, const Answer& answer);
double r_perf(const TaskSpec& task, const EpisodeTrace& trace);

double r_parallel(const ParallelismStats& stats, const PARLConfig& cfg);
/// lambda_init * max(0, 1 - t / horizon).
double anneal(double lambda_init, std::uint64_t t, std::uint64_t horizon);

RewardBreakdown parl_reward(const TaskSpec& task, const EpisodeTrace& trace, const PARLConfig& cfg,
                            std::uint64_t t);
/// Composite from explicit weights; replay uses the weights a trace recorded.
RewardBreakdown parl_reward_with_weights(const TaskSpec& task, const EpisodeTrace& trace,
                                         std::uint32_t parallel_cap, double lambda1_t, double lambda2_t);

struct ScoredResponse {
  std::uint32_t length = 0;
  double reward = 0.0;
};

/// Nearest-rank rho-th percentile of lengths among responses with reward 1;
/// `fallback` when none is correct.
std::uint32_t estimate_budget(std::span<const ScoredResponse> responses, double rho, std::uint32_t fallback);

enum class TogglePhase { Phase0, Phase1 };
const char* to_string(TogglePhase phase);

TogglePhase toggle_phase(std::uint64_t t, std::uint32_t m);

/// Per-problem token budgets. Written once during initialisation, read-only
/// after freeze().
class BudgetTable {
 public:
  void set(const std::string& task_id, std::uint32_t budget);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  bool contains(const std::string& task_id) const { return budgets_.count(task_id) != 0; }
  /// Throws Error(missing_budget).
  std::uint32_t at(const std::string& task_id) const;
  const std::map<std::string, std::uint32_t>& entries() const { return budgets_; }

  bool operator==(const BudgetTable&) const = default;

 private:
  std::map<std::string, std::uint32_t> budgets_;
  bool frozen_ = false;
};

/// Phase1: identity. Phase0: identity when the mean reward is below the
/// threshold, otherwise over-budget responses get 0.
std::vector<double> toggle_reward(const std::string& task_id, std::span<const ScoredResponse> responses,
                                  const BudgetTable& budgets, const ToggleConfig& cfg, std::uint64_t t);

}  // namespace swarm
