#pragma once

// Policy optimisation for the orchestrator: group-mean advantages,
// log-ratio gradient masking, a squared log-ratio penalty, analytic
// gradients with a finite-difference checker, and the training loop.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarm/orchestrator.hpp"
#include "swarm/rewards.hpp"
#include "swarm/task_gen.hpp"

namespace swarm {

struct RLConfig {
  double alpha = -0.5;  // lower log-ratio bound, must be < 0
  double beta = 0.5;    // upper log-ratio bound, must be > 0
  double tau = 0.01;
  std::uint32_t K = 8;  // rollouts per problem
  double learning_rate = 0.1;
  std::uint32_t batch_problems = 8;
  std::uint32_t iterations = 100;
  /// Iterations between the behaviour snapshot and the trained parameters.
  /// 0 is fully on-policy.
  std::uint32_t behavior_lag = 1;

  void validate() const;
  bool operator==(const RLConfig&) const = default;
};

struct TokenStep {
  std::uint32_t action = 0;
  FeatureVector features;
  double behavior_logprob = 0.0;
  bool operator==(const TokenStep&) const = default;
};

struct Response {
  std::vector<TokenStep> tokens;
  double reward = 0.0;
  bool operator==(const Response&) const = default;
};

/// K responses to one problem.
struct ProblemGroup {
  std::string task_id;
  std::vector<Response> responses;

  std::size_t token_count() const;
  double mean_reward() const;
  bool operator==(const ProblemGroup&) const = default;
};

struct RolloutBatch {
  std::vector<ProblemGroup> groups;
  bool operator==(const RolloutBatch&) const = default;
};

Response to_response(const EpisodeTrace& trace, double reward);

/// Rewards minus their mean. Throws Error(invalid_parameter) when empty.
std::vector<double> advantage(std::span<const double> rewards);

/// 1 iff alpha <= log_ratio <= beta.
int clip_mask(double log_ratio, double alpha, double beta);

/// Selects which part of the objective to evaluate.
enum class ObjectiveTerm { total, advantage, penalty };

/// One token with everything the objective needs. `weight` is 1/N for its
/// group divided by the number of groups.
struct FlatToken {
  std::uint32_t action = 0;
  std::span<const double> features;
  double behavior_logprob = 0.0;
  double advantage = 0.0;
  double weight = 0.0;
};

/// Views into `batch`; it must outlive the result. Throws Error(empty_batch)
/// when the batch has no tokens.
std::vector<FlatToken> flatten(const RolloutBatch& batch);

double objective_from_tokens(const PolicyParams& params, std::span<const FlatToken> tokens, const RLConfig& cfg,
                             ObjectiveTerm term = ObjectiveTerm::total);
std::vector<double> gradient_from_tokens(const PolicyParams& params, std::span<const FlatToken> tokens,
                                         const RLConfig& cfg, ObjectiveTerm term = ObjectiveTerm::total);

/// Mean over groups of (1/N) sum_j sum_i [mask * exp(lr) * A_j - tau * lr^2],
/// lr = log pi_theta - behaviour log-prob. The mask is held constant under
/// differentiation, so the gradient of the first term is the masked
/// importance-weighted policy gradient.
double rl_objective(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg,
                    ObjectiveTerm term = ObjectiveTerm::total);
std::vector<double> rl_gradient(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg,
                                ObjectiveTerm term = ObjectiveTerm::total);

struct GradientReport {
  std::vector<double> analytic;
  std::vector<double> finite_diff;
  double max_rel_error = 0.0;
};

/// Relative error floor: coordinates where both gradients are below this in
/// magnitude are compared absolutely against it.
inline constexpr double kRelErrorFloor = 1e-8;

GradientReport fd_check(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg,
                        double epsilon = 1e-6, ObjectiveTerm term = ObjectiveTerm::total);

struct IterationStats {
  std::uint64_t iteration = 0;
  double mean_reward = 0.0;  // composite, before any Toggle transform
  double mean_r_perf = 0.0;
  double mean_critical_steps = 0.0;
  double mean_parallelism = 0.0;  // mean over episodes of max group width
  double mean_tokens = 0.0;
  double zero_spawn_fraction = 0.0;
  std::uint64_t assigned = 0;
  std::uint64_t completed = 0;
  double masked_fraction = 0.0;
  std::string phase = "none";  // toggle phase, "none" when Toggle is off
  double objective = 0.0;

  bool operator==(const IterationStats&) const = default;
};

std::string curve_csv_header();
std::string to_csv(const IterationStats& stats);

struct TrainStepInputs {
  const PolicyParams& behavior;
  std::span<const TaskSpec> problems;
  const RLConfig& rl;
  const PARLConfig& parl;
  const ToggleConfig& toggle;
  const BudgetTable* budgets = nullptr;  // required when Toggle is enabled
  const RolloutContext& ctx;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
};

struct TrainStepResult {
  PolicyParams params;
  IterationStats stats;
  std::vector<EpisodeTrace> traces;
};

/// Rolls out K episodes per problem with the behaviour parameters, scores
/// them, forms the batch and takes one ascent step from `params`.
TrainStepResult train_step(const PolicyParams& params, const TrainStepInputs& in);

/// Seed of rollout k for problem i at iteration t.
std::uint64_t rollout_seed(std::uint64_t run_seed, std::uint64_t t, std::size_t problem, std::size_t k);

struct TrainerConfig {
  RLConfig rl;
  PARLConfig parl;
  ToggleConfig toggle;
  TaskDistribution tasks;
  std::uint32_t pool_size = 64;  // fixed training problems
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  RolloutContext ctx;
  std::optional<PolicyParams> init;  // zero parameters when empty

  void validate() const;
};

struct Checkpoint {
  static constexpr int kVersion = 1;
  int version = kVersion;
  std::uint64_t iteration = 0;
  PolicyParams params;
  PolicyParams behavior;
  BudgetTable budgets;
  bool operator==(const Checkpoint&) const = default;
};

class Trainer {
 public:
  explicit Trainer(TrainerConfig cfg);
  Trainer(TrainerConfig cfg, Checkpoint checkpoint);

  IterationStats step();
  /// Runs until `iteration()` reaches `until`.
  std::vector<IterationStats> run(std::uint64_t until,
                                  const std::function<void(const IterationStats&)>& on_iteration = {});

  std::uint64_t iteration() const { return iteration_; }
  const PolicyParams& params() const { return params_; }
  const PolicyParams& behavior() const { return behavior_; }
  const BudgetTable& budgets() const { return budgets_; }
  const std::vector<TaskSpec>& pool() const { return pool_; }
  const TrainerConfig& config() const { return cfg_; }
  const std::vector<EpisodeTrace>& last_traces() const { return last_traces_; }
  Checkpoint checkpoint() const;

 private:
  std::vector<TaskSpec> batch_for(std::uint64_t t) const;
  void init_budgets();

  TrainerConfig cfg_;
  std::vector<TaskSpec> pool_;
  PolicyParams params_;
  PolicyParams behavior_;
  BudgetTable budgets_;
  std::uint64_t iteration_ = 0;
  std::vector<EpisodeTrace> last_traces_;
};

struct EvalStats {
  std::size_t episodes = 0;
  double mean_r_perf = 0.0;
  double mean_critical_steps = 0.0;
  double mean_parallelism = 0.0;
  double mean_tokens = 0.0;
  double zero_spawn_fraction = 0.0;
  std::uint64_t assigned = 0;
  std::uint64_t completed = 0;
  /// assigned / completed; assigned when nothing completed.
  double assign_complete_ratio() const;
};

/// Sampled rollouts of `params` on every task, `episodes_per_task` each.
EvalStats evaluate_policy(const PolicyParams& params, std::span<const TaskSpec> tasks,
                          std::uint32_t episodes_per_task, std::uint64_t seed, const RolloutContext& ctx,
                          std::size_t concurrency = 1);

}  // namespace swarm
