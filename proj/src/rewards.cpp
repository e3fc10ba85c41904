#include "swarm/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace swarm {

void PARLConfig::validate() const {
  if (anneal_horizon < 1) throw Error(ErrorCode::config_error, "anneal_horizon must be >= 1");
  if (parallel_cap < 1) throw Error(ErrorCode::config_error, "parallel_cap must be >= 1");
  if (lambda1_init < 0 || lambda2_init < 0) throw Error(ErrorCode::config_error, "lambdas must be >= 0");
}

void ToggleConfig::validate() const {
  if (m < 1) throw Error(ErrorCode::config_error, "toggle m must be >= 1");
  if (!(rho > 0.0 && rho <= 100.0)) throw Error(ErrorCode::config_error, "toggle rho must be in (0, 100]");
  if (accuracy_threshold < 0.0 || accuracy_threshold > 1.0)
    throw Error(ErrorCode::config_error, "toggle accuracy_threshold must be in [0, 1]");
}

double item_f1(const ItemSet& predicted, const ItemSet& truth) {
  if (truth.empty()) throw Error(ErrorCode::invalid_parameter, "item_f1 with empty truth");
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [k, v] : predicted) {
    auto it = truth.find(k);
    if (it != truth.end() && it->second == v) ++hits;
  }
  if (hits == 0) return 0.0;
  const double precision = static_cast<double>(hits) / predicted.size();
  const double recall = static_cast<double>(hits) / truth.size();
  return 2.0 * precision * recall / (precision + recall);
}

double score_answer(const TaskSpec& task, const Answer& answer) {
  return std::visit(
      [&](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, WideTruth>) {
          if (!answer.submitted) return 0.0;
          ItemSet truth;
          for (const auto& item : t.items) truth[item.key] = item.value;
          return item_f1(answer.items, truth);
        } else if constexpr (std::is_same_v<T, DeepTruth>) {
          return answer.submitted && answer.text == t.answer ? 1.0 : 0.0;
        } else {
          std::set<std::string> ids;
          for (const auto& f : t.files) ids.insert(f.id);
          std::set<std::string> got;
          for (const auto& f : answer.files)
            if (ids.count(f)) got.insert(f);
          return static_cast<double>(got.size()) / static_cast<double>(ids.size());
        }
      },
      task.ground_truth);
}

double r_perf(const TaskSpec& task, const EpisodeTrace& trace) {
  return score_answer(task, trace.final_answer);
}

double r_parallel(const ParallelismStats& stats, const PARLConfig& cfg) {
  const auto cap = std::max<std::uint32_t>(cfg.parallel_cap, 1);
  return static_cast<double>(std::min(stats.max_width, cap)) / static_cast<double>(cap);
}

double anneal(double lambda_init, std::uint64_t t, std::uint64_t horizon) {
  if (horizon == 0) return 0.0;
  const double frac = static_cast<double>(t) / static_cast<double>(horizon);
  return lambda_init * std::max(0.0, 1.0 - frac);
}

RewardBreakdown parl_reward_with_weights(const TaskSpec& task, const EpisodeTrace& trace,
                                         std::uint32_t parallel_cap, double lambda1_t, double lambda2_t) {
  RewardBreakdown r;
  r.r_perf = r_perf(task, trace);
  PARLConfig cap_only;
  cap_only.parallel_cap = parallel_cap;
  r.r_parallel = r_parallel(parallelism_degree(trace.stages), cap_only);
  r.r_finish = finish_rate(trace.stages);
  r.lambda1_t = lambda1_t;
  r.lambda2_t = lambda2_t;
  r.composite = lambda1_t * r.r_parallel + lambda2_t * r.r_finish + r.r_perf;
  return r;
}

RewardBreakdown parl_reward(const TaskSpec& task, const EpisodeTrace& trace, const PARLConfig& cfg,
                            std::uint64_t t) {
  const double l1 = cfg.anneal ? anneal(cfg.lambda1_init, t, cfg.anneal_horizon) : cfg.lambda1_init;
  const double l2 = cfg.anneal ? anneal(cfg.lambda2_init, t, cfg.anneal_horizon) : cfg.lambda2_init;
  return parl_reward_with_weights(task, trace, cfg.parallel_cap, l1, l2);
}

std::uint32_t estimate_budget(std::span<const ScoredResponse> responses, double rho, std::uint32_t fallback) {
  std::vector<std::uint32_t> lengths;
  for (const auto& r : responses)
    if (r.reward == 1.0) lengths.push_back(r.length);
  if (lengths.empty()) return fallback;
  std::sort(lengths.begin(), lengths.end());
  const double n = static_cast<double>(lengths.size());
  auto rank = static_cast<std::size_t>(std::ceil(rho / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, lengths.size());
  return lengths[rank - 1];
}

const char* to_string(TogglePhase phase) { return phase == TogglePhase::Phase0 ? "phase0" : "phase1"; }

TogglePhase toggle_phase(std::uint64_t t, std::uint32_t m) {
  if (m == 0) throw Error(ErrorCode::invalid_parameter, "toggle m must be >= 1");
  return (t / m) % 2 == 0 ? TogglePhase::Phase0 : TogglePhase::Phase1;
}

void BudgetTable::set(const std::string& task_id, std::uint32_t budget) {
  if (frozen_) throw Error(ErrorCode::precondition, "budget table is frozen");
  budgets_[task_id] = budget;
}

std::uint32_t BudgetTable::at(const std::string& task_id) const {
  auto it = budgets_.find(task_id);
  if (it == budgets_.end()) throw Error(ErrorCode::missing_budget, task_id);
  return it->second;
}

std::vector<double> toggle_reward(const std::string& task_id, std::span<const ScoredResponse> responses,
                                  const BudgetTable& budgets, const ToggleConfig& cfg, std::uint64_t t) {
  if (responses.empty()) throw Error(ErrorCode::invalid_parameter, "toggle_reward needs K >= 1");
  if (!budgets.frozen()) throw Error(ErrorCode::precondition, "budget table must be frozen");
  std::vector<double> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(r.reward);
  const auto budget = budgets.at(task_id);
  if (toggle_phase(t, cfg.m) == TogglePhase::Phase1) return out;

  double mean = 0.0;
  for (const auto& r : responses) mean += r.reward;
  mean /= static_cast<double>(responses.size());
  if (mean < cfg.accuracy_threshold) return out;

  for (std::size_t i = 0; i < responses.size(); ++i)
    if (responses[i].length > budget) out[i] = 0.0;
  return out;
}

}  // namespace swarm
