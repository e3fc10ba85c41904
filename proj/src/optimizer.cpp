#include "swarm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "swarm/metrics.hpp"
#include "swarm/parallel.hpp"

namespace swarm {

void RLConfig::validate() const {
  if (!(alpha < 0.0 && beta > 0.0))
    throw Error(ErrorCode::config_error, "clip bounds need alpha < 0 < beta");
  if (tau < 0.0) throw Error(ErrorCode::config_error, "tau must be >= 0");
  if (K < 1) throw Error(ErrorCode::config_error, "K must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::config_error, "learning_rate must be >= 0");
  if (batch_problems < 1) throw Error(ErrorCode::config_error, "batch_problems must be >= 1");
  if (behavior_lag > 1) throw Error(ErrorCode::config_error, "behavior_lag must be 0 or 1");
}

std::size_t ProblemGroup::token_count() const {
  std::size_t n = 0;
  for (const auto& r : responses) n += r.tokens.size();
  return n;
}

double ProblemGroup::mean_reward() const {
  if (responses.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : responses) s += r.reward;
  return s / static_cast<double>(responses.size());
}

Response to_response(const EpisodeTrace& trace, double reward) {
  Response r;
  r.reward = reward;
  r.tokens.reserve(trace.tokens.size());
  for (const auto& t : trace.tokens) r.tokens.push_back({t.token, t.features, t.behavior_logprob});
  return r;
}

std::vector<double> advantage(std::span<const double> rewards) {
  if (rewards.empty()) throw Error(ErrorCode::invalid_parameter, "advantage of an empty group");
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r - mean);
  return out;
}

int clip_mask(double log_ratio, double alpha, double beta) { return alpha <= log_ratio && log_ratio <= beta; }

std::vector<FlatToken> flatten(const RolloutBatch& batch) {
  std::vector<FlatToken> out;
  std::size_t nonempty = 0;
  for (const auto& g : batch.groups)
    if (g.token_count() > 0) ++nonempty;
  if (nonempty == 0) throw Error(ErrorCode::empty_batch, "batch has no tokens");
  for (const auto& g : batch.groups) {
    const auto n = g.token_count();
    if (n == 0) continue;
    std::vector<double> rewards;
    for (const auto& r : g.responses) rewards.push_back(r.reward);
    const auto adv = advantage(rewards);
    const double w = 1.0 / (static_cast<double>(n) * static_cast<double>(nonempty));
    for (std::size_t j = 0; j < g.responses.size(); ++j)
      for (const auto& t : g.responses[j].tokens) out.push_back({t.action, t.features, t.behavior_logprob, adv[j], w});
  }
  return out;
}

namespace {

void check_dims(const PolicyParams& params, const FlatToken& t) {
  if (t.features.size() != params.n_features() || t.action >= params.n_actions())
    throw Error(ErrorCode::dimension_mismatch, "token does not fit the policy dimensions");
}

double token_value(double lr, const FlatToken& t, const RLConfig& cfg, ObjectiveTerm term) {
  double v = 0.0;
  if (term != ObjectiveTerm::penalty && clip_mask(lr, cfg.alpha, cfg.beta)) v += std::exp(lr) * t.advantage;
  if (term != ObjectiveTerm::advantage) v -= cfg.tau * lr * lr;
  return v;
}

// d(token value)/d(log pi)
double token_slope(double lr, const FlatToken& t, const RLConfig& cfg, ObjectiveTerm term) {
  double c = 0.0;
  if (term != ObjectiveTerm::penalty && clip_mask(lr, cfg.alpha, cfg.beta)) c += std::exp(lr) * t.advantage;
  if (term != ObjectiveTerm::advantage) c -= 2.0 * cfg.tau * lr;
  return c;
}

}  // namespace

double objective_from_tokens(const PolicyParams& params, std::span<const FlatToken> tokens, const RLConfig& cfg,
                             ObjectiveTerm term) {
  if (tokens.empty()) throw Error(ErrorCode::empty_batch, "no tokens");
  double total = 0.0;
  for (const auto& t : tokens) {
    check_dims(params, t);
    const double lr = action_log_distribution(params, t.features)[t.action] - t.behavior_logprob;
    total += t.weight * token_value(lr, t, cfg, term);
  }
  return total;
}

std::vector<double> gradient_from_tokens(const PolicyParams& params, std::span<const FlatToken> tokens,
                                         const RLConfig& cfg, ObjectiveTerm term) {
  if (tokens.empty()) throw Error(ErrorCode::empty_batch, "no tokens");
  const auto F = params.n_features();
  const auto A = params.n_actions();
  std::vector<double> grad(params.size(), 0.0);
  for (const auto& t : tokens) {
    check_dims(params, t);
    const auto logp = action_log_distribution(params, t.features);
    const double lr = logp[t.action] - t.behavior_logprob;
    const double c = t.weight * token_slope(lr, t, cfg, term);
    if (c == 0.0) continue;
    for (std::size_t b = 0; b < A; ++b) {
      const double coeff = c * ((b == t.action ? 1.0 : 0.0) - std::exp(logp[b]));
      for (std::size_t k = 0; k < F; ++k) grad[b * F + k] += coeff * t.features[k];
    }
  }
  return grad;
}

double rl_objective(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg, ObjectiveTerm term) {
  const auto tokens = flatten(batch);
  return objective_from_tokens(params, tokens, cfg, term);
}

std::vector<double> rl_gradient(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg,
                                ObjectiveTerm term) {
  const auto tokens = flatten(batch);
  return gradient_from_tokens(params, tokens, cfg, term);
}

GradientReport fd_check(const PolicyParams& params, const RolloutBatch& batch, const RLConfig& cfg, double epsilon,
                        ObjectiveTerm term) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_parameter, "epsilon must be > 0");
  const auto tokens = flatten(batch);
  GradientReport rep;
  rep.analytic = gradient_from_tokens(params, tokens, cfg, term);
  rep.finite_diff.resize(params.size());
  PolicyParams p = params;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p.theta()[i];
    p.theta()[i] = orig + epsilon;
    const double up = objective_from_tokens(p, tokens, cfg, term);
    p.theta()[i] = orig - epsilon;
    const double down = objective_from_tokens(p, tokens, cfg, term);
    p.theta()[i] = orig;
    rep.finite_diff[i] = (up - down) / (2.0 * epsilon);
    const double a = rep.analytic[i], f = rep.finite_diff[i];
    const double denom = std::max({std::abs(a), std::abs(f), kRelErrorFloor});
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(a - f) / denom);
  }
  return rep;
}

std::string curve_csv_header() {
  return "iteration,mean_reward,mean_critical_steps,mean_parallelism,mean_tokens,phase";
}

std::string to_csv(const IterationStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%.6f,%.6f,", static_cast<unsigned long long>(s.iteration),
                s.mean_reward, s.mean_critical_steps, s.mean_parallelism, s.mean_tokens);
  return buf + s.phase;
}

std::uint64_t rollout_seed(std::uint64_t run_seed, std::uint64_t t, std::size_t problem, std::size_t k) {
  return derive_seed(run_seed, {0x726f6c6c, t, problem, k});
}

namespace {

EpisodeTrace safe_rollout(const Policy& policy, const TaskSpec& task, std::uint64_t seed, const RolloutContext& ctx) {
  EpisodeRunner runner(task, seed, ctx);
  try {
    runner.run(policy);
    return runner.trace();
  } catch (const std::exception& e) {
    auto t = runner.trace();
    t.error = e.what();
    return t;
  }
}

}  // namespace

TrainStepResult train_step(const PolicyParams& params, const TrainStepInputs& in) {
  in.rl.validate();
  in.parl.validate();
  if (in.toggle.enabled) {
    in.toggle.validate();
    if (!in.budgets) throw Error(ErrorCode::missing_budget, "Toggle enabled without a budget table");
  }
  if (in.problems.empty()) throw Error(ErrorCode::empty_batch, "no problems");
  const std::size_t P = in.problems.size(), K = in.rl.K;

  const SoftmaxPolicy behavior(in.behavior);
  std::vector<EpisodeTrace> traces(P * K);
  parallel_for(P * K, in.concurrency, [&](std::size_t idx) {
    const auto i = idx / K, k = idx % K;
    traces[idx] = safe_rollout(behavior, in.problems[i], rollout_seed(in.seed, in.iteration, i, k), in.ctx);
  });

  TrainStepResult res;
  auto& st = res.stats;
  st.iteration = in.iteration;
  if (in.toggle.enabled) st.phase = to_string(toggle_phase(in.iteration, in.toggle.m));

  RolloutBatch batch;
  for (std::size_t i = 0; i < P; ++i) {
    const auto& task = in.problems[i];
    std::vector<ScoredResponse> scored;
    for (std::size_t k = 0; k < K; ++k) {
      auto& tr = traces[i * K + k];
      tr.reward = parl_reward(task, tr, in.parl, in.iteration);
      scored.push_back({static_cast<std::uint32_t>(tr.tokens.size()), tr.reward.composite});

      const auto par = parallelism_degree(tr.stages);
      st.mean_reward += tr.reward.composite;
      st.mean_r_perf += tr.reward.r_perf;
      st.mean_critical_steps += static_cast<double>(critical_steps(tr.stages));
      st.mean_parallelism += par.max_width;
      st.mean_tokens += static_cast<double>(tr.tokens.size());
      st.zero_spawn_fraction += par.episodes_with_zero_spawn ? 1.0 : 0.0;
      for (const auto& s : tr.stages) {
        st.assigned += s.assigned;
        st.completed += s.completed;
      }
    }
    std::vector<double> rewards;
    for (const auto& s : scored) rewards.push_back(s.reward);
    if (in.toggle.enabled) rewards = toggle_reward(task.task_id, scored, *in.budgets, in.toggle, in.iteration);

    ProblemGroup g;
    g.task_id = task.task_id;
    for (std::size_t k = 0; k < K; ++k) g.responses.push_back(to_response(traces[i * K + k], rewards[k]));
    batch.groups.push_back(std::move(g));
  }
  const double n = static_cast<double>(P * K);
  st.mean_reward /= n;
  st.mean_r_perf /= n;
  st.mean_critical_steps /= n;
  st.mean_parallelism /= n;
  st.mean_tokens /= n;
  st.zero_spawn_fraction /= n;

  res.params = params;
  const auto tokens = flatten(batch);
  std::size_t masked = 0;
  for (const auto& t : tokens) {
    const double lr = action_log_distribution(params, t.features)[t.action] - t.behavior_logprob;
    if (!clip_mask(lr, in.rl.alpha, in.rl.beta)) ++masked;
  }
  st.masked_fraction = static_cast<double>(masked) / static_cast<double>(tokens.size());
  st.objective = objective_from_tokens(params, tokens, in.rl);
  if (in.rl.learning_rate != 0.0) {
    const auto grad = gradient_from_tokens(params, tokens, in.rl);
    auto theta = res.params.theta();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += in.rl.learning_rate * grad[i];
  }
  res.traces = std::move(traces);
  return res;
}

void TrainerConfig::validate() const {
  rl.validate();
  parl.validate();
  if (toggle.enabled) toggle.validate();
  tasks.validate();
  if (pool_size < 1) throw Error(ErrorCode::config_error, "pool_size must be >= 1");
  if (concurrency < 1) throw Error(ErrorCode::config_error, "concurrency must be >= 1");
  if (init && (init->n_features() != kFeatureCount || init->n_actions() != ctx.vocab.size()))
    throw Error(ErrorCode::config_error, "initial parameters do not match the vocabulary");
}

Trainer::Trainer(TrainerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  pool_ = sample_tasks(cfg_.tasks, derive_seed(cfg_.seed, {0x706f6f6c}), cfg_.pool_size);
  params_ = cfg_.init.value_or(zero_params(cfg_.ctx.vocab));
  behavior_ = params_;
  if (cfg_.toggle.enabled) init_budgets();
  budgets_.freeze();
}

Trainer::Trainer(TrainerConfig cfg, Checkpoint checkpoint) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (checkpoint.version != Checkpoint::kVersion)
    throw Error(ErrorCode::parse_error, "unsupported checkpoint version " + std::to_string(checkpoint.version));
  const auto n = kFeatureCount * cfg_.ctx.vocab.size();
  if (checkpoint.params.size() != n || checkpoint.behavior.size() != n)
    throw Error(ErrorCode::dimension_mismatch, "checkpoint does not match the vocabulary");
  pool_ = sample_tasks(cfg_.tasks, derive_seed(cfg_.seed, {0x706f6f6c}), cfg_.pool_size);
  params_ = std::move(checkpoint.params);
  behavior_ = std::move(checkpoint.behavior);
  budgets_ = std::move(checkpoint.budgets);
  budgets_.freeze();
  iteration_ = checkpoint.iteration;
}

void Trainer::init_budgets() {
  const SoftmaxPolicy policy(params_);
  const std::size_t K = cfg_.rl.K;
  std::vector<EpisodeTrace> traces(pool_.size() * K);
  parallel_for(traces.size(), cfg_.concurrency, [&](std::size_t idx) {
    const auto i = idx / K, k = idx % K;
    traces[idx] = safe_rollout(policy, pool_[i], derive_seed(cfg_.seed, {0x62756467, i, k}), cfg_.ctx);
  });
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    std::vector<ScoredResponse> scored;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& tr = traces[i * K + k];
      scored.push_back({static_cast<std::uint32_t>(tr.tokens.size()), r_perf(pool_[i], tr)});
    }
    const auto fallback = cfg_.toggle.fallback_budget > 0 ? cfg_.toggle.fallback_budget : pool_[i].limits.max_tokens;
    budgets_.set(pool_[i].task_id, estimate_budget(scored, cfg_.toggle.rho, fallback));
  }
}

std::vector<TaskSpec> Trainer::batch_for(std::uint64_t t) const {
  Rng rng(derive_seed(cfg_.seed, {0x6261746368, t}));
  std::vector<std::size_t> idx(pool_.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t n = cfg_.rl.batch_problems;
  std::vector<TaskSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < idx.size()) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      out.push_back(pool_[idx[i]]);
    } else {
      out.push_back(pool_[rng.below(pool_.size())]);
    }
  }
  return out;
}

IterationStats Trainer::step() {
  const auto problems = batch_for(iteration_);
  const PolicyParams& behavior = cfg_.rl.behavior_lag == 0 ? params_ : behavior_;
  TrainStepInputs in{behavior,  problems,  cfg_.rl,   cfg_.parl,        cfg_.toggle,
                     &budgets_, cfg_.ctx, iteration_, cfg_.seed, cfg_.concurrency};
  auto res = train_step(params_, in);
  behavior_ = std::move(params_);
  params_ = std::move(res.params);
  last_traces_ = std::move(res.traces);
  ++iteration_;
  return res.stats;
}

std::vector<IterationStats> Trainer::run(std::uint64_t until,
                                         const std::function<void(const IterationStats&)>& on_iteration) {
  std::vector<IterationStats> out;
  while (iteration_ < until) {
    out.push_back(step());
    if (on_iteration) on_iteration(out.back());
  }
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.iteration = iteration_;
  c.params = params_;
  c.behavior = behavior_;
  c.budgets = budgets_;
  return c;
}

double EvalStats::assign_complete_ratio() const {
  if (completed == 0) return static_cast<double>(assigned);
  return static_cast<double>(assigned) / static_cast<double>(completed);
}

EvalStats evaluate_policy(const PolicyParams& params, std::span<const TaskSpec> tasks, std::uint32_t episodes_per_task,
                          std::uint64_t seed, const RolloutContext& ctx, std::size_t concurrency) {
  const SoftmaxPolicy policy(params);
  const std::size_t E = episodes_per_task;
  std::vector<EpisodeTrace> traces(tasks.size() * E);
  parallel_for(traces.size(), concurrency, [&](std::size_t idx) {
    traces[idx] = safe_rollout(policy, tasks[idx / E], derive_seed(seed, {0x6576616c, idx / E, idx % E}), ctx);
  });
  EvalStats st;
  st.episodes = traces.size();
  if (traces.empty()) return st;
  for (std::size_t idx = 0; idx < traces.size(); ++idx) {
    const auto& tr = traces[idx];
    const auto par = parallelism_degree(tr.stages);
    st.mean_r_perf += r_perf(tasks[idx / E], tr);
    st.mean_critical_steps += static_cast<double>(critical_steps(tr.stages));
    st.mean_parallelism += par.max_width;
    st.mean_tokens += static_cast<double>(tr.tokens.size());
    st.zero_spawn_fraction += par.episodes_with_zero_spawn ? 1.0 : 0.0;
    for (const auto& s : tr.stages) {
      st.assigned += s.assigned;
      st.completed += s.completed;
    }
  }
  const double n = static_cast<double>(traces.size());
  st.mean_r_perf /= n;
  st.mean_critical_steps /= n;
  st.mean_parallelism /= n;
  st.mean_tokens /= n;
  st.zero_spawn_fraction /= n;
  return st;
}

}  // namespace swarm
