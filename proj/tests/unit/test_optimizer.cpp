#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/generators.hpp"
#include "swarm/harness.hpp"
#include "swarm/optimizer.hpp"
#include "swarm/serialization.hpp"

using namespace swarm;

namespace {

// Objective evaluated straight from its definition: mean over groups of
// (1/N) sum over tokens of mask * exp(lr) * A - tau * lr^2.
double objective_oracle(const PolicyParams& p, const RolloutBatch& b, const RLConfig& cfg) {
  double total = 0.0;
  std::size_t groups = 0;
  for (const auto& g : b.groups) {
    double mean = 0.0, n = 0.0;
    for (const auto& r : g.responses) {
      mean += r.reward / g.responses.size();
      n += r.tokens.size();
    }
    if (n == 0) continue;
    ++groups;
    double sum = 0.0;
    for (const auto& r : g.responses) {
      for (const auto& t : r.tokens) {
        const double lr = action_log_distribution(p, t.features)[t.action] - t.behavior_logprob;
        const double mask = lr >= cfg.alpha && lr <= cfg.beta ? 1.0 : 0.0;
        sum += mask * std::exp(lr) * (r.reward - mean) - cfg.tau * lr * lr;
      }
    }
    total += sum / n;
  }
  return total / groups;
}

RolloutBatch with_rewards_scaled(RolloutBatch b, double c) {
  for (auto& g : b.groups)
    for (auto& r : g.responses) r.reward *= c;
  return b;
}

TrainerConfig small_trainer(std::uint64_t seed) {
  TrainerConfig c;
  c.tasks.kinds = {TaskKind::WideSearch, TaskKind::BatchDownload};
  c.tasks.min_units = 3;
  c.tasks.max_units = 6;
  c.tasks.limits = StepLimits{10, 100, 10};
  c.rl.K = 4;
  c.rl.batch_problems = 4;
  c.rl.learning_rate = 0.5;
  c.parl = {0.5, 0.5, 20, 8, true};
  c.toggle.enabled = true;
  c.toggle.m = 2;
  c.pool_size = 12;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("advantages are centred") {
  CHECK(advantage(std::vector<double>{1, 0}) == std::vector<double>{0.5, -0.5});
  CHECK(advantage(std::vector<double>{0.3, 0.3, 0.3}) == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(advantage(std::vector<double>{}), Error);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(gen::between(rng, 1, 16));
    for (auto& x : r) x = gen::real(rng, -3, 3);
    const auto a = advantage(r);
    CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0)) <= 1e-12);
  }
}

TEST_CASE("clip mask") {
  CHECK(clip_mask(0.0, -0.5, 0.5) == 1);
  CHECK(clip_mask(0.7, -0.5, 0.5) == 0);
  CHECK(clip_mask(-0.5, -0.5, 0.5) == 1);
  CHECK(clip_mask(0.5, -0.5, 0.5) == 1);
  CHECK(clip_mask(-0.51, -0.5, 0.5) == 0);
}

TEST_CASE("objective matches its definition") {
  Rng rng(5);
  RLConfig cfg;
  cfg.tau = 0.05;
  for (int i = 0; i < 200; ++i) {
    const auto p = gen::params(rng, kFeatureCount, 6);
    const auto b = gen::batch(rng, p, cfg);
    CHECK(rl_objective(p, b, cfg) == doctest::Approx(objective_oracle(p, b, cfg)).epsilon(1e-12));
    CHECK(rl_objective(p, b, cfg) == doctest::Approx(rl_objective(p, b, cfg, ObjectiveTerm::advantage) +
                                                     rl_objective(p, b, cfg, ObjectiveTerm::penalty))
                                         .epsilon(1e-12));
  }
}

TEST_CASE("objective special cases") {
  Rng rng(9);
  RLConfig cfg;
  const auto p = gen::params(rng, kFeatureCount, 5);
  const auto on = gen::batch(rng, p, cfg, true);
  CHECK(rl_objective(p, on, cfg, ObjectiveTerm::penalty) == 0.0);
  for (double g : rl_gradient(p, on, cfg, ObjectiveTerm::penalty)) CHECK(g == 0.0);

  auto flat = gen::batch(rng, p, cfg);
  for (auto& g : flat.groups)
    for (auto& r : g.responses) r.reward = 0.25;
  RLConfig no_tau = cfg;
  no_tau.tau = 0.0;
  CHECK(rl_objective(p, flat, no_tau) == 0.0);

  const auto off = gen::batch(rng, p, cfg);
  RLConfig twice = cfg;
  twice.tau = 2 * cfg.tau;
  CHECK(rl_objective(p, off, twice, ObjectiveTerm::penalty) ==
        doctest::Approx(2 * rl_objective(p, off, cfg, ObjectiveTerm::penalty)).epsilon(1e-12));

  const double base = rl_objective(p, off, no_tau);
  CHECK(rl_objective(p, with_rewards_scaled(off, 3.0), no_tau) == doctest::Approx(3 * base).epsilon(1e-12));
  CHECK_THROWS_AS(rl_objective(p, RolloutBatch{}, cfg), Error);
  CHECK_THROWS_AS(rl_objective(gen::params(rng, 4, 5), off, cfg), Error);
}

TEST_CASE("masked tokens do not contribute") {
  Rng rng(13);
  RLConfig cfg;
  cfg.tau = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto p = gen::params(rng, kFeatureCount, 5);
    auto b = gen::batch(rng, p, cfg);
    for (auto& g : b.groups)
      for (auto& r : g.responses)
        for (auto& t : r.tokens) t.behavior_logprob = action_log_distribution(p, t.features)[t.action] - 0.9;
    for (double g : rl_gradient(p, b, cfg)) CHECK(g == 0.0);
  }

  RLConfig with_tau;
  for (int i = 0; i < 50; ++i) {
    const auto p = gen::params(rng, kFeatureCount, 5);
    const auto b = gen::batch(rng, p, with_tau);
    auto tokens = flatten(b);
    const auto before = gradient_from_tokens(p, tokens, with_tau);
    for (auto& t : tokens) {
      const double lr = action_log_distribution(p, t.features)[t.action] - t.behavior_logprob;
      if (!clip_mask(lr, with_tau.alpha, with_tau.beta)) t.advantage = gen::real(rng, -100, 100);
    }
    CHECK(gradient_from_tokens(p, tokens, with_tau) == before);
  }
}

TEST_CASE("finite-difference agreement") {
  Rng rng(21);
  RLConfig cfg;
  const Vocabulary vocab;
  const auto zero = zero_params(vocab);
  const auto on = gen::batch(rng, zero, cfg, true);
  const auto rep = fd_check(zero, on, cfg);
  CHECK(rep.max_rel_error <= 1e-6);
  CHECK(rep.analytic.size() == zero.size());
  CHECK(rep.finite_diff.size() == zero.size());

  for (int i = 0; i < 100; ++i) {
    const auto p = gen::params(rng, kFeatureCount, gen::between(rng, 2, 8));
    const auto b = gen::batch(rng, p, cfg);
    CHECK(fd_check(p, b, cfg).max_rel_error <= 1e-4);
    CHECK(fd_check(p, b, cfg, 1e-6, ObjectiveTerm::penalty).max_rel_error <= 1e-4);
  }

  // a fully masked batch: the advantage component is zero both ways
  const auto p = gen::params(rng, kFeatureCount, 4);
  auto all_masked = gen::batch(rng, p, cfg);
  for (auto& g : all_masked.groups)
    for (auto& r : g.responses)
      for (auto& t : r.tokens) t.behavior_logprob = action_log_distribution(p, t.features)[t.action] + 0.8;
  const auto adv = fd_check(p, all_masked, cfg, 1e-6, ObjectiveTerm::advantage);
  for (std::size_t i = 0; i < adv.analytic.size(); ++i) {
    CHECK(adv.analytic[i] == 0.0);
    CHECK(adv.finite_diff[i] == 0.0);
  }
  CHECK_THROWS_AS(fd_check(p, all_masked, cfg, 0.0), Error);
}

TEST_CASE("config validation") {
  RLConfig cfg;
  cfg.alpha = 0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.alpha = -0.1;
  cfg.beta = -0.05;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.beta = 0.1;
  cfg.behavior_lag = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("train step") {
  const auto tc = small_trainer(3);
  const auto tasks = sample_tasks(tc.tasks, 5, 4);
  BudgetTable budgets;
  for (const auto& t : tasks) budgets.set(t.task_id, 6);
  budgets.freeze();
  Rng rng(2);
  const auto params = gen::params(rng, kFeatureCount, tc.ctx.vocab.size(), 0.3);
  RLConfig rl = tc.rl;
  TrainStepInputs in{params, tasks, rl, tc.parl, tc.toggle, &budgets, tc.ctx, 4, 99, 1};
  const auto a = train_step(params, in);
  const auto b = train_step(params, in);
  CHECK(a.params == b.params);
  CHECK(a.stats == b.stats);
  CHECK(a.traces == b.traces);
  CHECK(a.traces.size() == tasks.size() * rl.K);
  CHECK(a.stats.phase == "phase0");
  CHECK(a.params != params);

  rl.learning_rate = 0.0;
  CHECK(train_step(params, in).params == params);

  in.concurrency = 4;
  rl.learning_rate = tc.rl.learning_rate;
  CHECK(train_step(params, in).params == a.params);
}

TEST_CASE("trainer checkpoints resume exactly") {
  const auto cfg = small_trainer(8);
  Trainer straight(cfg);
  const auto full = straight.run(6);

  Trainer first(cfg);
  const auto head = first.run(3);
  const auto text = json(first.checkpoint()).dump();
  Trainer second(cfg, parse_json(text).get<Checkpoint>());
  CHECK(second.iteration() == 3);
  const auto tail = second.run(6);
  REQUIRE(head.size() + tail.size() == full.size());
  for (std::size_t i = 0; i < head.size(); ++i) CHECK(head[i] == full[i]);
  for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i] == full[3 + i]);
  CHECK(second.params() == straight.params());
  CHECK(second.budgets() == straight.budgets());
  CHECK(straight.budgets().frozen());
  CHECK(straight.budgets().entries().size() == cfg.pool_size);
}

TEST_CASE("rollouts use the parameters from one iteration back") {
  auto cfg = small_trainer(4);
  cfg.toggle.enabled = false;
  Trainer t(cfg);
  t.step();
  const auto p1 = t.params();
  t.step();
  CHECK(t.behavior() == p1);
  CHECK(t.last_traces().front().snapshot_id == zero_params(cfg.ctx.vocab).snapshot_id());
  t.step();
  CHECK(t.last_traces().front().snapshot_id == p1.snapshot_id());

  cfg.rl.behavior_lag = 0;
  Trainer on(cfg);
  on.step();
  const auto q1 = on.params();
  on.step();
  CHECK(on.last_traces().front().snapshot_id == q1.snapshot_id());
}

TEST_CASE("parallelism trends upwards early in training") {
  const auto exp = load_experiment_config(std::string(SWARM_CONFIG_DIR) + "/parl_learning.json");
  double slope_sum = 0.0;
  for (auto seed : exp.seeds) {
    Trainer t(exp.trainer_config(seed));
    std::vector<double> width;
    t.run(200, [&](const IterationStats& s) { width.push_back(s.mean_parallelism); });
    const double n = width.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < width.size(); ++i) {
      sx += i;
      sy += width[i];
      sxx += double(i) * i;
      sxy += i * width[i];
    }
    slope_sum += (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  CHECK(slope_sum / exp.seeds.size() > 0.0);
}

TEST_CASE("curve rows") {
  IterationStats s;
  s.iteration = 3;
  s.mean_reward = 0.5;
  s.mean_critical_steps = 7;
  s.mean_parallelism = 2.25;
  s.mean_tokens = 4;
  s.phase = "phase1";
  CHECK(curve_csv_header() == "iteration,mean_reward,mean_critical_steps,mean_parallelism,mean_tokens,phase");
  CHECK(to_csv(s) == "3,0.500000,7.000000,2.250000,4.000000,phase1");
}
