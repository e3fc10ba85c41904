#include <doctest.h>

#include <algorithm>

#include "../support/generators.hpp"
#include "swarm/metrics.hpp"

using namespace swarm;

namespace {

StageRecord st(std::uint32_t main, std::vector<std::uint32_t> subs, std::uint32_t completed) {
  StageRecord s;
  s.main_steps = main;
  s.assigned = static_cast<std::uint32_t>(subs.size());
  s.completed = completed;
  s.sub_steps = std::move(subs);
  return s;
}

StageRecord st(std::uint32_t main, std::vector<std::uint32_t> subs) {
  const auto n = static_cast<std::uint32_t>(subs.size());
  return st(main, std::move(subs), n);
}

RolloutContext swarm_ctx() {
  VocabularyConfig vc;
  vc.group_sizes = {1, 2, 3, 4, 5, 8, 10};
  return {Vocabulary(vc), EnvConfig::standard()};
}

}  // namespace

TEST_CASE("critical and total steps on worked cases") {
  const std::vector<StageRecord> serial{st(1, {}), st(1, {}), st(1, {})};
  CHECK(critical_steps(serial) == 3);
  CHECK(total_steps(serial) == 3);
  const std::vector<StageRecord> two{st(1, {4, 2, 7}), st(1, {3, 3})};
  CHECK(critical_steps(two) == 12);
  CHECK(total_steps(std::vector<StageRecord>{st(1, {4, 2, 7})}) == 14);
  CHECK(total_steps(std::vector<StageRecord>{}) == 0);
  CHECK(critical_steps(std::vector<StageRecord>{}) == 0);
}

TEST_CASE("critical steps never exceed total steps") {
  Rng rng(101);
  for (int i = 0; i < 10000; ++i) {
    const auto s = gen::stages(rng);
    const bool narrow = std::all_of(s.begin(), s.end(), [](const StageRecord& x) { return x.sub_steps.size() <= 1; });
    const auto c = critical_steps(s), t = total_steps(s);
    CHECK(c <= t);
    CHECK((c == t) == narrow);
    if (parallelism_degree(s).episodes_with_zero_spawn) CHECK(c == t);
  }
}

TEST_CASE("appending a stage never decreases either count") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto s = gen::stages(rng);
    const auto c = critical_steps(s), t = total_steps(s);
    s.push_back(gen::stage(rng, static_cast<std::uint32_t>(s.size())));
    CHECK(critical_steps(s) >= c);
    CHECK(total_steps(s) >= t);
  }
}

TEST_CASE("parallelism degree") {
  const std::vector<StageRecord> serial{st(1, {}), st(1, {})};
  const auto a = parallelism_degree(serial);
  CHECK(a.max_width == 0);
  CHECK(a.episodes_with_zero_spawn);
  const std::vector<StageRecord> w{st(1, {}), st(1, {1, 1, 1}), st(1, {1, 1, 1, 1, 1})};
  const auto b = parallelism_degree(w);
  CHECK(b.max_width == 5);
  CHECK(b.mean_width == doctest::Approx(8.0 / 3.0));
  CHECK_FALSE(b.episodes_with_zero_spawn);

  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto p = parallelism_degree(gen::stages(rng));
    CHECK(p.max_width >= p.mean_width);
    CHECK(p.mean_width >= 0.0);
  }
}

TEST_CASE("finish rate") {
  CHECK(finish_rate(std::vector<StageRecord>{st(1, {1, 1, 1, 1}), st(1, {1, 1})}) == 1.0);
  CHECK(finish_rate(std::vector<StageRecord>{st(1, {1, 1, 1, 1}, 1)}) == 0.25);
  CHECK(finish_rate(std::vector<StageRecord>{st(1, {})}) == 0.0);
}

TEST_CASE("perfect split bound") {
  const auto ctx = swarm_ctx();
  for (std::uint32_t w : {10u, 20u, 37u, 40u}) {
    for (std::uint32_t k : {1u, 2u, 3u, 4u, 5u, 8u, 10u}) {
      const auto spec = gen_wide_search(w, w, 1);
      const auto t = rollout_episode(ScriptedPolicy::swarm("worker", k), spec, 0, ctx);
      // create, assign and finish stages plus the slowest sub-agent
      CHECK(critical_steps(t.stages) == 3 + (w + k - 1) / k);
      CHECK(critical_steps(rollout_episode(ScriptedPolicy::serial(), spec, 0, ctx).stages) == w + 1);
    }
  }
}

TEST_CASE("context usage") {
  const auto ctx = swarm_ctx();
  Rng rng(44);
  for (int i = 0; i < 100; ++i) {
    const auto spec = gen_wide_search(rng.next(), gen::between(rng, 2, 60), gen::between(rng, 1, 3));
    const auto seed = rng.next();
    const auto serial = rollout_episode(ScriptedPolicy::serial(), spec, seed, ctx);
    const auto su = context_usage(serial);
    CHECK(su.max_subagent_tokens == 0);

    const std::uint32_t sizes[] = {2, 3, 4, 5, 8, 10};
    const auto swarm = rollout_episode(ScriptedPolicy::swarm("worker", sizes[rng.below(6)]), spec, seed, ctx);
    const auto wu = context_usage(swarm);
    const bool worked = std::any_of(swarm.stages.begin(), swarm.stages.end(),
                                    [](const StageRecord& s) { return s.completed > 0; });
    if (worked) CHECK(wu.orchestrator_tokens < su.orchestrator_tokens);
    // replaying the same (policy, task, seed) gives the same ledger
    const auto again = rollout_episode(ScriptedPolicy::swarm("worker", sizes[0]), spec, seed, ctx);
    CHECK(context_usage(again).orchestrator_tokens ==
          context_usage(rollout_episode(ScriptedPolicy::swarm("worker", sizes[0]), spec, seed, ctx)).orchestrator_tokens);
  }
}

TEST_CASE("context usage by hand") {
  EpisodeTrace t;
  t.stages = {st(1, {3, 9}), st(1, {})};
  t.stages[0].routed_tokens = 5;
  t.stages[1].routed_tokens = 2;
  const auto u = context_usage(t, {10});
  CHECK(u.orchestrator_tokens == 5 + 2 + 20);
  CHECK(u.max_subagent_tokens == 90);
}

TEST_CASE("metrics rows") {
  EpisodeTrace t;
  t.task_id = "wide-1";
  t.stages = {st(1, {4, 2, 7}), st(1, {})};
  t.reward.r_perf = 0.5;
  t.terminal_flag = TerminalFlag::finished;
  const auto row = metrics_row(t, TaskKind::WideSearch);
  CHECK(row.critical_steps == 9);
  CHECK(row.total_steps == 15);
  CHECK(row.max_width == 3);
  CHECK(to_csv(row) == "wide-1,wide_search,9,15,3,1.500000,1.000000,0.500000,finished");
  CHECK(metrics_csv_header() == "task_id,kind,critical_steps,total_steps,max_width,mean_width,finish_rate,r_perf,terminal_flag");
}
