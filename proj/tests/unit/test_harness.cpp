#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "../support/generators.hpp"
#include "swarm/harness.hpp"

using namespace swarm;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::precondition;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("swarm-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& f) const { return (path / f).string(); }
};

std::vector<RolloutRequest> mixed_requests(std::size_t n) {
  TaskDistribution d;
  d.kinds = {TaskKind::WideSearch, TaskKind::DeepSearch, TaskKind::BatchDownload};
  d.min_units = 2;
  d.max_units = 8;
  std::vector<RolloutRequest> out;
  const auto tasks = sample_tasks(d, 77, n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({tasks[i], 1000 + i});
  return out;
}

PolicyParams random_params(std::uint64_t seed, const RolloutContext& ctx) {
  Rng rng(seed);
  return gen::params(rng, kFeatureCount, ctx.vocab.size(), 0.5);
}

ExperimentConfig eval_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.tasks.min_units = 40;
  cfg.tasks.max_units = 40;
  cfg.eval_tasks = 2;
  cfg.seeds = {1, 2};
  cfg.output_dir = out;
  cfg.vocabulary.group_sizes = {1, 10};
  cfg.policies = {"scripted:swarm:worker:10:size_balanced", "scripted:serial"};
  cfg.speedup = SpeedupConfig{};
  cfg.speedup->serial = {"scripted:serial"};
  return cfg;
}

ExperimentConfig train_config(const std::string& out, std::uint32_t iterations) {
  ExperimentConfig cfg;
  cfg.tasks.min_units = 3;
  cfg.tasks.max_units = 6;
  cfg.tasks.limits = StepLimits{10, 100, 10};
  cfg.rl.K = 4;
  cfg.rl.batch_problems = 4;
  cfg.rl.iterations = iterations;
  cfg.rl.learning_rate = 0.5;
  cfg.parl = {0.5, 0.5, 10, 8, true};
  cfg.toggle.enabled = true;
  cfg.toggle.m = 2;
  cfg.pool_size = 8;
  cfg.eval_tasks = 3;
  cfg.seeds = {5};
  cfg.output_dir = out;
  cfg.policies = {"trained"};
  return cfg;
}

}  // namespace

TEST_CASE("rollout manager equals a sequential loop for any limit") {
  const RolloutContext ctx;
  const auto params = random_params(1, ctx);
  const auto requests = mixed_requests(200);
  std::vector<EpisodeTrace> naive;
  for (const auto& r : requests) naive.push_back(rollout_episode(params, r.task, r.seed, ctx));
  CHECK(rollout_manager(requests, params, ctx, 1) == naive);
  for (std::size_t limit : {2, 8, 64, 500}) CHECK(rollout_manager(requests, params, ctx, limit) == naive);
  CHECK(code_of([&] { rollout_manager(requests, params, ctx, 0); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("episode failures are recorded, not thrown") {
  const RolloutContext ctx;
  auto requests = mixed_requests(3);
  requests[0].task = gen_wide_search(4, 6, 1);
  std::get<WideTruth>(requests[0].task.ground_truth).items.clear();
  const auto traces = rollout_manager(requests, zero_params(ctx.vocab), ctx, 2);
  CHECK_FALSE(traces[0].error.empty());
  CHECK(traces[1].error.empty());
}

TEST_CASE("suspend and resume") {
  const RolloutContext ctx;
  const auto params = random_params(2, ctx);
  const SoftmaxPolicy policy(params);
  for (const auto& r : mixed_requests(40)) {
    const auto whole = rollout_episode(policy, r.task, r.seed, ctx);
    EpisodeRunner runner(r.task, r.seed, ctx);
    for (int i = 0; i < 2 && !runner.done(); ++i) runner.step(policy);
    if (runner.done()) continue;
    const auto token = suspend_episode(runner);

    auto resumed = resume_episode(token, ctx, policy);
    resumed.run(policy);
    CHECK(resumed.trace() == whole);

    const auto copy = parse_json(json(token).dump()).get<ResumeToken>();
    CHECK(copy == token);
    auto again = resume_episode(copy, ctx, policy);
    again.run(policy);
    CHECK(again.trace() == whole);
  }
}

TEST_CASE("resuming under new parameters flags a partial rollout") {
  const RolloutContext ctx;
  const SoftmaxPolicy old_policy(random_params(3, ctx));
  const auto fresh = random_params(4, ctx);
  const SoftmaxPolicy new_policy(fresh);
  const auto task = gen_wide_search(9, 10, 1);
  EpisodeRunner runner(task, 5, ctx);
  runner.step(old_policy);
  runner.step(old_policy);
  const auto token = suspend_episode(runner);

  auto resumed = resume_episode(token, ctx, new_policy);
  resumed.run(new_policy);
  const auto t = resumed.trace();
  CHECK(t.partial_rollout);
  CHECK(t.snapshot_id == new_policy.snapshot_id());
  for (const auto& tok : t.tokens)
    CHECK(tok.behavior_logprob == action_log_distribution(fresh, tok.features)[tok.token]);
  CHECK(code_of([&] { resume_episode(token, ctx, new_policy, true); }) == ErrorCode::stale_token);
}

TEST_CASE("trace records round-trip byte for byte") {
  const RolloutContext ctx;
  const auto params = random_params(6, ctx);
  PARLConfig parl{0.5, 0.25, 10, 8, true};
  const auto requests = mixed_requests(60);
  const auto traces = rollout_manager(requests, params, ctx, 4);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto tr = traces[i];
    tr.reward = parl_reward(requests[i].task, tr, parl, i % 12);
    for (auto level : {TraceLevel::full, TraceLevel::summary}) {
      const auto rec = make_trace_record(requests[i].task, tr, ctx, parl.parallel_cap, level);
      const auto line = to_jsonl(rec);
      const auto back = parse_trace_record(line);
      CHECK(back == rec);
      CHECK(to_jsonl(back) == line);
      CHECK(line.find('\n') == std::string::npos);
    }
  }
}

TEST_CASE("replay verdicts") {
  const RolloutContext ctx;
  const auto params = random_params(7, ctx);
  SnapshotStore store;
  store.add(params);
  PARLConfig parl{0.5, 0.5, 10, 8, true};
  for (const auto& r : mixed_requests(30)) {
    auto tr = rollout_episode(params, r.task, r.seed, ctx);
    tr.reward = parl_reward(r.task, tr, parl, 3);
    const auto rec = make_trace_record(r.task, tr, ctx, parl.parallel_cap, TraceLevel::full);
    CHECK(replay_trace(rec, store).clean);

    auto tampered = rec;
    tampered.trace.reward.composite += 0.5;
    const auto v = replay_trace(tampered, store);
    CHECK_FALSE(v.clean);
    REQUIRE_FALSE(v.divergences.empty());
    CHECK(v.divergences.front().find("reward") != std::string::npos);

    const auto summary = make_trace_record(r.task, tr, ctx, parl.parallel_cap, TraceLevel::summary);
    CHECK(code_of([&] { replay_trace(summary, store); }) == ErrorCode::missing_data);
    CHECK(code_of([&] { replay_trace(rec, SnapshotStore{}); }) == ErrorCode::missing_snapshot);
  }

  const auto task = gen_wide_search(3, 12, 1);
  VocabularyConfig vc;
  vc.group_sizes = {4};
  const RolloutContext sctx{Vocabulary(vc), EnvConfig::standard()};
  auto scripted = rollout_episode(ScriptedPolicy::swarm("worker", 4), task, 1, sctx);
  scripted.reward = parl_reward(task, scripted, parl, 100);
  auto rec = make_trace_record(task, scripted, sctx, 8, TraceLevel::full);
  CHECK(replay_trace(rec, store).clean);
  rec.trace.stages[1].sub_steps[0] += 1;
  CHECK_FALSE(replay_trace(rec, store).clean);
}

TEST_CASE("configuration errors come before any rollout") {
  TempDir dir("cfg");
  auto cfg = eval_config(dir.path.string());
  cfg.seeds.clear();
  CHECK(code_of([&] { run_experiment(cfg); }) == ErrorCode::config_error);
  CHECK_FALSE(fs::exists(dir.path));
  cfg.seeds = {1};
  cfg.concurrency_limit = 0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::config_error);
  cfg.concurrency_limit = 1;
  cfg.policies = {"scripted:swarm:worker:7:size_balanced"};
  CHECK(code_of([&] { run_experiment(cfg); }) == ErrorCode::config_error);
}

TEST_CASE("evaluation runs are reproducible and report speedups") {
  TempDir a("eval-a"), b("eval-b");
  const auto sa = run_experiment(eval_config(a.path.string()));
  auto cfg_b = eval_config(b.path.string());
  cfg_b.concurrency_limit = 8;
  run_experiment(cfg_b);
  for (const char* f : {"traces.jsonl", "metrics.csv", "speedup.csv", "vocabulary.json"})
    CHECK(read_file(a.file(f)) == read_file(b.file(f)));

  REQUIRE_FALSE(sa.speedup.empty());
  for (const auto& row : sa.speedup) {
    REQUIRE(row.serial_critical_steps);
    REQUIRE(row.swarm_critical_steps);
    CHECK(*row.speedup() == double(*row.serial_critical_steps) / double(*row.swarm_critical_steps));
  }
  CHECK(sa.episodes == 2 * 2 * 2);

  SnapshotStore store;
  for (const auto& rec : read_trace_file(a.file("traces.jsonl"))) CHECK(replay_trace(rec, store).clean);

  const auto table = report_metrics(a.file("metrics.csv"));
  CHECK(table.rfind("kind,episodes,", 0) == 0);
  CHECK(table.find("wide_search,8,") != std::string::npos);
}

TEST_CASE("speedup oracle on a 40-item task") {
  const auto task = gen_wide_search(12, 40, 1);
  VocabularyConfig vc;
  vc.group_sizes = {1, 10};
  vc.schemes = {PartitionScheme::size_balanced, PartitionScheme::contiguous};
  const RolloutContext ctx{Vocabulary(vc), EnvConfig::standard()};
  const auto rows = speedup_table(task, 0, ctx, SpeedupConfig{});
  // swarm: create, assign (1 + 4), submit
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].swarm_critical_steps == 7u);
    // F1 of k of 40 correct items is 2k/(k+40); smallest k reaching each target
    std::uint64_t k = 0;
    while (2.0 * k / (k + 40.0) < rows[i].target_r_perf) ++k;
    CHECK(rows[i].serial_critical_steps == k + 1);
  }
}

TEST_CASE("training resumes from a checkpoint exactly") {
  TempDir once("train-once"), twice("train-twice");
  run_training(train_config(once.path.string(), 6));
  run_training(train_config(twice.path.string(), 3));  // interrupted run
  run_training(train_config(twice.path.string(), 6));  // picks up at iteration 3
  for (const char* f : {"curve-seed5.csv", "checkpoints/seed5.json", "metrics.csv", "traces.jsonl"})
    CHECK(read_file(once.file(f)) == read_file(twice.file(f)));

  SnapshotStore store;
  load_snapshots(once.file("snapshots"), store);
  CHECK(store.size() == 1);
  for (const auto& rec : read_trace_file(once.file("traces.jsonl"))) CHECK(replay_trace(rec, store).clean);
}
