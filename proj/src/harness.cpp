#include "swarm/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "swarm/parallel.hpp"

namespace fs = std::filesystem;

namespace swarm {

const char* to_string(TraceLevel level) { return level == TraceLevel::full ? "full" : "summary"; }

TraceLevel trace_level_from_string(const std::string& s) {
  if (s == "full") return TraceLevel::full;
  if (s == "summary") return TraceLevel::summary;
  throw Error(ErrorCode::parse_error, "unknown trace level '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw Error(ErrorCode::config_error, "at least one seed is required");
  if (concurrency_limit < 1) throw Error(ErrorCode::config_error, "concurrency_limit must be >= 1");
  if (eval_tasks < 1 || eval_episodes < 1) throw Error(ErrorCode::config_error, "eval counts must be >= 1");
  if (init.kind != "zero" && init.kind != "serial_prior")
    throw Error(ErrorCode::config_error, "init.kind must be zero or serial_prior");
  tasks.validate();
  rl.validate();
  parl.validate();
  if (toggle.enabled) toggle.validate();
  const auto ctx = context();
  for (const auto& p : policies) {
    if (p == "trained") continue;
    auto scripted = ScriptedPolicy::from_snapshot_id(p);
    if (!scripted) throw Error(ErrorCode::config_error, "unknown policy '" + p + "'");
    for (const auto& t : scripted->fixed_tokens())
      if (!ctx.vocab.find(t.code()))
        throw Error(ErrorCode::config_error, "policy '" + p + "' emits " + t.code() + ", not in the vocabulary");
  }
  if (speedup) {
    if (speedup->targets.empty()) throw Error(ErrorCode::config_error, "speedup needs targets");
    for (double t : speedup->targets)
      if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::config_error, "speedup targets must be in (0, 1]");
    if (!ScriptedPolicy::from_snapshot_id(speedup->swarm))
      throw Error(ErrorCode::config_error, "speedup.swarm must be a scripted policy");
    if (speedup->serial.empty()) throw Error(ErrorCode::config_error, "speedup.serial must not be empty");
    for (const auto& s : speedup->serial)
      if (!ScriptedPolicy::from_snapshot_id(s))
        throw Error(ErrorCode::config_error, "speedup.serial entries must be scripted policies");
  }
}

RolloutContext ExperimentConfig::context() const {
  try {
    return RolloutContext{Vocabulary(vocabulary), env};
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.message());
  }
}

PolicyParams ExperimentConfig::initial_params() const {
  const Vocabulary vocab(vocabulary);
  if (init.kind == "serial_prior") return serial_prior_params(vocab, init.strength);
  return zero_params(vocab);
}

TrainerConfig ExperimentConfig::trainer_config(std::uint64_t seed) const {
  TrainerConfig t;
  t.rl = rl;
  t.parl = parl;
  t.toggle = toggle;
  t.tasks = tasks;
  t.pool_size = pool_size;
  t.seed = seed;
  t.concurrency = concurrency_limit;
  t.ctx = context();
  t.init = initial_params();
  return t;
}

namespace {

template <class T>
void opt_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j,
             {"tasks", "eval_tasks", "eval_episodes", "rl", "parl", "toggle", "seeds", "concurrency_limit",
              "output_dir", "trace_level", "vocabulary", "env", "init", "pool_size", "checkpoint_every", "policies",
              "speedup"},
             "experiment");
  ExperimentConfig c;
  if (j.contains("tasks")) from_json(j["tasks"], c.tasks);
  opt_field(j, "eval_tasks", c.eval_tasks);
  opt_field(j, "eval_episodes", c.eval_episodes);
  if (j.contains("rl")) from_json(j["rl"], c.rl);
  if (j.contains("parl")) from_json(j["parl"], c.parl);
  if (j.contains("toggle")) from_json(j["toggle"], c.toggle);
  opt_field(j, "seeds", c.seeds);
  opt_field(j, "concurrency_limit", c.concurrency_limit);
  opt_field(j, "output_dir", c.output_dir);
  if (j.contains("trace_level")) {
    std::string level;
    opt_field(j, "trace_level", level);
    if (level != "full" && level != "summary") throw Error(ErrorCode::config_error, "trace_level must be full or summary");
    c.trace_level = trace_level_from_string(level);
  }
  if (j.contains("vocabulary")) from_json(j["vocabulary"], c.vocabulary);
  if (j.contains("env")) from_json(j["env"], c.env);
  if (j.contains("init")) {
    check_keys(j["init"], {"kind", "strength"}, "init");
    opt_field(j["init"], "kind", c.init.kind);
    opt_field(j["init"], "strength", c.init.strength);
  }
  opt_field(j, "pool_size", c.pool_size);
  opt_field(j, "checkpoint_every", c.checkpoint_every);
  opt_field(j, "policies", c.policies);
  if (j.contains("speedup")) {
    check_keys(j["speedup"], {"targets", "swarm", "serial"}, "speedup");
    SpeedupConfig s;
    opt_field(j["speedup"], "targets", s.targets);
    opt_field(j["speedup"], "swarm", s.swarm);
    opt_field(j["speedup"], "serial", s.serial);
    c.speedup = s;
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = parse_json(read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.message());
  }
  return parse_experiment_config(j);
}

std::vector<TaskSpec> eval_task_set(const ExperimentConfig& cfg, std::uint64_t seed) {
  return sample_tasks(cfg.tasks, derive_seed(seed, {0x6576616c}), cfg.eval_tasks);
}

std::vector<EpisodeTrace> rollout_manager(std::span<const RolloutRequest> requests, const Policy& policy,
                                          const RolloutContext& ctx, std::size_t limit) {
  if (limit < 1) throw Error(ErrorCode::invalid_parameter, "concurrency limit must be >= 1");
  std::vector<EpisodeTrace> out(requests.size());
  parallel_for(requests.size(), limit, [&](std::size_t i) {
    const auto& r = requests[i];
    try {
      EpisodeRunner runner(r.task, r.seed, ctx);
      try {
        runner.run(policy);
        out[i] = runner.trace();
      } catch (const std::exception& e) {
        out[i] = runner.trace();
        out[i].error = e.what();
      }
    } catch (const std::exception& e) {
      // the task itself was rejected before the episode started
      out[i].task_id = r.task.task_id;
      out[i].seed = r.seed;
      out[i].snapshot_id = policy.snapshot_id();
      out[i].error = e.what();
    }
  });
  return out;
}

std::vector<EpisodeTrace> rollout_manager(std::span<const RolloutRequest> requests, const PolicyParams& params,
                                          const RolloutContext& ctx, std::size_t limit) {
  return rollout_manager(requests, SoftmaxPolicy(params), ctx, limit);
}

void to_json(json& j, const ResumeToken& v) {
  j = {{"task", v.task},           {"seed", v.seed},           {"snapshot_id", v.snapshot_id},
       {"tokens", v.tokens},       {"rng_state", v.rng_state}, {"partial_rollout", v.partial_rollout}};
}

void from_json(const json& j, ResumeToken& v) {
  try {
    v.task = j.at("task").get<TaskSpec>();
    v.seed = j.at("seed").get<std::uint64_t>();
    v.snapshot_id = j.at("snapshot_id").get<std::string>();
    v.tokens = j.at("tokens").get<std::vector<TokenRecord>>();
    v.rng_state = j.at("rng_state").get<std::string>();
    v.partial_rollout = j.at("partial_rollout").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("resume token: ") + e.what());
  }
}

ResumeToken suspend_episode(const EpisodeRunner& runner) {
  if (runner.done()) throw Error(ErrorCode::precondition, "episode already finished");
  const auto t = runner.trace();
  return {runner.env().task(), runner.env().seed(), runner.snapshot_id(), runner.tokens(), runner.rng_state(),
          t.partial_rollout};
}

EpisodeRunner resume_episode(const ResumeToken& token, const RolloutContext& ctx, const Policy& policy,
                             bool strict) {
  auto runner = EpisodeRunner::restore(token.task, token.seed, ctx, token.tokens, token.rng_state, token.snapshot_id);
  if (token.partial_rollout) runner.mark_partial();
  const auto current = policy.snapshot_id();
  if (!token.snapshot_id.empty() && current != token.snapshot_id) {
    if (strict)
      throw Error(ErrorCode::stale_token, "token snapshot " + token.snapshot_id + " != current " + current);
    if (const auto* soft = dynamic_cast<const SoftmaxPolicy*>(&policy)) runner.rerecord_logprobs(soft->params());
    runner.set_snapshot_id(current);
    runner.mark_partial();
  }
  return runner;
}

TraceRecord make_trace_record(const TaskSpec& task, const EpisodeTrace& trace, const RolloutContext& ctx,
                              std::uint32_t parallel_cap, TraceLevel level) {
  TraceRecord r;
  r.trace_level = level;
  r.task = task;
  r.trace = trace;
  if (level == TraceLevel::summary) r.trace.tokens.clear();
  r.metrics = metrics_row(trace, task.kind);
  r.parallel_cap = parallel_cap;
  r.vocabulary = ctx.vocab.config();
  r.env = ctx.env;
  return r;
}

std::string to_jsonl(const TraceRecord& r) {
  json j = {{"schema_version", r.schema_version},
            {"trace_level", to_string(r.trace_level)},
            {"task", r.task},
            {"trace", r.trace},
            {"metrics", r.metrics},
            {"parallel_cap", r.parallel_cap},
            {"vocabulary", r.vocabulary},
            {"env", r.env}};
  if (r.trace_level == TraceLevel::summary) j["trace"].erase("tokens");
  return j.dump();
}

TraceRecord parse_trace_record(const std::string& line) {
  const auto j = parse_json(line);
  TraceRecord r;
  try {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kTraceSchemaVersion)
      throw Error(ErrorCode::parse_error, "unsupported schema_version " + std::to_string(r.schema_version));
    r.trace_level = trace_level_from_string(j.at("trace_level").get<std::string>());
    r.task = j.at("task").get<TaskSpec>();
    r.trace = j.at("trace").get<EpisodeTrace>();
    r.metrics = j.at("metrics").get<MetricsRow>();
    r.parallel_cap = j.at("parallel_cap").get<std::uint32_t>();
    r.vocabulary = VocabularyConfig{};
    from_json(j.at("vocabulary"), r.vocabulary);
    r.env = EnvConfig{};
    from_json(j.at("env"), r.env);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("trace record: ") + e.what());
  }
  return r;
}

std::vector<TraceRecord> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config_error, "cannot read " + path);
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse_trace_record(line));
  return out;
}

void SnapshotStore::add(const PolicyParams& params) { params_.emplace(params.snapshot_id(), params); }

bool SnapshotStore::contains(const std::string& id) const {
  return params_.count(id) != 0 || ScriptedPolicy::from_snapshot_id(id).has_value();
}

std::unique_ptr<Policy> SnapshotStore::resolve(const std::string& id) const {
  if (auto it = params_.find(id); it != params_.end()) return std::make_unique<SoftmaxPolicy>(it->second);
  if (auto s = ScriptedPolicy::from_snapshot_id(id)) return std::make_unique<ScriptedPolicy>(*s);
  throw Error(ErrorCode::missing_snapshot, id);
}

void load_snapshots(const std::string& dir, SnapshotStore& store) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::config_error, "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto j = parse_json(read_file(f.string()));
    if (j.contains("theta")) {
      store.add(j.get<PolicyParams>());
    } else if (j.contains("params")) {
      const auto c = j.get<Checkpoint>();
      store.add(c.params);
      store.add(c.behavior);
    }
  }
}

ReplayVerdict replay_trace(const TraceRecord& record, const SnapshotStore& store) {
  if (record.trace_level != TraceLevel::full)
    throw Error(ErrorCode::missing_data, "replay needs a full trace, got " + std::string(to_string(record.trace_level)));
  const auto policy = store.resolve(record.trace.snapshot_id);
  const RolloutContext ctx{Vocabulary(record.vocabulary), record.env};

  ReplayVerdict v;
  auto flag = [&](const std::string& what) {
    v.clean = false;
    v.divergences.push_back(what);
  };
  EpisodeTrace fresh;
  try {
    fresh = rollout_episode(*policy, record.task, record.trace.seed, ctx);
  } catch (const std::exception& e) {
    fresh.error = e.what();
  }
  const auto& old = record.trace;
  if (old.task_id != record.task.task_id) flag("task_id does not match the embedded task");
  if (old.error != fresh.error) flag("episode error differs");
  if (old.tokens.size() != fresh.tokens.size()) {
    flag("token count " + std::to_string(old.tokens.size()) + " != " + std::to_string(fresh.tokens.size()));
  } else {
    for (std::size_t i = 0; i < old.tokens.size(); ++i) {
      if (old.tokens[i] == fresh.tokens[i]) continue;
      flag("token " + std::to_string(i) + " differs");
      break;
    }
  }
  if (old.stages.size() != fresh.stages.size()) {
    flag("stage count " + std::to_string(old.stages.size()) + " != " + std::to_string(fresh.stages.size()));
  } else {
    for (std::size_t i = 0; i < old.stages.size(); ++i) {
      if (old.stages[i] == fresh.stages[i]) continue;
      flag("stage " + std::to_string(i) + " differs");
      break;
    }
  }
  if (old.final_answer != fresh.final_answer) flag("final answer differs");
  if (old.terminal_flag != fresh.terminal_flag) flag("terminal flag differs");
  if (old.partial_rollout) flag("trace is a partial rollout; behaviour log-probs were re-recorded");

  const auto reward = parl_reward_with_weights(record.task, fresh, record.parallel_cap, old.reward.lambda1_t,
                                               old.reward.lambda2_t);
  if (!(reward == old.reward)) flag("reward mismatch");
  fresh.reward = reward;
  if (!(metrics_row(fresh, record.task.kind) == record.metrics)) flag("metrics row mismatch");
  return v;
}

std::optional<std::uint64_t> critical_steps_to_target(const Policy& policy, const TaskSpec& task, std::uint64_t seed,
                                                      const RolloutContext& ctx, double target) {
  EpisodeRunner runner(task, seed, ctx);
  while (!runner.done()) {
    runner.step(policy);
    const auto& stages = runner.env().stages();
    if (runner.done()) break;
    auto answer = runner.env().provisional_answer();
    answer.submitted = true;
    if (score_answer(task, answer) >= target) return critical_steps(stages) + 1;
  }
  const auto trace = runner.trace();
  if (r_perf(task, trace) >= target) return critical_steps(trace.stages);
  return std::nullopt;
}

std::optional<double> SpeedupRow::speedup() const {
  if (!serial_critical_steps || !swarm_critical_steps || *swarm_critical_steps == 0) return std::nullopt;
  return static_cast<double>(*serial_critical_steps) / static_cast<double>(*swarm_critical_steps);
}

std::vector<SpeedupRow> speedup_table(const TaskSpec& task, std::uint64_t seed, const RolloutContext& ctx,
                                      const SpeedupConfig& cfg) {
  SnapshotStore store;
  const auto swarm = store.resolve(cfg.swarm);
  std::vector<std::unique_ptr<Policy>> serial;
  for (const auto& s : cfg.serial) serial.push_back(store.resolve(s));
  std::vector<SpeedupRow> rows;
  for (double target : cfg.targets) {
    SpeedupRow row;
    row.task_id = task.task_id;
    row.target_r_perf = target;
    row.swarm_critical_steps = critical_steps_to_target(*swarm, task, seed, ctx, target);
    for (const auto& p : serial) {
      const auto c = critical_steps_to_target(*p, task, seed, ctx, target);
      if (c && (!row.serial_critical_steps || *c < *row.serial_critical_steps)) row.serial_critical_steps = c;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string speedup_csv_header() { return "task_id,target_r_perf,serial_critical_steps,swarm_critical_steps,speedup"; }

std::string to_csv(const SpeedupRow& row) {
  auto num = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("inf"); };
  char target[32], speed[32] = "nan";
  std::snprintf(target, sizeof target, "%.2f", row.target_r_perf);
  if (auto s = row.speedup()) std::snprintf(speed, sizeof speed, "%.6f", *s);
  return row.task_id + "," + target + "," + num(row.serial_critical_steps) + "," + num(row.swarm_critical_steps) +
         "," + speed;
}

namespace {

constexpr std::uint64_t kEvalSalt = 0x6576616c;

EvalStats summarize(const std::vector<EpisodeTrace>& traces, const std::vector<RolloutRequest>& requests) {
  EvalStats st;
  st.episodes = traces.size();
  if (traces.empty()) return st;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& tr = traces[i];
    const auto par = parallelism_degree(tr.stages);
    st.mean_r_perf += r_perf(requests[i].task, tr);
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

std::vector<RolloutRequest> eval_requests(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto tasks = eval_task_set(cfg, seed);
  std::vector<RolloutRequest> out;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    for (std::uint32_t e = 0; e < cfg.eval_episodes; ++e) out.push_back({tasks[i], derive_seed(seed, {kEvalSalt, i, e})});
  return out;
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error(ErrorCode::precondition, "cannot create " + path + ": " + ec.message());
  }
  std::string path(const std::string& name) const { return (root_ / name).string(); }
  std::string write(const std::string& name, const std::string& content, RunSummary& summary) const {
    const auto p = path(name);
    fs::create_directories(fs::path(p).parent_path());
    write_file(p, content);
    summary.files.push_back(p);
    return p;
  }

 private:
  fs::path root_;
};

struct EvalOutputs {
  std::string traces;
  std::string metrics = metrics_csv_header() + "\n";
};

void evaluate_into(const ExperimentConfig& cfg, const RolloutContext& ctx, const Policy& policy,
                   const std::string& label, std::uint64_t seed, EvalOutputs& out, RunSummary& summary) {
  const auto requests = eval_requests(cfg, seed);
  auto traces = rollout_manager(requests, policy, ctx, cfg.concurrency_limit);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto& tr = traces[i];
    // evaluation scores with the auxiliary weights at the end of their schedule
    const auto t_end = cfg.parl.anneal ? cfg.parl.anneal_horizon : 0;
    tr.reward = parl_reward(requests[i].task, tr, cfg.parl, t_end);
    const auto rec = make_trace_record(requests[i].task, tr, ctx, cfg.parl.parallel_cap, cfg.trace_level);
    out.traces += to_jsonl(rec) + "\n";
    out.metrics += to_csv(rec.metrics) + "\n";
  }
  summary.episodes += traces.size();
  summary.evaluations[label + "@seed" + std::to_string(seed)] = summarize(traces, requests);
}

void write_speedup(const ExperimentConfig& cfg, const RolloutContext& ctx, const OutputDir& dir, RunSummary& summary) {
  if (!cfg.speedup) return;
  std::string csv = speedup_csv_header() + "\n";
  for (auto seed : cfg.seeds) {
    const auto requests = eval_requests(cfg, seed);
    for (const auto& r : requests) {
      if (r.task.kind != TaskKind::WideSearch) continue;
      for (auto& row : speedup_table(r.task, r.seed, ctx, *cfg.speedup)) {
        csv += to_csv(row) + "\n";
        summary.speedup.push_back(std::move(row));
      }
    }
  }
  dir.write("speedup.csv", csv, summary);
}

}  // namespace

RunSummary run_evaluation(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ctx = cfg.context();
  RunSummary summary;
  const OutputDir dir(cfg.output_dir);
  SnapshotStore store;
  EvalOutputs out;
  for (auto seed : cfg.seeds) {
    for (const auto& label : cfg.policies) {
      if (label == "trained") throw Error(ErrorCode::config_error, "'trained' needs the train command");
      evaluate_into(cfg, ctx, *store.resolve(label), label, seed, out, summary);
    }
  }
  dir.write("traces.jsonl", out.traces, summary);
  dir.write("metrics.csv", out.metrics, summary);
  dir.write("vocabulary.json", vocabulary_manifest(ctx.vocab).dump(2) + "\n", summary);
  write_speedup(cfg, ctx, dir, summary);
  return summary;
}

RunSummary run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ctx = cfg.context();
  RunSummary summary;
  const OutputDir dir(cfg.output_dir);
  SnapshotStore store;
  EvalOutputs out;
  for (auto seed : cfg.seeds) {
    const auto tag = "seed" + std::to_string(seed);
    const auto ckpt_path = dir.path("checkpoints/" + tag + ".json");
    const auto curve_path = dir.path("curve-" + tag + ".csv");
    std::optional<Trainer> trainer;
    std::string curve = curve_csv_header() + "\n";
    if (fs::exists(ckpt_path)) {
      auto ckpt = parse_json(read_file(ckpt_path)).get<Checkpoint>();
      const auto resumed_at = ckpt.iteration;
      trainer.emplace(cfg.trainer_config(seed), std::move(ckpt));
      if (fs::exists(curve_path)) {
        // keep the rows written before the checkpoint
        std::istringstream in(read_file(curve_path));
        std::string line;
        std::getline(in, line);
        for (std::uint64_t i = 0; i < resumed_at && std::getline(in, line);) {
          if (line.empty()) continue;
          curve += line + "\n";
          ++i;
        }
      }
    } else {
      trainer.emplace(cfg.trainer_config(seed));
    }
    auto& stats = summary.curves[seed];
    trainer->run(cfg.rl.iterations, [&](const IterationStats& s) {
      stats.push_back(s);
      curve += to_csv(s) + "\n";
      if (cfg.checkpoint_every && trainer->iteration() % cfg.checkpoint_every == 0) {
        fs::create_directories(fs::path(ckpt_path).parent_path());
        write_file(curve_path, curve);
        write_file(ckpt_path, json(trainer->checkpoint()).dump() + "\n");
      }
    });
    dir.write("curve-" + tag + ".csv", curve, summary);
    dir.write("checkpoints/" + tag + ".json", json(trainer->checkpoint()).dump() + "\n", summary);
    const auto& params = trainer->params();
    dir.write("snapshots/" + params.snapshot_id().substr(6) + ".json", json(params).dump() + "\n", summary);

    for (const auto& label : cfg.policies) {
      if (label == "trained") {
        evaluate_into(cfg, ctx, SoftmaxPolicy(params), label, seed, out, summary);
      } else {
        evaluate_into(cfg, ctx, *store.resolve(label), label, seed, out, summary);
      }
    }
  }
  dir.write("traces.jsonl", out.traces, summary);
  dir.write("metrics.csv", out.metrics, summary);
  dir.write("vocabulary.json", vocabulary_manifest(ctx.vocab).dump(2) + "\n", summary);
  write_speedup(cfg, ctx, dir, summary);
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  for (const auto& p : cfg.policies)
    if (p == "trained") return run_training(cfg);
  return run_evaluation(cfg);
}

std::string report_metrics(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header())
    throw Error(ErrorCode::parse_error, path + ": not a metrics CSV");
  struct Acc {
    std::size_t n = 0;
    double critical = 0, total = 0, max_width = 0, finish = 0, perf = 0;
  };
  std::map<std::string, Acc> by_kind;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw Error(ErrorCode::parse_error, "malformed metrics row: " + line);
    auto& a = by_kind[f[1]];
    try {
      ++a.n;
      a.critical += std::stod(f[2]);
      a.total += std::stod(f[3]);
      a.max_width += std::stod(f[4]);
      a.finish += std::stod(f[6]);
      a.perf += std::stod(f[7]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse_error, "malformed metrics row: " + line);
    }
  }
  std::string out = "kind,episodes,mean_critical_steps,mean_total_steps,mean_max_width,mean_finish_rate,mean_r_perf\n";
  for (const auto& [kind, a] : by_kind) {
    const double n = static_cast<double>(a.n);
    char buf[200];
    std::snprintf(buf, sizeof buf, ",%zu,%.4f,%.4f,%.4f,%.4f,%.4f\n", a.n, a.critical / n, a.total / n,
                  a.max_width / n, a.finish / n, a.perf / n);
    out += kind + buf;
  }
  return out;
}

}  // namespace swarm
