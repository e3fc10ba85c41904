#include "swarm/serialization.hpp"

#include <fstream>
#include <sstream>

namespace swarm {
namespace {

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::parse_error, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
void opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::config_error, std::string(what) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw Error(ErrorCode::config_error, std::string(what) + ": unknown key '" + k + "'");
  }
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::config_error, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::precondition, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::precondition, "write failed for " + path);
}

void to_json(json& j, const StepLimits& v) {
  j = {{"orchestrator_max_steps", v.orchestrator_max_steps},
       {"subagent_max_steps", v.subagent_max_steps},
       {"max_tokens", v.max_tokens}};
}

void from_json(const json& j, StepLimits& v) {
  v.orchestrator_max_steps = get<std::uint32_t>(j, "orchestrator_max_steps");
  v.subagent_max_steps = get<std::uint32_t>(j, "subagent_max_steps");
  v.max_tokens = get<std::uint32_t>(j, "max_tokens");
}

void to_json(json& j, const TaskSpec& v) {
  j = json::object();
  j["task_id"] = v.task_id;
  j["kind"] = to_string(v.kind);
  j["seed"] = v.seed;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WideParams>)
          j["params"] = {{"n_items", p.n_items}, {"sources_per_item", p.sources_per_item}};
        else if constexpr (std::is_same_v<T, DeepParams>)
          j["params"] = {{"depth", p.depth}, {"branching", p.branching}};
        else
          j["params"] = {{"n_files", p.n_files}, {"file_cost", p.file_cost}};
      },
      v.params);
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        json g = json::object();
        if constexpr (std::is_same_v<T, WideTruth>) {
          g["items"] = json::array();
          for (const auto& i : t.items)
            g["items"].push_back({{"key", i.key}, {"value", i.value}, {"sources_required", i.sources_required}});
        } else if constexpr (std::is_same_v<T, DeepTruth>) {
          g["answer"] = t.answer;
          g["branches"] = json::array();
          for (const auto& b : t.branches) g["branches"].push_back({{"hops", b.hops}, {"leaf", b.leaf}});
        } else {
          g["files"] = json::array();
          for (const auto& f : t.files) g["files"].push_back({{"id", f.id}, {"cost", f.cost}});
        }
        j["ground_truth"] = std::move(g);
      },
      v.ground_truth);
  j["limits"] = v.limits;
}

void from_json(const json& j, TaskSpec& v) {
  v.task_id = get<std::string>(j, "task_id");
  v.kind = task_kind_from_string(get<std::string>(j, "kind"));
  v.seed = get<std::uint64_t>(j, "seed");
  const auto p = get<json>(j, "params");
  const auto g = get<json>(j, "ground_truth");
  switch (v.kind) {
    case TaskKind::WideSearch: {
      v.params = WideParams{get<std::uint32_t>(p, "n_items"), get<std::uint32_t>(p, "sources_per_item")};
      WideTruth t;
      for (const auto& i : get<json>(g, "items"))
        t.items.push_back(
            {get<std::string>(i, "key"), get<std::string>(i, "value"), get<std::uint32_t>(i, "sources_required")});
      v.ground_truth = std::move(t);
      break;
    }
    case TaskKind::DeepSearch: {
      v.params = DeepParams{get<std::uint32_t>(p, "depth"), get<std::uint32_t>(p, "branching")};
      DeepTruth t;
      t.answer = get<std::string>(g, "answer");
      for (const auto& b : get<json>(g, "branches"))
        t.branches.push_back({get<std::vector<std::string>>(b, "hops"), get<std::string>(b, "leaf")});
      v.ground_truth = std::move(t);
      break;
    }
    case TaskKind::BatchDownload: {
      v.params = BatchParams{get<std::uint32_t>(p, "n_files"), get<std::uint32_t>(p, "file_cost")};
      BatchTruth t;
      for (const auto& f : get<json>(g, "files"))
        t.files.push_back({get<std::string>(f, "id"), get<std::uint32_t>(f, "cost")});
      v.ground_truth = std::move(t);
      break;
    }
  }
  v.limits = get<StepLimits>(j, "limits");
}

void to_json(json& j, const StageRecord& v) {
  j = {{"stage_index", v.stage_index}, {"main_steps", v.main_steps}, {"sub_steps", v.sub_steps},
       {"assigned", v.assigned},       {"completed", v.completed},   {"action", v.action},
       {"failed", v.failed},           {"error", v.error},           {"routed_tokens", v.routed_tokens},
       {"resolved_units", v.resolved_units}};
}

void from_json(const json& j, StageRecord& v) {
  v.stage_index = get<std::uint32_t>(j, "stage_index");
  v.main_steps = get<std::uint32_t>(j, "main_steps");
  v.sub_steps = get<std::vector<std::uint32_t>>(j, "sub_steps");
  v.assigned = get<std::uint32_t>(j, "assigned");
  v.completed = get<std::uint32_t>(j, "completed");
  v.action = get<std::string>(j, "action");
  v.failed = get<bool>(j, "failed");
  v.error = get<std::string>(j, "error");
  v.routed_tokens = get<std::uint32_t>(j, "routed_tokens");
  v.resolved_units = get<std::uint32_t>(j, "resolved_units");
}

void to_json(json& j, const Answer& v) {
  j = {{"items", v.items}, {"text", v.text}, {"files", v.files}, {"submitted", v.submitted}};
}

void from_json(const json& j, Answer& v) {
  v.items = get<std::map<std::string, std::string>>(j, "items");
  v.text = get<std::string>(j, "text");
  v.files = get<std::vector<std::string>>(j, "files");
  v.submitted = get<bool>(j, "submitted");
}

void to_json(json& j, const RewardBreakdown& v) {
  j = {{"r_perf", v.r_perf},       {"r_parallel", v.r_parallel}, {"r_finish", v.r_finish},
       {"lambda1_t", v.lambda1_t}, {"lambda2_t", v.lambda2_t},   {"composite", v.composite}};
}

void from_json(const json& j, RewardBreakdown& v) {
  v.r_perf = get<double>(j, "r_perf");
  v.r_parallel = get<double>(j, "r_parallel");
  v.r_finish = get<double>(j, "r_finish");
  v.lambda1_t = get<double>(j, "lambda1_t");
  v.lambda2_t = get<double>(j, "lambda2_t");
  v.composite = get<double>(j, "composite");
}

void to_json(json& j, const TokenRecord& v) {
  j = {{"token", v.token}, {"behavior_logprob", v.behavior_logprob}, {"features", v.features}};
}

void from_json(const json& j, TokenRecord& v) {
  v.token = get<std::uint32_t>(j, "token");
  v.behavior_logprob = get<double>(j, "behavior_logprob");
  v.features = get<std::vector<double>>(j, "features");
}

void to_json(json& j, const EpisodeTrace& v) {
  j = {{"task_id", v.task_id},
       {"seed", v.seed},
       {"snapshot_id", v.snapshot_id},
       {"tokens", v.tokens},
       {"stages", v.stages},
       {"final_answer", v.final_answer},
       {"reward", v.reward},
       {"terminal_flag", to_string(v.terminal_flag)},
       {"partial_rollout", v.partial_rollout},
       {"error", v.error}};
}

void from_json(const json& j, EpisodeTrace& v) {
  v.task_id = get<std::string>(j, "task_id");
  v.seed = get<std::uint64_t>(j, "seed");
  v.snapshot_id = get<std::string>(j, "snapshot_id");
  v.tokens = j.contains("tokens") ? get<std::vector<TokenRecord>>(j, "tokens") : std::vector<TokenRecord>{};
  v.stages = get<std::vector<StageRecord>>(j, "stages");
  v.final_answer = get<Answer>(j, "final_answer");
  v.reward = get<RewardBreakdown>(j, "reward");
  v.terminal_flag = terminal_flag_from_string(get<std::string>(j, "terminal_flag"));
  v.partial_rollout = get<bool>(j, "partial_rollout");
  v.error = j.contains("error") ? get<std::string>(j, "error") : std::string{};
}

void to_json(json& j, const MetricsRow& v) {
  j = {{"task_id", v.task_id},         {"kind", v.kind},           {"critical_steps", v.critical_steps},
       {"total_steps", v.total_steps}, {"max_width", v.max_width}, {"mean_width", v.mean_width},
       {"finish_rate", v.finish_rate}, {"r_perf", v.r_perf},       {"terminal_flag", v.terminal_flag}};
}

void from_json(const json& j, MetricsRow& v) {
  v.task_id = get<std::string>(j, "task_id");
  v.kind = get<std::string>(j, "kind");
  v.critical_steps = get<std::uint64_t>(j, "critical_steps");
  v.total_steps = get<std::uint64_t>(j, "total_steps");
  v.max_width = get<std::uint32_t>(j, "max_width");
  v.mean_width = get<double>(j, "mean_width");
  v.finish_rate = get<double>(j, "finish_rate");
  v.r_perf = get<double>(j, "r_perf");
  v.terminal_flag = get<std::string>(j, "terminal_flag");
}

void to_json(json& j, const PolicyParams& v) {
  j = {{"n_features", v.n_features()},
       {"n_actions", v.n_actions()},
       {"theta", std::vector<double>(v.theta().begin(), v.theta().end())}};
}

void from_json(const json& j, PolicyParams& v) {
  const auto f = get<std::size_t>(j, "n_features");
  const auto a = get<std::size_t>(j, "n_actions");
  const auto theta = get<std::vector<double>>(j, "theta");
  if (theta.size() != f * a) throw Error(ErrorCode::dimension_mismatch, "theta size != n_features * n_actions");
  v = PolicyParams(f, a);
  std::copy(theta.begin(), theta.end(), v.theta().begin());
}

void to_json(json& j, const BudgetTable& v) { j = v.entries(); }

void from_json(const json& j, BudgetTable& v) {
  v = BudgetTable{};
  try {
    for (const auto& [k, b] : j.get<std::map<std::string, std::uint32_t>>()) v.set(k, b);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("budget table: ") + e.what());
  }
  v.freeze();
}

void to_json(json& j, const Checkpoint& v) {
  j = {{"version", v.version},
       {"iteration", v.iteration},
       {"params", v.params},
       {"behavior", v.behavior},
       {"budgets", v.budgets}};
}

void from_json(const json& j, Checkpoint& v) {
  v.version = get<int>(j, "version");
  v.iteration = get<std::uint64_t>(j, "iteration");
  v.params = get<PolicyParams>(j, "params");
  v.behavior = get<PolicyParams>(j, "behavior");
  v.budgets = get<BudgetTable>(j, "budgets");
}

void to_json(json& j, const RLConfig& v) {
  j = {{"alpha", v.alpha},
       {"beta", v.beta},
       {"tau", v.tau},
       {"K", v.K},
       {"learning_rate", v.learning_rate},
       {"batch_problems", v.batch_problems},
       {"iterations", v.iterations},
       {"behavior_lag", v.behavior_lag}};
}

void from_json(const json& j, RLConfig& v) {
  check_keys(j, {"alpha", "beta", "tau", "K", "learning_rate", "batch_problems", "iterations", "behavior_lag"}, "rl");
  opt(j, "alpha", v.alpha);
  opt(j, "beta", v.beta);
  opt(j, "tau", v.tau);
  opt(j, "K", v.K);
  opt(j, "learning_rate", v.learning_rate);
  opt(j, "batch_problems", v.batch_problems);
  opt(j, "iterations", v.iterations);
  opt(j, "behavior_lag", v.behavior_lag);
}

void to_json(json& j, const PARLConfig& v) {
  j = {{"lambda1_init", v.lambda1_init},
       {"lambda2_init", v.lambda2_init},
       {"anneal_horizon", v.anneal_horizon},
       {"parallel_cap", v.parallel_cap},
       {"anneal", v.anneal}};
}

void from_json(const json& j, PARLConfig& v) {
  check_keys(j, {"lambda1_init", "lambda2_init", "anneal_horizon", "parallel_cap", "anneal"}, "parl");
  opt(j, "lambda1_init", v.lambda1_init);
  opt(j, "lambda2_init", v.lambda2_init);
  opt(j, "anneal_horizon", v.anneal_horizon);
  opt(j, "parallel_cap", v.parallel_cap);
  opt(j, "anneal", v.anneal);
}

void to_json(json& j, const ToggleConfig& v) {
  j = {{"enabled", v.enabled},
       {"accuracy_threshold", v.accuracy_threshold},
       {"m", v.m},
       {"rho", v.rho},
       {"fallback_budget", v.fallback_budget}};
}

void from_json(const json& j, ToggleConfig& v) {
  check_keys(j, {"enabled", "accuracy_threshold", "m", "rho", "fallback_budget"}, "toggle");
  opt(j, "enabled", v.enabled);
  opt(j, "accuracy_threshold", v.accuracy_threshold);
  opt(j, "m", v.m);
  opt(j, "rho", v.rho);
  opt(j, "fallback_budget", v.fallback_budget);
}

void to_json(json& j, const TaskDistribution& v) {
  std::vector<std::string> kinds;
  for (auto k : v.kinds) kinds.push_back(to_string(k));
  j = {{"kinds", kinds},
       {"min_units", v.min_units},
       {"max_units", v.max_units},
       {"sources_per_item", v.sources_per_item},
       {"depth", v.depth},
       {"min_file_cost", v.min_file_cost},
       {"max_file_cost", v.max_file_cost}};
  if (v.limits) j["limits"] = *v.limits;
}

void from_json(const json& j, TaskDistribution& v) {
  check_keys(j,
             {"kinds", "min_units", "max_units", "sources_per_item", "depth", "min_file_cost", "max_file_cost",
              "limits"},
             "tasks");
  if (j.contains("kinds")) {
    std::vector<std::string> kinds;
    opt(j, "kinds", kinds);
    v.kinds.clear();
    try {
      for (const auto& k : kinds) v.kinds.push_back(task_kind_from_string(k));
    } catch (const Error& e) {
      throw Error(ErrorCode::config_error, e.message());
    }
  }
  opt(j, "min_units", v.min_units);
  opt(j, "max_units", v.max_units);
  opt(j, "sources_per_item", v.sources_per_item);
  opt(j, "depth", v.depth);
  opt(j, "min_file_cost", v.min_file_cost);
  opt(j, "max_file_cost", v.max_file_cost);
  if (j.contains("limits")) {
    check_keys(j["limits"], {"orchestrator_max_steps", "subagent_max_steps", "max_tokens"}, "limits");
    StepLimits l;
    opt(j["limits"], "orchestrator_max_steps", l.orchestrator_max_steps);
    opt(j["limits"], "subagent_max_steps", l.subagent_max_steps);
    opt(j["limits"], "max_tokens", l.max_tokens);
    v.limits = l;
  }
}

void to_json(json& j, const VocabularyConfig& v) {
  std::vector<std::string> tools, schemes;
  for (auto t : v.tools) tools.push_back(to_string(t));
  for (auto s : v.schemes) schemes.push_back(to_string(s));
  j = {{"tools", tools},
       {"slots", v.slots},
       {"templates", v.templates},
       {"group_sizes", v.group_sizes},
       {"schemes", schemes}};
}

void from_json(const json& j, VocabularyConfig& v) {
  check_keys(j, {"tools", "slots", "templates", "group_sizes", "schemes"}, "vocabulary");
  try {
    if (j.contains("tools")) {
      v.tools.clear();
      for (const auto& t : j["tools"].get<std::vector<std::string>>()) v.tools.push_back(tool_from_string(t));
    }
    if (j.contains("schemes")) {
      v.schemes.clear();
      for (const auto& s : j["schemes"].get<std::vector<std::string>>())
        v.schemes.push_back(partition_scheme_from_string(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("vocabulary: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.message());
  }
  opt(j, "slots", v.slots);
  opt(j, "templates", v.templates);
  opt(j, "group_sizes", v.group_sizes);
}

void to_json(json& j, const StepCostModel& v) { j = {{"unit_cost", v.unit_cost}, {"jitter", v.jitter}}; }

void from_json(const json& j, StepCostModel& v) {
  check_keys(j, {"unit_cost", "jitter"}, "cost");
  opt(j, "unit_cost", v.unit_cost);
  opt(j, "jitter", v.jitter);
}

void to_json(json& j, const AgentTemplate& v) {
  j = {{"name", v.name}, {"system_prompt", v.system_prompt}, {"competence", v.competence}, {"cost", v.cost}};
}

void from_json(const json& j, AgentTemplate& v) {
  check_keys(j, {"name", "system_prompt", "competence", "cost"}, "template");
  opt(j, "name", v.name);
  opt(j, "system_prompt", v.system_prompt);
  opt(j, "competence", v.competence);
  opt(j, "cost", v.cost);
}

void to_json(json& j, const EnvConfig& v) {
  j = {{"templates", v.templates},
       {"fallback_competence", v.fallback_competence},
       {"fallback_cost", v.fallback_cost},
       {"idle_spawn_steps", v.idle_spawn_steps},
       {"concurrent_subagents", v.concurrent_subagents}};
}

void from_json(const json& j, EnvConfig& v) {
  check_keys(j, {"templates", "fallback_competence", "fallback_cost", "idle_spawn_steps", "concurrent_subagents"},
             "env");
  if (j.contains("templates")) {
    // entries override standard templates by name, or add new ones
    for (const auto& tj : j["templates"]) {
      std::string name;
      opt(tj, "name", name);
      auto it = std::find_if(v.templates.begin(), v.templates.end(), [&](const auto& t) { return t.name == name; });
      if (it == v.templates.end()) {
        AgentTemplate t;
        from_json(tj, t);
        v.templates.push_back(std::move(t));
      } else {
        from_json(tj, *it);
      }
    }
  }
  opt(j, "fallback_competence", v.fallback_competence);
  opt(j, "fallback_cost", v.fallback_cost);
  opt(j, "idle_spawn_steps", v.idle_spawn_steps);
  opt(j, "concurrent_subagents", v.concurrent_subagents);
}

json vocabulary_manifest(const Vocabulary& vocab) {
  json tokens = json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) tokens.push_back({{"index", i}, {"code", vocab[i].code()}});
  json features = json::array();
  for (const char* f : kFeatureNames) features.push_back(f);
  return {{"tokens", tokens}, {"features", features}, {"config", vocab.config()}};
}

}  // namespace swarm
