#include "swarm/environment.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include "swarm/common.hpp"

namespace swarm {

const char* to_string(TerminalFlag flag) {
  switch (flag) {
    case TerminalFlag::none: return "none";
    case TerminalFlag::finished: return "finished";
    case TerminalFlag::budget_exhausted: return "budget_exhausted";
    case TerminalFlag::token_cap: return "token_cap";
  }
  return "?";
}

TerminalFlag terminal_flag_from_string(const std::string& s) {
  if (s == "none") return TerminalFlag::none;
  if (s == "finished") return TerminalFlag::finished;
  if (s == "budget_exhausted") return TerminalFlag::budget_exhausted;
  if (s == "token_cap") return TerminalFlag::token_cap;
  throw Error(ErrorCode::parse_error, "unknown terminal flag '" + s + "'");
}

const char* to_string(ToolName tool) {
  switch (tool) {
    case ToolName::search: return "search";
    case ToolName::fetch: return "fetch";
    case ToolName::download: return "download";
  }
  return "?";
}

ToolName tool_from_string(const std::string& s) {
  if (s == "search") return ToolName::search;
  if (s == "fetch") return ToolName::fetch;
  if (s == "download") return ToolName::download;
  throw Error(ErrorCode::parse_error, "unknown tool '" + s + "'");
}

std::uint32_t ToolResult::tokens() const {
  return 1 + static_cast<std::uint32_t>(candidates.size()) + (value ? 1 : 0);
}

EnvConfig EnvConfig::standard() {
  EnvConfig cfg;
  cfg.templates = {
      {"worker", "You are a focused worker. Resolve every assigned unit and report only the results.",
       1.0, {1, 0}},
      {"searcher", "You are a search specialist. Look up each assigned entity and return its value.",
       0.9, {1, 1}},
      {"downloader", "You are a download agent. Fetch every assigned file and report the file ids.",
       0.8, {1, 0}},
  };
  return cfg;
}

std::string summarize(const Action& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ToolCall>) {
          return std::string(to_string(a.tool)) + "(" + a.query + ")";
        } else if constexpr (std::is_same_v<T, CreateSubagent>) {
          return "create_subagent(" + a.name + ")";
        } else if constexpr (std::is_same_v<T, AssignTasks>) {
          return "assign_task x" + std::to_string(a.assignments.size());
        } else if constexpr (std::is_same_v<T, Finish>) {
          return "finish";
        } else {
          return "failed(" + a.reason + ")";
        }
      },
      action);
}

Environment::Environment(TaskSpec task, std::uint64_t seed, EnvConfig config)
    : task_(std::move(task)), seed_(seed), config_(std::move(config)) {
  const auto n = unit_count(task_);
  progress_.assign(n, 0);
  resolved_.assign(n, false);
  collected_.assign(n, {});
  remaining_ = task_.limits.orchestrator_max_steps;
}

std::pair<Environment, Observation> Environment::reset(TaskSpec task, std::uint64_t seed,
                                                       EnvConfig config) {
  validate(task);
  Environment env(std::move(task), seed, std::move(config));
  auto obs = env.observe();
  return {std::move(env), std::move(obs)};
}

const SubagentProfile* Environment::find_agent(const std::string& name) const {
  for (const auto& a : agents_)
    if (a.name == name) return &a;
  return nullptr;
}

std::vector<std::size_t> Environment::unresolved_units() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < resolved_.size(); ++i)
    if (!resolved_[i]) out.push_back(i);
  return out;
}

std::uint32_t Environment::remaining_cost(std::size_t unit) const {
  if (resolved_.at(unit)) return 0;
  const auto cost = unit_cost(task_, unit);
  return cost > progress_[unit] ? cost - progress_[unit] : 0;
}

std::string Environment::frontier_key(std::size_t unit) const {
  if (auto* deep = std::get_if<DeepTruth>(&task_.ground_truth)) {
    const auto& hops = deep->branches.at(unit).hops;
    return hops[std::min<std::size_t>(progress_[unit], hops.size() - 1)];
  }
  return unit_key(task_, unit);
}

std::uint32_t Environment::resolved_count() const {
  return static_cast<std::uint32_t>(std::count(resolved_.begin(), resolved_.end(), true));
}

void Environment::resolve(std::size_t unit, std::string value) {
  if (resolved_[unit]) return;
  resolved_[unit] = true;
  progress_[unit] = unit_cost(task_, unit);
  collected_[unit] = std::move(value);
}

namespace {

std::string truth_value(const TaskSpec& task, std::size_t unit) {
  return std::visit(
      [unit](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, WideTruth>) return t.items[unit].value;
        else if constexpr (std::is_same_v<T, DeepTruth>) return t.branches[unit].leaf;
        else return t.files[unit].id;
      },
      task.ground_truth);
}

}  // namespace

ToolResult Environment::exec_tool(const ToolCall& call) {
  if (done_) throw Error(ErrorCode::precondition, "exec_tool on a finished episode");
  ToolResult res;
  res.tool = call.tool;
  res.query = call.query;
  const auto n = unit_count(task_);

  switch (call.tool) {
    case ToolName::search: {
      if (auto* deep = std::get_if<DeepTruth>(&task_.ground_truth)) {
        for (std::size_t b = 0; b < deep->branches.size() && !res.value; ++b) {
          const auto& hops = deep->branches[b].hops;
          for (std::size_t h = 0; h < hops.size(); ++h) {
            if (hops[h] != call.query) continue;
            const bool last = h + 1 == hops.size();
            res.value = last ? deep->branches[b].leaf : hops[h + 1];
            res.candidates.push_back(*res.value);
            if (!resolved_[b] && progress_[b] == h) {
              progress_[b] += 1;
              if (last) {
                resolve(b, deep->branches[b].leaf);
                res.resolved_unit = true;
              }
            }
            break;
          }
        }
      } else if (!call.query.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
          auto key = unit_key(task_, i);
          if (key.rfind(call.query, 0) == 0) res.candidates.push_back(std::move(key));
        }
      }
      break;
    }
    case ToolName::fetch: {
      if (auto* wide = std::get_if<WideTruth>(&task_.ground_truth)) {
        for (std::size_t i = 0; i < wide->items.size(); ++i) {
          if (wide->items[i].key != call.query) continue;
          res.candidates.push_back(call.query);
          if (!resolved_[i]) {
            progress_[i] += 1;
            if (progress_[i] >= wide->items[i].sources_required) {
              resolve(i, wide->items[i].value);
              res.resolved_unit = true;
            }
          }
          if (resolved_[i]) res.value = wide->items[i].value;
          break;
        }
      }
      break;
    }
    case ToolName::download: {
      if (auto* batch = std::get_if<BatchTruth>(&task_.ground_truth)) {
        for (std::size_t i = 0; i < batch->files.size(); ++i) {
          if (batch->files[i].id != call.query) continue;
          res.candidates.push_back(call.query);
          if (!resolved_[i]) {
            progress_[i] += 1;
            if (progress_[i] >= batch->files[i].cost) {
              resolve(i, batch->files[i].id);
              res.resolved_unit = true;
            }
          }
          if (resolved_[i]) res.value = batch->files[i].id;
          break;
        }
      }
      break;
    }
  }
  res.not_found = res.candidates.empty() && !res.value;
  return res;
}

SubtaskResult Environment::run_subagent(const SubagentProfile& profile,
                                        const SubtaskAssignment& assignment) const {
  const auto n = unit_count(task_);
  for (auto u : assignment.units)
    if (u >= n)
      throw Error(ErrorCode::invalid_subtask,
                  "unit " + std::to_string(u) + " does not exist in " + task_.task_id);

  SubtaskResult out;
  out.agent_name = profile.name;
  const std::uint32_t limit = task_.limits.subagent_max_steps;

  if (assignment.units.empty()) {
    out.steps_used = std::min(config_.idle_spawn_steps, limit);
    out.finished = false;
    out.summary_tokens = 1;
    return out;
  }

  Rng rng(assignment.seed);
  std::uint64_t steps = 0;
  bool capped = false;
  for (auto u : assignment.units) {
    if (resolved_[u]) {
      out.payload.push_back({u, collected_[u]});
      continue;
    }
    std::uint64_t cost = std::uint64_t(remaining_cost(u)) * profile.cost.unit_cost;
    if (profile.cost.jitter > 0) cost += rng.below(std::uint64_t(profile.cost.jitter) + 1);
    if (steps + cost > limit) {
      steps = limit;
      capped = true;
      break;
    }
    steps += cost;
    if (rng.bernoulli(profile.competence)) out.payload.push_back({u, truth_value(task_, u)});
  }
  out.steps_used = static_cast<std::uint32_t>(steps);
  out.finished = !capped && out.payload.size() == assignment.units.size();
  out.summary_tokens = 1 + static_cast<std::uint32_t>(out.payload.size());
  return out;
}

std::vector<SubtaskResult> Environment::run_parallel_group(
    const std::vector<SubtaskAssignment>& assignments) {
  if (assignments.empty()) throw Error(ErrorCode::precondition, "empty assignment group");

  auto run_one = [this](const SubtaskAssignment& a) -> SubtaskResult {
    const auto* profile = find_agent(a.agent_name);
    if (!profile) {
      SubtaskResult failed;
      failed.agent_name = a.agent_name;
      failed.error = std::string(to_string(ErrorCode::unknown_agent)) + ": " + a.agent_name;
      return failed;
    }
    try {
      return run_subagent(*profile, a);
    } catch (const Error& e) {
      SubtaskResult failed;
      failed.agent_name = a.agent_name;
      failed.error = e.what();
      return failed;
    }
  };

  std::vector<SubtaskResult> results;
  results.reserve(assignments.size());
  if (config_.concurrent_subagents && assignments.size() > 1) {
    std::vector<std::future<SubtaskResult>> futures;
    futures.reserve(assignments.size());
    for (const auto& a : assignments)
      futures.push_back(std::async(std::launch::async, run_one, std::cref(a)));
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (const auto& a : assignments) results.push_back(run_one(a));
  }

  for (const auto& r : results)
    for (const auto& p : r.payload) resolve(p.unit, p.value);
  return results;
}

SubagentProfile Environment::profile_for(const CreateSubagent& call) const {
  SubagentProfile p;
  p.name = call.name;
  p.system_prompt = call.system_prompt;
  p.competence = config_.fallback_competence;
  p.cost = config_.fallback_cost;
  for (const auto& t : config_.templates) {
    if (t.system_prompt == call.system_prompt) {
      p.competence = t.competence;
      p.cost = t.cost;
      break;
    }
  }
  return p;
}

StepOutcome Environment::step(const Action& action) {
  if (done_) throw Error(ErrorCode::precondition, "step on a finished episode");

  StageRecord stage;
  stage.stage_index = static_cast<std::uint32_t>(stages_.size());
  stage.main_steps = 1;
  stage.action = summarize(action);
  std::string result_summary;

  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ToolCall>) {
          auto res = exec_tool(a);
          stage.routed_tokens = res.tokens();
          if (res.not_found) result_summary = "not found";
          else if (res.value) result_summary = *res.value;
          else result_summary = std::to_string(res.candidates.size()) + " candidates";
        } else if constexpr (std::is_same_v<T, CreateSubagent>) {
          stage.routed_tokens = 1;
          if (a.name.empty()) {
            stage.failed = true;
            stage.error = std::string(to_string(ErrorCode::invalid_parameter)) + ": empty agent name";
          } else if (find_agent(a.name)) {
            stage.failed = true;
            stage.error = std::string(to_string(ErrorCode::duplicate_agent)) + ": " + a.name;
          } else {
            agents_.push_back(profile_for(a));
          }
          result_summary = stage.failed ? stage.error : "created " + a.name;
        } else if constexpr (std::is_same_v<T, AssignTasks>) {
          if (a.assignments.empty())
            throw Error(ErrorCode::precondition, "assign_task group is empty");
          auto assignments = a.assignments;
          for (std::size_t i = 0; i < assignments.size(); ++i)
            assignments[i].seed = derive_seed(seed_, {stage.stage_index, i});
          auto results = run_parallel_group(assignments);
          stage.assigned = static_cast<std::uint32_t>(results.size());
          std::uint32_t failures = 0;
          for (const auto& r : results) {
            stage.sub_steps.push_back(r.steps_used);
            stage.routed_tokens += r.summary_tokens;
            if (r.finished) ++stage.completed;
            if (!r.error.empty()) {
              ++failures;
              if (stage.error.empty()) stage.error = r.error;
            }
          }
          stage.failed = failures == results.size();
          result_summary = std::to_string(stage.completed) + "/" + std::to_string(stage.assigned) +
                           " subtasks finished";
          if (!stage.error.empty()) result_summary += "; " + stage.error;
        } else if constexpr (std::is_same_v<T, Finish>) {
          submitted_ = a.answer;
          submitted_.submitted = true;
          done_ = true;
          flag_ = TerminalFlag::finished;
          result_summary = "submitted";
        } else {
          stage.failed = true;
          stage.error = a.reason;
          result_summary = a.reason;
        }
      },
      action);

  remaining_ = remaining_ > stage.main_steps ? remaining_ - stage.main_steps : 0;
  context_tokens_ += stage.routed_tokens;
  stage.resolved_units = resolved_count();
  stages_.push_back(stage);
  history_.push_back({stage.action, result_summary});

  if (!done_ && remaining_ == 0) {
    done_ = true;
    flag_ = TerminalFlag::budget_exhausted;
  }
  return {observe(), done_, stage.error};
}

void Environment::force_terminate(TerminalFlag flag) {
  done_ = true;
  flag_ = flag;
}

Observation Environment::observe() const {
  Observation obs;
  obs.task_description = describe(task_);
  obs.visible_history = history_;
  obs.remaining_orchestrator_steps = remaining_;
  obs.orchestrator_context_tokens = context_tokens_;
  obs.kind = task_.kind;
  obs.orchestrator_max_steps = task_.limits.orchestrator_max_steps;
  obs.total_units = static_cast<std::uint32_t>(resolved_.size());
  obs.unresolved_units = obs.total_units - resolved_count();
  obs.live_agents = static_cast<std::uint32_t>(agents_.size());
  if (!stages_.empty()) {
    obs.last_assigned = stages_.back().assigned;
    obs.last_completed = stages_.back().completed;
  }
  obs.stages = static_cast<std::uint32_t>(stages_.size());
  return obs;
}

Answer Environment::provisional_answer() const {
  Answer a;
  a.submitted = true;
  std::vector<std::string> leaves;
  for (std::size_t i = 0; i < resolved_.size(); ++i) {
    if (!resolved_[i]) continue;
    switch (task_.kind) {
      case TaskKind::WideSearch: a.items[unit_key(task_, i)] = collected_[i]; break;
      case TaskKind::DeepSearch: leaves.push_back(collected_[i]); break;
      case TaskKind::BatchDownload: a.files.push_back(collected_[i]); break;
    }
  }
  if (task_.kind == TaskKind::DeepSearch) a.text = aggregate_leaves(std::move(leaves));
  return a;
}

Answer Environment::final_answer() const {
  Answer a;
  if (submitted_.submitted) a = submitted_;
  if (task_.kind == TaskKind::BatchDownload) {
    // acquisitions are side effects and count whether or not an answer was submitted
    a.files.clear();
    for (std::size_t i = 0; i < resolved_.size(); ++i)
      if (resolved_[i]) a.files.push_back(collected_[i]);
  }
  return a;
}

std::string orchestration_tool_schemas() {
  return R"([
{
 "name": "create_subagent",
 "description": "Create a custom subagent with specific system prompt and name for reuse.",
 "parameters": {
   "type": "object",
   "properties": {
     "name": {
       "type": "string",
       "description": "Unique name for this agent configuration"
     },
     "system_prompt": {
       "type": "string",
       "description": "System prompt defining the agent's role, capabilities, and boundaries"
     }
   },
   "required": ["name", "system_prompt"]
 }
},
{
 "name": "assign_task",
 "description": "Launch a new agent.\nUsage notes:\n1. You can launch multiple agents concurrently whenever possible, to maximize performance;\n2. When the agent is done, it will return a single message back to you.",
 "parameters": {
   "type": "object",
   "properties": {
     "agent": {
       "type": "string",
       "description": "Specify which created agent to use."
     },
     "prompt": {
       "type": "string",
       "description": "The task for the agent to perform"
     }
   },
   "required": ["agent", "prompt"]
 }
}
])";
}

std::string assignment_prompt(const TaskSpec& task, const std::vector<std::size_t>& units) {
  std::ostringstream os;
  os << "Resolve work units [";
  for (std::size_t i = 0; i < units.size(); ++i) os << (i ? "," : "") << units[i];
  os << "] of task " << task.task_id << ":";
  for (std::size_t i = 0; i < units.size(); ++i) os << (i ? ", " : " ") << unit_key(task, units[i]);
  os << '.';
  return os.str();
}

std::vector<std::size_t> parse_assignment_prompt(const std::string& prompt) {
  const auto open = prompt.find('[');
  const auto close = prompt.find(']', open == std::string::npos ? 0 : open);
  if (open == std::string::npos || close == std::string::npos)
    throw Error(ErrorCode::parse_error, "assignment prompt has no unit list");
  std::vector<std::size_t> units;
  std::string body = prompt.substr(open + 1, close - open - 1);
  std::istringstream is(body);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    try {
      units.push_back(static_cast<std::size_t>(std::stoull(tok)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse_error, "bad unit index '" + tok + "'");
    }
  }
  return units;
}

}  // namespace swarm
