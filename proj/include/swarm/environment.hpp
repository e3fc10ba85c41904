#pragma once

// Gym-like episodic environment. The orchestrator acts through step(); tool
// calls are simulated against the task's hidden ground truth, and frozen
// sub-agents are scripted stochastic solvers whose summaries come back as
// observations.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "swarm/common.hpp"
#include "swarm/records.hpp"
#include "swarm/task_gen.hpp"

namespace swarm {

enum class ToolName { search, fetch, download };

const char* to_string(ToolName tool);
ToolName tool_from_string(const std::string& s);

struct ToolCall {
  ToolName tool = ToolName::search;
  std::string query;
  bool operator==(const ToolCall&) const = default;
};

struct ToolResult {
  ToolName tool = ToolName::search;
  std::string query;
  std::vector<std::string> candidates;
  std::optional<std::string> value;
  bool resolved_unit = false;  // this call completed a work unit
  bool not_found = false;

  std::uint32_t tokens() const;
  bool operator==(const ToolResult&) const = default;
};

/// Steps to solve one unit = remaining unit cost * unit_cost + U{0..jitter}.
struct StepCostModel {
  std::uint32_t unit_cost = 1;
  std::uint32_t jitter = 0;
  bool operator==(const StepCostModel&) const = default;
};

struct SubagentProfile {
  std::string name;
  std::string system_prompt;
  double competence = 1.0;  // per-unit success probability in (0, 1]
  StepCostModel cost;
  bool operator==(const SubagentProfile&) const = default;
};

/// Frozen behaviour attached to a system prompt. create_subagent calls whose
/// system_prompt matches a template get its competence and cost model.
struct AgentTemplate {
  std::string name;
  std::string system_prompt;
  double competence = 1.0;
  StepCostModel cost;
  bool operator==(const AgentTemplate&) const = default;
};

struct EnvConfig {
  std::vector<AgentTemplate> templates;
  double fallback_competence = 0.5;
  StepCostModel fallback_cost;
  /// Steps charged to a sub-agent that is launched with nothing to do.
  std::uint32_t idle_spawn_steps = 1;
  /// Run group members on worker threads. Results are identical either way.
  bool concurrent_subagents = false;

  static EnvConfig standard();
  bool operator==(const EnvConfig&) const = default;
};

struct CreateSubagent {
  std::string name;
  std::string system_prompt;
  bool operator==(const CreateSubagent&) const = default;
};

struct SubtaskAssignment {
  std::string agent_name;
  std::vector<std::size_t> units;  // indices of the parent task's work units
  std::uint64_t seed = 0;
  bool operator==(const SubtaskAssignment&) const = default;
};

struct PayloadEntry {
  std::size_t unit = 0;
  std::string value;  // item value, branch leaf or file id
  bool operator==(const PayloadEntry&) const = default;
};

struct SubtaskResult {
  std::string agent_name;
  std::uint32_t steps_used = 0;
  bool finished = false;
  std::vector<PayloadEntry> payload;
  std::uint32_t summary_tokens = 1;
  std::string error;
  bool operator==(const SubtaskResult&) const = default;
};

struct AssignTasks {
  std::vector<SubtaskAssignment> assignments;
  bool operator==(const AssignTasks&) const = default;
};

struct Finish {
  Answer answer;
  bool operator==(const Finish&) const = default;
};

/// An orchestrator action that could not be turned into a legal call. It
/// still occupies a stage and a step.
struct FailedAction {
  std::string reason;
  bool operator==(const FailedAction&) const = default;
};

using Action = std::variant<ToolCall, CreateSubagent, AssignTasks, Finish, FailedAction>;

std::string summarize(const Action& action);

struct HistoryEntry {
  std::string action;
  std::string result;
  bool operator==(const HistoryEntry&) const = default;
};

struct Observation {
  std::string task_description;
  std::vector<HistoryEntry> visible_history;
  std::uint32_t remaining_orchestrator_steps = 0;
  std::uint32_t orchestrator_context_tokens = 0;

  // Orchestrator-visible bookkeeping.
  TaskKind kind = TaskKind::WideSearch;
  std::uint32_t orchestrator_max_steps = 0;
  std::uint32_t total_units = 0;
  std::uint32_t unresolved_units = 0;
  std::uint32_t live_agents = 0;
  std::uint32_t last_assigned = 0;
  std::uint32_t last_completed = 0;
  std::uint32_t stages = 0;

  bool operator==(const Observation&) const = default;
};

struct StepOutcome {
  Observation observation;
  bool done = false;
  std::string error;  // non-empty when the stage failed
};

class Environment {
 public:
  /// Fresh episode. Throws Error(invalid_spec) for inconsistent specs.
  static std::pair<Environment, Observation> reset(TaskSpec task, std::uint64_t seed,
                                                   EnvConfig config = EnvConfig::standard());

  /// Applies one orchestrator action and appends exactly one StageRecord.
  StepOutcome step(const Action& action);

  /// Simulated tool lookup. Mutates unit progress but records no stage;
  /// step() is the orchestrator entry point.
  ToolResult exec_tool(const ToolCall& call);

  /// Simulates one frozen sub-agent against the current progress. Pure.
  SubtaskResult run_subagent(const SubagentProfile& profile,
                             const SubtaskAssignment& assignment) const;

  /// Runs every assignment against the same pre-group state, then merges
  /// payloads in assignment order. Throws Error(precondition) when empty.
  std::vector<SubtaskResult> run_parallel_group(const std::vector<SubtaskAssignment>& assignments);

  Observation observe() const;
  Answer provisional_answer() const;
  Answer final_answer() const;

  const TaskSpec& task() const { return task_; }
  std::uint64_t seed() const { return seed_; }
  const EnvConfig& config() const { return config_; }
  const std::vector<StageRecord>& stages() const { return stages_; }
  const std::vector<SubagentProfile>& agents() const { return agents_; }
  const SubagentProfile* find_agent(const std::string& name) const;
  bool done() const { return done_; }
  TerminalFlag terminal_flag() const { return flag_; }
  bool resolved(std::size_t unit) const { return resolved_.at(unit); }
  std::vector<std::size_t> unresolved_units() const;
  std::uint32_t remaining_cost(std::size_t unit) const;
  /// Key the next tool call on `unit` should address (deep search: the
  /// current hop of the branch).
  std::string frontier_key(std::size_t unit) const;
  std::uint32_t remaining_orchestrator_steps() const { return remaining_; }

  /// Ends the episode from outside (the rollout's token cap).
  void force_terminate(TerminalFlag flag);

 private:
  Environment(TaskSpec task, std::uint64_t seed, EnvConfig config);

  SubagentProfile profile_for(const CreateSubagent& call) const;
  void resolve(std::size_t unit, std::string value);
  std::uint32_t resolved_count() const;

  TaskSpec task_;
  std::uint64_t seed_ = 0;
  EnvConfig config_;

  std::vector<std::uint32_t> progress_;
  std::vector<bool> resolved_;
  std::vector<std::string> collected_;
  std::vector<SubagentProfile> agents_;
  std::vector<StageRecord> stages_;
  std::vector<HistoryEntry> history_;
  std::uint32_t remaining_ = 0;
  std::uint32_t context_tokens_ = 0;
  bool done_ = false;
  TerminalFlag flag_ = TerminalFlag::none;
  Answer submitted_;
};

/// JSON text of the two orchestration tool schemas (create_subagent and
/// assign_task) exposed to the orchestrator.
std::string orchestration_tool_schemas();

/// Prompt text for an assign_task call; parse_assignment_prompt inverts it.
std::string assignment_prompt(const TaskSpec& task, const std::vector<std::size_t>& units);
std::vector<std::size_t> parse_assignment_prompt(const std::string& prompt);

}  // namespace swarm
