#pragma once

// JSON forms of the shared records. Field names match the struct members.
// Parsing errors surface as Error(parse_error); config records reject
// unknown keys with Error(config_error).

#include <json.hpp>

#include "swarm/environment.hpp"
#include "swarm/metrics.hpp"
#include "swarm/optimizer.hpp"
#include "swarm/orchestrator.hpp"
#include "swarm/rewards.hpp"
#include "swarm/task_gen.hpp"

namespace swarm {

using json = nlohmann::json;

void to_json(json& j, const StepLimits& v);
void from_json(const json& j, StepLimits& v);
void to_json(json& j, const TaskSpec& v);
void from_json(const json& j, TaskSpec& v);

void to_json(json& j, const StageRecord& v);
void from_json(const json& j, StageRecord& v);
void to_json(json& j, const Answer& v);
void from_json(const json& j, Answer& v);
void to_json(json& j, const RewardBreakdown& v);
void from_json(const json& j, RewardBreakdown& v);
void to_json(json& j, const TokenRecord& v);
void from_json(const json& j, TokenRecord& v);
void to_json(json& j, const EpisodeTrace& v);
void from_json(const json& j, EpisodeTrace& v);
void to_json(json& j, const MetricsRow& v);
void from_json(const json& j, MetricsRow& v);

void to_json(json& j, const PolicyParams& v);
void from_json(const json& j, PolicyParams& v);
void to_json(json& j, const BudgetTable& v);
void from_json(const json& j, BudgetTable& v);
void to_json(json& j, const Checkpoint& v);
void from_json(const json& j, Checkpoint& v);

void to_json(json& j, const RLConfig& v);
void from_json(const json& j, RLConfig& v);
void to_json(json& j, const PARLConfig& v);
void from_json(const json& j, PARLConfig& v);
void to_json(json& j, const ToggleConfig& v);
void from_json(const json& j, ToggleConfig& v);
void to_json(json& j, const TaskDistribution& v);
void from_json(const json& j, TaskDistribution& v);
void to_json(json& j, const VocabularyConfig& v);
void from_json(const json& j, VocabularyConfig& v);
void to_json(json& j, const StepCostModel& v);
void from_json(const json& j, StepCostModel& v);
void to_json(json& j, const AgentTemplate& v);
void from_json(const json& j, AgentTemplate& v);
void to_json(json& j, const EnvConfig& v);
void from_json(const json& j, EnvConfig& v);

/// Token index -> code table used to decode traces.
json vocabulary_manifest(const Vocabulary& vocab);

/// Parses text, mapping library errors to Error(parse_error).
json parse_json(const std::string& text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Throws Error(config_error) when `j` is not an object or holds a key
/// outside `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what);

}  // namespace swarm
