#pragma once

// Deterministic generators for the three synthetic task families: wide
// search (many independent items), deep search (independent branches of
// dependent lookups aggregated at the end) and batch download.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace swarm {

enum class TaskKind { WideSearch, DeepSearch, BatchDownload };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct WideParams {
  std::uint32_t n_items = 1;
  std::uint32_t sources_per_item = 1;
  bool operator==(const WideParams&) const = default;
};

struct DeepParams {
  std::uint32_t depth = 1;
  std::uint32_t branching = 1;
  bool operator==(const DeepParams&) const = default;
};

struct BatchParams {
  std::uint32_t n_files = 1;
  std::uint32_t file_cost = 1;
  bool operator==(const BatchParams&) const = default;
};

using TaskParams = std::variant<WideParams, DeepParams, BatchParams>;

struct WideItem {
  std::string key;
  std::string value;
  std::uint32_t sources_required = 1;  // fetches needed to resolve
  bool operator==(const WideItem&) const = default;
};

/// One evidence branch. `hops[0]` is the entry key; looking up hops[h]
/// yields hops[h + 1], and looking up the last hop yields `leaf`.
struct DeepBranch {
  std::vector<std::string> hops;
  std::string leaf;
  bool operator==(const DeepBranch&) const = default;
};

struct BatchFile {
  std::string id;
  std::uint32_t cost = 1;
  bool operator==(const BatchFile&) const = default;
};

struct WideTruth {
  std::vector<WideItem> items;
  bool operator==(const WideTruth&) const = default;
};

struct DeepTruth {
  std::string answer;
  std::vector<DeepBranch> branches;
  bool operator==(const DeepTruth&) const = default;
};

struct BatchTruth {
  std::vector<BatchFile> files;
  bool operator==(const BatchTruth&) const = default;
};

/// Hidden from the policy. Only the environment's tool simulator and the
/// reward functions read it.
using GroundTruth = std::variant<WideTruth, DeepTruth, BatchTruth>;

struct StepLimits {
  std::uint32_t orchestrator_max_steps = 100;
  std::uint32_t subagent_max_steps = 100;
  std::uint32_t max_tokens = 200;
  bool operator==(const StepLimits&) const = default;
};

StepLimits default_limits(TaskKind kind);

struct TaskSpec {
  std::string task_id;
  TaskKind kind = TaskKind::WideSearch;
  std::uint64_t seed = 0;
  TaskParams params;
  GroundTruth ground_truth;
  StepLimits limits;

  bool operator==(const TaskSpec&) const = default;
};

TaskSpec gen_wide_search(std::uint64_t seed, std::uint32_t n_items, std::uint32_t sources_per_item,
                         std::optional<StepLimits> limits = std::nullopt);
TaskSpec gen_deep_search(std::uint64_t seed, std::uint32_t depth, std::uint32_t branching,
                         std::optional<StepLimits> limits = std::nullopt);
TaskSpec gen_batch_download(std::uint64_t seed, std::uint32_t n_files, std::uint32_t file_cost,
                            std::optional<StepLimits> limits = std::nullopt);

TaskSpec generate(TaskKind kind, std::uint64_t seed, const TaskParams& params,
                  std::optional<StepLimits> limits = std::nullopt);

/// Task mixture for training and evaluation. `min_units..max_units` is the
/// item / branch / file count range, drawn uniformly per task.
struct TaskDistribution {
  std::vector<TaskKind> kinds{TaskKind::WideSearch};
  std::uint32_t min_units = 4;
  std::uint32_t max_units = 12;
  std::uint32_t sources_per_item = 1;
  std::uint32_t depth = 2;
  std::uint32_t min_file_cost = 1;
  std::uint32_t max_file_cost = 1;
  std::optional<StepLimits> limits;

  void validate() const;
  bool operator==(const TaskDistribution&) const = default;
};

TaskSpec sample_task(const TaskDistribution& dist, std::uint64_t seed);
std::vector<TaskSpec> sample_tasks(const TaskDistribution& dist, std::uint64_t seed, std::size_t count);

/// Order-independent fold over leaf values: sorted, '+'-joined.
std::string aggregate_leaves(std::vector<std::string> leaves);

/// Throws Error(invalid_spec) when declared params and ground truth disagree.
void validate(const TaskSpec& spec);

/// Wide-search task restricted to a subset of item indices.
TaskSpec restrict_wide(const TaskSpec& spec, std::span<const std::size_t> indices);

// Work units are the decomposable pieces of a task: wide items, deep
// branches, batch files.
std::size_t unit_count(const TaskSpec& spec);
/// Sequential steps a fully competent solver needs for unit `i`.
std::uint32_t unit_cost(const TaskSpec& spec, std::size_t i);
/// Key the orchestrator uses to address unit `i` (item key, entry hop, file id).
std::string unit_key(const TaskSpec& spec, std::size_t i);
/// Lower bound on sequential tool steps for the whole task.
std::uint64_t sequential_lookup_steps(const TaskSpec& spec);

/// Templated description shown to the orchestrator; contains no answers.
std::string describe(const TaskSpec& spec);

}  // namespace swarm
