#pragma once

// Plain records shared by the environment, the orchestrator, metrics and
// rewards. Kept separate so those modules do not depend on one another.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace swarm {

/// One execution stage: a single orchestrator action plus the step counts of
/// the parallel sub-agent group it launched (empty when none).
struct StageRecord {
  std::uint32_t stage_index = 0;
  std::uint32_t main_steps = 1;
  std::vector<std::uint32_t> sub_steps;  // one entry per assigned sub-agent
  std::uint32_t assigned = 0;
  std::uint32_t completed = 0;

  std::string action;  // short action summary
  bool failed = false;
  std::string error;
  std::uint32_t routed_tokens = 0;   // result tokens routed back to the orchestrator
  std::uint32_t resolved_units = 0;  // cumulative, after this stage

  bool operator==(const StageRecord&) const = default;
};

/// Submission of an episode. Items for wide search, text for deep search,
/// acquired file ids for batch download.
struct Answer {
  std::map<std::string, std::string> items;
  std::string text;
  std::vector<std::string> files;
  bool submitted = false;

  bool operator==(const Answer&) const = default;
};

enum class TerminalFlag { none, finished, budget_exhausted, token_cap };

const char* to_string(TerminalFlag flag);
TerminalFlag terminal_flag_from_string(const std::string& s);

struct RewardBreakdown {
  double r_perf = 0.0;
  double r_parallel = 0.0;
  double r_finish = 0.0;
  double lambda1_t = 0.0;
  double lambda2_t = 0.0;
  double composite = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

}  // namespace swarm
