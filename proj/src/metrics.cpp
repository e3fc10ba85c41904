#include "swarm/metrics.hpp"

#include <algorithm>
#include <cstdio>

namespace swarm {

std::uint64_t critical_steps(std::span<const StageRecord> stages) {
  std::uint64_t total = 0;
  for (const auto& s : stages) {
    std::uint32_t longest = 0;
    for (auto v : s.sub_steps) longest = std::max(longest, v);
    total += std::uint64_t(s.main_steps) + longest;
  }
  return total;
}

std::uint64_t total_steps(std::span<const StageRecord> stages) {
  std::uint64_t total = 0;
  for (const auto& s : stages) {
    total += s.main_steps;
    for (auto v : s.sub_steps) total += v;
  }
  return total;
}

ParallelismStats parallelism_degree(std::span<const StageRecord> stages) {
  ParallelismStats st;
  if (stages.empty()) return st;
  std::uint64_t sum = 0;
  for (const auto& s : stages) {
    const auto w = static_cast<std::uint32_t>(s.sub_steps.size());
    st.max_width = std::max(st.max_width, w);
    sum += w;
  }
  st.mean_width = static_cast<double>(sum) / static_cast<double>(stages.size());
  st.episodes_with_zero_spawn = st.max_width == 0;
  return st;
}

double finish_rate(std::span<const StageRecord> stages) {
  std::uint64_t assigned = 0, completed = 0;
  for (const auto& s : stages) {
    assigned += s.assigned;
    completed += s.completed;
  }
  return assigned == 0 ? 0.0 : static_cast<double>(completed) / static_cast<double>(assigned);
}

ContextUsage context_usage(const EpisodeTrace& trace, const ContextModel& model) {
  ContextUsage u;
  for (const auto& s : trace.stages) {
    u.orchestrator_tokens += s.routed_tokens + std::uint64_t(s.main_steps) * model.per_step_tokens;
    for (auto v : s.sub_steps)
      u.max_subagent_tokens = std::max<std::uint64_t>(u.max_subagent_tokens, std::uint64_t(v) * model.per_step_tokens);
  }
  return u;
}

MetricsRow metrics_row(const EpisodeTrace& trace, TaskKind kind) {
  MetricsRow row;
  row.task_id = trace.task_id;
  row.kind = to_string(kind);
  row.critical_steps = critical_steps(trace.stages);
  row.total_steps = total_steps(trace.stages);
  const auto p = parallelism_degree(trace.stages);
  row.max_width = p.max_width;
  row.mean_width = p.mean_width;
  row.finish_rate = finish_rate(trace.stages);
  row.r_perf = trace.reward.r_perf;
  row.terminal_flag = to_string(trace.terminal_flag);
  return row;
}

std::string metrics_csv_header() {
  return "task_id,kind,critical_steps,total_steps,max_width,mean_width,finish_rate,r_perf,terminal_flag";
}

std::string to_csv(const MetricsRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, ",%llu,%llu,%u,%.6f,%.6f,%.6f,",
                static_cast<unsigned long long>(row.critical_steps),
                static_cast<unsigned long long>(row.total_steps), row.max_width, row.mean_width,
                row.finish_rate, row.r_perf);
  return row.task_id + "," + row.kind + buf + row.terminal_flag;
}

}  // namespace swarm
