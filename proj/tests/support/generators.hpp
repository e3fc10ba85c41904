#pragma once

// Random inputs for property tests. Every generator is a pure function of
// the Rng it is handed.

#include <cmath>
#include <cstdint>
#include <vector>

#include "swarm/common.hpp"
#include "swarm/optimizer.hpp"
#include "swarm/orchestrator.hpp"
#include "swarm/records.hpp"

namespace swarm::gen {

inline std::uint32_t between(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(rng.below(hi - lo + 1));
}

inline double real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Stage with 1..3 main steps and 0..max_width sub-agents of 1..20 steps.
inline StageRecord stage(Rng& rng, std::uint32_t index, std::uint32_t max_width = 8) {
  StageRecord s;
  s.stage_index = index;
  s.main_steps = between(rng, 1, 3);
  const auto width = rng.bernoulli(0.4) ? 0 : between(rng, 1, max_width);
  for (std::uint32_t i = 0; i < width; ++i) s.sub_steps.push_back(between(rng, 1, 20));
  s.assigned = width;
  s.completed = width ? between(rng, 0, width) : 0;
  return s;
}

inline std::vector<StageRecord> stages(Rng& rng, std::uint32_t max_len = 12, std::uint32_t max_width = 8) {
  std::vector<StageRecord> out;
  const auto n = between(rng, 0, max_len);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(stage(rng, i, max_width));
  return out;
}

inline PolicyParams params(Rng& rng, std::size_t n_features, std::size_t n_actions, double scale = 1.0) {
  PolicyParams p(n_features, n_actions);
  for (auto& w : p.theta()) w = real(rng, -scale, scale);
  return p;
}

inline FeatureVector features(Rng& rng, std::size_t n) {
  FeatureVector f(n);
  f[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) f[i] = real(rng, 0.0, 1.0);
  return f;
}

/// Log-ratio offset kept at least 0.05 away from the clip bounds so finite
/// differences never cross them.
inline double log_ratio_offset(Rng& rng, const RLConfig& cfg) {
  switch (rng.below(3)) {
    case 0: return real(rng, cfg.alpha + 0.05, cfg.beta - 0.05);
    case 1: return real(rng, cfg.beta + 0.05, cfg.beta + 1.0);
    default: return real(rng, cfg.alpha - 1.0, cfg.alpha - 0.05);
  }
}

/// Batch whose behaviour log-probabilities differ from `params` by a random
/// offset per token; with `on_policy` the offset is zero.
inline RolloutBatch batch(Rng& rng, const PolicyParams& params, const RLConfig& cfg, bool on_policy = false,
                          std::uint32_t max_groups = 4, std::uint32_t max_k = 4, std::uint32_t max_len = 6) {
  RolloutBatch b;
  const auto n_groups = between(rng, 1, max_groups);
  for (std::uint32_t g = 0; g < n_groups; ++g) {
    ProblemGroup group;
    group.task_id = "p" + std::to_string(g);
    const auto k = between(rng, 2, max_k);
    for (std::uint32_t r = 0; r < k; ++r) {
      Response resp;
      resp.reward = real(rng, 0.0, 1.0);
      const auto len = between(rng, 1, max_len);
      for (std::uint32_t i = 0; i < len; ++i) {
        TokenStep step;
        step.features = features(rng, params.n_features());
        step.action = static_cast<std::uint32_t>(rng.below(params.n_actions()));
        const auto logp = action_log_distribution(params, step.features)[step.action];
        step.behavior_logprob = on_policy ? logp : logp - log_ratio_offset(rng, cfg);
        resp.tokens.push_back(std::move(step));
      }
      group.responses.push_back(std::move(resp));
    }
    b.groups.push_back(std::move(group));
  }
  return b;
}

}  // namespace swarm::gen
