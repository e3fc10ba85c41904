#pragma once

// The trainable orchestrator. A finite action-token vocabulary stands in for
// the orchestrator's output stream; a linear-softmax policy scores tokens
// from hand-built observation features; tokens decode into environment
// actions; rollouts record the behaviour log-probability of every token at
// sampling time.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarm/common.hpp"
#include "swarm/environment.hpp"
#include "swarm/records.hpp"
#include "swarm/task_gen.hpp"

namespace swarm {

enum class TokenKind { invoke_tool, create_agent, assign_group, finish };
enum class PartitionScheme { contiguous, round_robin, size_balanced };

const char* to_string(PartitionScheme scheme);
PartitionScheme partition_scheme_from_string(const std::string& s);

struct ActionToken {
  TokenKind kind = TokenKind::finish;
  ToolName tool = ToolName::search;        // invoke_tool
  std::uint32_t slot = 0;                  // invoke_tool: index into unresolved units
  std::string template_name;               // create_agent
  std::uint32_t group_size = 0;            // assign_group
  PartitionScheme scheme = PartitionScheme::size_balanced;  // assign_group

  /// Canonical text form, e.g. "ASSIGN_GROUP(4,size_balanced)".
  std::string code() const;
  static ActionToken parse(const std::string& code);
  bool operator==(const ActionToken&) const = default;
};

struct VocabularyConfig {
  std::vector<ToolName> tools{ToolName::search, ToolName::fetch, ToolName::download};
  std::uint32_t slots = 1;
  std::vector<std::string> templates{"worker"};
  std::vector<std::uint32_t> group_sizes{2, 4, 8, 16};
  std::vector<PartitionScheme> schemes{PartitionScheme::size_balanced};
  bool operator==(const VocabularyConfig&) const = default;
};

/// Finite, fixed token set. Order: tools x slots, templates, group sizes x
/// schemes, FINISH.
class Vocabulary {
 public:
  explicit Vocabulary(VocabularyConfig config = {});

  std::size_t size() const { return tokens_.size(); }
  const ActionToken& operator[](std::size_t i) const { return tokens_.at(i); }
  const std::vector<ActionToken>& tokens() const { return tokens_; }
  const VocabularyConfig& config() const { return config_; }
  std::optional<std::uint32_t> find(const std::string& code) const;
  /// Throws Error(config_error) when the code is not in the vocabulary.
  std::uint32_t index_of(const std::string& code) const;

 private:
  VocabularyConfig config_;
  std::vector<ActionToken> tokens_;
};

inline constexpr std::size_t kFeatureCount = 9;
extern const std::array<const char*, kFeatureCount> kFeatureNames;

using FeatureVector = std::vector<double>;

/// bias, remaining budget fraction, unresolved fraction, live agents
/// (saturating at 4), last-stage finish rate, task-kind one-hot, and a
/// work-remaining indicator (unresolved count clipped at 1).
FeatureVector featurize(const Observation& obs, const TaskSpec& task);

/// Weights of the linear-softmax policy, one per (action token, feature).
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(std::size_t n_features, std::size_t n_actions);

  std::size_t n_features() const { return n_features_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const { return theta_.size(); }

  double& at(std::size_t action, std::size_t feature) { return theta_.at(action * n_features_ + feature); }
  double at(std::size_t action, std::size_t feature) const {
    return theta_.at(action * n_features_ + feature);
  }
  std::span<double> theta() { return theta_; }
  std::span<const double> theta() const { return theta_; }

  /// Content hash; identifies a parameter snapshot in traces.
  std::string snapshot_id() const;
  bool all_finite() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  std::size_t n_features_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> theta_;
};

/// Log-softmax of linear scores. Throws Error(dimension_mismatch).
std::vector<double> action_log_distribution(const PolicyParams& params, std::span<const double> features);
std::vector<double> action_distribution(const PolicyParams& params, std::span<const double> features);

struct SampledToken {
  std::uint32_t token = 0;
  double logprob = 0.0;
};

/// Inverse-CDF draw from a probability vector.
SampledToken sample_action(std::span<const double> dist, Rng& rng);

/// Splits `units` into exactly k parts (some possibly empty) under a scheme.
/// size_balanced assigns greedily by remaining cost, largest first.
std::vector<std::vector<std::size_t>> partition_units(const std::vector<std::size_t>& units,
                                                      const std::vector<std::uint32_t>& costs,
                                                      std::uint32_t k, PartitionScheme scheme);

/// Maps a token to a concrete environment action given the current state.
Action decode_action(const ActionToken& token, const Environment& env);

struct PolicyChoice {
  std::uint32_t token = 0;
  double logprob = 0.0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string snapshot_id() const = 0;
  virtual PolicyChoice choose(std::span<const double> features, const Environment& env,
                              const Vocabulary& vocab, Rng& rng) const = 0;
};

class SoftmaxPolicy final : public Policy {
 public:
  explicit SoftmaxPolicy(PolicyParams params) : params_(std::move(params)), id_(params_.snapshot_id()) {}

  std::string snapshot_id() const override { return id_; }
  PolicyChoice choose(std::span<const double> features, const Environment& env, const Vocabulary& vocab,
                      Rng& rng) const override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
  std::string id_;
};

/// Deterministic baseline policies used for evaluation. Tokens they emit
/// must exist in the vocabulary; their log-probabilities are 0.
class ScriptedPolicy final : public Policy {
 public:
  enum class Mode { swarm, serial, serial_delegate };

  static ScriptedPolicy swarm(std::string template_name, std::uint32_t group_size,
                              PartitionScheme scheme = PartitionScheme::size_balanced);
  static ScriptedPolicy serial();
  static ScriptedPolicy serial_delegate(std::string template_name);
  /// Inverse of snapshot_id(); nullopt for non-scripted ids.
  static std::optional<ScriptedPolicy> from_snapshot_id(const std::string& id);

  std::string snapshot_id() const override;
  PolicyChoice choose(std::span<const double> features, const Environment& env, const Vocabulary& vocab,
                      Rng& rng) const override;
  Mode mode() const { return mode_; }
  /// Tokens this policy emits regardless of task kind.
  std::vector<ActionToken> fixed_tokens() const;

 private:
  ScriptedPolicy(Mode mode, std::string template_name, std::uint32_t group_size, PartitionScheme scheme)
      : mode_(mode), template_(std::move(template_name)), group_size_(group_size), scheme_(scheme) {}

  Mode mode_;
  std::string template_;
  std::uint32_t group_size_;
  PartitionScheme scheme_;
};

/// Tool that makes progress on a task kind (fetch / search / download).
ToolName work_tool(TaskKind kind);

PolicyParams zero_params(const Vocabulary& vocab);
/// Parameters of a single-agent starting point: work the task with the
/// kind's own tool, submit once nothing is left unresolved.
PolicyParams serial_prior_params(const Vocabulary& vocab, double strength);

struct TokenRecord {
  std::uint32_t token = 0;
  double behavior_logprob = 0.0;
  FeatureVector features;
  bool operator==(const TokenRecord&) const = default;
};

struct EpisodeTrace {
  std::string task_id;
  std::uint64_t seed = 0;
  std::string snapshot_id;
  std::vector<TokenRecord> tokens;
  std::vector<StageRecord> stages;
  Answer final_answer;
  RewardBreakdown reward;
  TerminalFlag terminal_flag = TerminalFlag::none;
  bool partial_rollout = false;
  std::string error;  // set when the episode aborted with an exception

  bool operator==(const EpisodeTrace&) const = default;
};

struct RolloutContext {
  Vocabulary vocab;
  EnvConfig env = EnvConfig::standard();
};

/// Step-at-a-time episode driver. rollout_episode is run() to completion;
/// the harness uses the step interface for suspend/resume.
class EpisodeRunner {
 public:
  EpisodeRunner(TaskSpec task, std::uint64_t seed, const RolloutContext& ctx);

  bool done() const { return env_.done(); }
  /// Samples, decodes and applies one token.
  void step(const Policy& policy);
  void run(const Policy& policy);

  EpisodeTrace trace() const;
  const Environment& env() const { return env_; }
  const std::vector<TokenRecord>& tokens() const { return tokens_; }
  std::string rng_state() const { return rng_.state(); }
  const std::string& snapshot_id() const { return snapshot_id_; }

  /// Rebuilds a runner by re-applying recorded tokens (the environment is a
  /// deterministic function of task, seed and actions), then restores the
  /// sampler state.
  static EpisodeRunner restore(TaskSpec task, std::uint64_t seed, const RolloutContext& ctx,
                               const std::vector<TokenRecord>& tokens, const std::string& rng_state,
                               const std::string& snapshot_id);

  /// Recomputes every recorded behaviour log-probability under `params`.
  void rerecord_logprobs(const PolicyParams& params);
  void set_snapshot_id(std::string id) { snapshot_id_ = std::move(id); }
  void mark_partial() { partial_ = true; }

 private:
  void apply(std::uint32_t token);

  RolloutContext ctx_;
  Environment env_;
  Rng rng_;
  std::vector<TokenRecord> tokens_;
  std::string snapshot_id_;
  bool partial_ = false;
};

EpisodeTrace rollout_episode(const Policy& policy, const TaskSpec& task, std::uint64_t seed,
                             const RolloutContext& ctx);
EpisodeTrace rollout_episode(const PolicyParams& params, const TaskSpec& task, std::uint64_t seed,
                             const RolloutContext& ctx);

}  // namespace swarm
