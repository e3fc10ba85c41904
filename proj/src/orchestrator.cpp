#include "swarm/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace swarm {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "bias",      "remaining_budget", "unresolved_fraction", "live_agents",
    "last_finish_rate", "kind_wide",  "kind_deep",           "kind_batch",
    "work_remaining"};

const char* to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::contiguous: return "contiguous";
    case PartitionScheme::round_robin: return "round_robin";
    case PartitionScheme::size_balanced: return "size_balanced";
  }
  return "?";
}

PartitionScheme partition_scheme_from_string(const std::string& s) {
  if (s == "contiguous") return PartitionScheme::contiguous;
  if (s == "round_robin") return PartitionScheme::round_robin;
  if (s == "size_balanced") return PartitionScheme::size_balanced;
  throw Error(ErrorCode::parse_error, "unknown partition scheme '" + s + "'");
}

std::string ActionToken::code() const {
  switch (kind) {
    case TokenKind::invoke_tool:
      return std::string("INVOKE_TOOL(") + to_string(tool) + "," + std::to_string(slot) + ")";
    case TokenKind::create_agent: return "CREATE_AGENT(" + template_name + ")";
    case TokenKind::assign_group:
      return "ASSIGN_GROUP(" + std::to_string(group_size) + "," + to_string(scheme) + ")";
    case TokenKind::finish: return "FINISH";
  }
  return "?";
}

ActionToken ActionToken::parse(const std::string& code) {
  ActionToken t;
  if (code == "FINISH") return t;
  const auto open = code.find('(');
  if (open == std::string::npos || code.back() != ')')
    throw Error(ErrorCode::parse_error, "bad token code '" + code + "'");
  const auto head = code.substr(0, open);
  const auto args = code.substr(open + 1, code.size() - open - 2);
  const auto comma = args.find(',');
  try {
    if (head == "INVOKE_TOOL" && comma != std::string::npos) {
      t.kind = TokenKind::invoke_tool;
      t.tool = tool_from_string(args.substr(0, comma));
      t.slot = static_cast<std::uint32_t>(std::stoul(args.substr(comma + 1)));
      return t;
    }
    if (head == "CREATE_AGENT" && !args.empty()) {
      t.kind = TokenKind::create_agent;
      t.template_name = args;
      return t;
    }
    if (head == "ASSIGN_GROUP" && comma != std::string::npos) {
      t.kind = TokenKind::assign_group;
      t.group_size = static_cast<std::uint32_t>(std::stoul(args.substr(0, comma)));
      t.scheme = partition_scheme_from_string(args.substr(comma + 1));
      if (t.group_size == 0) throw Error(ErrorCode::parse_error, "group size 0");
      return t;
    }
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::parse_error, "bad token code '" + code + "'");
}

Vocabulary::Vocabulary(VocabularyConfig config) : config_(std::move(config)) {
  for (auto tool : config_.tools)
    for (std::uint32_t s = 0; s < config_.slots; ++s) {
      ActionToken t;
      t.kind = TokenKind::invoke_tool;
      t.tool = tool;
      t.slot = s;
      tokens_.push_back(t);
    }
  for (const auto& name : config_.templates) {
    ActionToken t;
    t.kind = TokenKind::create_agent;
    t.template_name = name;
    tokens_.push_back(t);
  }
  for (auto k : config_.group_sizes) {
    if (k == 0) throw Error(ErrorCode::config_error, "group size must be positive");
    for (auto scheme : config_.schemes) {
      ActionToken t;
      t.kind = TokenKind::assign_group;
      t.group_size = k;
      t.scheme = scheme;
      tokens_.push_back(t);
    }
  }
  tokens_.push_back(ActionToken{});
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (tokens_[i].code() == tokens_[j].code())
        throw Error(ErrorCode::config_error, "duplicate vocabulary token " + tokens_[i].code());
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& code) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].code() == code) return static_cast<std::uint32_t>(i);
  return std::nullopt;
}

std::uint32_t Vocabulary::index_of(const std::string& code) const {
  if (auto i = find(code)) return *i;
  throw Error(ErrorCode::config_error, "token " + code + " is not in the vocabulary");
}

FeatureVector featurize(const Observation& obs, const TaskSpec& task) {
  FeatureVector f(kFeatureCount, 0.0);
  f[0] = 1.0;
  f[1] = obs.orchestrator_max_steps
             ? static_cast<double>(obs.remaining_orchestrator_steps) / obs.orchestrator_max_steps
             : 0.0;
  f[2] = obs.total_units ? static_cast<double>(obs.unresolved_units) / obs.total_units : 0.0;
  f[3] = std::min<double>(obs.live_agents, 4.0) / 4.0;
  f[4] = obs.last_assigned ? static_cast<double>(obs.last_completed) / obs.last_assigned : 0.0;
  f[5 + static_cast<int>(task.kind)] = 1.0;
  f[8] = obs.unresolved_units > 0 ? 1.0 : 0.0;
  return f;
}

PolicyParams::PolicyParams(std::size_t n_features, std::size_t n_actions)
    : n_features_(n_features), n_actions_(n_actions), theta_(n_features * n_actions, 0.0) {}

std::string PolicyParams::snapshot_id() const {
  std::string bytes(theta_.size() * sizeof(double) + 2 * sizeof(std::size_t), '\0');
  std::memcpy(bytes.data(), &n_features_, sizeof n_features_);
  std::memcpy(bytes.data() + sizeof n_features_, &n_actions_, sizeof n_actions_);
  if (!theta_.empty())
    std::memcpy(bytes.data() + 2 * sizeof(std::size_t), theta_.data(), theta_.size() * sizeof(double));
  return "theta:" + hex64(fnv1a(bytes));
}

bool PolicyParams::all_finite() const {
  return std::all_of(theta_.begin(), theta_.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> action_log_distribution(const PolicyParams& params, std::span<const double> features) {
  if (features.size() != params.n_features() || params.n_actions() == 0)
    throw Error(ErrorCode::dimension_mismatch,
                "features " + std::to_string(features.size()) + " vs params " +
                    std::to_string(params.n_features()) + "x" + std::to_string(params.n_actions()));
  const auto F = params.n_features();
  const auto theta = params.theta();
  std::vector<double> scores(params.n_actions());
  for (std::size_t a = 0; a < scores.size(); ++a) {
    double s = 0.0;
    for (std::size_t f = 0; f < F; ++f) s += theta[a * F + f] * features[f];
    scores[a] = s;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  for (double& s : scores) s -= lse;
  return scores;
}

std::vector<double> action_distribution(const PolicyParams& params, std::span<const double> features) {
  auto p = action_log_distribution(params, features);
  for (double& x : p) x = std::exp(x);
  return p;
}

SampledToken sample_action(std::span<const double> dist, Rng& rng) {
  if (dist.empty()) throw Error(ErrorCode::invalid_parameter, "empty distribution");
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = i;
    cum += dist[i];
    if (u < cum) return {static_cast<std::uint32_t>(i), std::log(dist[i])};
  }
  // u landed in the rounding gap above the final cumulative sum
  return {static_cast<std::uint32_t>(last_positive), std::log(dist[last_positive])};
}

std::vector<std::vector<std::size_t>> partition_units(const std::vector<std::size_t>& units,
                                                      const std::vector<std::uint32_t>& costs,
                                                      std::uint32_t k, PartitionScheme scheme) {
  if (k == 0) throw Error(ErrorCode::invalid_parameter, "partition into 0 parts");
  if (costs.size() != units.size()) throw Error(ErrorCode::dimension_mismatch, "costs vs units");
  std::vector<std::vector<std::size_t>> parts(k);
  const auto n = units.size();
  switch (scheme) {
    case PartitionScheme::contiguous: {
      const std::size_t chunk = (n + k - 1) / k;
      for (std::size_t i = 0; i < n; ++i) parts[chunk ? i / chunk : 0].push_back(units[i]);
      break;
    }
    case PartitionScheme::round_robin: {
      for (std::size_t i = 0; i < n; ++i) parts[i % k].push_back(units[i]);
      break;
    }
    case PartitionScheme::size_balanced: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return costs[a] > costs[b]; });
      std::vector<std::uint64_t> load(k, 0);
      for (auto i : order) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < k; ++p) {
          if (load[p] < load[best] || (load[p] == load[best] && parts[p].size() < parts[best].size()))
            best = p;
        }
        load[best] += costs[i];
        parts[best].push_back(units[i]);
      }
      for (auto& p : parts) std::sort(p.begin(), p.end());
      break;
    }
  }
  return parts;
}

Action decode_action(const ActionToken& token, const Environment& env) {
  if (env.done()) throw Error(ErrorCode::precondition, "decode on a finished episode");
  switch (token.kind) {
    case TokenKind::invoke_tool: {
      const auto open = env.unresolved_units();
      ToolCall call{token.tool, ""};
      if (token.slot < open.size()) call.query = env.frontier_key(open[token.slot]);
      return call;
    }
    case TokenKind::create_agent: {
      CreateSubagent call{token.template_name, ""};
      for (const auto& t : env.config().templates)
        if (t.name == token.template_name) call.system_prompt = t.system_prompt;
      return call;
    }
    case TokenKind::assign_group: {
      const auto& agents = env.agents();
      if (agents.empty())
        return FailedAction{std::string(to_string(ErrorCode::unknown_agent)) + ": no sub-agents exist"};
      const auto open = env.unresolved_units();
      std::vector<std::uint32_t> costs;
      costs.reserve(open.size());
      for (auto u : open) costs.push_back(env.remaining_cost(u));
      auto parts = partition_units(open, costs, token.group_size, token.scheme);
      AssignTasks group;
      for (std::size_t i = 0; i < parts.size(); ++i)
        group.assignments.push_back({agents[i % agents.size()].name, std::move(parts[i]), 0});
      return group;
    }
    case TokenKind::finish: return Finish{env.provisional_answer()};
  }
  return FailedAction{"undecodable token"};
}

PolicyChoice SoftmaxPolicy::choose(std::span<const double> features, const Environment&,
                                   const Vocabulary&, Rng& rng) const {
  const auto logp = action_log_distribution(params_, features);
  std::vector<double> p(logp.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logp[i]);
  const auto s = sample_action(p, rng);
  return {s.token, logp[s.token]};
}

ToolName work_tool(TaskKind kind) {
  switch (kind) {
    case TaskKind::WideSearch: return ToolName::fetch;
    case TaskKind::DeepSearch: return ToolName::search;
    case TaskKind::BatchDownload: return ToolName::download;
  }
  return ToolName::fetch;
}

ScriptedPolicy ScriptedPolicy::swarm(std::string template_name, std::uint32_t group_size,
                                     PartitionScheme scheme) {
  return ScriptedPolicy(Mode::swarm, std::move(template_name), group_size, scheme);
}

ScriptedPolicy ScriptedPolicy::serial() {
  return ScriptedPolicy(Mode::serial, "", 0, PartitionScheme::size_balanced);
}

ScriptedPolicy ScriptedPolicy::serial_delegate(std::string template_name) {
  return ScriptedPolicy(Mode::serial_delegate, std::move(template_name), 1, PartitionScheme::contiguous);
}

std::string ScriptedPolicy::snapshot_id() const {
  switch (mode_) {
    case Mode::swarm:
      return "scripted:swarm:" + template_ + ":" + std::to_string(group_size_) + ":" + to_string(scheme_);
    case Mode::serial: return "scripted:serial";
    case Mode::serial_delegate: return "scripted:serial_delegate:" + template_;
  }
  return "scripted:?";
}

std::optional<ScriptedPolicy> ScriptedPolicy::from_snapshot_id(const std::string& id) {
  if (id == "scripted:serial") return serial();
  const std::string delegate = "scripted:serial_delegate:";
  if (id.rfind(delegate, 0) == 0) return serial_delegate(id.substr(delegate.size()));
  const std::string sw = "scripted:swarm:";
  if (id.rfind(sw, 0) == 0) {
    auto rest = id.substr(sw.size());
    const auto a = rest.find(':');
    const auto b = rest.find(':', a == std::string::npos ? 0 : a + 1);
    if (a == std::string::npos || b == std::string::npos) return std::nullopt;
    try {
      return swarm(rest.substr(0, a), static_cast<std::uint32_t>(std::stoul(rest.substr(a + 1, b - a - 1))),
                   partition_scheme_from_string(rest.substr(b + 1)));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

PolicyChoice ScriptedPolicy::choose(std::span<const double>, const Environment& env, const Vocabulary& vocab,
                                    Rng&) const {
  auto pick = [&](const ActionToken& t) { return PolicyChoice{vocab.index_of(t.code()), 0.0}; };
  ActionToken finish;
  const bool work_left = !env.unresolved_units().empty();
  // keep one orchestrator step in reserve for the submission
  const bool can_continue = env.remaining_orchestrator_steps() > 1;
  if (!work_left || !can_continue) return pick(finish);

  if (mode_ == Mode::serial) {
    ActionToken t;
    t.kind = TokenKind::invoke_tool;
    t.tool = work_tool(env.task().kind);
    return pick(t);
  }
  if (!env.find_agent(template_)) {
    ActionToken t;
    t.kind = TokenKind::create_agent;
    t.template_name = template_;
    return pick(t);
  }
  ActionToken t;
  t.kind = TokenKind::assign_group;
  t.group_size = group_size_;
  t.scheme = scheme_;
  return pick(t);
}

std::vector<ActionToken> ScriptedPolicy::fixed_tokens() const {
  std::vector<ActionToken> out{ActionToken{}};
  if (mode_ == Mode::serial) return out;
  ActionToken create;
  create.kind = TokenKind::create_agent;
  create.template_name = template_;
  ActionToken assign;
  assign.kind = TokenKind::assign_group;
  assign.group_size = group_size_;
  assign.scheme = scheme_;
  out.push_back(create);
  out.push_back(assign);
  return out;
}

PolicyParams zero_params(const Vocabulary& vocab) { return PolicyParams(kFeatureCount, vocab.size()); }

PolicyParams serial_prior_params(const Vocabulary& vocab, double strength) {
  auto params = zero_params(vocab);
  const TaskKind kinds[] = {TaskKind::WideSearch, TaskKind::DeepSearch, TaskKind::BatchDownload};
  for (auto kind : kinds) {
    ActionToken t;
    t.kind = TokenKind::invoke_tool;
    t.tool = work_tool(kind);
    if (auto i = vocab.find(t.code())) params.at(*i, 5 + static_cast<int>(kind)) = strength;
  }
  const auto fin = vocab.index_of(ActionToken{}.code());
  params.at(fin, 0) = 2.0 * strength;
  params.at(fin, 2) = -20.0 * strength;
  return params;
}

EpisodeRunner::EpisodeRunner(TaskSpec task, std::uint64_t seed, const RolloutContext& ctx)
    : ctx_(ctx),
      env_(Environment::reset(std::move(task), seed, ctx.env).first),
      rng_(derive_seed(seed, {0x706f6c696379ULL})) {}

void EpisodeRunner::apply(std::uint32_t token) {
  env_.step(decode_action(ctx_.vocab[token], env_));
  if (!env_.done() && tokens_.size() >= env_.task().limits.max_tokens)
    env_.force_terminate(TerminalFlag::token_cap);
}

void EpisodeRunner::step(const Policy& policy) {
  if (done()) throw Error(ErrorCode::precondition, "step on a finished episode");
  if (snapshot_id_.empty()) snapshot_id_ = policy.snapshot_id();
  auto features = featurize(env_.observe(), env_.task());
  const auto choice = policy.choose(features, env_, ctx_.vocab, rng_);
  tokens_.push_back({choice.token, choice.logprob, std::move(features)});
  apply(choice.token);
}

void EpisodeRunner::run(const Policy& policy) {
  while (!done()) step(policy);
}

EpisodeTrace EpisodeRunner::trace() const {
  EpisodeTrace t;
  t.task_id = env_.task().task_id;
  t.seed = env_.seed();
  t.snapshot_id = snapshot_id_;
  t.tokens = tokens_;
  t.stages = env_.stages();
  t.final_answer = env_.final_answer();
  t.terminal_flag = env_.terminal_flag();
  t.partial_rollout = partial_;
  return t;
}

EpisodeRunner EpisodeRunner::restore(TaskSpec task, std::uint64_t seed, const RolloutContext& ctx,
                                     const std::vector<TokenRecord>& tokens, const std::string& rng_state,
                                     const std::string& snapshot_id) {
  EpisodeRunner r(std::move(task), seed, ctx);
  for (const auto& t : tokens) {
    if (r.done()) throw Error(ErrorCode::parse_error, "recorded tokens continue past episode end");
    if (t.token >= ctx.vocab.size()) throw Error(ErrorCode::parse_error, "token outside vocabulary");
    r.tokens_.push_back(t);
    r.apply(t.token);
  }
  r.rng_.restore(rng_state);
  r.snapshot_id_ = snapshot_id;
  return r;
}

void EpisodeRunner::rerecord_logprobs(const PolicyParams& params) {
  for (auto& t : tokens_) t.behavior_logprob = action_log_distribution(params, t.features)[t.token];
}

EpisodeTrace rollout_episode(const Policy& policy, const TaskSpec& task, std::uint64_t seed,
                             const RolloutContext& ctx) {
  EpisodeRunner runner(task, seed, ctx);
  runner.run(policy);
  return runner.trace();
}

EpisodeTrace rollout_episode(const PolicyParams& params, const TaskSpec& task, std::uint64_t seed,
                             const RolloutContext& ctx) {
  return rollout_episode(SoftmaxPolicy(params), task, seed, ctx);
}

}  // namespace swarm
