#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "../support/generators.hpp"
#include "swarm/orchestrator.hpp"

using namespace swarm;

namespace {

std::uint32_t token_index(const Vocabulary& v, TokenKind kind) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i].kind == kind) return static_cast<std::uint32_t>(i);
  FAIL("token kind missing");
  return 0;
}

PolicyParams favour(const Vocabulary& v, std::uint32_t token, double weight = 50.0) {
  auto p = zero_params(v);
  p.at(token, 0) = weight;
  return p;
}

}  // namespace

TEST_CASE("featurize") {
  const auto spec = gen_wide_search(1, 6, 1);
  auto env = Environment::reset(spec, 0).first;
  auto f = featurize(env.observe(), spec);
  CHECK(f.size() == kFeatureCount);
  CHECK(f[2] == 1.0);
  CHECK(f[8] == 1.0);
  CHECK(f[5] == 1.0);
  for (std::size_t i = 0; i < 6; ++i) env.exec_tool({ToolName::fetch, unit_key(spec, i)});
  f = featurize(env.observe(), spec);
  CHECK(f.size() == kFeatureCount);
  CHECK(f[2] == 0.0);
  CHECK(f[8] == 0.0);
}

TEST_CASE("action distribution") {
  const Vocabulary vocab;
  Rng rng(3);
  const auto feats = gen::features(rng, kFeatureCount);
  for (double p : action_distribution(zero_params(vocab), feats)) CHECK(p == doctest::Approx(1.0 / vocab.size()).epsilon(1e-14));

  auto params = gen::params(rng, kFeatureCount, vocab.size());
  const auto before = action_distribution(params, feats);
  for (std::size_t a = 0; a < vocab.size(); ++a) params.at(a, 0) += 3.7;  // feature 0 is the constant bias
  const auto after = action_distribution(params, feats);
  for (std::size_t a = 0; a < vocab.size(); ++a) CHECK(after[a] == doctest::Approx(before[a]).epsilon(1e-12));

  for (int i = 0; i < 1000; ++i) {
    const auto p = gen::params(rng, kFeatureCount, vocab.size(), 5.0);
    const auto d = action_distribution(p, gen::features(rng, kFeatureCount));
    CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0) <= 1e-12);
    CHECK(*std::min_element(d.begin(), d.end()) > 0.0);
  }
  CHECK_THROWS_AS(action_distribution(params, FeatureVector(3, 0.0)), Error);
}

TEST_CASE("sampling") {
  std::vector<double> point(5, 0.0);
  point[4] = 1.0;
  Rng rng(1);
  const auto s = sample_action(point, rng);
  CHECK(s.token == 4);
  CHECK(s.logprob == 0.0);

  const std::vector<double> dist{0.1, 0.25, 0.05, 0.4, 0.2};
  std::vector<int> counts(dist.size(), 0);
  Rng r2(2024);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_action(dist, r2);
    CHECK(x.logprob == std::log(dist[x.token]));
    ++counts[x.token];
  }
  for (std::size_t i = 0; i < dist.size(); ++i) CHECK(std::abs(double(counts[i]) / n - dist[i]) <= 0.01);

  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(sample_action(dist, a).token == sample_action(dist, b).token);
}

TEST_CASE("token codes round-trip and the vocabulary is closed") {
  VocabularyConfig cfg;
  cfg.slots = 2;
  cfg.templates = {"worker", "searcher"};
  cfg.schemes = {PartitionScheme::contiguous, PartitionScheme::round_robin, PartitionScheme::size_balanced};
  const Vocabulary vocab(cfg);
  CHECK(vocab.size() == 3 * 2 + 2 + 4 * 3 + 1);
  std::set<std::string> codes;
  for (const auto& t : vocab.tokens()) {
    CHECK(ActionToken::parse(t.code()) == t);
    CHECK(vocab.index_of(t.code()) < vocab.size());
    codes.insert(t.code());
  }
  CHECK(codes.size() == vocab.size());
  CHECK_THROWS_AS(ActionToken::parse("JUMP"), Error);
  CHECK_THROWS_AS(vocab.index_of("ASSIGN_GROUP(3,contiguous)"), Error);
}

TEST_CASE("partitions") {
  std::vector<std::size_t> units(40);
  std::iota(units.begin(), units.end(), 0);
  const std::vector<std::uint32_t> unit(40, 1);
  for (const auto& p : partition_units(units, unit, 4, PartitionScheme::size_balanced)) CHECK(p.size() == 10);

  std::vector<std::size_t> ten(10);
  std::iota(ten.begin(), ten.end(), 0);
  std::multiset<std::size_t> sizes;
  for (const auto& p : partition_units(ten, std::vector<std::uint32_t>(10, 1), 3, PartitionScheme::size_balanced))
    sizes.insert(p.size());
  CHECK(sizes == std::multiset<std::size_t>{3, 3, 4});

  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto n = gen::between(rng, 0, 30);
    const auto k = gen::between(rng, 1, 9);
    std::vector<std::size_t> u(n);
    std::vector<std::uint32_t> c(n);
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = j * 3;
      c[j] = gen::between(rng, 1, 5);
    }
    for (auto scheme : {PartitionScheme::contiguous, PartitionScheme::round_robin, PartitionScheme::size_balanced}) {
      const auto parts = partition_units(u, c, k, scheme);
      CHECK(parts.size() == k);
      std::vector<std::size_t> all;
      std::vector<std::uint64_t> load;
      for (const auto& p : parts) {
        all.insert(all.end(), p.begin(), p.end());
        std::uint64_t l = 0;
        for (auto x : p) l += c[x / 3];
        load.push_back(l);
      }
      std::sort(all.begin(), all.end());
      CHECK(all == u);
      if (scheme == PartitionScheme::size_balanced && n > 0)
        CHECK(*std::max_element(load.begin(), load.end()) - *std::min_element(load.begin(), load.end()) <=
              *std::max_element(c.begin(), c.end()));
    }
  }
}

TEST_CASE("decoding") {
  VocabularyConfig vc;
  vc.templates = {"searcher"};
  const Vocabulary vocab(vc);
  const auto spec = gen_wide_search(1, 40, 1);
  auto env = Environment::reset(spec, 0).first;

  ActionToken assign;
  assign.kind = TokenKind::assign_group;
  assign.group_size = 4;
  CHECK(std::holds_alternative<FailedAction>(decode_action(assign, env)));

  ActionToken create;
  create.kind = TokenKind::create_agent;
  create.template_name = "searcher";
  env.step(decode_action(create, env));
  CHECK_FALSE(env.stages().back().failed);
  env.step(decode_action(create, env));
  CHECK(env.stages().back().failed);
  CHECK(env.stages().back().error.find(to_string(ErrorCode::duplicate_agent)) != std::string::npos);

  const auto group = std::get<AssignTasks>(decode_action(assign, env));
  REQUIRE(group.assignments.size() == 4);
  for (const auto& a : group.assignments) CHECK(a.units.size() == 10);

  ActionToken tool;
  tool.kind = TokenKind::invoke_tool;
  tool.tool = ToolName::fetch;
  CHECK(std::get<ToolCall>(decode_action(tool, env)).query == unit_key(spec, 0));
  CHECK(std::holds_alternative<Finish>(decode_action(ActionToken{}, env)));
}

TEST_CASE("rollouts") {
  const Vocabulary vocab;
  const RolloutContext ctx{vocab, EnvConfig::standard()};
  const auto spec = gen_wide_search(4, 8, 1, StepLimits{100, 100, 5});

  const auto fin = rollout_episode(favour(vocab, token_index(vocab, TokenKind::finish)), spec, 1, ctx);
  CHECK(fin.tokens.size() == 1);
  CHECK(fin.terminal_flag == TerminalFlag::finished);

  const auto search = vocab.index_of("INVOKE_TOOL(search,0)");
  const auto cap = rollout_episode(favour(vocab, search), spec, 1, ctx);
  CHECK(cap.tokens.size() == 5);
  CHECK(cap.terminal_flag == TerminalFlag::token_cap);

  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const auto params = gen::params(rng, kFeatureCount, vocab.size());
    const auto task = gen_batch_download(rng.next(), gen::between(rng, 1, 10), gen::between(rng, 1, 3));
    const auto seed = rng.next();
    const auto a = rollout_episode(params, task, seed, ctx);
    CHECK(a == rollout_episode(params, task, seed, ctx));
    CHECK(a.tokens.size() <= task.limits.max_tokens);
    CHECK(a.stages.size() == a.tokens.size());
    for (const auto& t : a.tokens)
      CHECK(std::abs(action_log_distribution(params, t.features)[t.token] - t.behavior_logprob) <= 1e-12);
  }
}

TEST_CASE("scripted policies") {
  for (const auto& p : {ScriptedPolicy::serial(), ScriptedPolicy::serial_delegate("worker"),
                        ScriptedPolicy::swarm("worker", 8, PartitionScheme::round_robin)})
    CHECK(ScriptedPolicy::from_snapshot_id(p.snapshot_id())->snapshot_id() == p.snapshot_id());
  CHECK_FALSE(ScriptedPolicy::from_snapshot_id("theta:00"));

  VocabularyConfig vc;
  vc.group_sizes = {10};
  const RolloutContext ctx{Vocabulary(vc), EnvConfig::standard()};
  const auto spec = gen_wide_search(3, 40, 1);
  const auto swarm = rollout_episode(ScriptedPolicy::swarm("worker", 10), spec, 0, ctx);
  CHECK(swarm.terminal_flag == TerminalFlag::finished);
  CHECK(swarm.stages.size() == 3);
  CHECK(swarm.stages[1].sub_steps == std::vector<std::uint32_t>(10, 4));
  const auto serial = rollout_episode(ScriptedPolicy::serial(), spec, 0, ctx);
  CHECK(serial.stages.size() == 41);
  for (const auto& t : serial.tokens) CHECK(t.behavior_logprob == 0.0);
}

TEST_CASE("parameter snapshots") {
  const Vocabulary vocab;
  auto p = zero_params(vocab);
  const auto id = p.snapshot_id();
  CHECK(id == zero_params(vocab).snapshot_id());
  p.at(0, 0) = 1e-300;
  CHECK(p.snapshot_id() != id);
  CHECK(p.all_finite());
  p.at(0, 0) = std::nan("");
  CHECK_FALSE(p.all_finite());
}
