#include <doctest.h>

#include <set>

#include "../support/generators.hpp"
#include "swarm/environment.hpp"
#include "swarm/serialization.hpp"
#include "swarm/task_gen.hpp"

using namespace swarm;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::precondition;
}

}  // namespace

TEST_CASE("wide search has the declared cardinality and is deterministic") {
  const auto a = gen_wide_search(7, 40, 2);
  const auto b = gen_wide_search(7, 40, 2);
  const auto& truth = std::get<WideTruth>(a.ground_truth);
  CHECK(truth.items.size() == 40);
  CHECK(a == b);
  CHECK(json(a).dump() == json(b).dump());
  std::set<std::string> keys;
  for (const auto& item : truth.items) {
    CHECK(item.sources_required >= 1);
    CHECK(item.sources_required <= 2);
    keys.insert(item.key);
  }
  CHECK(keys.size() == 40);
  CHECK(code_of([] { gen_wide_search(7, 0, 2); }) == ErrorCode::invalid_parameter);
  CHECK(code_of([] { gen_wide_search(7, 3, 0); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("wide items resolve independently of one another") {
  const auto spec = gen_wide_search(3, 12, 3);
  const auto& items = std::get<WideTruth>(spec.ground_truth).items;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto env = Environment::reset(spec, 1).first;
    ToolResult r;
    for (std::uint32_t k = 0; k < items[i].sources_required; ++k) r = env.exec_tool({ToolName::fetch, items[i].key});
    CHECK(r.resolved_unit);
    CHECK(r.value == items[i].value);
    CHECK(env.unresolved_units().size() == items.size() - 1);
  }
}

TEST_CASE("deep search: degenerate tree and lookup count") {
  const auto one = gen_deep_search(3, 1, 1);
  const auto& t1 = std::get<DeepTruth>(one.ground_truth);
  REQUIRE(t1.branches.size() == 1);
  CHECK(t1.answer == t1.branches[0].leaf);
  CHECK(sequential_lookup_steps(one) == 1);

  const auto spec = gen_deep_search(3, 4, 5);
  CHECK(spec == gen_deep_search(3, 4, 5));
  CHECK(sequential_lookup_steps(spec) == 20);

  // count the lookups a sequential solver actually needs
  auto env = Environment::reset(spec, 0).first;
  std::uint32_t lookups = 0;
  while (!env.unresolved_units().empty()) {
    env.exec_tool({ToolName::search, env.frontier_key(env.unresolved_units().front())});
    ++lookups;
  }
  CHECK(lookups == 20);
  CHECK(env.provisional_answer().text == std::get<DeepTruth>(spec.ground_truth).answer);
  CHECK(code_of([] { gen_deep_search(3, 0, 2); }) == ErrorCode::invalid_parameter);
  CHECK(code_of([] { gen_deep_search(3, 2, 0); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("deep aggregation is order independent") {
  CHECK(aggregate_leaves({"b", "a", "c"}) == aggregate_leaves({"c", "b", "a"}));
  CHECK(aggregate_leaves({"x"}) == "x");
}

TEST_CASE("batch download costs") {
  const auto spec = gen_batch_download(1, 8, 3);
  CHECK(std::get<BatchTruth>(spec.ground_truth).files.size() == 8);
  CHECK(sequential_lookup_steps(spec) == 24);
  CHECK(sequential_lookup_steps(gen_batch_download(1, 1, 1)) == 1);
  CHECK(code_of([] { gen_batch_download(1, 0, 1); }) == ErrorCode::invalid_parameter);
  CHECK(code_of([] { gen_batch_download(1, 2, 0); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("distinct seeds give distinct file sets") {
  int distinct = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto ids = [](const TaskSpec& t) {
      std::set<std::string> out;
      for (const auto& f : std::get<BatchTruth>(t.ground_truth).files) out.insert(f.id);
      return out;
    };
    distinct += ids(gen_batch_download(2 * s, 6, 1)) != ids(gen_batch_download(2 * s + 1, 6, 1));
  }
  CHECK(distinct >= 99);
}

TEST_CASE("declared sizes match ground truth for random params") {
  Rng rng(1234);
  for (int i = 0; i < 300; ++i) {
    const auto seed = rng.next();
    const auto a = gen::between(rng, 1, 30), b = gen::between(rng, 1, 5);
    const auto w = gen_wide_search(seed, a, b);
    const auto d = gen_deep_search(seed, b, a);
    const auto f = gen_batch_download(seed, a, b);
    CHECK(unit_count(w) == a);
    CHECK(unit_count(d) == a);
    CHECK(unit_count(f) == a);
    CHECK(sequential_lookup_steps(d) == std::uint64_t(a) * b);
    CHECK(sequential_lookup_steps(f) == std::uint64_t(a) * b);
    CHECK_NOTHROW(validate(w));
    CHECK_NOTHROW(validate(d));
    CHECK_NOTHROW(validate(f));
    CHECK(w == gen_wide_search(seed, a, b));
  }
}

TEST_CASE("restricting a wide task to a subset gives that subset") {
  Rng rng(5);
  const auto spec = gen_wide_search(99, 15, 2);
  const auto& items = std::get<WideTruth>(spec.ground_truth).items;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < items.size(); ++k)
      if (rng.bernoulli(0.5)) idx.push_back(k);
    if (idx.empty()) idx.push_back(0);
    const auto sub = restrict_wide(spec, idx);
    CHECK_NOTHROW(validate(sub));
    const auto& got = std::get<WideTruth>(sub.ground_truth).items;
    REQUIRE(got.size() == idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK(got[k] == items[idx[k]]);
  }
}

TEST_CASE("validate rejects a cardinality mismatch") {
  auto spec = gen_wide_search(1, 5, 1);
  std::get<WideTruth>(spec.ground_truth).items.pop_back();
  CHECK(code_of([&] { validate(spec); }) == ErrorCode::invalid_spec);
}

TEST_CASE("default limits") {
  CHECK(default_limits(TaskKind::DeepSearch).orchestrator_max_steps == 15);
  CHECK(default_limits(TaskKind::WideSearch).orchestrator_max_steps == 100);
  CHECK(default_limits(TaskKind::BatchDownload).subagent_max_steps == 100);
}

TEST_CASE("descriptions contain no answers") {
  const auto spec = gen_wide_search(8, 10, 1);
  const auto text = describe(spec);
  for (const auto& item : std::get<WideTruth>(spec.ground_truth).items) {
    CHECK(text.find(item.key) != std::string::npos);
    CHECK(text.find(item.value) == std::string::npos);
  }
}

TEST_CASE("task distribution sampling") {
  TaskDistribution dist;
  dist.kinds = {TaskKind::WideSearch, TaskKind::DeepSearch, TaskKind::BatchDownload};
  dist.min_units = 3;
  dist.max_units = 9;
  const auto a = sample_tasks(dist, 17, 60);
  CHECK(a == sample_tasks(dist, 17, 60));
  std::set<TaskKind> kinds;
  for (const auto& t : a) {
    kinds.insert(t.kind);
    CHECK(unit_count(t) >= 3);
    CHECK(unit_count(t) <= 9);
  }
  CHECK(kinds.size() == 3);
  dist.min_units = 10;
  CHECK(code_of([&] { dist.validate(); }) == ErrorCode::config_error);
}
