#include "swarm/task_gen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "swarm/common.hpp"

namespace swarm {
namespace {

constexpr std::uint64_t kWideSalt = 0x77696465;
constexpr std::uint64_t kDeepSalt = 0x64656570;
constexpr std::uint64_t kBatchSalt = 0x62617463;

std::string random_word(Rng& rng, std::size_t len) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz";
  std::string s(len, 'a');
  for (auto& c : s) c = kAlphabet[rng.below(26)];
  return s;
}

std::string indexed(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::invalid_parameter, what);
}

}  // namespace

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::WideSearch: return "wide_search";
    case TaskKind::DeepSearch: return "deep_search";
    case TaskKind::BatchDownload: return "batch_download";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "wide_search" || s == "wide") return TaskKind::WideSearch;
  if (s == "deep_search" || s == "deep") return TaskKind::DeepSearch;
  if (s == "batch_download" || s == "batch") return TaskKind::BatchDownload;
  throw Error(ErrorCode::parse_error, "unknown task kind '" + s + "'");
}

StepLimits default_limits(TaskKind kind) {
  // deep-search mirrors the 15-step orchestrator budget, the wide families
  // the 100-step one; sub-agents always get 100
  if (kind == TaskKind::DeepSearch) return {15, 100, 30};
  return {100, 100, 200};
}

TaskSpec gen_wide_search(std::uint64_t seed, std::uint32_t n_items, std::uint32_t sources_per_item,
                         std::optional<StepLimits> limits) {
  require(n_items >= 1, "wide search needs n_items >= 1");
  require(sources_per_item >= 1, "wide search needs sources_per_item >= 1");
  Rng rng(derive_seed(seed, {kWideSalt, n_items, sources_per_item}));
  WideTruth truth;
  truth.items.reserve(n_items);
  for (std::uint32_t i = 0; i < n_items; ++i) {
    WideItem item;
    item.key = indexed("entity-", i);
    item.value = random_word(rng, 8);
    item.sources_required = 1 + static_cast<std::uint32_t>(rng.below(sources_per_item));
    truth.items.push_back(std::move(item));
  }
  TaskSpec spec;
  spec.task_id = "wide-s" + std::to_string(seed) + "-n" + std::to_string(n_items) + "-p" +
                 std::to_string(sources_per_item);
  spec.kind = TaskKind::WideSearch;
  spec.seed = seed;
  spec.params = WideParams{n_items, sources_per_item};
  spec.ground_truth = std::move(truth);
  spec.limits = limits.value_or(default_limits(TaskKind::WideSearch));
  return spec;
}

void TaskDistribution::validate() const {
  if (kinds.empty()) throw Error(ErrorCode::config_error, "task distribution needs at least one kind");
  if (min_units < 1 || min_units > max_units) throw Error(ErrorCode::config_error, "bad unit range");
  if (min_file_cost < 1 || min_file_cost > max_file_cost)
    throw Error(ErrorCode::config_error, "bad file cost range");
  if (sources_per_item < 1 || depth < 1) throw Error(ErrorCode::config_error, "zero size parameter");
}

TaskSpec sample_task(const TaskDistribution& dist, std::uint64_t seed) {
  dist.validate();
  Rng rng(derive_seed(seed, {0x6d6978}));
  const auto kind = dist.kinds[rng.below(dist.kinds.size())];
  const auto n = dist.min_units + static_cast<std::uint32_t>(rng.below(dist.max_units - dist.min_units + 1));
  switch (kind) {
    case TaskKind::WideSearch: return gen_wide_search(seed, n, dist.sources_per_item, dist.limits);
    case TaskKind::DeepSearch: return gen_deep_search(seed, dist.depth, n, dist.limits);
    case TaskKind::BatchDownload: {
      const auto cost =
          dist.min_file_cost + static_cast<std::uint32_t>(rng.below(dist.max_file_cost - dist.min_file_cost + 1));
      return gen_batch_download(seed, n, cost, dist.limits);
    }
  }
  throw Error(ErrorCode::invalid_parameter, "unknown task kind");
}

std::vector<TaskSpec> sample_tasks(const TaskDistribution& dist, std::uint64_t seed, std::size_t count) {
  std::vector<TaskSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_task(dist, derive_seed(seed, {i})));
  return out;
}

std::string aggregate_leaves(std::vector<std::string> leaves) {
  std::sort(leaves.begin(), leaves.end());
  std::string out;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (i) out += '+';
    out += leaves[i];
  }
  return out;
}

TaskSpec gen_deep_search(std::uint64_t seed, std::uint32_t depth, std::uint32_t branching,
                         std::optional<StepLimits> limits) {
  require(depth >= 1, "deep search needs depth >= 1");
  require(branching >= 1, "deep search needs branching >= 1");
  Rng rng(derive_seed(seed, {kDeepSalt, depth, branching}));
  DeepTruth truth;
  std::vector<std::string> leaves;
  for (std::uint32_t b = 0; b < branching; ++b) {
    DeepBranch branch;
    for (std::uint32_t h = 0; h < depth; ++h) {
      branch.hops.push_back(indexed("branch-", b) + "/" + random_word(rng, 6));
    }
    branch.leaf = random_word(rng, 8);
    leaves.push_back(branch.leaf);
    truth.branches.push_back(std::move(branch));
  }
  truth.answer = aggregate_leaves(std::move(leaves));
  TaskSpec spec;
  spec.task_id = "deep-s" + std::to_string(seed) + "-d" + std::to_string(depth) + "-b" +
                 std::to_string(branching);
  spec.kind = TaskKind::DeepSearch;
  spec.seed = seed;
  spec.params = DeepParams{depth, branching};
  spec.ground_truth = std::move(truth);
  spec.limits = limits.value_or(default_limits(TaskKind::DeepSearch));
  return spec;
}

TaskSpec gen_batch_download(std::uint64_t seed, std::uint32_t n_files, std::uint32_t file_cost,
                            std::optional<StepLimits> limits) {
  require(n_files >= 1, "batch download needs n_files >= 1");
  require(file_cost >= 1, "batch download needs file_cost >= 1");
  Rng rng(derive_seed(seed, {kBatchSalt}));
  BatchTruth truth;
  std::set<std::string> seen;
  while (truth.files.size() < n_files) {
    // 48 random bits per id
    std::string id = "file-" + hex64(rng.next()).substr(4);
    if (!seen.insert(id).second) continue;
    truth.files.push_back({std::move(id), file_cost});
  }
  TaskSpec spec;
  spec.task_id = "batch-s" + std::to_string(seed) + "-f" + std::to_string(n_files) + "-c" +
                 std::to_string(file_cost);
  spec.kind = TaskKind::BatchDownload;
  spec.seed = seed;
  spec.params = BatchParams{n_files, file_cost};
  spec.ground_truth = std::move(truth);
  spec.limits = limits.value_or(default_limits(TaskKind::BatchDownload));
  return spec;
}

TaskSpec generate(TaskKind kind, std::uint64_t seed, const TaskParams& params,
                  std::optional<StepLimits> limits) {
  switch (kind) {
    case TaskKind::WideSearch: {
      auto* p = std::get_if<WideParams>(&params);
      if (!p) throw Error(ErrorCode::invalid_parameter, "wide search needs WideParams");
      return gen_wide_search(seed, p->n_items, p->sources_per_item, limits);
    }
    case TaskKind::DeepSearch: {
      auto* p = std::get_if<DeepParams>(&params);
      if (!p) throw Error(ErrorCode::invalid_parameter, "deep search needs DeepParams");
      return gen_deep_search(seed, p->depth, p->branching, limits);
    }
    case TaskKind::BatchDownload: {
      auto* p = std::get_if<BatchParams>(&params);
      if (!p) throw Error(ErrorCode::invalid_parameter, "batch download needs BatchParams");
      return gen_batch_download(seed, p->n_files, p->file_cost, limits);
    }
  }
  throw Error(ErrorCode::invalid_parameter, "unknown task kind");
}

void validate(const TaskSpec& spec) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::invalid_spec, spec.task_id + ": " + what);
  };
  const auto& l = spec.limits;
  if (l.orchestrator_max_steps == 0 || l.subagent_max_steps == 0 || l.max_tokens == 0)
    fail("step limits must be positive");
  switch (spec.kind) {
    case TaskKind::WideSearch: {
      auto* p = std::get_if<WideParams>(&spec.params);
      auto* t = std::get_if<WideTruth>(&spec.ground_truth);
      if (!p || !t) fail("kind/params/ground_truth mismatch");
      if (p->n_items == 0 || p->sources_per_item == 0) fail("zero size parameter");
      if (t->items.size() != p->n_items) fail("ground truth cardinality != n_items");
      std::set<std::string> keys;
      for (const auto& item : t->items) {
        if (item.sources_required < 1 || item.sources_required > p->sources_per_item)
          fail("item sources_required out of range");
        if (!keys.insert(item.key).second) fail("duplicate item key");
      }
      break;
    }
    case TaskKind::DeepSearch: {
      auto* p = std::get_if<DeepParams>(&spec.params);
      auto* t = std::get_if<DeepTruth>(&spec.ground_truth);
      if (!p || !t) fail("kind/params/ground_truth mismatch");
      if (p->depth == 0 || p->branching == 0) fail("zero size parameter");
      if (t->branches.size() != p->branching) fail("branch count != branching");
      std::vector<std::string> leaves;
      for (const auto& b : t->branches) {
        if (b.hops.size() != p->depth) fail("branch length != depth");
        leaves.push_back(b.leaf);
      }
      if (t->answer != aggregate_leaves(leaves)) fail("answer is not the aggregate of leaves");
      break;
    }
    case TaskKind::BatchDownload: {
      auto* p = std::get_if<BatchParams>(&spec.params);
      auto* t = std::get_if<BatchTruth>(&spec.ground_truth);
      if (!p || !t) fail("kind/params/ground_truth mismatch");
      if (p->n_files == 0 || p->file_cost == 0) fail("zero size parameter");
      if (t->files.size() != p->n_files) fail("file count != n_files");
      std::set<std::string> ids;
      for (const auto& f : t->files) {
        if (f.cost != p->file_cost) fail("file cost != file_cost");
        if (!ids.insert(f.id).second) fail("duplicate file id");
      }
      break;
    }
  }
}

TaskSpec restrict_wide(const TaskSpec& spec, std::span<const std::size_t> indices) {
  auto* t = std::get_if<WideTruth>(&spec.ground_truth);
  auto* p = std::get_if<WideParams>(&spec.params);
  if (spec.kind != TaskKind::WideSearch || !t || !p)
    throw Error(ErrorCode::invalid_parameter, "restrict_wide on a non wide-search task");
  if (indices.empty()) throw Error(ErrorCode::invalid_parameter, "empty item subset");
  std::set<std::size_t> uniq(indices.begin(), indices.end());
  if (uniq.size() != indices.size()) throw Error(ErrorCode::invalid_parameter, "duplicate index");
  TaskSpec out = spec;
  WideTruth sub;
  std::string suffix = "-sub";
  for (auto i : uniq) {
    if (i >= t->items.size()) throw Error(ErrorCode::invalid_parameter, "item index out of range");
    sub.items.push_back(t->items[i]);
    suffix += "." + std::to_string(i);
  }
  out.task_id = spec.task_id + suffix;
  out.params = WideParams{static_cast<std::uint32_t>(sub.items.size()), p->sources_per_item};
  out.ground_truth = std::move(sub);
  return out;
}

std::size_t unit_count(const TaskSpec& spec) {
  return std::visit(
      [](const auto& t) -> std::size_t {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, WideTruth>) return t.items.size();
        else if constexpr (std::is_same_v<T, DeepTruth>) return t.branches.size();
        else return t.files.size();
      },
      spec.ground_truth);
}

std::uint32_t unit_cost(const TaskSpec& spec, std::size_t i) {
  if (i >= unit_count(spec)) throw Error(ErrorCode::invalid_parameter, "unit index out of range");
  return std::visit(
      [i](const auto& t) -> std::uint32_t {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, WideTruth>) return t.items[i].sources_required;
        else if constexpr (std::is_same_v<T, DeepTruth>)
          return static_cast<std::uint32_t>(t.branches[i].hops.size());
        else return t.files[i].cost;
      },
      spec.ground_truth);
}

std::string unit_key(const TaskSpec& spec, std::size_t i) {
  if (i >= unit_count(spec)) throw Error(ErrorCode::invalid_parameter, "unit index out of range");
  return std::visit(
      [i](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, WideTruth>) return t.items[i].key;
        else if constexpr (std::is_same_v<T, DeepTruth>) return t.branches[i].hops.front();
        else return t.files[i].id;
      },
      spec.ground_truth);
}

std::uint64_t sequential_lookup_steps(const TaskSpec& spec) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < unit_count(spec); ++i) total += unit_cost(spec, i);
  return total;
}

std::string describe(const TaskSpec& spec) {
  std::ostringstream os;
  const auto n = unit_count(spec);
  switch (spec.kind) {
    case TaskKind::WideSearch: os << "Collect the attribute value of each of " << n << " entities:"; break;
    case TaskKind::DeepSearch:
      os << "Follow " << n << " evidence chains to their end and combine the findings. Entry points:";
      break;
    case TaskKind::BatchDownload: os << "Download all of the following " << n << " files:"; break;
  }
  for (std::size_t i = 0; i < n; ++i) os << (i ? ", " : " ") << unit_key(spec, i);
  os << '.';
  return os.str();
}

}  // namespace swarm
