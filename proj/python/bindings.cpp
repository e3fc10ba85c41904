// Python bindings. Structured values cross the boundary as JSON text; the
// parl_swarm package converts them to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "swarm/harness.hpp"

namespace py = pybind11;
using namespace swarm;

namespace {

template <class T>
T load(const std::string& text) {
  return parse_json(text).get<T>();
}

RolloutContext make_context(const std::string& vocabulary, const std::string& env) {
  VocabularyConfig vc = vocabulary.empty() ? VocabularyConfig{} : load<VocabularyConfig>(vocabulary);
  EnvConfig ec = EnvConfig::standard();
  if (!env.empty()) from_json(parse_json(env), ec);
  return RolloutContext{Vocabulary(vc), ec};
}

std::vector<StageRecord> stages_of(const std::string& text) { return load<std::vector<StageRecord>>(text); }

// groups: [[trace, ...], ...]; each response is scored by its trace's composite reward.
RolloutBatch batch_of(const std::string& groups) {
  RolloutBatch batch;
  for (const auto& g : parse_json(groups)) {
    ProblemGroup group;
    for (const auto& t : g) {
      const auto trace = t.get<EpisodeTrace>();
      group.task_id = trace.task_id;
      group.responses.push_back(to_response(trace, trace.reward.composite));
    }
    batch.groups.push_back(std::move(group));
  }
  return batch;
}

ObjectiveTerm term_of(const std::string& s) {
  if (s == "total") return ObjectiveTerm::total;
  if (s == "advantage") return ObjectiveTerm::advantage;
  if (s == "penalty") return ObjectiveTerm::penalty;
  throw Error(ErrorCode::invalid_parameter, "term must be total, advantage or penalty");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parallel-agent orchestration core";

  // message text is "<code>: <detail>"
  py::register_exception<Error>(m, "SwarmError", PyExc_RuntimeError);

  m.def("generate_task", [](const std::string& kind, std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
    switch (task_kind_from_string(kind)) {
      case TaskKind::WideSearch: return json(gen_wide_search(seed, a, b)).dump();
      case TaskKind::DeepSearch: return json(gen_deep_search(seed, a, b)).dump();
      case TaskKind::BatchDownload: return json(gen_batch_download(seed, a, b)).dump();
    }
    throw Error(ErrorCode::invalid_parameter, "unknown kind");
  });
  m.def("sample_tasks", [](const std::string& dist, std::uint64_t seed, std::size_t count) {
    return json(sample_tasks(load<TaskDistribution>(dist), seed, count)).dump();
  });
  m.def("describe", [](const std::string& task) { return describe(load<TaskSpec>(task)); });

  m.def("vocabulary", [](const std::string& vocabulary) {
    const Vocabulary v(vocabulary.empty() ? VocabularyConfig{} : load<VocabularyConfig>(vocabulary));
    std::vector<std::string> codes;
    for (std::size_t i = 0; i < v.size(); ++i) codes.push_back(v[i].code());
    return codes;
  });
  m.def("zero_params", [](const std::string& vocabulary) {
    return json(zero_params(make_context(vocabulary, "").vocab)).dump();
  });

  m.def(
      "rollout",
      [](const std::string& task, const std::string& policy, bool scripted, std::uint64_t seed,
         const std::string& vocabulary, const std::string& env) {
        const auto ctx = make_context(vocabulary, env);
        const auto spec = load<TaskSpec>(task);
        py::gil_scoped_release release;
        if (scripted) {
          auto p = ScriptedPolicy::from_snapshot_id(policy);
          if (!p) throw Error(ErrorCode::invalid_parameter, "unknown scripted policy '" + policy + "'");
          return json(rollout_episode(*p, spec, seed, ctx)).dump();
        }
        return json(rollout_episode(load<PolicyParams>(policy), spec, seed, ctx)).dump();
      },
      py::arg("task"), py::arg("policy"), py::arg("scripted"), py::arg("seed"), py::arg("vocabulary") = "",
      py::arg("env") = "");

  m.def("critical_steps", [](const std::string& stages) { return critical_steps(stages_of(stages)); });
  m.def("total_steps", [](const std::string& stages) { return total_steps(stages_of(stages)); });
  m.def("metrics_row", [](const std::string& trace, const std::string& kind) {
    return json(metrics_row(load<EpisodeTrace>(trace), task_kind_from_string(kind))).dump();
  });

  m.def("parl_reward", [](const std::string& task, const std::string& trace, const std::string& parl,
                          std::uint64_t t) {
    return json(parl_reward(load<TaskSpec>(task), load<EpisodeTrace>(trace), load<PARLConfig>(parl), t)).dump();
  });

  m.def("objective", [](const std::string& params, const std::string& groups, const std::string& rl,
                        const std::string& term) {
    return rl_objective(load<PolicyParams>(params), batch_of(groups), load<RLConfig>(rl), term_of(term));
  });
  m.def("gradient", [](const std::string& params, const std::string& groups, const std::string& rl,
                       const std::string& term) {
    return rl_gradient(load<PolicyParams>(params), batch_of(groups), load<RLConfig>(rl), term_of(term));
  });
  m.def("fd_check", [](const std::string& params, const std::string& groups, const std::string& rl, double eps,
                       const std::string& term) {
    const auto r = fd_check(load<PolicyParams>(params), batch_of(groups), load<RLConfig>(rl), eps, term_of(term));
    return py::make_tuple(r.analytic, r.finite_diff, r.max_rel_error);
  });

  m.def("replay", [](const std::string& line, const std::vector<std::string>& params) {
    SnapshotStore store;
    for (const auto& p : params) store.add(load<PolicyParams>(p));
    const auto v = replay_trace(parse_trace_record(line), store);
    return py::make_tuple(v.clean, v.divergences);
  });

  m.def("run_experiment", [](const std::string& config) {
    const auto cfg = parse_experiment_config(parse_json(config));
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run_experiment(cfg);
    }
    py::dict out;
    out["episodes"] = s.episodes;
    out["files"] = s.files;
    py::dict evals;
    for (const auto& [label, e] : s.evaluations) {
      py::dict d;
      d["episodes"] = e.episodes;
      d["mean_r_perf"] = e.mean_r_perf;
      d["mean_critical_steps"] = e.mean_critical_steps;
      d["mean_parallelism"] = e.mean_parallelism;
      d["zero_spawn_fraction"] = e.zero_spawn_fraction;
      d["mean_tokens"] = e.mean_tokens;
      evals[py::str(label)] = d;
    }
    out["evaluations"] = evals;
    return out;
  });
}
