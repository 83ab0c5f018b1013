// Python surface for the library. Wrappers construct action selectors
// internally so no binding hands out a pointer-holding selector whose
// referent python could garbage-collect.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cfrl/grid_pomdp.hpp"
#include "cfrl/invariants.hpp"
#include "cfrl/offpolicy.hpp"
#include "cfrl/policy_search.hpp"
#include "cfrl/pomdp_text.hpp"
#include "cfrl/two_door.hpp"
#include "cfrl/uniformize.hpp"

namespace py = pybind11;
using namespace cfrl;

namespace {

Observation make_observation(const std::map<std::string, std::string>& entries) {
  Observation o;
  for (const auto& [node, value] : entries) o.entries.emplace_back(node, value);
  return o;
}

SearchResult run_search(const std::string& algo, const PomdpSpec& model,
                        const PomdpSpec& env, const FullInfoPlan& plan,
                        const TabularPolicy& pi0, const SearchConfig& cfg) {
  const ExpertSelector expert(plan, env.horizon, env.num_actions());
  if (algo == "mbps") return mb_ps(model, env, expert, pi0, cfg);
  if (algo == "cfgps") return cf_gps(model, env, expert, pi0, cfg);
  if (algo == "gpslike") return gps_like(model, env, expert, pi0, cfg);
  throw InputError("unknown search algorithm '" + algo + "'");
}

}  // namespace

PYBIND11_MODULE(_cfrl, m) {
  m.doc() = "Exact counterfactual inference on discrete SCMs plus the POMDP "
            "evaluation and policy-search layers built on it.";

  py::register_exception<Error>(m, "CfrlError");

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("uniform", &Rng::uniform)
      .def("uniform_int", &Rng::uniform_int, py::arg("n"))
      .def("bernoulli", &Rng::bernoulli, py::arg("p"));
  m.def("derive_seed",
        [](uint64_t master, const std::vector<uint64_t>& path) {
          return derive_seed(master, std::span<const uint64_t>(path));
        },
        py::arg("master"), py::arg("path"));

  // --- SCM core ---
  py::class_<NodeDef>(m, "NodeDef")
      .def(py::init<std::string, std::vector<std::string>>(), py::arg("id"),
           py::arg("domain"))
      .def_readwrite("id", &NodeDef::id)
      .def_readwrite("domain", &NodeDef::domain);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init<std::string, std::vector<std::string>, std::vector<double>>(),
           py::arg("id"), py::arg("support"), py::arg("probs"))
      .def_readwrite("id", &NoiseSpec::id)
      .def_readwrite("support", &NoiseSpec::support)
      .def_readwrite("probs", &NoiseSpec::probs);

  py::class_<Mechanism>(m, "Mechanism")
      .def(py::init<std::string, std::vector<std::string>, std::string,
                    std::vector<int32_t>>(),
           py::arg("node"), py::arg("parents"), py::arg("noise"),
           py::arg("table"))
      .def_readwrite("node", &Mechanism::node)
      .def_readwrite("parents", &Mechanism::parents)
      .def_readwrite("noise", &Mechanism::noise)
      .def_readwrite("table", &Mechanism::table);

  m.def("constant_mechanism", &constant_mechanism, py::arg("node"),
        py::arg("noise"), py::arg("noise_support_size"), py::arg("value_index"));

  py::class_<Observation>(m, "Observation")
      .def(py::init(&make_observation), py::arg("entries"))
      .def_readonly("entries", &Observation::entries);

  py::class_<Intervention>(m, "Intervention")
      .def(py::init([](std::vector<Mechanism> reps) {
             return Intervention{std::move(reps)};
           }),
           py::arg("replacements") = std::vector<Mechanism>{})
      .def_readwrite("replacements", &Intervention::replacements);

  py::class_<Scm>(m, "Scm")
      .def(py::init<std::vector<NodeDef>, std::vector<NoiseSpec>,
                    std::vector<Mechanism>>(),
           py::arg("nodes"), py::arg("noise_specs"), py::arg("mechanisms"))
      .def_property_readonly("num_nodes", &Scm::num_nodes)
      .def("node_index", &Scm::node_index, py::arg("id"))
      .def("node", &Scm::node, py::arg("i"), py::return_value_policy::copy)
      .def("noise_spec", &Scm::noise_spec, py::arg("i"),
           py::return_value_policy::copy)
      .def("topo_ids", &Scm::topo_ids)
      .def("evaluate", &Scm::evaluate, py::arg("noise_values"))
      .def("to_labels", &Scm::to_labels, py::arg("values"));

  py::class_<Dist>(m, "Dist")
      .def_readonly("nodes", &Dist::nodes)
      .def_readonly("entries", &Dist::entries)
      .def("prob", &Dist::prob, py::arg("tuple"))
      .def("total", &Dist::total)
      .def("expectation", &Dist::expectation, py::arg("scm"));

  py::class_<ScenarioPosterior>(m, "ScenarioPosterior")
      .def_readonly("weights", &ScenarioPosterior::weights)
      .def("__len__", &ScenarioPosterior::size)
      .def("particle", [](const ScenarioPosterior& p, size_t i) {
        const auto s = p.particle(i);
        return std::vector<int32_t>(s.begin(), s.end());
      }, py::arg("i"));

  m.def("apply_intervention", &apply_intervention, py::arg("scm"),
        py::arg("intervention"));
  m.def("infer_noise_posterior", &infer_noise_posterior, py::arg("scm"),
        py::arg("obs"), py::arg("cap") = kDefaultEnumerationCap,
        py::call_guard<py::gil_scoped_release>());
  m.def("counterfactual_query", &counterfactual_query, py::arg("scm"),
        py::arg("obs"), py::arg("intervention"), py::arg("query"),
        py::arg("cap") = kDefaultEnumerationCap,
        py::call_guard<py::gil_scoped_release>());
  m.def("interventional_marginal", &interventional_marginal, py::arg("scm"),
        py::arg("intervention"), py::arg("query"),
        py::arg("cap") = kDefaultEnumerationCap,
        py::call_guard<py::gil_scoped_release>());
  m.def("mixed_sample", &mixed_sample, py::arg("scm"), py::arg("obs"),
        py::arg("cf_noise_subset"), py::arg("intervention"), py::arg("rng"),
        py::arg("cap") = kDefaultEnumerationCap);

  // --- POMDPs and environments ---
  py::class_<PomdpSpec>(m, "PomdpSpec")
      .def_readonly("state_labels", &PomdpSpec::state_labels)
      .def_readonly("action_labels", &PomdpSpec::action_labels)
      .def_readonly("horizon", &PomdpSpec::horizon)
      .def_property_readonly("num_states", &PomdpSpec::num_states)
      .def_property_readonly("num_actions", &PomdpSpec::num_actions);

  m.def("two_door", &two_door, py::arg("alpha") = 0.8);
  m.def("follow_obs_policy", &follow_obs_policy);

  py::class_<GridRewards>(m, "GridRewards")
      .def(py::init<>())
      .def_readwrite("push_on", &GridRewards::push_on)
      .def_readwrite("push_off", &GridRewards::push_off)
      .def_readwrite("solve", &GridRewards::solve);

  py::class_<GridPushConfig>(m, "GridPushConfig")
      .def(py::init<>())
      .def_readwrite("width", &GridPushConfig::width)
      .def_readwrite("height", &GridPushConfig::height)
      .def_readwrite("n_boxes", &GridPushConfig::n_boxes)
      .def_readwrite("horizon", &GridPushConfig::horizon)
      .def_readwrite("p_mask", &GridPushConfig::p_mask)
      .def_readwrite("window_radius", &GridPushConfig::window_radius)
      .def_readwrite("rewards", &GridPushConfig::rewards);

  m.def("desk_config", &desk_config);
  m.def("paper_config", &paper_config);
  m.def("as_pomdp", &as_pomdp, py::arg("cfg"), py::arg("max_states") = 200000,
        py::call_guard<py::gil_scoped_release>());
  m.def("grid_obs_summary", &grid_obs_summary, py::arg("obs"));
  m.def("grid_summary_featurizer", &grid_summary_featurizer, py::arg("k") = 1);
  m.def("desk_degenerate_twins",
        [](const GridPushConfig& cfg) {
          return degenerate_twins(enumerate_space(cfg));
        },
        py::arg("cfg"), py::call_guard<py::gil_scoped_release>());

  py::class_<Featurizer>(m, "Featurizer")
      .def(py::init<>())
      .def_readwrite("k", &Featurizer::k)
      .def_readwrite("include_rewards", &Featurizer::include_rewards);

  py::class_<TabularPolicy>(m, "TabularPolicy")
      .def_readonly("num_actions", &TabularPolicy::num_actions)
      .def_readwrite("feat", &TabularPolicy::feat)
      .def("set_logits", &TabularPolicy::set_logits, py::arg("key"),
           py::arg("row"))
      .def("probs", &TabularPolicy::probs, py::arg("key"))
      .def_property_readonly("n_keys", [](const TabularPolicy& p) {
        return p.logits.size();
      });

  m.def("uniform_policy", &uniform_policy, py::arg("num_actions"),
        py::arg("feat") = Featurizer{});
  m.def("save_policy", &save_policy, py::arg("policy"), py::arg("path"));
  m.def("load_policy", &load_policy, py::arg("path"));
  m.def("save_pomdp", &save_pomdp, py::arg("pomdp"), py::arg("path"));
  m.def("load_pomdp", &load_pomdp, py::arg("path"));

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("states", &Trajectory::states)
      .def_readonly("obs", &Trajectory::obs)
      .def_readonly("actions", &Trajectory::actions)
      .def_readonly("rewards", &Trajectory::rewards)
      .def_readonly("action_logprobs", &Trajectory::action_logprobs);

  m.def("trajectory_return", &trajectory_return, py::arg("trajectory"));
  m.def("env_rollout",
        [](const PomdpSpec& env, const TabularPolicy& pi, Rng& rng) {
          return env_rollout(env, PolicySelector(pi), rng);
        },
        py::arg("env"), py::arg("policy"), py::arg("rng"));

  // --- Off-policy evaluation ---
  py::class_<ReplayBuffer>(m, "ReplayBuffer")
      .def_readonly("env_hash", &ReplayBuffer::env_hash)
      .def_readonly("seed", &ReplayBuffer::seed)
      .def("__len__",
           [](const ReplayBuffer& b) { return b.episodes.size(); })
      .def("episode", [](const ReplayBuffer& b, size_t i) {
        return b.episodes.at(i).traj;
      }, py::arg("i"));

  m.def("fnv1a64", &fnv1a64, py::arg("s"));
  m.def("collect_episodes",
        [](const PomdpSpec& env, const TabularPolicy& mu,
           const std::string& behavior_id, int n, uint64_t seed,
           const std::string& env_hash) {
          return collect_episodes(env, PolicySelector(mu), behavior_id, n,
                                  seed, env_hash);
        },
        py::arg("env"), py::arg("mu"), py::arg("behavior_id"), py::arg("n"),
        py::arg("seed"), py::arg("env_hash"),
        py::call_guard<py::gil_scoped_release>());
  m.def("save_replay", &save_replay, py::arg("buffer"), py::arg("path"));
  m.def("load_replay", &load_replay, py::arg("path"));

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("estimator", &EvalReport::estimator)
      .def_readonly("t", &EvalReport::t)
      .def_readonly("estimate", &EvalReport::estimate)
      .def_readonly("std_error", &EvalReport::std_error)
      .def_readonly("n_effective", &EvalReport::n_effective)
      .def_readonly("n_used", &EvalReport::n_used)
      .def_readonly("skipped", &EvalReport::skipped)
      .def("__repr__", [](const EvalReport& r) {
        return "EvalReport(" + eval_csv_row(r) + ")";
      });

  py::enum_<IsMode>(m, "IsMode")
      .value("ORDINARY", IsMode::kOrdinary)
      .value("SELF_NORMALIZED", IsMode::kSelfNormalized);

  m.def("is_evaluate", &is_evaluate, py::arg("buffer"), py::arg("pi"),
        py::arg("mode") = IsMode::kSelfNormalized,
        py::call_guard<py::gil_scoped_release>());

  py::class_<MismatchedModel>(m, "MismatchedModel")
      .def_readonly("model", &MismatchedModel::model)
      .def_readonly("epsilon", &MismatchedModel::epsilon);

  m.def("corrupt_prior", &corrupt_prior, py::arg("model"), py::arg("epsilon"),
        py::arg("twin"));
  m.def("mb_evaluate",
        [](const PomdpSpec& model, const TabularPolicy& pi, int n,
           uint64_t seed, int workers) {
          return mb_evaluate(model, PolicySelector(pi), n, seed, workers);
        },
        py::arg("model"), py::arg("pi"), py::arg("n_rollouts"),
        py::arg("seed"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("cf_evaluate",
        [](const PomdpSpec& model, const TabularPolicy& pi,
           const ReplayBuffer& buffer, int t, int n_cf, uint64_t seed,
           int workers) {
          return cf_evaluate(model, PolicySelector(pi), buffer, t, n_cf, seed,
                             workers);
        },
        py::arg("model"), py::arg("pi"), py::arg("buffer"), py::arg("t"),
        py::arg("n_cf_per_episode"), py::arg("seed"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("sweep_conditioning",
        [](const PomdpSpec& model, const TabularPolicy& pi,
           const ReplayBuffer& buffer, const std::vector<int>& t_list,
           int n_cf, uint64_t seed, int workers) {
          return sweep_conditioning(model, PolicySelector(pi), buffer, t_list,
                                    n_cf, seed, workers);
        },
        py::arg("model"), py::arg("pi"), py::arg("buffer"), py::arg("t_list"),
        py::arg("n_cf_per_episode"), py::arg("seed"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());

  // --- Policy search ---
  py::class_<BetaSchedule>(m, "BetaSchedule")
      .def(py::init<>())
      .def_readwrite("tau", &BetaSchedule::tau)
      .def("__call__", &BetaSchedule::operator(), py::arg("k"));

  py::class_<SearchConfig>(m, "SearchConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &SearchConfig::iterations)
      .def_readwrite("rollouts", &SearchConfig::rollouts)
      .def_readwrite("n_cf", &SearchConfig::n_cf)
      .def_readwrite("refresh_period", &SearchConfig::refresh_period)
      .def_readwrite("eta", &SearchConfig::eta)
      .def_readwrite("kappa", &SearchConfig::kappa)
      .def_readwrite("beta", &SearchConfig::beta)
      .def_readwrite("eval_rollouts", &SearchConfig::eval_rollouts)
      .def_readwrite("workers", &SearchConfig::workers)
      .def_readwrite("seed", &SearchConfig::seed);

  py::class_<SearchMetrics>(m, "SearchMetrics")
      .def_readonly("iter", &SearchMetrics::iter)
      .def_readonly("algo", &SearchMetrics::algo)
      .def_readonly("beta", &SearchMetrics::beta)
      .def_readonly("mean_train_return", &SearchMetrics::mean_train_return)
      .def_readonly("true_eval_return", &SearchMetrics::true_eval_return)
      .def_readonly("std_error", &SearchMetrics::std_error)
      .def_readonly("skipped", &SearchMetrics::skipped);

  py::class_<FullInfoPlan>(m, "FullInfoPlan")
      .def_readonly("expected_return", &FullInfoPlan::expected_return);

  m.def("plan_full_info", &plan_full_info, py::arg("pomdp"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<SearchResult>(m, "SearchResult")
      .def_readonly("policy", &SearchResult::policy)
      .def_readonly("metrics", &SearchResult::metrics);

  m.def("policy_search", &run_search, py::arg("algo"), py::arg("model"),
        py::arg("env"), py::arg("plan"), py::arg("pi0"), py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>(),
        "Run mbps, cfgps or gpslike with a full-information planning expert.");

  // --- Verification ---
  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("pass_", &CheckResult::pass)
      .def_readonly("deviation", &CheckResult::deviation)
      .def_readonly("tolerance", &CheckResult::tolerance)
      .def_readonly("detail", &CheckResult::detail);

  py::class_<VerifyReport>(m, "VerifyReport")
      .def_readonly("seed", &VerifyReport::seed)
      .def_readonly("checks", &VerifyReport::checks)
      .def_property_readonly("all_pass", &VerifyReport::all_pass)
      .def("to_text", &VerifyReport::to_text);

  m.def("verify_suite", &verify_suite, py::arg("seed"),
        py::arg("n_random_scms"), py::arg("fault") = "none",
        py::call_guard<py::gil_scoped_release>());
}
