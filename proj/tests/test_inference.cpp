#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cfrl/episode_inference.hpp"
#include "cfrl/grid_pomdp.hpp"
#include "cfrl/pomdp.hpp"
#include "cfrl/rng.hpp"
#include "cfrl/two_door.hpp"
#include "doctest.h"

using namespace cfrl;

namespace {

// Same stochastic chain as the compile tests: 2 states, noisy readings,
// stay keeps the state with p=0.7, go flips it surely.
PomdpSpec noisy_chain(int horizon) {
  PomdpSpec p;
  p.state_labels = {"s0", "s1"};
  p.action_labels = {"stay", "go"};
  p.horizon = horizon;
  p.init = {"u_s", {"s0", "s1"}, {0.6, 0.4}};
  p.trans_noise = {"u_t", {"n0", "n1"}, {0.7, 0.3}};
  p.trans = {0, 1, 1, 1, 1, 0, 0, 0};
  p.reward = {0.0, 0.0, 0.0, 1.0};
  p.reward_min = 0.0;
  p.reward_max = 1.0;
  TabularObs obs;
  obs.noise = {"u_o", {"hit", "miss"}, {0.9, 0.1}};
  obs.obs_labels = {"z0", "z1"};
  obs.table = {0, 1, 1, 0};
  p.obs = std::make_shared<TabularObsModel>(std::move(obs));
  return p;
}

// Independent oracle: the smoothed path posterior by direct products over
// every state path, never touching the filter.
std::map<std::vector<int32_t>, double> brute_path_joint(const PomdpSpec& p,
                                                        const History& ev) {
  const int t = static_cast<int>(ev.obs.size());
  const int n = p.num_states();
  std::map<std::vector<int32_t>, double> out;
  std::vector<int32_t> path(t, 0);
  double total = 0.0;
  bool running = true;
  while (running) {
    double w = p.init.probs[path[0]] * std::exp(p.obs->loglik(path[0], ev.obs[0]));
    for (int i = 0; i + 1 < t && w > 0.0; ++i)
      w *= p.trans_prob(path[i], ev.actions[i], path[i + 1]) *
           std::exp(p.obs->loglik(path[i + 1], ev.obs[i + 1]));
    if (w > 0.0) {
      out[path] += w;
      total += w;
    }
    running = false;
    for (int i = t - 1; i >= 0; --i) {
      if (++path[i] < n) {
        running = true;
        break;
      }
      path[i] = 0;
    }
  }
  REQUIRE(total > 0.0);
  for (auto& [key, v] : out) v /= total;
  return out;
}

// The same posterior from the exact engine: noise particles pushed through
// the compiled model, projected onto the state nodes.
std::map<std::vector<int32_t>, double> engine_path_joint(const CompiledPomdp& c,
                                                         const Trajectory& traj,
                                                         int t) {
  const Observation ev = trajectory_evidence(c, traj, t);
  const ScenarioPosterior post = infer_noise_posterior(c.scm, ev);
  std::map<std::vector<int32_t>, double> out;
  for (size_t i = 0; i < post.size(); ++i) {
    const auto particle = post.particle(i);
    const Assignment values =
        c.scm.evaluate(Assignment(particle.begin(), particle.end()));
    std::vector<int32_t> path(t);
    for (int j = 0; j < t; ++j) path[j] = values[c.scm.node_index(c.s_nodes[j])];
    out[path] += post.weights[i];
  }
  return out;
}

struct ForcedSelector : ActionSelector {
  std::vector<int32_t> actions;
  int n = 0;
  int num_actions() const override { return n; }
  std::vector<double> action_probs(int step, const History&, int32_t) const override {
    std::vector<double> p(n, 0.0);
    p[actions.at(step - 1)] = 1.0;
    return p;
  }
};

Trajectory logged_episode(const PomdpSpec& p, uint64_t seed) {
  Rng rng(derive_seed(seed, {static_cast<uint64_t>(Stream::kData)}));
  return env_rollout(p, PolicySelector(uniform_policy(p.num_actions())), rng);
}

}  // namespace

TEST_CASE("filtered marginals match brute-force enumeration") {
  const PomdpSpec p = noisy_chain(4);
  const Trajectory traj = logged_episode(p, 41);
  for (int t = 1; t <= 4; ++t) {
    const History ev = history_prefix(traj, t);
    const auto alpha = filter_marginals(p, ev);
    REQUIRE(static_cast<int>(alpha.size()) == t);
    for (int i = 1; i <= t; ++i) {
      // The filtered marginal at step i conditions on the first i steps only.
      const auto joint = brute_path_joint(p, history_prefix(traj, i));
      std::vector<double> marginal(p.num_states(), 0.0);
      for (const auto& [path, w] : joint) marginal[path[i - 1]] += w;
      double sum = 0.0;
      for (int32_t s = 0; s < p.num_states(); ++s) {
        CHECK(std::abs(alpha[i - 1][s] - marginal[s]) <= 1e-12);
        sum += alpha[i - 1][s];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("smoothed path posterior equals the full-enumeration engine") {
  const PomdpSpec p = noisy_chain(3);
  const TabularPolicy mu = uniform_policy(2);
  const CompiledPomdp c = compile(p, mu);
  for (uint64_t seed : {7ULL, 19ULL, 23ULL}) {
    const Trajectory traj = logged_episode(p, seed);
    for (int t = 1; t <= 3; ++t) {
      const auto brute = brute_path_joint(p, history_prefix(traj, t));
      const auto engine = engine_path_joint(c, traj, t);
      REQUIRE(brute.size() == engine.size());
      for (const auto& [path, w] : brute) {
        const auto it = engine.find(path);
        REQUIRE(it != engine.end());
        CHECK(std::abs(w - it->second) <= 1e-10);
      }
    }
  }
}

TEST_CASE("two-door posterior noise sampler matches the engine joint") {
  const PomdpSpec p = two_door();
  const CompiledPomdp c = compile(p, uniform_policy(2));
  Trajectory traj;
  traj.states = {0, 0};
  traj.obs = {"left", "right"};
  traj.actions = {0};
  traj.rewards = {1.0};
  traj.action_logprobs = {std::log(0.5)};

  // Engine joint over (initial scenario, both reading-noise draws).
  const Observation ev = trajectory_evidence(c, traj, 2);
  const ScenarioPosterior post = infer_noise_posterior(c.scm, ev);
  const int i_s = c.scm.noise_node("u_s1");
  const int i_o1 = c.scm.noise_node("u_o1");
  const int i_o2 = c.scm.noise_node("u_o2");
  std::map<std::vector<int32_t>, double> exact;
  for (size_t i = 0; i < post.size(); ++i) {
    const auto pt = post.particle(i);
    exact[{pt[i_s], pt[i_o1], pt[i_o2]}] += post.weights[i];
  }
  // The two readings cancel: scenario L with (hit, miss) or R with (miss,
  // hit), equally likely, and nothing else.
  REQUIRE(exact.size() == 2);
  CHECK(exact.at({0, 0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exact.at({1, 1, 0}) == doctest::Approx(0.5).epsilon(1e-12));

  const History evidence = history_prefix(traj, 2);
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kPosterior), 11}));
  const int n = 20000;
  std::map<std::vector<int32_t>, double> emp;
  for (int i = 0; i < n; ++i) {
    const EpisodeNoise noise = sample_posterior_noise(p, evidence, rng);
    emp[{noise.initial, noise.obs[0][0], noise.obs[1][0]}] += 1.0 / n;
  }
  REQUIRE(emp.size() == 2);  // the sampler stays on the exact support
  for (const auto& [key, w] : exact) {
    const double sigma = std::sqrt(w * (1 - w) / n);
    CHECK(std::abs(emp.at(key) - w) <= 4 * sigma);
  }
}

TEST_CASE("state path sampler agrees with the brute-force joint") {
  const PomdpSpec p = noisy_chain(3);
  const Trajectory traj = logged_episode(p, 101);
  const History ev = history_prefix(traj, 3);
  const auto brute = brute_path_joint(p, ev);
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kPosterior), 12}));
  const int n = 30000;
  std::map<std::vector<int32_t>, double> emp;
  for (int i = 0; i < n; ++i) emp[sample_state_path(p, ev, rng)] += 1.0 / n;
  for (const auto& [path, w] : emp) CHECK(brute.count(path) == 1);
  for (const auto& [path, w] : brute) {
    const double sigma = std::sqrt(w * (1 - w) / n);
    CHECK(std::abs((emp.count(path) ? emp.at(path) : 0.0) - w) <= 4 * sigma + 1e-9);
  }
}

TEST_CASE("posterior noise replays the logged prefix exactly") {
  const PomdpSpec p = noisy_chain(5);
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kPosterior), 13}));
  for (int episode = 0; episode < 200; ++episode) {
    const Trajectory traj = logged_episode(p, 1000 + episode);
    const int t = 1 + rng.uniform_int(5);
    const EpisodeNoise noise = sample_posterior_noise(p, history_prefix(traj, t), rng);
    ForcedSelector replay;
    replay.n = 2;
    replay.actions = traj.actions;
    Rng action_rng(1);
    const Trajectory re = rollout_with_noise(p, replay, noise, action_rng);
    for (int i = 0; i < t; ++i) CHECK(re.obs[i] == traj.obs[i]);
    CHECK(re.actions == traj.actions);
  }
}

TEST_CASE("grid posteriors replay the prefix and stay feasible") {
  const PomdpSpec p = as_pomdp(desk_config());
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kPosterior), 14}));
  const TabularPolicy mu = uniform_policy(5);
  for (int episode = 0; episode < 30; ++episode) {
    Rng data_rng(derive_seed(77, {static_cast<uint64_t>(Stream::kData),
                                  static_cast<uint64_t>(episode)}));
    const Trajectory traj = env_rollout(p, PolicySelector(mu), data_rng);
    const History ev = history_prefix(traj, 6);
    const auto alpha = filter_marginals(p, ev);
    for (size_t i = 0; i < alpha.size(); ++i)
      for (int32_t s = 0; s < p.num_states(); ++s)
        if (alpha[i][s] > 0.0)
          CHECK(p.obs->loglik(s, traj.obs[i]) >
                -std::numeric_limits<double>::infinity());
    const EpisodeNoise noise = sample_posterior_noise(p, ev, rng);
    ForcedSelector replay;
    replay.n = 5;
    replay.actions = traj.actions;
    Rng action_rng(2);
    const Trajectory re = rollout_with_noise(p, replay, noise, action_rng);
    for (int i = 0; i < 6; ++i) CHECK(re.obs[i] == traj.obs[i]);
  }
}

TEST_CASE("empty evidence reduces to the prior") {
  const PomdpSpec p = two_door();
  CHECK(filter_marginals(p, History{}).empty());
  Rng path_rng(1);
  CHECK(sample_state_path(p, History{}, path_rng).empty());
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kPosterior), 15}));
  const int n = 20000;
  int left = 0;
  for (int i = 0; i < n; ++i)
    left += sample_posterior_noise(p, History{}, rng).initial == 0;
  const double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(static_cast<double>(left) / n - 0.5) <= 3 * sigma);
}

TEST_CASE("impossible evidence is reported as a contradiction") {
  const PomdpSpec certain = two_door(1.0);  // readings never lie
  Trajectory traj;
  traj.states = {0, 0};
  traj.obs = {"left", "right"};  // but the prize cannot move
  traj.actions = {0};
  traj.rewards = {1.0};
  const History ev = history_prefix(traj, 2);
  CHECK_THROWS_AS(filter_marginals(certain, ev), ContradictionError);
  Rng rng(3);
  CHECK_THROWS_AS(sample_posterior_noise(certain, ev, rng), ContradictionError);

  const PomdpSpec noisy = two_door();
  History nonsense = history_prefix(traj, 1);
  nonsense.obs[0] = "sideways";  // no state emits this symbol
  CHECK_THROWS_AS(filter_marginals(noisy, nonsense), ContradictionError);
}

TEST_CASE("malformed evidence is rejected upfront") {
  const PomdpSpec p = two_door();
  History too_long;
  too_long.obs = {"left", "right", "left"};
  too_long.actions = {0, 1};
  too_long.rewards = {0.0, 0.0};
  CHECK_THROWS_AS(filter_marginals(p, too_long), InputError);

  History bad_action;
  bad_action.obs = {"left", "right"};
  bad_action.actions = {7};
  bad_action.rewards = {0.0};
  CHECK_THROWS_AS(filter_marginals(p, bad_action), InputError);

  History broken;
  broken.obs = {"left", "right"};
  CHECK_THROWS_AS(filter_marginals(p, broken), InputError);
}
