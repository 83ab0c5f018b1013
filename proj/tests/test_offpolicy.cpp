#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cfrl/grid_pomdp.hpp"
#include "cfrl/offpolicy.hpp"
#include "cfrl/pomdp.hpp"
#include "cfrl/rng.hpp"
#include "cfrl/text.hpp"
#include "cfrl/two_door.hpp"
#include "doctest.h"

using namespace cfrl;

namespace {

ReplayBuffer two_door_buffer(int n, uint64_t seed, double alpha = 0.8) {
  const PomdpSpec p = two_door(alpha);
  const TabularPolicy mu = uniform_policy(2);
  return collect_episodes(p, PolicySelector(mu), "uniform", n, seed, "two_door");
}

double buffer_mean_return(const ReplayBuffer& b) {
  double s = 0.0;
  for (const ReplayEpisode& ep : b.episodes) s += trajectory_return(ep.traj);
  return s / static_cast<double>(b.episodes.size());
}

// Hard policy: probability one on `action` for both first-step hint keys.
TabularPolicy constant_door_policy(int32_t action) {
  TabularPolicy pi = uniform_policy(2);
  const double inf = std::numeric_limits<double>::infinity();
  for (const std::string& hint : {"left", "right"}) {
    History h;
    h.obs = {hint};
    std::vector<double> row(2, -inf);
    row[action] = 0.0;
    pi.set_logits(pi.feat.key(h), row);
  }
  return pi;
}

// Two-step two-door shaped episode written by hand.
ReplayEpisode fake_episode(int32_t state, const std::string& o1,
                           const std::string& o2, int32_t action, double reward) {
  ReplayEpisode ep;
  ep.behavior_id = "uniform";
  ep.traj.states = {state, state};
  ep.traj.obs = {o1, o2};
  ep.traj.actions = {action};
  ep.traj.rewards = {reward};
  ep.traj.action_logprobs = {std::log(0.5)};
  return ep;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("hash matches published test vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("matched behavior gives unit weights and the buffer mean") {
  const ReplayBuffer buffer = two_door_buffer(400, 5);
  const TabularPolicy mu = uniform_policy(2);
  const double mean = buffer_mean_return(buffer);
  for (IsMode mode : {IsMode::kSelfNormalized, IsMode::kOrdinary}) {
    const EvalReport r = is_evaluate(buffer, mu, mode);
    CHECK(r.estimate == mean);
    CHECK(r.n_effective == 400.0);
    CHECK(r.n_used == 400);
    CHECK(r.std_error >= 0.0);
  }
}

TEST_CASE("ordinary weights reproduce the hand-computed example") {
  ReplayBuffer buffer;
  buffer.env_hash = "hand";
  buffer.episodes = {fake_episode(0, "left", "left", 0, 1.0),
                     fake_episode(1, "right", "right", 1, 0.0)};
  const TabularPolicy pi = constant_door_policy(0);
  // Weights (2, 0) on returns (1, 0): ordinary mean (2*1 + 0*0)/2.
  const EvalReport ord = is_evaluate(buffer, pi, IsMode::kOrdinary);
  CHECK(ord.estimate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ord.n_effective == doctest::Approx(1.0).epsilon(1e-12));
  const EvalReport sn = is_evaluate(buffer, pi, IsMode::kSelfNormalized);
  CHECK(sn.estimate == 1.0);

  ReplayBuffer unsupported;
  unsupported.episodes = {fake_episode(0, "left", "left", 1, 1.0),
                          fake_episode(1, "right", "right", 1, 0.0)};
  CHECK_THROWS_AS(is_evaluate(unsupported, pi), SupportCollapseError);
  CHECK_THROWS_AS(is_evaluate(ReplayBuffer{}, pi), InputError);
}

TEST_CASE("self-normalized estimate ignores a common weight scale") {
  const ReplayBuffer buffer = two_door_buffer(60, 6);
  ReplayBuffer rescaled = buffer;
  // Shifting every behavior log-prob scales all weights by exp(-shift).
  for (ReplayEpisode& ep : rescaled.episodes)
    for (double& lp : ep.traj.action_logprobs) lp += std::log(3.0);
  const TabularPolicy pi = follow_obs_policy();
  const EvalReport a = is_evaluate(buffer, pi);
  const EvalReport b = is_evaluate(rescaled, pi);
  CHECK(a.estimate == b.estimate);
  CHECK(a.n_effective == b.n_effective);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("model rollouts recover the exact two-door value") {
  const PomdpSpec p = two_door();
  const TabularPolicy pi = follow_obs_policy();
  const EvalReport r = mb_evaluate(p, PolicySelector(pi), 20000, 11);
  CHECK(r.std_error > 0.0);
  CHECK(std::abs(r.estimate - 0.8) <= 3 * r.std_error);
  CHECK(r.n_used == 20000);

  const EvalReport single = mb_evaluate(p, PolicySelector(pi), 1, 12);
  CHECK(std::isnan(single.std_error));
  CHECK((single.estimate == 0.0 || single.estimate == 1.0));
  CHECK_THROWS_AS(mb_evaluate(p, PolicySelector(pi), 0, 13), InputError);
}

TEST_CASE("zero corruption is the identity model") {
  const PomdpSpec p = two_door();
  const MismatchedModel m = corrupt_prior(p, 0.0, {1, 0});
  CHECK(m.model.init.probs == p.init.probs);
  const TabularPolicy pi = follow_obs_policy();
  const EvalReport a = mb_evaluate(p, PolicySelector(pi), 500, 21);
  const EvalReport b = mb_evaluate(m, PolicySelector(pi), 500, 21);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("full corruption moves all prior mass onto dead levels") {
  const GridSpace space = enumerate_space(desk_config());
  const PomdpSpec p = as_pomdp(desk_config());
  const std::vector<int32_t> twin = degenerate_twins(space);

  const MismatchedModel half = corrupt_prior(p, 0.5, twin);
  double total = 0.0, off_support = 0.0;
  for (int32_t s = 0; s < p.num_states(); ++s) {
    total += half.model.init.probs[s];
    if (p.init.probs[s] == 0.0) off_support += half.model.init.probs[s];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Twins are unsolvable, so they carry no generator mass of their own.
  CHECK(off_support == doctest::Approx(0.5).epsilon(1e-9));

  const MismatchedModel dead = corrupt_prior(p, 1.0, twin);
  const TabularPolicy mu = uniform_policy(5);
  for (int i = 0; i < 300; ++i) {
    Rng rng = derive_rng(31, {static_cast<uint64_t>(Stream::kEval),
                              static_cast<uint64_t>(i)});
    const Trajectory tr = env_rollout(dead.model, PolicySelector(mu), rng);
    // A corner-dead box never moves: no push rewards, no solve bonus.
    CHECK(trajectory_return(tr) == 0.0);
  }

  CHECK_THROWS_AS(corrupt_prior(p, 1.5, twin), InputError);
  CHECK_THROWS_AS(corrupt_prior(p, 0.5, {0, 1}), InputError);
}

TEST_CASE("counterfactual evaluation is unbiased under the exact model") {
  const PomdpSpec p = two_door();
  const ReplayBuffer buffer = two_door_buffer(20000, 7);
  const TabularPolicy pi = follow_obs_policy();
  const PolicySelector sel(pi);
  for (int t : {2, 1}) {
    const EvalReport r = cf_evaluate(p, sel, buffer, t, 1, 41);
    CHECK(r.skipped == 0);
    CHECK(r.n_used == 20000);
    CHECK(std::abs(r.estimate - 0.8) <= 3 * r.std_error);
  }
  // No conditioning at all reproduces plain model rollouts in distribution.
  const EvalReport cf0 = cf_evaluate(p, sel, buffer, 0, 1, 42);
  const EvalReport mb = mb_evaluate(p, sel, 20000, 43);
  const double sigma = std::hypot(cf0.std_error, mb.std_error);
  CHECK(std::abs(cf0.estimate - mb.estimate) <= 3 * sigma);

  CHECK_THROWS_AS(cf_evaluate(p, sel, buffer, 3, 1, 44), InputError);
  CHECK_THROWS_AS(cf_evaluate(p, sel, buffer, -1, 1, 44), InputError);
  CHECK_THROWS_AS(cf_evaluate(p, sel, buffer, 2, 0, 44), InputError);
}

TEST_CASE("full conditioning with the logged policy replays logged returns") {
  // Noise-free hints pin the scenario; a constant policy removes action
  // randomness, so every counterfactual rollout equals its logged episode.
  const PomdpSpec p = two_door(1.0);
  const TabularPolicy mu = constant_door_policy(0);
  const ReplayBuffer buffer =
      collect_episodes(p, PolicySelector(mu), "left", 200, 8, "two_door");
  const EvalReport r = cf_evaluate(p, PolicySelector(mu), buffer, 2, 3, 51);
  CHECK(r.estimate == buffer_mean_return(buffer));
  CHECK(r.skipped == 0);
}

TEST_CASE("contradictory prefixes are skipped and counted") {
  PomdpSpec p = two_door(1.0);
  p.init.probs = {0.0, 1.0};  // the model insists the prize is right
  const TabularPolicy mu = uniform_policy(2);
  ReplayBuffer buffer;
  buffer.episodes = {fake_episode(0, "left", "left", 0, 1.0),
                     fake_episode(1, "right", "right", 0, 0.0)};
  const EvalReport r = cf_evaluate(p, PolicySelector(mu), buffer, 2, 1, 61);
  CHECK(r.skipped == 1);
  CHECK(r.n_used == 1);
  CHECK(std::isnan(r.std_error));
  CHECK(!std::isnan(r.estimate));

  const EvalReport open = cf_evaluate(p, PolicySelector(mu), buffer, 0, 1, 62);
  CHECK(open.skipped == 0);  // empty prefix cannot contradict
  CHECK(open.n_used == 2);

  ReplayBuffer impossible;
  impossible.episodes = {fake_episode(0, "left", "left", 0, 1.0)};
  const EvalReport none = cf_evaluate(p, PolicySelector(mu), impossible, 2, 1, 63);
  CHECK(none.n_used == 0);
  CHECK(none.skipped == 1);
  CHECK(std::isnan(none.estimate));
}

TEST_CASE("the conditioning sweep is one deterministic report per prefix") {
  const PomdpSpec p = two_door();
  const ReplayBuffer buffer = two_door_buffer(200, 9);
  const TabularPolicy pi = follow_obs_policy();
  const PolicySelector sel(pi);
  const std::vector<int> t_list = {0, 1, 2};
  const auto reports = sweep_conditioning(p, sel, buffer, t_list, 2, 71);
  REQUIRE(reports.size() == 3);
  for (size_t i = 0; i < t_list.size(); ++i) {
    CHECK(reports[i].t == t_list[i]);
    const EvalReport direct =
        cf_evaluate(p, sel, buffer, t_list[i], 2,
                    derive_seed(71, {static_cast<uint64_t>(t_list[i])}));
    CHECK(reports[i].estimate == direct.estimate);
    CHECK(reports[i].std_error == direct.std_error);
  }
}

TEST_CASE("csv rows carry every report field in order") {
  CHECK(eval_csv_header() == "estimator,t,estimate,stderr,n_effective,n_used,skipped");
  EvalReport r;
  r.estimator = "cf";
  r.t = 2;
  r.estimate = 0.5;
  r.std_error = 0.25;
  r.n_effective = 100.0;
  r.n_used = 100;
  r.skipped = 3;
  CHECK(eval_csv_row(r) == "cf,2," + format_double(0.5) + "," +
                               format_double(0.25) + "," + format_double(100.0) +
                               ",100,3");
  r.estimate = std::numeric_limits<double>::quiet_NaN();
  CHECK(eval_csv_row(r).find("nan") != std::string::npos);

  const std::string path = "offpolicy_csv_test.csv";
  write_eval_csv(path, {r, r});
  const std::string body = slurp(path);
  CHECK(std::count(body.begin(), body.end(), '\n') == 3);
  std::remove(path.c_str());
}

TEST_CASE("replay files round trip byte for byte") {
  const PomdpSpec p = as_pomdp(desk_config());
  const TabularPolicy mu = uniform_policy(5);
  const ReplayBuffer buffer =
      collect_episodes(p, PolicySelector(mu), "uniform", 5, 91, "desk");
  const std::string path_a = "replay_test_a.jsonl";
  const std::string path_b = "replay_test_b.jsonl";
  save_replay(buffer, path_a);
  const ReplayBuffer loaded = load_replay(path_a);
  CHECK(loaded.env_hash == buffer.env_hash);
  CHECK(loaded.seed == buffer.seed);
  REQUIRE(loaded.episodes.size() == buffer.episodes.size());
  for (size_t i = 0; i < buffer.episodes.size(); ++i) {
    CHECK(loaded.episodes[i].behavior_id == buffer.episodes[i].behavior_id);
    CHECK(loaded.episodes[i].traj.states == buffer.episodes[i].traj.states);
    CHECK(loaded.episodes[i].traj.obs == buffer.episodes[i].traj.obs);
    CHECK(loaded.episodes[i].traj.actions == buffer.episodes[i].traj.actions);
    CHECK(loaded.episodes[i].traj.rewards == buffer.episodes[i].traj.rewards);
    CHECK(loaded.episodes[i].traj.action_logprobs ==
          buffer.episodes[i].traj.action_logprobs);
  }
  save_replay(loaded, path_b);
  CHECK(slurp(path_a) == slurp(path_b));

  // Same seed, same bytes; the collection is order-free by construction.
  const ReplayBuffer again =
      collect_episodes(p, PolicySelector(mu), "uniform", 5, 91, "desk");
  save_replay(again, path_b);
  CHECK(slurp(path_a) == slurp(path_b));
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("malformed replay files are rejected with the offending line") {
  const std::string path = "replay_test_bad.jsonl";
  {
    std::ofstream out(path);
    out << "{\"schema\":\"other.v9\",\"env_hash\":\"x\",\"seed\":1}\n";
  }
  CHECK_THROWS_AS(load_replay(path), InputError);
  {
    std::ofstream out(path);
    out << "{\"schema\":\"cfrl.replay.v1\",\"env_hash\":\"x\",\"seed\":1}\n";
    out << "not json\n";
  }
  CHECK_THROWS_WITH_AS(load_replay(path), doctest::Contains("line 2"), InputError);
  {
    std::ofstream out(path);
    out << "{\"schema\":\"cfrl.replay.v1\",\"env_hash\":\"x\",\"seed\":1}\n";
    out << "{\"behavior\":\"u\",\"states\":[0,0],\"obs\":[\"a\",\"b\"],"
           "\"actions\":[0],\"rewards\":[0.5]}\n";  // logprobs missing
  }
  CHECK_THROWS_AS(load_replay(path), InputError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_replay("replay_test_absent.jsonl"), InputError);
}
