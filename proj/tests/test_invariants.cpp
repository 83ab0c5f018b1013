#include <algorithm>
#include <set>

#include <doctest.h>

#include "cfrl/invariants.hpp"
#include "cfrl/rng.hpp"

using namespace cfrl;

TEST_CASE("fixtures satisfy the hindsight-consistency identity") {
  for (const ScmFixture& f : invariant_fixtures()) {
    CAPTURE(f.name);
    CHECK(hindsight_consistency_deviation(f.scm, f.intervention, f.query) <= 1e-10);
  }
}

TEST_CASE("every noise split of the chain fixture matches the interventional law") {
  const std::vector<ScmFixture> fixtures = invariant_fixtures();
  const ScmFixture& chain = fixtures[0];
  const std::vector<std::string> ids = {"u_A", "u_B", "u_C"};
  for (size_t mask = 0; mask < 8; ++mask) {
    std::vector<std::string> subset;
    for (size_t i = 0; i < ids.size(); ++i)
      if (mask & (size_t{1} << i)) subset.push_back(ids[i]);
    CAPTURE(mask);
    CHECK(noise_split_deviation(chain.scm, chain.intervention, chain.query,
                                subset) <= 1e-10);
  }
}

TEST_CASE("random models are deterministic in the seed and obey the bounds") {
  Rng a(2024), b(2024);
  for (int i = 0; i < 10; ++i) {
    const Scm sa = random_scm(a);
    const Scm sb = random_scm(b);
    CHECK(sa == sb);

    CHECK(sa.num_nodes() >= 2);
    CHECK(sa.num_nodes() <= 6);
    uint64_t joint = 1;
    for (int n = 0; n < sa.num_nodes(); ++n) {
      CHECK(sa.node(n).domain.size() >= 2);
      CHECK(sa.node(n).domain.size() <= 4);
      CHECK(sa.noise_spec(n).support.size() <= 4);
      joint *= sa.noise_spec(n).support.size();
      for (double p : sa.noise_spec(n).probs) CHECK(p > 0.0);
    }
    CHECK(joint <= 2048);
  }
}

TEST_CASE("a random model passes hindsight consistency directly") {
  Rng rng(7);
  const Scm scm = random_scm(rng);
  const Intervention iv = set_constant(scm, scm.node(0).id, 0);
  std::vector<std::string> query;
  for (int i = 1; i < scm.num_nodes(); ++i) query.push_back(scm.node(i).id);
  CHECK(hindsight_consistency_deviation(scm, iv, query) <= 1e-10);
}

TEST_CASE("uniformization round-trips random tables to machine precision") {
  Rng rng(31);
  CHECK(uniformization_deviation(rng, 50) <= 1e-12);
}

TEST_CASE("the pristine suite passes and records replay seeds") {
  const VerifyReport report = verify_suite(17, 3, "none");
  CHECK(report.all_pass());
  CHECK(report.seed == 17);

  std::set<std::string> names;
  for (const CheckResult& c : report.checks) names.insert(c.name);
  for (const char* expected :
       {"chain_frozen_marginal", "two_door_uniform_value", "two_door_follow_value",
        "hindsight_fixture_chain", "hindsight_fixture_fork_collider",
        "hindsight_fixture_two_door_compiled", "noise_splits_chain",
        "noise_splits_fork_collider", "noise_splits_two_door_compiled",
        "hindsight_random_0", "hindsight_random_2", "uniformization_roundtrip"})
    CHECK(names.count(expected) == 1);

  for (const CheckResult& c : report.checks)
    if (c.name.rfind("hindsight_random_", 0) == 0)
      CHECK(c.detail.rfind("seed=", 0) == 0);

  const std::string text = report.to_text();
  CHECK(text.find("VERIFY PASS (13 checks)") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
}

TEST_CASE("the seed in a random check's detail replays that exact model") {
  const VerifyReport report = verify_suite(123, 1, "none");
  const auto it =
      std::find_if(report.checks.begin(), report.checks.end(),
                   [](const CheckResult& c) { return c.name == "hindsight_random_0"; });
  REQUIRE(it != report.checks.end());
  const uint64_t child = std::stoull(it->detail.substr(5));
  Rng replay_a(child), replay_b(child);
  CHECK(random_scm(replay_a) == random_scm(replay_b));
}

TEST_CASE("the mechanism-table fault trips exactly the frozen chain value") {
  const VerifyReport report = verify_suite(17, 2, "mechanism_table");
  CHECK_FALSE(report.all_pass());
  int failures = 0;
  for (const CheckResult& c : report.checks) {
    if (!c.pass) {
      ++failures;
      CHECK(c.name == "chain_frozen_marginal");
      CHECK(c.deviation > 0.1);
    }
  }
  CHECK(failures == 1);
  // The identity checks still hold: the corrupted table is a different but
  // valid model, so only the frozen value can expose it.
  CHECK(report.to_text().find("FAIL chain_frozen_marginal") != std::string::npos);
  CHECK(report.to_text().find("VERIFY FAIL (1 of") != std::string::npos);
}

TEST_CASE("unknown fault names and negative counts are rejected") {
  CHECK_THROWS_AS(verify_suite(1, 2, "flip_bits"), InputError);
  CHECK_THROWS_AS(verify_suite(1, -1, "none"), InputError);
}

TEST_CASE("fixture queries cover affected and unaffected nodes") {
  // The chain intervention cuts B from A, so A keeps its prior and C follows
  // the forced value: P(C=1 | do(B:=1)) = 0.9.
  const std::vector<ScmFixture> fixtures = invariant_fixtures();
  const ScmFixture& chain = fixtures[0];
  const Dist d = interventional_marginal(chain.scm, chain.intervention, {"A", "C"});
  CHECK(d.prob({1, 1}) == doctest::Approx(0.7 * 0.9).epsilon(1e-12));
  CHECK(d.prob({0, 0}) == doctest::Approx(0.3 * 0.1).epsilon(1e-12));
}
