#include "cfrl/scm.hpp"

#include <cmath>
#include <thread>

#include "cfrl/scm_text.hpp"
#include "doctest.h"

using namespace cfrl;

namespace {

// Two-arm bandit with shared outcome noise. Arm A is held constant at a1;
// arm a2 sees the opposite outcome for the same noise draw, so observing
// the pulled arm pins down what the other arm would have paid.
Scm two_coin_bandit() {
  NodeDef a{"A", {"a1", "a2"}};
  NodeDef o{"O", {"0", "1"}};
  NoiseSpec ua{"u_A", {"."}, {1.0}};
  NoiseSpec uo{"u_O", {"0", "1"}, {0.5, 0.5}};
  Mechanism ma = constant_mechanism("A", "u_A", 1, 0);
  // rows over (A, u_O): f(a1,u)=u, f(a2,u)=1-u
  Mechanism mo{"O", {"A"}, "u_O", {0, 1, 1, 0}};
  return Scm({a, o}, {ua, uo}, {ma, mo});
}

// Y = X AND u_Y with P(X=1)=0.6, P(u_Y=1)=0.5.
// Hand-computed posterior given Y=0: consistent (x,u) pairs and weights
//   (0,0)=0.2 (0,1)=0.2 (1,0)=0.3, total 0.7.
Scm and_gate() {
  NodeDef x{"X", {"0", "1"}};
  NodeDef y{"Y", {"0", "1"}};
  NoiseSpec ux{"u_X", {"0", "1"}, {0.4, 0.6}};
  NoiseSpec uy{"u_Y", {"0", "1"}, {0.5, 0.5}};
  Mechanism mx{"X", {}, "u_X", {0, 1}};
  Mechanism my{"Y", {"X"}, "u_Y", {0, 0, 0, 1}};
  return Scm({x, y}, {ux, uy}, {mx, my});
}

Intervention set_node(const Scm& scm, const std::string& node, const std::string& value) {
  const int i = scm.node_index(node);
  Intervention iv;
  iv.replacements.push_back(constant_mechanism(
      node, scm.noise_spec(i).id, scm.noise_spec(i).support.size(),
      scm.node(i).index_of(value)));
  return iv;
}

}  // namespace

TEST_CASE("topological order breaks ties lexicographically") {
  // Z and A are both roots; B depends on both.
  NodeDef z{"Z", {"0"}};
  NodeDef a{"A", {"0"}};
  NodeDef b{"B", {"0"}};
  NoiseSpec uz{"u_Z", {"."}, {1.0}};
  NoiseSpec ua{"u_a", {"."}, {1.0}};
  NoiseSpec ub{"u_b", {"."}, {1.0}};
  Mechanism mz = constant_mechanism("Z", "u_Z", 1, 0);
  Mechanism ma = constant_mechanism("A", "u_a", 1, 0);
  Mechanism mb{"B", {"Z", "A"}, "u_b", {0}};
  Scm scm({z, a, b}, {uz, ua, ub}, {mz, ma, mb});
  CHECK(scm.topo_ids() == std::vector<std::string>{"A", "Z", "B"});
}

TEST_CASE("cycles are rejected with an offending edge named") {
  NodeDef a{"A", {"0"}};
  NodeDef b{"B", {"0"}};
  NoiseSpec ua{"u_a", {"."}, {1.0}};
  NoiseSpec ub{"u_b", {"."}, {1.0}};
  Mechanism ma{"A", {"B"}, "u_a", {0}};
  Mechanism mb{"B", {"A"}, "u_b", {0}};
  try {
    Scm scm({a, b}, {ua, ub}, {ma, mb});
    FAIL("expected ConstructionError");
  } catch (const ConstructionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cycle") != std::string::npos);
    CHECK(msg.find("->") != std::string::npos);
  }
}

TEST_CASE("construction validates noise and domains") {
  NodeDef a{"A", {"0", "1"}};
  SUBCASE("probs must normalize") {
    NoiseSpec bad{"u", {"0", "1"}, {0.5, 0.6}};
    Mechanism m{"A", {}, "u", {0, 1}};
    CHECK_THROWS_AS(Scm({a}, {bad}, {m}), ConstructionError);
  }
  SUBCASE("noise ids must not collide with node ids") {
    NoiseSpec bad{"A", {"."}, {1.0}};
    Mechanism m{"A", {}, "A", {0}};
    CHECK_THROWS_AS(Scm({a}, {bad}, {m}), ConstructionError);
  }
  SUBCASE("tables must be total") {
    NoiseSpec u{"u", {"0", "1"}, {0.5, 0.5}};
    Mechanism m{"A", {}, "u", {0}};
    CHECK_THROWS_AS(Scm({a}, {u}, {m}), ConstructionError);
  }
}

TEST_CASE("evaluate is deterministic and validates input") {
  const Scm scm = two_coin_bandit();
  const Assignment v = scm.evaluate({0, 1});
  CHECK(scm.to_labels(v) == std::map<std::string, std::string>{{"A", "a1"}, {"O", "1"}});
  CHECK(scm.evaluate({0, 1}) == v);
  CHECK_THROWS_AS(scm.evaluate({0}), InputError);
  CHECK_THROWS_AS(scm.evaluate({0, 5}), InputError);
}

TEST_CASE("evaluate is pure across threads") {
  const Scm scm = and_gate();
  const Assignment expected = scm.evaluate({1, 1});
  std::vector<std::thread> threads;
  std::vector<int> ok(8, 0);
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 1000; ++k)
        if (scm.evaluate({1, 1}) != expected) return;
      ok[t] = 1;
    });
  }
  for (auto& th : threads) th.join();
  for (int t = 0; t < 8; ++t) CHECK(ok[t] == 1);
}

TEST_CASE("sample_prior matches enumerated marginals") {
  const Scm scm = and_gate();
  Rng rng(7);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const PriorSample s = sample_prior(scm, rng);
    ones += scm.node(scm.node_index("Y")).domain[s.values[1]] == "1";
  }
  // P(Y=1) = 0.6 * 0.5 = 0.3
  const double freq = double(ones) / n;
  const double sigma = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(freq - 0.3) < 3 * sigma);
}

TEST_CASE("apply_intervention leaves the input untouched and keeps noise") {
  const Scm scm = two_coin_bandit();
  const std::string before = print_scm(scm);
  const Scm out = apply_intervention(scm, set_node(scm, "A", "a2"));
  CHECK(print_scm(scm) == before);
  CHECK(out.noise_spec(0) == scm.noise_spec(0));
  CHECK(out.noise_spec(1) == scm.noise_spec(1));
  CHECK_FALSE(out == scm);
  // Empty intervention is the identity.
  CHECK(apply_intervention(scm, {}) == scm);
}

TEST_CASE("intervention cannot introduce a cycle") {
  const Scm scm = and_gate();
  Intervention iv;
  iv.replacements.push_back(Mechanism{"X", {"Y"}, "u_X", {0, 0, 1, 1}});
  CHECK_THROWS_AS(apply_intervention(scm, iv), ConstructionError);
}

TEST_CASE("posterior: two-coin bandit pins the outcome noise") {
  const Scm scm = two_coin_bandit();
  const auto post = infer_noise_posterior(scm, Observation::of({{"A", "a1"}, {"O", "1"}}));
  REQUIRE(post.size() == 1);
  CHECK(post.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(post.particle(0)[1] == 1);  // u_O = 1
}

TEST_CASE("posterior: hand-computed AND-gate weights") {
  const Scm scm = and_gate();
  const auto post = infer_noise_posterior(scm, Observation::of({{"Y", "0"}}));
  REQUIRE(post.size() == 3);
  double sum = 0.0, px1 = 0.0;
  for (size_t i = 0; i < post.size(); ++i) {
    sum += post.weights[i];
    if (post.particle(i)[0] == 1) px1 += post.weights[i];
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(px1 == doctest::Approx(0.3 / 0.7).epsilon(1e-12));
}

TEST_CASE("posterior edge cases") {
  const Scm scm = two_coin_bandit();
  SUBCASE("empty observation returns the prior product") {
    const auto post = infer_noise_posterior(scm, {});
    REQUIRE(post.size() == 2);
    CHECK(post.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("contradiction raises") {
    CHECK_THROWS_AS(infer_noise_posterior(scm, Observation::of({{"A", "a2"}})),
                    ContradictionError);
  }
  SUBCASE("cap is enforced") {
    CHECK_THROWS_AS(infer_noise_posterior(scm, {}, 1), CapacityError);
  }
  SUBCASE("zero-probability noise values are dropped") {
    NodeDef a{"A", {"x", "y", "z"}};
    NoiseSpec u{"u", {"0", "1", "2"}, {0.5, 0.5, 0.0}};
    Mechanism m{"A", {}, "u", {0, 1, 2}};
    Scm degenerate({a}, {u}, {m});
    const auto post = infer_noise_posterior(degenerate, {});
    CHECK(post.size() == 2);
  }
}

TEST_CASE("counterfactual: the unpulled arm pays the opposite") {
  const Scm scm = two_coin_bandit();
  const Dist d = counterfactual_query(scm, Observation::of({{"A", "a1"}, {"O", "1"}}),
                                      set_node(scm, "A", "a2"), {"O"});
  CHECK(d.prob({0}) == doctest::Approx(1.0).epsilon(1e-12));  // P(O=0) = 1
  CHECK(std::abs(d.total() - 1.0) < 1e-12);
}

TEST_CASE("counterfactual with empty intervention reproduces the evidence") {
  const Scm scm = and_gate();
  const Dist d = counterfactual_query(scm, Observation::of({{"Y", "0"}}), {}, {"Y"});
  CHECK(d.prob({0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interventional marginal: hand values and normalization") {
  const Scm scm = two_coin_bandit();
  const Dist d = interventional_marginal(scm, set_node(scm, "A", "a1"), {"O"});
  CHECK(d.prob({1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(d.total() - 1.0) < 1e-12);
  // Empty intervention gives the observational joint.
  const Dist joint = interventional_marginal(scm, {}, {"A", "O"});
  CHECK(joint.prob({0, 0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hindsight sum over evidence recovers the interventional answer") {
  // sum_y p(Y=y) * P(Y_cf | Y=y, do(X:=1)) must equal P(Y | do(X:=1)).
  // Hand-computed: 0.7 * 2/7 + 0.3 * 1 = 0.5 on Y=1.
  const Scm scm = and_gate();
  const Intervention iv = set_node(scm, "X", "1");
  const Dist target = interventional_marginal(scm, iv, {"Y"});
  const Dist py = interventional_marginal(scm, {}, {"Y"});
  double total = 0.0;
  for (const auto& [tuple, p] : py.entries) {
    const std::string label = scm.node(scm.node_index("Y")).domain[tuple[0]];
    const Dist cf = counterfactual_query(scm, Observation::of({{"Y", label}}), iv, {"Y"});
    total += p * cf.prob({1});
  }
  CHECK(std::abs(total - target.prob({1})) < 1e-10);
  CHECK(target.prob({1}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("counterfactual_sample agrees with the exact query") {
  const Scm scm = and_gate();
  const Observation obs = Observation::of({{"Y", "0"}});
  const Intervention iv = set_node(scm, "X", "1");
  const Dist d = counterfactual_query(scm, obs, iv, {"Y"});

  const auto post = infer_noise_posterior(scm, obs);
  const Scm intervened = apply_intervention(scm, iv);
  Rng rng(3);
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i)
    ones += counterfactual_sample(post, intervened, rng)[1] == 1;
  const double p = d.prob({1});
  const double sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(double(ones) / n - p) < 3 * sigma);
}

TEST_CASE("mixed_sample: subset extremes match their exact references") {
  const Scm scm = and_gate();
  const Observation obs = Observation::of({{"Y", "0"}});
  const Intervention iv = set_node(scm, "X", "1");
  const int n = 100000;

  SUBCASE("empty subset is a fresh interventional draw") {
    const Dist ref = interventional_marginal(scm, iv, {"Y"});
    Rng rng(11);
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += mixed_sample(scm, obs, {}, iv, rng)[1] == 1;
    const double p = ref.prob({1});
    CHECK(std::abs(double(ones) / n - p) < 3 * std::sqrt(p * (1 - p) / n));
  }
  SUBCASE("full subset is a counterfactual draw") {
    const Dist ref = counterfactual_query(scm, obs, iv, {"Y"});
    Rng rng(12);
    int ones = 0;
    for (int i = 0; i < n; ++i)
      ones += mixed_sample(scm, obs, {"u_X", "u_Y"}, iv, rng)[1] == 1;
    const double p = ref.prob({1});
    CHECK(std::abs(double(ones) / n - p) < 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("mixed_sample averaged over evidence matches the interventional law") {
  // Draw evidence from the model, mix posterior noise for u_Y with fresh u_X,
  // and check the output marginal against the interventional answer.
  const Scm scm = and_gate();
  const Intervention iv = set_node(scm, "X", "1");
  const Dist ref = interventional_marginal(scm, iv, {"Y"});
  Rng rng(13);
  const int n = 20000;
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const PriorSample s = sample_prior(scm, rng);
    Observation obs;
    obs.entries = {{"Y", scm.node(1).domain[s.values[1]]}};
    ones += mixed_sample(scm, obs, {"u_Y"}, iv, rng)[1] == 1;
  }
  const double p = ref.prob({1});
  CHECK(std::abs(double(ones) / n - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("description files round-trip") {
  const Scm scm = two_coin_bandit();
  const std::string text = print_scm(scm);
  const Scm parsed = parse_scm(text);
  CHECK(parsed == scm);
  CHECK(print_scm(parsed) == text);
}

TEST_CASE("description parser rejects malformed input") {
  SUBCASE("unknown key") {
    CHECK_THROWS_AS(parse_scm("[node]\nid = A\ndomain = 0\ncolor = red\n"), ConfigError);
  }
  SUBCASE("unknown section") {
    CHECK_THROWS_AS(parse_scm("[widget]\nid = A\n"), ConfigError);
  }
  SUBCASE("missing table row") {
    const char* text =
        "[node]\nid = A\ndomain = 0, 1\n"
        "[noise]\nid = u\nsupport = 0, 1\nprobs = 0.5, 0.5\n"
        "[mechanism]\nnode = A\nparents = ()\nnoise = u\n"
        "parents=() noise=0 -> 0\n";
    CHECK_THROWS_AS(parse_scm(text), ConfigError);
  }
  SUBCASE("line number is reported") {
    try {
      parse_scm("[node]\nid = A\ndomain = 0\nbogus = 1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
  }
}
