#include <algorithm>
#include <cmath>
#include <vector>

#include "cfrl/rng.hpp"
#include "cfrl/scm.hpp"
#include "cfrl/uniformize.hpp"
#include "doctest.h"

using namespace cfrl;

namespace {

// Independent oracle: inverse CDF computed directly from the row, without
// going through the interval table.
int32_t inverse_cdf(const std::vector<double>& row, double u) {
  double c = 0.0;
  for (size_t j = 0; j < row.size(); ++j) {
    c += row[j];
    if (c > u) return static_cast<int32_t>(j);
  }
  return static_cast<int32_t>(row.size()) - 1;
}

}  // namespace

TEST_CASE("single bernoulli row splits [0,1) at the cdf breakpoint") {
  ConditionalTable c;
  c.num_values = 2;
  c.rows = {{0.3, 0.7}};
  const auto u = uniformize(c, "u_x");

  CHECK(u.noise.id == "u_x");
  REQUIRE(u.noise.support.size() == 2);
  CHECK(u.noise.support[0] == "q0");
  CHECK(u.noise.support[1] == "q1");
  CHECK(u.lower[0] == 0.0);
  CHECK(u.lower[1] == 0.3);
  CHECK(u.noise.probs[0] == 0.3);
  CHECK(u.noise.probs[1] == doctest::Approx(0.7).epsilon(1e-15));

  REQUIRE(u.table.size() == 1);
  CHECK(u.table[0] == std::vector<int32_t>{0, 1});

  CHECK(u.value_at(0, 0.0) == 0);
  CHECK(u.value_at(0, 0.2999) == 0);
  CHECK(u.value_at(0, 0.3) == 1);  // intervals are [lo, hi)
  CHECK(u.value_at(0, 0.9999) == 1);
  CHECK_THROWS_AS(u.value_at(0, 1.0), InputError);
  CHECK_THROWS_AS(u.value_at(0, -0.01), InputError);
  CHECK_THROWS_AS(u.value_at(1, 0.5), InputError);
}

TEST_CASE("point mass row collapses to one interval") {
  ConditionalTable c;
  c.num_values = 3;
  c.rows = {{0.0, 1.0, 0.0}};
  const auto u = uniformize(c, "u");

  REQUIRE(u.noise.support.size() == 1);
  CHECK(u.noise.probs[0] == 1.0);
  CHECK(u.table[0] == std::vector<int32_t>{1});
  CHECK(u.value_at(0, 0.0) == 1);
  CHECK(u.value_at(0, 0.5) == 1);
  CHECK(u.reconstructed_prob(0, 0) == 0.0);
  CHECK(u.reconstructed_prob(0, 1) == 1.0);
  CHECK(u.reconstructed_prob(0, 2) == 0.0);
}

TEST_CASE("breakpoint union across rows") {
  ConditionalTable c;
  c.num_values = 3;
  c.rows = {
      {0.25, 0.75, 0.0},
      {0.5, 0.25, 0.25},
      {0.1, 0.2, 0.7},
  };
  const auto u = uniformize(c, "u");

  // Interior breakpoints: 0.25 | 0.5, 0.75 | 0.1, 0.1+0.2. All distinct.
  CHECK(u.noise.support.size() == 6);

  double total = 0.0;
  for (double p : u.noise.probs) {
    CHECK(p > 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);

  for (size_t r = 0; r < c.rows.size(); ++r) {
    for (int32_t v = 0; v < 3; ++v)
      CHECK(std::abs(u.reconstructed_prob(r, v) - c.rows[r][v]) <= 1e-12);
    // Inverse CDF is monotone in u, so interval values never decrease.
    CHECK(std::is_sorted(u.table[r].begin(), u.table[r].end()));
  }
}

TEST_CASE("identical rows share breakpoints instead of duplicating them") {
  ConditionalTable c;
  c.num_values = 2;
  c.rows = {{0.5, 0.5}, {0.5, 0.5}};
  const auto u = uniformize(c, "u");
  CHECK(u.noise.support.size() == 2);
  CHECK(u.table[0] == u.table[1]);
}

TEST_CASE("random tables reconstruct to 1e-12 and match the direct inverse cdf") {
  Rng rng(derive_seed(20260816, {static_cast<uint64_t>(Stream::kMisc), 1}));
  for (int trial = 0; trial < 50; ++trial) {
    ConditionalTable c;
    c.num_values = 2 + rng.uniform_int(4);
    const size_t num_rows = 1 + rng.uniform_int(6);
    for (size_t r = 0; r < num_rows; ++r) {
      std::vector<double> row(c.num_values);
      double sum = 0.0;
      for (auto& p : row) {
        p = rng.uniform() + 1e-3;
        sum += p;
      }
      for (auto& p : row) p /= sum;
      c.rows.push_back(std::move(row));
    }
    const auto u = uniformize(c, "u");

    for (size_t r = 0; r < num_rows; ++r)
      for (int32_t v = 0; v < static_cast<int32_t>(c.num_values); ++v)
        CHECK(std::abs(u.reconstructed_prob(r, v) - c.rows[r][v]) <= 1e-12);

    for (int k = 0; k < 40; ++k) {
      const double x = rng.uniform();
      const size_t r = rng.uniform_int(num_rows);
      CHECK(u.value_at(r, x) == inverse_cdf(c.rows[r], x));
    }
  }
}

TEST_CASE("mechanism assembly is row major with noise fastest") {
  ConditionalTable c;
  c.num_values = 2;
  c.rows = {{0.3, 0.7}, {0.9, 0.1}};
  const auto u = uniformize(c, "u_x");
  const auto m = uniformized_mechanism(u, "X", {"P"});

  CHECK(m.node == "X");
  CHECK(m.parents == std::vector<std::string>{"P"});
  CHECK(m.noise == "u_x");
  REQUIRE(m.table.size() == 2 * u.noise.support.size());
  for (size_t r = 0; r < 2; ++r)
    for (size_t i = 0; i < u.noise.support.size(); ++i)
      CHECK(m.table[r * u.noise.support.size() + i] == u.table[r][i]);

  // End to end through the engine: P(X=1) = 0.5*0.7 + 0.5*0.1 = 0.4.
  std::vector<NodeDef> nodes = {{"P", {"p0", "p1"}}, {"X", {"x0", "x1"}}};
  std::vector<NoiseSpec> noises = {{"u_p", {"a", "b"}, {0.5, 0.5}}, u.noise};
  Mechanism mp{"P", {}, "u_p", {0, 1}};
  Scm scm(nodes, noises, {mp, m});
  const auto dist = interventional_marginal(scm, {}, {"X"});
  for (const auto& e : dist.entries) {
    const double want = (e.first[0] == 1) ? 0.4 : 0.6;
    CHECK(e.second == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("input validation") {
  ConditionalTable c;
  c.num_values = 2;

  SUBCASE("empty rows") { CHECK_THROWS_AS(uniformize(c, "u"), InputError); }
  SUBCASE("empty domain") {
    c.num_values = 0;
    c.rows = {{1.0}};
    CHECK_THROWS_AS(uniformize(c, "u"), InputError);
  }
  SUBCASE("wrong arity") {
    c.rows = {{0.5, 0.25, 0.25}};
    CHECK_THROWS_AS(uniformize(c, "u"), InputError);
  }
  SUBCASE("negative probability") {
    c.rows = {{1.2, -0.2}};
    CHECK_THROWS_AS(uniformize(c, "u"), InputError);
  }
  SUBCASE("row does not sum to one") {
    c.rows = {{0.5, 0.4}};
    CHECK_THROWS_AS(uniformize(c, "u"), InputError);
  }
  SUBCASE("tiny drift inside tolerance is accepted") {
    c.rows = {{0.5, 0.5 + 2e-10}};
    CHECK_NOTHROW(uniformize(c, "u"));
  }
}
