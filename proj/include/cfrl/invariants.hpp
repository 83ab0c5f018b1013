#pragma once

// Executable invariant suite behind `cfrl verify`: hindsight consistency
// (averaging exact counterfactuals over the observation law recovers the
// interventional marginal), exact mixed-noise splits, uniformization
// round-trips, and frozen fixture values, over built-in fixtures plus
// randomized small models. The acceptance gate reuses the same checks, so
// a red check here and a red acceptance run point at the same defect.

#include <cstdint>
#include <string>
#include <vector>

#include "cfrl/rng.hpp"
#include "cfrl/scm.hpp"

namespace cfrl {

struct CheckResult {
  std::string name;
  bool pass = false;
  double deviation = 0.0;  // worst absolute deviation the check measured
  double tolerance = 0.0;
  std::string detail;  // replay data such as the sub-seed of a random model
};

struct VerifyReport {
  uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool all_pass() const;
  std::string to_text() const;  // one PASS/FAIL line per check plus a summary
};

// Named fixture with a canonical intervention and query for the identity
// checks. The two-door fixture is the compiled form of the toy POMDP.
struct ScmFixture {
  std::string name;
  Scm scm;
  Intervention intervention;
  std::vector<std::string> query;
};

std::vector<ScmFixture> invariant_fixtures();

// Replaces `node`'s mechanism with a constant, reusing its noise variable.
Intervention set_constant(const Scm& scm, const std::string& node, int32_t value);

// Random DAG over 2..max_nodes nodes, value/noise supports of 2..max_support,
// parents capped at 3 and the noise joint kept small enough for repeated
// exact queries. Noise probabilities stay strictly positive.
Scm random_scm(Rng& rng, int max_nodes = 6, int max_support = 4);

// max_x |sum over observations of p(x) p^do(I)(query | x) - p^do(I)(query)|
// with every node observed. Exercises the posterior + counterfactual path
// once per distinct observable assignment.
double hindsight_consistency_deviation(const Scm& scm, const Intervention& iv,
                                       const std::vector<std::string>& query);

// Exact law of mixed_sample for one noise split: noise ids in
// `posterior_subset` drawn jointly from the posterior, the rest from their
// priors, averaged over the observation law. Returns the max deviation from
// the interventional marginal.
double noise_split_deviation(const Scm& scm, const Intervention& iv,
                             const std::vector<std::string>& query,
                             const std::vector<std::string>& posterior_subset);

// Worst reconstruction error of uniformized conditionals over n random
// tables (includes rows with exact zeros).
double uniformization_deviation(Rng& rng, int n);

// The full suite. `fault` is a self-test hook: "none" runs the pristine
// suite, "mechanism_table" corrupts one fixture's mechanism table first so
// the named check must fail. Unknown fault names throw InputError.
VerifyReport verify_suite(uint64_t seed, int n_random_scms,
                          const std::string& fault = "none");

}  // namespace cfrl
