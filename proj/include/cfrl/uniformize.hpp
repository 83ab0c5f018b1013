#pragma once

// Rewrites a conditional table P(X | parents) as a deterministic function of
// a single Uniform[0,1) noise variable via the rows' inverse CDFs, together
// with a quantized equivalent for the exact engine: the union of all rows'
// CDF breakpoints cuts [0,1) into finitely many intervals, each interval
// becomes one noise value with its length as probability, and the mechanism
// table maps (row, interval) to the row's inverse CDF on that interval.
// Reconstructing each row from the intervals returns the input probabilities
// up to summation rounding.

#include <cstdint>
#include <string>
#include <vector>

#include "cfrl/scm.hpp"

namespace cfrl {

inline constexpr double kRowSumTolerance = 1e-9;

struct ConditionalTable {
  size_t num_values = 0;                 // size of the output domain
  std::vector<std::vector<double>> rows; // one distribution per parent combo
};

struct Uniformized {
  NoiseSpec noise;                        // interval lengths, labels "q0", "q1", ...
  std::vector<double> lower;              // interval left endpoints
  std::vector<std::vector<int32_t>> table;  // [row][interval] -> value index

  // Continuous form: inverse CDF of `row` at u in [0,1).
  int32_t value_at(size_t row, double u) const;

  // Exact probability the quantized mechanism assigns to `value` in `row`.
  double reconstructed_prob(size_t row, int32_t value) const;
};

Uniformized uniformize(const ConditionalTable& conditional, const std::string& noise_id);

// Assembles an SCM mechanism from a uniformized conditional. Rows must be
// indexed row-major over the parent domains, matching Mechanism layout.
Mechanism uniformized_mechanism(const Uniformized& u, const std::string& node,
                                const std::vector<std::string>& parents);

}  // namespace cfrl
