#include "cfrl/uniformize.hpp"

#include <algorithm>
#include <cmath>

namespace cfrl {

namespace {

// Running CDF of a row, recomputed identically wherever it is needed so the
// breakpoint union and the interval-to-value lookup agree bit for bit.
std::vector<double> row_cdf(const std::vector<double>& row) {
  std::vector<double> cdf(row.size());
  double c = 0.0;
  for (size_t j = 0; j < row.size(); ++j) {
    c += row[j];
    cdf[j] = c;
  }
  return cdf;
}

}  // namespace

Uniformized uniformize(const ConditionalTable& conditional, const std::string& noise_id) {
  if (conditional.num_values == 0)
    throw InputError("uniformize: output domain is empty");
  if (conditional.rows.empty())
    throw InputError("uniformize: no rows");

  for (size_t r = 0; r < conditional.rows.size(); ++r) {
    const auto& row = conditional.rows[r];
    if (row.size() != conditional.num_values)
      throw InputError("uniformize: row " + std::to_string(r) + " has wrong arity");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0))
        throw InputError("uniformize: negative probability in row " + std::to_string(r));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw InputError("uniformize: row " + std::to_string(r) + " sums to " +
                       std::to_string(sum) + ", expected 1");
  }

  // Union of interior CDF breakpoints across rows.
  std::vector<double> cuts;
  cuts.push_back(0.0);
  for (const auto& row : conditional.rows) {
    const auto cdf = row_cdf(row);
    for (size_t j = 0; j + 1 < cdf.size(); ++j)
      if (cdf[j] > 0.0 && cdf[j] < 1.0) cuts.push_back(cdf[j]);
  }
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  Uniformized out;
  out.noise.id = noise_id;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (len <= 0.0) continue;
    out.lower.push_back(cuts[i]);
    out.noise.support.push_back("q" + std::to_string(out.noise.support.size()));
    out.noise.probs.push_back(len);
  }
  out.noise.validate();

  out.table.resize(conditional.rows.size());
  for (size_t r = 0; r < conditional.rows.size(); ++r) {
    const auto cdf = row_cdf(conditional.rows[r]);
    out.table[r].resize(out.lower.size());
    for (size_t i = 0; i < out.lower.size(); ++i) {
      // First value whose CDF exceeds the interval's left endpoint; constant
      // across the interval because the cuts refine every row's partition.
      int32_t v = static_cast<int32_t>(cdf.size()) - 1;
      for (size_t j = 0; j < cdf.size(); ++j) {
        if (cdf[j] > out.lower[i]) {
          v = static_cast<int32_t>(j);
          break;
        }
      }
      out.table[r][i] = v;
    }
  }
  return out;
}

int32_t Uniformized::value_at(size_t row, double u) const {
  if (row >= table.size()) throw InputError("value_at: row out of range");
  if (!(u >= 0.0 && u < 1.0)) throw InputError("value_at: u outside [0,1)");
  size_t i = table[row].size() - 1;
  for (size_t k = 1; k < lower.size(); ++k) {
    if (lower[k] > u) {
      i = k - 1;
      break;
    }
  }
  return table[row][i];
}

double Uniformized::reconstructed_prob(size_t row, int32_t value) const {
  if (row >= table.size()) throw InputError("reconstructed_prob: row out of range");
  double p = 0.0;
  for (size_t i = 0; i < table[row].size(); ++i)
    if (table[row][i] == value) p += noise.probs[i];
  return p;
}

Mechanism uniformized_mechanism(const Uniformized& u, const std::string& node,
                                const std::vector<std::string>& parents) {
  Mechanism m;
  m.node = node;
  m.parents = parents;
  m.noise = u.noise.id;
  m.table.reserve(u.table.size() * u.noise.support.size());
  for (const auto& row : u.table)
    m.table.insert(m.table.end(), row.begin(), row.end());
  return m;
}

}  // namespace cfrl
