#pragma once

// Structural causal models over finite domains with finite-support noise.
// Every node X_i carries one exogenous noise variable U_i and a total
// deterministic table X_i = f_i(pa_i, U_i); noise variables are mutually
// independent. Interventions replace mechanisms and never touch noise
// distributions, which is what makes hindsight inference meaningful:
// a posterior over noise inferred from observed data stays valid under
// any intervention.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfrl/errors.hpp"
#include "cfrl/rng.hpp"

namespace cfrl {

inline constexpr uint64_t kDefaultEnumerationCap = 10'000'000;
inline constexpr double kProbSumTolerance = 1e-12;
inline constexpr double kExactTolerance = 1e-10;

struct NoiseSpec {
  std::string id;
  std::vector<std::string> support;  // ordered, distinct, non-empty
  std::vector<double> probs;         // nonnegative, sums to 1 within 1e-12

  void validate() const;
  int index_of(const std::string& value) const;  // InputError when absent
};

bool operator==(const NoiseSpec& a, const NoiseSpec& b);

// Total table (parent values..., noise value) -> value index in the node's
// domain, row-major with the noise index fastest.
struct Mechanism {
  std::string node;
  std::vector<std::string> parents;  // ordered
  std::string noise;
  std::vector<int32_t> table;
};

bool operator==(const Mechanism& a, const Mechanism& b);

struct NodeDef {
  std::string id;
  std::vector<std::string> domain;  // ordered, distinct, non-empty

  int index_of(const std::string& value) const;
};

bool operator==(const NodeDef& a, const NodeDef& b);

// Values and noise indexed by node position (construction order).
using Assignment = std::vector<int32_t>;

// Partial evidence on node values, by label.
struct Observation {
  std::vector<std::pair<std::string, std::string>> entries;  // node -> value

  static Observation of(std::initializer_list<std::pair<std::string, std::string>> e) {
    Observation o;
    for (const auto& kv : e) o.entries.push_back(kv);
    return o;
  }
};

// Mechanism replacements keyed by Mechanism::node. Replacement mechanisms
// must reuse the node's original noise variable.
struct Intervention {
  std::vector<Mechanism> replacements;
};

// Exact posterior over full noise assignments: distinct particles with
// normalized weights. Particles are stored flat, row-major.
struct ScenarioPosterior {
  size_t num_vars = 0;
  std::vector<int32_t> data;
  std::vector<double> weights;

  size_t size() const { return weights.size(); }
  std::span<const int32_t> particle(size_t i) const {
    return {data.data() + i * num_vars, num_vars};
  }
  size_t sample_index(Rng& rng) const { return rng.categorical(weights); }
};

// Exact distribution over value tuples of a fixed node list, sorted by tuple.
struct Dist {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::vector<int32_t>, double>> entries;

  double prob(const std::vector<int32_t>& tuple) const;
  double total() const;
  // Interprets single-node value labels as numbers and takes the mean.
  double expectation(const class Scm& scm) const;
};

class Scm {
 public:
  Scm(std::vector<NodeDef> nodes, std::vector<NoiseSpec> noise_specs,
      std::vector<Mechanism> mechanisms);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int node_index(const std::string& id) const;
  bool has_node(const std::string& id) const { return index_.count(id) > 0; }
  const NodeDef& node(int i) const { return nodes_[i]; }
  const NoiseSpec& noise_spec(int i) const { return noise_[i]; }
  const Mechanism& mechanism(int i) const { return mechanisms_[i]; }
  int noise_node(const std::string& noise_id) const;  // node owning a noise var

  // Topological order of node indices; ties broken by lexicographic node id.
  const std::vector<int32_t>& topo_order() const { return topo_; }
  std::vector<std::string> topo_ids() const;

  // Pure: same noise in, same values out. Safe to call concurrently.
  Assignment evaluate(const Assignment& noise_values) const;

  std::map<std::string, std::string> to_labels(const Assignment& values) const;
  Assignment noise_from_labels(const std::map<std::string, std::string>& noise) const;

  friend bool operator==(const Scm& a, const Scm& b);

 private:
  std::vector<NodeDef> nodes_;
  std::vector<NoiseSpec> noise_;
  std::vector<Mechanism> mechanisms_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> noise_index_;  // noise id -> node
  std::vector<std::vector<int32_t>> parent_idx_;      // per node
  std::vector<int32_t> topo_;

  void validate();
  void compute_topo();
  friend Scm apply_intervention(const Scm&, const Intervention&);
};

struct PriorSample {
  Assignment noise;
  Assignment values;
};

// Product of noise support sizes, saturating at UINT64_MAX on overflow.
uint64_t noise_joint_size(const Scm& scm);

PriorSample sample_prior(const Scm& scm, Rng& rng);

// Value semantics: returns a new model, input untouched, noise specs shared
// unchanged. Replacement must keep the graph acyclic.
Scm apply_intervention(const Scm& scm, const Intervention& intervention);

// Exact posterior p(u | obs) by full enumeration of the noise joint.
// Zero-weight assignments are dropped. Throws CapacityError above `cap`,
// ContradictionError when nothing is consistent.
ScenarioPosterior infer_noise_posterior(const Scm& scm, const Observation& obs,
                                        uint64_t cap = kDefaultEnumerationCap);

// Exact counterfactual distribution over `query` nodes: posterior noise under
// `obs`, mechanisms replaced by `intervention`, deterministic propagation.
Dist counterfactual_query(const Scm& scm, const Observation& obs,
                          const Intervention& intervention,
                          const std::vector<std::string>& query,
                          uint64_t cap = kDefaultEnumerationCap);

// One posterior scenario propagated through the intervened model. The
// posterior/intervened overload amortizes repeated draws.
Assignment counterfactual_sample(const Scm& scm, const Observation& obs,
                                 const Intervention& intervention, Rng& rng,
                                 uint64_t cap = kDefaultEnumerationCap);
Assignment counterfactual_sample(const ScenarioPosterior& posterior,
                                 const Scm& intervened, Rng& rng);

// Noise variables listed in `cf_noise_subset` (by noise id) are drawn jointly
// from the posterior marginal (whole particle, then projected); the rest come
// fresh from their priors; the intervened model is then evaluated.
Assignment mixed_sample(const Scm& scm, const Observation& obs,
                        const std::vector<std::string>& cf_noise_subset,
                        const Intervention& intervention, Rng& rng,
                        uint64_t cap = kDefaultEnumerationCap);

// Exact p^do(I)(query) by enumeration. The empty intervention gives the
// observational marginal.
Dist interventional_marginal(const Scm& scm, const Intervention& intervention,
                             const std::vector<std::string>& query,
                             uint64_t cap = kDefaultEnumerationCap);

// Convenience for building constant mechanisms (table ignores noise).
Mechanism constant_mechanism(const std::string& node, const std::string& noise,
                             size_t noise_support_size, int32_t value_index);

}  // namespace cfrl
