#include "cfrl/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <set>

namespace cfrl {

namespace {

// Walks all joint noise assignments in odometer order (last variable fastest).
// f receives the current assignment and its prior probability; zero-probability
// assignments are skipped.
template <typename F>
void for_each_noise(const Scm& scm, F&& f) {
  const int n = scm.num_nodes();
  Assignment u(n, 0);
  while (true) {
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= scm.noise_spec(i).probs[u[i]];
    if (p > 0.0) f(u, p);
    int i = n - 1;
    for (; i >= 0; --i) {
      if (++u[i] < static_cast<int32_t>(scm.noise_spec(i).support.size())) break;
      u[i] = 0;
    }
    if (i < 0) break;
  }
}

void check_cap(const Scm& scm, uint64_t cap, const char* op) {
  const uint64_t joint = noise_joint_size(scm);
  if (joint > cap) {
    throw CapacityError(std::string(op) + ": noise joint size " + std::to_string(joint) +
                        " exceeds enumeration cap " + std::to_string(cap));
  }
}

std::vector<std::pair<int, int32_t>> resolve_observation(const Scm& scm,
                                                         const Observation& obs) {
  std::vector<std::pair<int, int32_t>> resolved;
  resolved.reserve(obs.entries.size());
  std::set<int> seen;
  for (const auto& [node, value] : obs.entries) {
    const int idx = scm.node_index(node);
    if (!seen.insert(idx).second)
      throw InputError("observation assigns node twice: " + node);
    resolved.emplace_back(idx, scm.node(idx).index_of(value));
  }
  std::sort(resolved.begin(), resolved.end());
  return resolved;
}

std::vector<int> resolve_query(const Scm& scm, const std::vector<std::string>& query) {
  if (query.empty()) throw InputError("query node list is empty");
  std::vector<int> idx;
  idx.reserve(query.size());
  std::set<int> seen;
  for (const auto& id : query) {
    const int i = scm.node_index(id);
    if (!seen.insert(i).second) throw InputError("query lists node twice: " + id);
    idx.push_back(i);
  }
  return idx;
}

bool consistent(const Assignment& values,
                const std::vector<std::pair<int, int32_t>>& obs) {
  for (const auto& [node, value] : obs)
    if (values[node] != value) return false;
  return true;
}

Dist finalize_dist(std::map<std::vector<int32_t>, double>&& acc,
                   const std::vector<std::string>& query) {
  Dist d;
  d.nodes = query;
  d.entries.reserve(acc.size());
  for (auto& [tuple, mass] : acc) d.entries.emplace_back(tuple, mass);
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// validation

void NoiseSpec::validate() const {
  if (id.empty()) throw ConstructionError("noise spec with empty id");
  if (support.empty()) throw ConstructionError("noise " + id + ": empty support");
  if (support.size() != probs.size())
    throw ConstructionError("noise " + id + ": support/probs size mismatch");
  std::set<std::string> distinct(support.begin(), support.end());
  if (distinct.size() != support.size())
    throw ConstructionError("noise " + id + ": duplicate support values");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ConstructionError("noise " + id + ": negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance)
    throw ConstructionError("noise " + id + ": probabilities sum to " +
                            std::to_string(sum) + ", expected 1");
}

int NoiseSpec::index_of(const std::string& value) const {
  for (size_t i = 0; i < support.size(); ++i)
    if (support[i] == value) return static_cast<int>(i);
  throw InputError("noise " + id + ": value '" + value + "' not in support");
}

int NodeDef::index_of(const std::string& value) const {
  for (size_t i = 0; i < domain.size(); ++i)
    if (domain[i] == value) return static_cast<int>(i);
  throw InputError("node " + id + ": value '" + value + "' not in domain");
}

bool operator==(const NoiseSpec& a, const NoiseSpec& b) {
  return a.id == b.id && a.support == b.support && a.probs == b.probs;
}

bool operator==(const Mechanism& a, const Mechanism& b) {
  return a.node == b.node && a.parents == b.parents && a.noise == b.noise &&
         a.table == b.table;
}

bool operator==(const NodeDef& a, const NodeDef& b) {
  return a.id == b.id && a.domain == b.domain;
}

bool operator==(const Scm& a, const Scm& b) {
  return a.nodes_ == b.nodes_ && a.noise_ == b.noise_ && a.mechanisms_ == b.mechanisms_;
}

// ---------------------------------------------------------------------------
// Scm

Scm::Scm(std::vector<NodeDef> nodes, std::vector<NoiseSpec> noise_specs,
         std::vector<Mechanism> mechanisms)
    : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ConstructionError("model has no nodes");
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const NodeDef& nd = nodes_[i];
    if (nd.domain.empty()) throw ConstructionError("node " + nd.id + ": empty domain");
    std::set<std::string> distinct(nd.domain.begin(), nd.domain.end());
    if (distinct.size() != nd.domain.size())
      throw ConstructionError("node " + nd.id + ": duplicate domain values");
    if (!index_.emplace(nd.id, static_cast<int>(i)).second)
      throw ConstructionError("duplicate node id: " + nd.id);
  }

  // One mechanism per node, one noise spec per mechanism, ids disjoint.
  if (mechanisms.size() != nodes_.size())
    throw ConstructionError("expected one mechanism per node");
  if (noise_specs.size() != nodes_.size())
    throw ConstructionError("expected one noise spec per node");

  std::unordered_map<std::string, NoiseSpec*> by_noise_id;
  for (NoiseSpec& ns : noise_specs) {
    ns.validate();
    if (index_.count(ns.id))
      throw ConstructionError("noise id collides with node id: " + ns.id);
    if (!by_noise_id.emplace(ns.id, &ns).second)
      throw ConstructionError("duplicate noise id: " + ns.id);
  }

  noise_.resize(nodes_.size());
  mechanisms_.resize(nodes_.size());
  std::vector<bool> have_mech(nodes_.size(), false);
  for (Mechanism& m : mechanisms) {
    auto it = index_.find(m.node);
    if (it == index_.end())
      throw ConstructionError("mechanism for unknown node: " + m.node);
    if (have_mech[it->second])
      throw ConstructionError("two mechanisms for node " + m.node);
    have_mech[it->second] = true;
    auto ns = by_noise_id.find(m.noise);
    if (ns == by_noise_id.end())
      throw ConstructionError("node " + m.node + ": unknown noise id " + m.noise);
    noise_[it->second] = *ns->second;
    by_noise_id.erase(ns);
    mechanisms_[it->second] = std::move(m);
  }
  if (!by_noise_id.empty())
    throw ConstructionError("unused noise spec: " + by_noise_id.begin()->first);

  for (size_t i = 0; i < nodes_.size(); ++i)
    noise_index_.emplace(noise_[i].id, static_cast<int>(i));

  validate();
  compute_topo();
}

void Scm::validate() {
  parent_idx_.assign(nodes_.size(), {});
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Mechanism& m = mechanisms_[i];
    uint64_t rows = 1;
    for (const std::string& p : m.parents) {
      auto it = index_.find(p);
      if (it == index_.end())
        throw ConstructionError("node " + m.node + ": unknown parent " + p);
      if (it->second == static_cast<int>(i))
        throw ConstructionError("node " + m.node + ": cycle detected involving edge " +
                                m.node + " -> " + m.node);
      parent_idx_[i].push_back(it->second);
      rows *= nodes_[it->second].domain.size();
    }
    const uint64_t expected = rows * noise_[i].support.size();
    if (m.table.size() != expected)
      throw ConstructionError("node " + m.node + ": table has " +
                              std::to_string(m.table.size()) + " entries, expected " +
                              std::to_string(expected));
    const int32_t dom = static_cast<int32_t>(nodes_[i].domain.size());
    for (int32_t v : m.table)
      if (v < 0 || v >= dom)
        throw ConstructionError("node " + m.node + ": table value out of domain");
  }
}

void Scm::compute_topo() {
  const int n = num_nodes();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    for (int p : parent_idx_[i]) {
      children[p].push_back(i);
      ++indegree[i];
    }
  }
  auto cmp = [this](int a, int b) { return nodes_[a].id > nodes_[b].id; };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (int i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);

  topo_.clear();
  topo_.reserve(n);
  while (!ready.empty()) {
    const int i = ready.top();
    ready.pop();
    topo_.push_back(i);
    for (int c : children[i])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(topo_.size()) != n) {
    // Name one edge inside the leftover cycle for the error message.
    for (int i = 0; i < n; ++i) {
      if (indegree[i] == 0) continue;
      for (int p : parent_idx_[i]) {
        if (indegree[p] > 0)
          throw ConstructionError("cycle detected involving edge " + nodes_[p].id +
                                  " -> " + nodes_[i].id);
      }
    }
    throw ConstructionError("cycle detected");
  }
}

int Scm::node_index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown node: " + id);
  return it->second;
}

int Scm::noise_node(const std::string& noise_id) const {
  auto it = noise_index_.find(noise_id);
  if (it == noise_index_.end()) throw InputError("unknown noise variable: " + noise_id);
  return it->second;
}

std::vector<std::string> Scm::topo_ids() const {
  std::vector<std::string> ids;
  ids.reserve(topo_.size());
  for (int32_t i : topo_) ids.push_back(nodes_[i].id);
  return ids;
}

Assignment Scm::evaluate(const Assignment& noise_values) const {
  const int n = num_nodes();
  if (static_cast<int>(noise_values.size()) != n)
    throw InputError("evaluate: expected " + std::to_string(n) + " noise values, got " +
                     std::to_string(noise_values.size()));
  for (int i = 0; i < n; ++i) {
    if (noise_values[i] < 0 ||
        noise_values[i] >= static_cast<int32_t>(noise_[i].support.size()))
      throw InputError("evaluate: noise value out of support for " + noise_[i].id);
  }
  Assignment values(n, -1);
  for (int32_t i : topo_) {
    const Mechanism& m = mechanisms_[i];
    uint64_t flat = 0;
    for (size_t k = 0; k < parent_idx_[i].size(); ++k) {
      const int p = parent_idx_[i][k];
      flat = flat * nodes_[p].domain.size() + values[p];
    }
    flat = flat * noise_[i].support.size() + noise_values[i];
    values[i] = m.table[flat];
  }
  return values;
}

std::map<std::string, std::string> Scm::to_labels(const Assignment& values) const {
  std::map<std::string, std::string> out;
  for (int i = 0; i < num_nodes(); ++i)
    out[nodes_[i].id] = nodes_[i].domain[values[i]];
  return out;
}

Assignment Scm::noise_from_labels(const std::map<std::string, std::string>& noise) const {
  Assignment u(num_nodes(), -1);
  for (const auto& [id, value] : noise) {
    const int node = noise_node(id);
    u[node] = noise_[node].index_of(value);
  }
  for (int i = 0; i < num_nodes(); ++i)
    if (u[i] < 0) throw InputError("missing noise value for " + noise_[i].id);
  return u;
}

// ---------------------------------------------------------------------------
// operations

uint64_t noise_joint_size(const Scm& scm) {
  uint64_t joint = 1;
  for (int i = 0; i < scm.num_nodes(); ++i) {
    const uint64_t s = scm.noise_spec(i).support.size();
    if (joint > UINT64_MAX / s) return UINT64_MAX;
    joint *= s;
  }
  return joint;
}

PriorSample sample_prior(const Scm& scm, Rng& rng) {
  PriorSample out;
  out.noise.resize(scm.num_nodes());
  for (int i = 0; i < scm.num_nodes(); ++i)
    out.noise[i] = rng.categorical(scm.noise_spec(i).probs);
  out.values = scm.evaluate(out.noise);
  return out;
}

Scm apply_intervention(const Scm& scm, const Intervention& intervention) {
  Scm out = scm;
  for (const Mechanism& m : intervention.replacements) {
    const int i = out.node_index(m.node);
    if (m.noise != out.noise_[i].id)
      throw InputError("intervention on " + m.node + " must keep noise variable " +
                       out.noise_[i].id);
    out.mechanisms_[i] = m;
  }
  out.validate();
  out.compute_topo();  // ConstructionError on a new cycle
  return out;
}

ScenarioPosterior infer_noise_posterior(const Scm& scm, const Observation& obs,
                                        uint64_t cap) {
  check_cap(scm, cap, "infer_noise_posterior");
  const auto resolved = resolve_observation(scm, obs);

  ScenarioPosterior post;
  post.num_vars = scm.num_nodes();
  double total = 0.0;
  for_each_noise(scm, [&](const Assignment& u, double p) {
    const Assignment values = scm.evaluate(u);
    if (!consistent(values, resolved)) return;
    post.data.insert(post.data.end(), u.begin(), u.end());
    post.weights.push_back(p);
    total += p;
  });
  if (post.weights.empty() || total <= 0.0)
    throw ContradictionError("observation has zero probability under the model");
  for (double& w : post.weights) w /= total;
  return post;
}

Dist counterfactual_query(const Scm& scm, const Observation& obs,
                          const Intervention& intervention,
                          const std::vector<std::string>& query, uint64_t cap) {
  const ScenarioPosterior post = infer_noise_posterior(scm, obs, cap);
  const Scm intervened = apply_intervention(scm, intervention);
  const auto query_idx = resolve_query(scm, query);

  std::map<std::vector<int32_t>, double> acc;
  Assignment u(post.num_vars);
  for (size_t i = 0; i < post.size(); ++i) {
    const auto p = post.particle(i);
    u.assign(p.begin(), p.end());
    const Assignment values = intervened.evaluate(u);
    std::vector<int32_t> tuple;
    tuple.reserve(query_idx.size());
    for (int q : query_idx) tuple.push_back(values[q]);
    acc[tuple] += post.weights[i];
  }
  return finalize_dist(std::move(acc), query);
}

Assignment counterfactual_sample(const ScenarioPosterior& posterior,
                                 const Scm& intervened, Rng& rng) {
  const auto p = posterior.particle(posterior.sample_index(rng));
  return intervened.evaluate(Assignment(p.begin(), p.end()));
}

Assignment counterfactual_sample(const Scm& scm, const Observation& obs,
                                 const Intervention& intervention, Rng& rng,
                                 uint64_t cap) {
  const ScenarioPosterior post = infer_noise_posterior(scm, obs, cap);
  const Scm intervened = apply_intervention(scm, intervention);
  return counterfactual_sample(post, intervened, rng);
}

Assignment mixed_sample(const Scm& scm, const Observation& obs,
                        const std::vector<std::string>& cf_noise_subset,
                        const Intervention& intervention, Rng& rng, uint64_t cap) {
  std::vector<bool> from_posterior(scm.num_nodes(), false);
  for (const std::string& id : cf_noise_subset) {
    const int node = scm.noise_node(id);
    if (from_posterior[node]) throw InputError("noise subset lists " + id + " twice");
    from_posterior[node] = true;
  }

  Assignment u(scm.num_nodes());
  if (!cf_noise_subset.empty()) {
    const ScenarioPosterior post = infer_noise_posterior(scm, obs, cap);
    const auto particle = post.particle(post.sample_index(rng));
    for (int i = 0; i < scm.num_nodes(); ++i)
      if (from_posterior[i]) u[i] = particle[i];
  }
  for (int i = 0; i < scm.num_nodes(); ++i)
    if (!from_posterior[i]) u[i] = rng.categorical(scm.noise_spec(i).probs);

  const Scm intervened = apply_intervention(scm, intervention);
  return intervened.evaluate(u);
}

Dist interventional_marginal(const Scm& scm, const Intervention& intervention,
                             const std::vector<std::string>& query, uint64_t cap) {
  const Scm intervened = apply_intervention(scm, intervention);
  check_cap(intervened, cap, "interventional_marginal");
  const auto query_idx = resolve_query(intervened, query);

  std::map<std::vector<int32_t>, double> acc;
  for_each_noise(intervened, [&](const Assignment& u, double p) {
    const Assignment values = intervened.evaluate(u);
    std::vector<int32_t> tuple;
    tuple.reserve(query_idx.size());
    for (int q : query_idx) tuple.push_back(values[q]);
    acc[tuple] += p;
  });
  return finalize_dist(std::move(acc), query);
}

Mechanism constant_mechanism(const std::string& node, const std::string& noise,
                             size_t noise_support_size, int32_t value_index) {
  Mechanism m;
  m.node = node;
  m.noise = noise;
  m.table.assign(noise_support_size, value_index);
  return m;
}

// ---------------------------------------------------------------------------
// Dist

double Dist::prob(const std::vector<int32_t>& tuple) const {
  for (const auto& [t, p] : entries)
    if (t == tuple) return p;
  return 0.0;
}

double Dist::total() const {
  double s = 0.0;
  for (const auto& [t, p] : entries) s += p;
  return s;
}

double Dist::expectation(const Scm& scm) const {
  if (nodes.size() != 1)
    throw InputError("expectation needs a single-node distribution");
  const int node = scm.node_index(nodes[0]);
  double mean = 0.0;
  for (const auto& [tuple, p] : entries) {
    const std::string& label = scm.node(node).domain[tuple[0]];
    char* end = nullptr;
    const double v = std::strtod(label.c_str(), &end);
    if (end == label.c_str() || *end != '\0')
      throw InputError("node " + nodes[0] + ": value '" + label + "' is not numeric");
    mean += p * v;
  }
  return mean;
}

}  // namespace cfrl
