#include "cfrl/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cfrl/pomdp.hpp"
#include "cfrl/text.hpp"
#include "cfrl/two_door.hpp"
#include "cfrl/uniformize.hpp"

namespace cfrl {

namespace {

// Odometer over the full noise joint; fn sees (assignment, probability),
// zero-probability assignments are skipped.
template <typename Fn>
void for_each_noise_joint(const Scm& scm, Fn&& fn) {
  const int n = scm.num_nodes();
  Assignment u(n, 0);
  while (true) {
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= scm.noise_spec(i).probs[u[i]];
    if (p > 0.0) fn(u, p);
    int i = 0;
    for (; i < n; ++i) {
      if (++u[i] < static_cast<int32_t>(scm.noise_spec(i).support.size())) break;
      u[i] = 0;
    }
    if (i == n) break;
  }
}

// Exact observation law: distinct full value assignments with probabilities.
std::map<Assignment, double> observation_law(const Scm& scm) {
  std::map<Assignment, double> law;
  for_each_noise_joint(scm, [&](const Assignment& u, double p) {
    law[scm.evaluate(u)] += p;
  });
  return law;
}

Observation full_observation(const Scm& scm, const Assignment& values) {
  Observation obs;
  for (int i = 0; i < scm.num_nodes(); ++i) {
    const NodeDef& node = scm.node(i);
    obs.entries.emplace_back(node.id, node.domain[values[i]]);
  }
  return obs;
}

std::vector<int> resolve_nodes(const Scm& scm, const std::vector<std::string>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(scm.node_index(id));
  return out;
}

std::vector<int32_t> project(const Assignment& values, const std::vector<int>& idx) {
  std::vector<int32_t> tuple;
  tuple.reserve(idx.size());
  for (int i : idx) tuple.push_back(values[i]);
  return tuple;
}

double max_deviation(const std::map<std::vector<int32_t>, double>& got,
                     const Dist& want) {
  double dev = 0.0;
  for (const auto& [tuple, p] : got)
    dev = std::max(dev, std::abs(p - want.prob(tuple)));
  for (const auto& [tuple, p] : want.entries) {
    const auto it = got.find(tuple);
    if (it == got.end()) dev = std::max(dev, std::abs(p));
  }
  return dev;
}

}  // namespace

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  out << "verify seed=" << seed << "\n";
  int failed = 0;
  for (const CheckResult& c : checks) {
    if (!c.pass) ++failed;
    out << (c.pass ? "PASS " : "FAIL ") << c.name
        << " max_dev=" << format_double(c.deviation)
        << " tol=" << format_double(c.tolerance);
    if (!c.detail.empty()) out << " " << c.detail;
    out << "\n";
  }
  if (failed == 0)
    out << "VERIFY PASS (" << checks.size() << " checks)\n";
  else
    out << "VERIFY FAIL (" << failed << " of " << checks.size()
        << " checks failed)\n";
  return out.str();
}

Intervention set_constant(const Scm& scm, const std::string& node, int32_t value) {
  const int i = scm.node_index(node);
  Intervention iv;
  iv.replacements.push_back(constant_mechanism(
      node, scm.noise_spec(i).id, scm.noise_spec(i).support.size(), value));
  return iv;
}

double hindsight_consistency_deviation(const Scm& scm, const Intervention& iv,
                                       const std::vector<std::string>& query) {
  const std::map<Assignment, double> law = observation_law(scm);
  std::map<std::vector<int32_t>, double> mixed;
  for (const auto& [values, px] : law) {
    const Dist cf = counterfactual_query(scm, full_observation(scm, values), iv, query);
    for (const auto& [tuple, p] : cf.entries) mixed[tuple] += px * p;
  }
  return max_deviation(mixed, interventional_marginal(scm, iv, query));
}

double noise_split_deviation(const Scm& scm, const Intervention& iv,
                             const std::vector<std::string>& query,
                             const std::vector<std::string>& posterior_subset) {
  const Scm intervened = apply_intervention(scm, iv);
  const std::vector<int> query_idx = resolve_nodes(scm, query);

  std::vector<int> subset;
  for (const std::string& id : posterior_subset) subset.push_back(scm.noise_node(id));
  std::sort(subset.begin(), subset.end());
  std::vector<int> rest;
  for (int i = 0; i < scm.num_nodes(); ++i)
    if (!std::binary_search(subset.begin(), subset.end(), i)) rest.push_back(i);

  std::map<std::vector<int32_t>, double> mixed;
  for (const auto& [values, px] : observation_law(scm)) {
    const ScenarioPosterior post =
        infer_noise_posterior(scm, full_observation(scm, values));

    // Posterior marginal over the subset positions.
    std::map<std::vector<int32_t>, double> sub_marginal;
    for (size_t i = 0; i < post.size(); ++i) {
      const auto particle = post.particle(i);
      std::vector<int32_t> key;
      key.reserve(subset.size());
      for (int pos : subset) key.push_back(particle[pos]);
      sub_marginal[key] += post.weights[i];
    }

    for (const auto& [sub_values, ws] : sub_marginal) {
      // Prior odometer over the remaining noise positions.
      std::vector<int32_t> rest_values(rest.size(), 0);
      while (true) {
        double wr = 1.0;
        for (size_t k = 0; k < rest.size(); ++k)
          wr *= scm.noise_spec(rest[k]).probs[rest_values[k]];
        if (wr > 0.0) {
          Assignment u(scm.num_nodes(), 0);
          for (size_t k = 0; k < subset.size(); ++k) u[subset[k]] = sub_values[k];
          for (size_t k = 0; k < rest.size(); ++k) u[rest[k]] = rest_values[k];
          mixed[project(intervened.evaluate(u), query_idx)] += px * ws * wr;
        }
        size_t k = 0;
        for (; k < rest.size(); ++k) {
          if (++rest_values[k] <
              static_cast<int32_t>(scm.noise_spec(rest[k]).support.size()))
            break;
          rest_values[k] = 0;
        }
        if (k == rest.size()) break;
      }
    }
  }
  return max_deviation(mixed, interventional_marginal(scm, iv, query));
}

Scm random_scm(Rng& rng, int max_nodes, int max_support) {
  if (max_nodes < 2) throw InputError("random_scm needs at least two nodes");
  if (max_support < 2) throw InputError("random_scm needs supports of at least two");
  // Repeated exact queries over the joint stay cheap below this product.
  constexpr uint64_t kJointCap = 2048;

  const int n = 2 + rng.uniform_int(max_nodes - 1);
  std::vector<NodeDef> nodes;
  std::vector<NoiseSpec> noises;
  std::vector<Mechanism> mechanisms;
  uint64_t joint = 1;
  for (int i = 0; i < n; ++i) {
    const int domain_size = 2 + rng.uniform_int(max_support - 1);
    int noise_size = 2 + rng.uniform_int(max_support - 1);
    while (noise_size > 1 && joint * noise_size > kJointCap) --noise_size;
    joint *= noise_size;

    NodeDef node;
    node.id = "n" + std::to_string(i);
    for (int v = 0; v < domain_size; ++v) node.domain.push_back("v" + std::to_string(v));

    NoiseSpec noise;
    noise.id = "u" + std::to_string(i);
    double total = 0.0;
    for (int v = 0; v < noise_size; ++v) {
      noise.support.push_back("e" + std::to_string(v));
      noise.probs.push_back(0.1 + rng.uniform());
      total += noise.probs.back();
    }
    for (double& p : noise.probs) p /= total;

    Mechanism mech;
    mech.node = node.id;
    mech.noise = noise.id;
    size_t rows = 1;
    for (int j = 0; j < i; ++j) {
      if (static_cast<int>(mech.parents.size()) >= 3) break;
      if (rng.bernoulli(0.5)) {
        mech.parents.push_back(nodes[j].id);
        rows *= nodes[j].domain.size();
      }
    }
    mech.table.resize(rows * static_cast<size_t>(noise_size));
    for (int32_t& v : mech.table) v = rng.uniform_int(domain_size);

    nodes.push_back(std::move(node));
    noises.push_back(std::move(noise));
    mechanisms.push_back(std::move(mech));
  }
  return Scm(std::move(nodes), std::move(noises), std::move(mechanisms));
}

double uniformization_deviation(Rng& rng, int n) {
  double dev = 0.0;
  for (int i = 0; i < n; ++i) {
    ConditionalTable ct;
    ct.num_values = 2 + rng.uniform_int(4);
    const int rows = 1 + rng.uniform_int(6);
    for (int r = 0; r < rows; ++r) {
      std::vector<double> row(ct.num_values, 0.0);
      double total = 0.0;
      for (double& p : row) {
        p = rng.bernoulli(0.25) ? 0.0 : 0.05 + rng.uniform();
        total += p;
      }
      if (total == 0.0) {
        row[0] = 1.0;
        total = 1.0;
      }
      for (double& p : row) p /= total;
      ct.rows.push_back(std::move(row));
    }
    const Uniformized u = uniformize(ct, "u");
    for (size_t r = 0; r < ct.rows.size(); ++r)
      for (size_t v = 0; v < ct.num_values; ++v)
        dev = std::max(dev, std::abs(u.reconstructed_prob(r, static_cast<int32_t>(v)) -
                                     ct.rows[r][v]));
  }
  return dev;
}

namespace {

Scm chain_fixture() {
  // A -> B -> C, all binary, each link a noisy relay (XOR with its noise).
  NodeDef a{"A", {"0", "1"}};
  NodeDef b{"B", {"0", "1"}};
  NodeDef c{"C", {"0", "1"}};
  NoiseSpec ua{"u_A", {"0", "1"}, {0.3, 0.7}};
  NoiseSpec ub{"u_B", {"0", "1"}, {0.8, 0.2}};
  NoiseSpec uc{"u_C", {"0", "1"}, {0.9, 0.1}};
  Mechanism ma{"A", {}, "u_A", {0, 1}};
  Mechanism mb{"B", {"A"}, "u_B", {0, 1, 1, 0}};
  Mechanism mc{"C", {"B"}, "u_C", {0, 1, 1, 0}};
  return Scm({a, b, c}, {ua, ub, uc}, {ma, mb, mc});
}

Scm fork_collider_fixture() {
  // X forks into Y and Z, which collide in W; mixed domain sizes.
  NodeDef x{"X", {"x0", "x1", "x2"}};
  NodeDef y{"Y", {"y0", "y1"}};
  NodeDef z{"Z", {"z0", "z1", "z2"}};
  NodeDef w{"W", {"w0", "w1"}};
  NoiseSpec ux{"u_X", {"0", "1", "2"}, {0.5, 0.3, 0.2}};
  NoiseSpec uy{"u_Y", {"0", "1"}, {0.6, 0.4}};
  NoiseSpec uz{"u_Z", {"0", "1", "2"}, {0.2, 0.5, 0.3}};
  NoiseSpec uw{"u_W", {"0", "1"}, {0.7, 0.3}};
  Mechanism mx{"X", {}, "u_X", {0, 1, 2}};
  Mechanism my{"Y", {"X"}, "u_Y", {0, 1, 1, 0, 1, 1}};
  Mechanism mz{"Z", {"X"}, "u_Z", {0, 1, 2, 1, 2, 0, 2, 0, 1}};
  Mechanism mw{"W", {"Y", "Z"}, "u_W", {0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0}};
  return Scm({x, y, z, w}, {ux, uy, uz, uw}, {mx, my, mz, mw});
}

Scm two_door_compiled_fixture(const TabularPolicy& policy) {
  return compile(two_door(0.8), policy).scm;
}

std::vector<std::string> noise_ids(const Scm& scm) {
  std::vector<std::string> ids;
  for (int i = 0; i < scm.num_nodes(); ++i) ids.push_back(scm.noise_spec(i).id);
  return ids;
}

// Rebuilds the model with one mechanism-table entry cycled to the next
// domain value; used by the verify self-test fault.
Scm corrupt_mechanism_table(const Scm& scm, const std::string& node) {
  const int target = scm.node_index(node);
  std::vector<NodeDef> nodes;
  std::vector<NoiseSpec> noises;
  std::vector<Mechanism> mechanisms;
  for (int i = 0; i < scm.num_nodes(); ++i) {
    nodes.push_back(scm.node(i));
    noises.push_back(scm.noise_spec(i));
    mechanisms.push_back(scm.mechanism(i));
  }
  const int32_t domain = static_cast<int32_t>(nodes[target].domain.size());
  int32_t& cell = mechanisms[target].table.front();
  cell = (cell + 1) % domain;
  return Scm(std::move(nodes), std::move(noises), std::move(mechanisms));
}

}  // namespace

std::vector<ScmFixture> invariant_fixtures() {
  std::vector<ScmFixture> out;
  {
    Scm scm = chain_fixture();
    Intervention iv = set_constant(scm, "B", 1);
    out.push_back({"chain", std::move(scm), std::move(iv), {"A", "C"}});
  }
  {
    Scm scm = fork_collider_fixture();
    Intervention iv = set_constant(scm, "X", 2);
    out.push_back({"fork_collider", std::move(scm), std::move(iv), {"Z", "W"}});
  }
  {
    Scm scm = two_door_compiled_fixture(uniform_policy(2));
    Intervention iv = set_constant(scm, "A1", 0);
    out.push_back({"two_door_compiled", std::move(scm), std::move(iv), {"O1", "G"}});
  }
  return out;
}

VerifyReport verify_suite(uint64_t seed, int n_random_scms, const std::string& fault) {
  if (fault != "none" && fault != "mechanism_table")
    throw InputError("unknown self-test fault '" + fault + "'");
  if (n_random_scms < 0) throw InputError("negative random model count");

  VerifyReport report;
  report.seed = seed;
  std::vector<ScmFixture> fixtures = invariant_fixtures();
  if (fault == "mechanism_table")
    fixtures[0].scm = corrupt_mechanism_table(fixtures[0].scm, "B");

  const auto add = [&](std::string name, double dev, double tol, std::string detail) {
    report.checks.push_back(
        {std::move(name), dev <= tol, dev, tol, std::move(detail)});
  };

  // Frozen fixture values; these are the checks a corrupted table must trip.
  {
    const Dist pc = interventional_marginal(fixtures[0].scm, {}, {"C"});
    add("chain_frozen_marginal", std::abs(pc.prob({1}) - 0.596), 1e-12, "");
  }
  {
    const Dist g = interventional_marginal(fixtures[2].scm, {}, {"G"});
    add("two_door_uniform_value", std::abs(g.expectation(fixtures[2].scm) - 0.5),
        1e-10, "");
  }
  {
    const Scm follow = two_door_compiled_fixture(follow_obs_policy());
    const Dist g = interventional_marginal(follow, {}, {"G"});
    add("two_door_follow_value", std::abs(g.expectation(follow) - 0.8), 1e-10, "");
  }

  for (const ScmFixture& f : fixtures)
    add("hindsight_fixture_" + f.name,
        hindsight_consistency_deviation(f.scm, f.intervention, f.query), 1e-10, "");

  // Every subset of noise variables, empty and full included.
  for (const ScmFixture& f : fixtures) {
    const std::vector<std::string> ids = noise_ids(f.scm);
    const size_t n_splits = size_t{1} << ids.size();
    double dev = 0.0;
    for (size_t mask = 0; mask < n_splits; ++mask) {
      std::vector<std::string> subset;
      for (size_t i = 0; i < ids.size(); ++i)
        if (mask & (size_t{1} << i)) subset.push_back(ids[i]);
      dev = std::max(dev, noise_split_deviation(f.scm, f.intervention, f.query, subset));
    }
    add("noise_splits_" + f.name, dev, 1e-10,
        "splits=" + std::to_string(n_splits));
  }

  for (int i = 0; i < n_random_scms; ++i) {
    const uint64_t child = derive_seed(
        seed, {static_cast<uint64_t>(Stream::kMisc), static_cast<uint64_t>(i)});
    Rng rng(child);
    const Scm scm = random_scm(rng);
    const int target = rng.uniform_int(scm.num_nodes());
    const std::string target_id = scm.node(target).id;
    const Intervention iv = set_constant(
        scm, target_id,
        rng.uniform_int(static_cast<int>(scm.node(target).domain.size())));
    std::vector<std::string> query;
    for (int j = 0; j < scm.num_nodes(); ++j)
      if (j != target) query.push_back(scm.node(j).id);
    add("hindsight_random_" + std::to_string(i),
        hindsight_consistency_deviation(scm, iv, query), 1e-10,
        "seed=" + std::to_string(child));
  }

  {
    const uint64_t child =
        derive_seed(seed, {static_cast<uint64_t>(Stream::kMisc), 1000});
    Rng rng(child);
    add("uniformization_roundtrip", uniformization_deviation(rng, 100), 1e-12,
        "tables=100 seed=" + std::to_string(child));
  }

  return report;
}

}  // namespace cfrl
