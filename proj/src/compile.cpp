#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cfrl/pomdp.hpp"
#include "cfrl/text.hpp"
#include "cfrl/uniformize.hpp"

namespace cfrl {

namespace {

// History domains and the G table are materialized in full; past this many
// entries the unrolled model stops being a sensible object to build.
constexpr size_t kMaxCompiledDomain = 200000;

NoiseSpec respec(const NoiseSpec& tmpl, std::string id) {
  NoiseSpec n = tmpl;
  n.id = std::move(id);
  return n;
}

NoiseSpec point_noise(std::string id) { return {std::move(id), {"-"}, {1.0}}; }

void check_history_safe(const std::vector<std::string>& labels, const char* what) {
  for (const auto& l : labels)
    if (l.find(';') != std::string::npos)
      throw ConstructionError(std::string(what) + " label '" + l +
                              "' contains ';', which history labels reserve");
}

// Uniformized policy conditional over one step's history domain.
std::pair<NoiseSpec, Mechanism> action_parts(
    const TabularPolicy& policy, const std::vector<CompiledPomdp::HistEntry>& domain,
    const std::vector<std::string>& obs_labels, int t) {
  ConditionalTable cond;
  cond.num_values = policy.num_actions;
  cond.rows.reserve(domain.size());
  for (const auto& entry : domain) {
    History h;
    for (int32_t o : entry.obs) h.obs.push_back(obs_labels[o]);
    h.actions = entry.actions;
    h.rewards.assign(entry.actions.size(), 0.0);  // unused: reward-free featurizer
    cond.rows.push_back(policy.probs(policy.feat.key(h)));
  }
  const auto u = uniformize(cond, "u_a" + std::to_string(t));
  auto mech = uniformized_mechanism(u, "A" + std::to_string(t),
                                    {"H" + std::to_string(t)});
  return {u.noise, std::move(mech)};
}

}  // namespace

CompiledPomdp compile(const PomdpSpec& pomdp, const TabularPolicy& policy) {
  pomdp.validate();
  policy.validate();
  if (policy.num_actions != pomdp.num_actions())
    throw ConstructionError("policy action count does not match the environment");
  if (policy.feat.include_rewards)
    throw ConstructionError(
        "unrolled history nodes carry observations and actions only; "
        "reward-keyed featurizers cannot be compiled");
  const TabularObs* tab = pomdp.obs->tabular();
  if (!tab)
    throw CapacityError(
        "observation model has no finite tabulation; unrolling needs one");
  const size_t ns = pomdp.state_labels.size();
  const size_t na = pomdp.action_labels.size();
  const size_t no = tab->obs_labels.size();
  const size_t nou = tab->noise.support.size();
  if (tab->table.size() != ns * nou)
    throw ConstructionError("observation table does not cover the state domain");
  check_history_safe(tab->obs_labels, "observation");
  check_history_safe(pomdp.action_labels, "action");

  const int T = pomdp.horizon;
  std::vector<NodeDef> nodes;
  std::vector<NoiseSpec> noises;
  std::vector<Mechanism> mechs;

  // S1 = U_s1 by an identity table over the shared support.
  nodes.push_back({"S1", pomdp.state_labels});
  noises.push_back(respec(pomdp.init, "u_s1"));
  {
    Mechanism m{"S1", {}, "u_s1", {}};
    for (size_t u = 0; u < ns; ++u) m.table.push_back(static_cast<int32_t>(u));
    mechs.push_back(std::move(m));
  }

  auto add_obs = [&](int t) {
    const std::string id = "O" + std::to_string(t);
    nodes.push_back({id, tab->obs_labels});
    noises.push_back(respec(tab->noise, "u_o" + std::to_string(t)));
    mechs.push_back({id, {"S" + std::to_string(t)}, "u_o" + std::to_string(t),
                     tab->table});
  };
  add_obs(1);

  std::vector<std::string> s_nodes{"S1"}, o_nodes{"O1"};
  if (T == 1) {
    return {Scm(std::move(nodes), std::move(noises), std::move(mechs)),
            1,
            std::move(s_nodes),
            std::move(o_nodes),
            {},
            {},
            {},
            "",
            {"u_s1", "u_o1"},
            {},
            {},
            pomdp.state_labels,
            pomdp.action_labels,
            tab->obs_labels};
  }

  // History domains, labels, and nodes. H1 enumerates the first observation;
  // each later domain is the full product of (previous, action, observation).
  std::vector<std::vector<CompiledPomdp::HistEntry>> h_domains;
  std::vector<std::vector<std::string>> h_labels;
  std::vector<std::string> h_nodes, a_nodes, r_nodes;
  {
    std::vector<CompiledPomdp::HistEntry> d;
    std::vector<std::string> labels;
    for (size_t o = 0; o < no; ++o) {
      d.push_back({{static_cast<int32_t>(o)}, {}});
      labels.push_back(tab->obs_labels[o]);
    }
    h_domains.push_back(std::move(d));
    h_labels.push_back(std::move(labels));
    nodes.push_back({"H1", h_labels[0]});
    noises.push_back(point_noise("u_h1"));
    Mechanism m{"H1", {"O1"}, "u_h1", {}};
    for (size_t o = 0; o < no; ++o) m.table.push_back(static_cast<int32_t>(o));
    mechs.push_back(std::move(m));
    h_nodes.push_back("H1");
  }

  // Reward value domain, shared by every R_t.
  std::vector<double> r_domain(pomdp.reward.begin(), pomdp.reward.end());
  for (auto& v : r_domain) v += 0.0;  // collapse -0 onto +0
  std::sort(r_domain.begin(), r_domain.end());
  r_domain.erase(std::unique(r_domain.begin(), r_domain.end()), r_domain.end());
  std::vector<std::string> r_labels;
  std::map<double, int32_t> r_index;
  for (double v : r_domain) {
    r_index.emplace(v, static_cast<int32_t>(r_labels.size()));
    r_labels.push_back(format_double(v));
  }

  for (int t = 1; t < T; ++t) {
    const std::string st = std::to_string(t), st1 = std::to_string(t + 1);

    auto [a_noise, a_mech] = action_parts(policy, h_domains[t - 1],
                                          tab->obs_labels, t);
    nodes.push_back({"A" + st, pomdp.action_labels});
    noises.push_back(std::move(a_noise));
    mechs.push_back(std::move(a_mech));
    a_nodes.push_back("A" + st);

    nodes.push_back({"R" + st, r_labels});
    noises.push_back(point_noise("u_r" + st));
    {
      Mechanism m{"R" + st, {"S" + st, "A" + st}, "u_r" + st, {}};
      for (size_t s = 0; s < ns; ++s)
        for (size_t a = 0; a < na; ++a)
          m.table.push_back(r_index.at(pomdp.r(static_cast<int32_t>(s),
                                               static_cast<int32_t>(a)) +
                                       0.0));
      mechs.push_back(std::move(m));
    }
    r_nodes.push_back("R" + st);

    nodes.push_back({"S" + st1, pomdp.state_labels});
    noises.push_back(respec(pomdp.trans_noise, "u_s" + st1));
    mechs.push_back({"S" + st1, {"S" + st, "A" + st}, "u_s" + st1, pomdp.trans});
    s_nodes.push_back("S" + st1);

    add_obs(t + 1);
    o_nodes.push_back("O" + st1);

    const auto& prev = h_domains[t - 1];
    if (prev.size() * na * no > kMaxCompiledDomain)
      throw CapacityError("history domain at step " + st1 + " exceeds " +
                          std::to_string(kMaxCompiledDomain) + " entries");
    std::vector<CompiledPomdp::HistEntry> d;
    std::vector<std::string> labels;
    Mechanism hm{"H" + st1, {"H" + st, "A" + st, "O" + st1}, "u_h" + st1, {}};
    for (size_t h = 0; h < prev.size(); ++h) {
      for (size_t a = 0; a < na; ++a) {
        for (size_t o = 0; o < no; ++o) {
          CompiledPomdp::HistEntry e = prev[h];
          e.actions.push_back(static_cast<int32_t>(a));
          e.obs.push_back(static_cast<int32_t>(o));
          d.push_back(std::move(e));
          labels.push_back(h_labels[t - 1][h] + ";" + pomdp.action_labels[a] +
                           ";" + tab->obs_labels[o]);
          hm.table.push_back(static_cast<int32_t>(hm.table.size()));
        }
      }
    }
    h_domains.push_back(std::move(d));
    h_labels.push_back(std::move(labels));
    nodes.push_back({"H" + st1, h_labels[t]});
    noises.push_back(point_noise("u_h" + st1));
    mechs.push_back(std::move(hm));
    h_nodes.push_back("H" + st1);
  }

  // G = sum of rewards. Domain by running the same left-to-right accumulation
  // the table rows use, so lookups match bit for bit.
  std::vector<double> sums{0.0};
  for (int t = 1; t < T; ++t) {
    std::vector<double> next;
    next.reserve(sums.size() * r_domain.size());
    for (double s : sums)
      for (double r : r_domain) next.push_back(s + r);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    sums = std::move(next);
    if (sums.size() > kMaxCompiledDomain)
      throw CapacityError("return domain exceeds compiled-domain limit");
  }
  std::map<double, int32_t> g_index;
  std::vector<std::string> g_labels;
  for (double v : sums) {
    g_index.emplace(v, static_cast<int32_t>(g_labels.size()));
    g_labels.push_back(format_double(v));
  }
  nodes.push_back({"G", g_labels});
  noises.push_back(point_noise("u_g"));
  {
    double rows_est = 1.0;
    for (int t = 1; t < T; ++t) rows_est *= static_cast<double>(r_domain.size());
    if (rows_est > static_cast<double>(kMaxCompiledDomain))
      throw CapacityError("return table exceeds compiled-domain limit");
    Mechanism m{"G", r_nodes, "u_g", {}};
    std::vector<size_t> idx(static_cast<size_t>(T - 1), 0);
    bool running = true;
    while (running) {
      double g = 0.0;
      for (size_t v : idx) g += r_domain[v];
      m.table.push_back(g_index.at(g));
      running = false;
      size_t pos = idx.size();
      while (pos > 0) {
        --pos;
        if (++idx[pos] < r_domain.size()) {
          running = true;
          break;
        }
        idx[pos] = 0;
      }
    }
    mechs.push_back(std::move(m));
  }

  std::vector<std::string> env_ids, action_ids;
  for (int t = 1; t <= T; ++t) env_ids.push_back("u_s" + std::to_string(t));
  for (int t = 1; t <= T; ++t) env_ids.push_back("u_o" + std::to_string(t));
  for (int t = 1; t < T; ++t) action_ids.push_back("u_a" + std::to_string(t));

  return {Scm(std::move(nodes), std::move(noises), std::move(mechs)),
          T,
          std::move(s_nodes),
          std::move(o_nodes),
          std::move(h_nodes),
          std::move(a_nodes),
          std::move(r_nodes),
          "G",
          std::move(env_ids),
          std::move(action_ids),
          std::move(h_domains),
          pomdp.state_labels,
          pomdp.action_labels,
          tab->obs_labels};
}

CompiledPomdp swap_policy(const CompiledPomdp& compiled, const TabularPolicy& policy) {
  policy.validate();
  if (policy.num_actions != static_cast<int>(compiled.action_labels.size()))
    throw ConstructionError("policy action count does not match the environment");
  if (policy.feat.include_rewards)
    throw ConstructionError(
        "unrolled history nodes carry observations and actions only; "
        "reward-keyed featurizers cannot be compiled");

  const Scm& scm = compiled.scm;
  std::vector<NodeDef> nodes;
  std::vector<NoiseSpec> noises;
  std::vector<Mechanism> mechs;
  for (int i = 0; i < scm.num_nodes(); ++i) {
    nodes.push_back(scm.node(i));
    noises.push_back(scm.noise_spec(i));
    mechs.push_back(scm.mechanism(i));
  }
  for (size_t t = 1; t < static_cast<size_t>(compiled.horizon); ++t) {
    const int i = scm.node_index("A" + std::to_string(t));
    auto [a_noise, a_mech] =
        action_parts(policy, compiled.h_domains[t - 1], compiled.obs_labels,
                     static_cast<int>(t));
    noises[i] = std::move(a_noise);
    mechs[i] = std::move(a_mech);
  }

  CompiledPomdp out = compiled;
  out.scm = Scm(std::move(nodes), std::move(noises), std::move(mechs));
  return out;
}

}  // namespace cfrl
