#include "cfrl/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfrl/text.hpp"

namespace cfrl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_key_token(const std::string& s, const char* what) {
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=')
      throw InputError(std::string(what) + " '" + s + "' contains whitespace or '='");
  }
  if (s.empty()) throw InputError(std::string(what) + " is empty");
}

}  // namespace

int32_t TabularObs::apply(int32_t state, int32_t u) const {
  return table[static_cast<size_t>(state) * noise.support.size() + u];
}

TabularObsModel::TabularObsModel(TabularObs t) : t_(std::move(t)) {
  t_.noise.validate();
  if (t_.obs_labels.empty()) throw InputError("observation domain is empty");
  if (t_.table.empty() || t_.table.size() % t_.noise.support.size() != 0)
    throw InputError("observation table size is not a multiple of the noise support");
  for (int32_t v : t_.table)
    if (v < 0 || v >= static_cast<int32_t>(t_.obs_labels.size()))
      throw InputError("observation table entry out of range");
  for (size_t i = 0; i < t_.obs_labels.size(); ++i) {
    if (!obs_index_.emplace(t_.obs_labels[i], static_cast<int>(i)).second)
      throw InputError("duplicate observation label '" + t_.obs_labels[i] + "'");
  }
}

int TabularObsModel::obs_index(const std::string& obs) const {
  auto it = obs_index_.find(obs);
  return it == obs_index_.end() ? -1 : it->second;
}

ObsNoise TabularObsModel::sample_noise(Rng& rng) const {
  return {static_cast<int32_t>(rng.categorical(t_.noise.probs))};
}

std::string TabularObsModel::apply(int32_t state, const ObsNoise& noise) const {
  if (noise.size() != 1) throw InputError("tabular observation noise has one component");
  return t_.obs_labels[t_.apply(state, noise[0])];
}

double TabularObsModel::loglik(int32_t state, const std::string& obs) const {
  const int o = obs_index(obs);
  if (o < 0) return -std::numeric_limits<double>::infinity();
  double p = 0.0;
  for (size_t u = 0; u < t_.noise.support.size(); ++u)
    if (t_.apply(state, static_cast<int32_t>(u)) == o) p += t_.noise.probs[u];
  return std::log(p);  // log(0) = -inf
}

ObsNoise TabularObsModel::posterior_noise(int32_t state, const std::string& obs,
                                          Rng& rng) const {
  const int o = obs_index(obs);
  std::vector<double> w(t_.noise.support.size(), 0.0);
  double total = 0.0;
  if (o >= 0) {
    for (size_t u = 0; u < w.size(); ++u) {
      if (t_.apply(state, static_cast<int32_t>(u)) == o) {
        w[u] = t_.noise.probs[u];
        total += w[u];
      }
    }
  }
  if (total <= 0.0)
    throw ContradictionError("observation '" + obs + "' impossible in this state");
  return {static_cast<int32_t>(rng.categorical(w))};
}

int32_t PomdpSpec::next_state(int32_t s, int32_t a, int32_t u) const {
  const size_t nu = trans_noise.support.size();
  return trans[(static_cast<size_t>(s) * action_labels.size() + a) * nu + u];
}

double PomdpSpec::r(int32_t s, int32_t a) const {
  return reward[static_cast<size_t>(s) * action_labels.size() + a];
}

double PomdpSpec::trans_prob(int32_t s, int32_t a, int32_t s_next) const {
  double p = 0.0;
  for (size_t u = 0; u < trans_noise.support.size(); ++u)
    if (next_state(s, a, static_cast<int32_t>(u)) == s_next) p += trans_noise.probs[u];
  return p;
}

void PomdpSpec::validate() const {
  if (horizon < 1) throw InputError("horizon must be at least 1");
  if (state_labels.empty()) throw InputError("state domain is empty");
  if (action_labels.empty()) throw InputError("action domain is empty");
  init.validate();
  if (init.support != state_labels)
    throw InputError("initial noise support must equal the state domain (S_1 = U_s1)");
  trans_noise.validate();
  const size_t ns = state_labels.size(), na = action_labels.size();
  const size_t nu = trans_noise.support.size();
  if (trans.size() != ns * na * nu) throw InputError("transition table is not total");
  for (int32_t v : trans)
    if (v < 0 || v >= static_cast<int32_t>(ns))
      throw InputError("transition table entry out of range");
  if (reward.size() != ns * na) throw InputError("reward table is not total");
  for (double v : reward) {
    if (!std::isfinite(v)) throw InputError("reward table entry is not finite");
    if (v < reward_min || v > reward_max)
      throw InputError("reward table entry outside declared bounds");
  }
  if (!obs) throw InputError("observation model is missing");
}

double trajectory_return(const Trajectory& t) {
  double g = 0.0;
  for (double r : t.rewards) g += r;
  return g;
}

void History::validate() const {
  if (obs.empty()) throw InputError("history has no observations");
  if (actions.size() + 1 != obs.size())
    throw InputError("history alternation broken: " + std::to_string(obs.size()) +
                     " observations vs " + std::to_string(actions.size()) + " actions");
  if (rewards.size() != actions.size())
    throw InputError("history rewards out of step with actions");
}

History history_prefix(const Trajectory& t, int steps) {
  if (steps < 1 || steps > static_cast<int>(t.obs.size()))
    throw InputError("history prefix length out of range");
  History h;
  h.obs.assign(t.obs.begin(), t.obs.begin() + steps);
  h.actions.assign(t.actions.begin(), t.actions.begin() + (steps - 1));
  h.rewards.assign(t.rewards.begin(), t.rewards.begin() + (steps - 1));
  return h;
}

std::string Featurizer::key(const History& h) const {
  h.validate();
  if (k < 1) throw InputError("featurizer window must be at least 1");
  const size_t t = h.obs.size();
  std::string out = std::to_string(t);
  out += '|';
  const size_t first = t > static_cast<size_t>(k) ? t - k : 0;
  for (size_t i = first; i < t; ++i) {
    const std::string lab = obs_map ? obs_map(h.obs[i]) : h.obs[i];
    check_key_token(lab, "observation label");
    if (i > first) out += ',';
    out += lab;
  }
  if (include_rewards) {
    out += '|';
    const size_t nr = h.rewards.size();
    const size_t rfirst = nr > static_cast<size_t>(k) ? nr - k : 0;
    for (size_t i = rfirst; i < nr; ++i) {
      if (i > rfirst) out += ',';
      out += format_double(h.rewards[i]);
    }
  }
  return out;
}

void TabularPolicy::set_logits(const std::string& key, std::vector<double> row) {
  check_key_token(key, "policy key");
  if (static_cast<int>(row.size()) != num_actions)
    throw InputError("logit row for '" + key + "' has wrong arity");
  bool any_finite = false;
  for (double v : row) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw InputError("logit must be finite or -inf");
    any_finite = any_finite || std::isfinite(v);
  }
  if (!any_finite)
    throw InputError("logit row for '" + key + "' has no finite entry");
  logits[key] = std::move(row);
}

std::vector<double> TabularPolicy::probs(const std::string& key) const {
  if (num_actions < 1) throw InputError("policy has no actions");
  auto it = logits.find(key);
  if (it == logits.end())
    return std::vector<double>(num_actions, 1.0 / num_actions);
  const auto& l = it->second;
  const double m = *std::max_element(l.begin(), l.end());
  std::vector<double> p(l.size());
  double z = 0.0;
  for (size_t i = 0; i < l.size(); ++i) {
    p[i] = std::exp(l[i] - m);  // exp(-inf) = 0
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

double TabularPolicy::log_prob(const std::string& key, int32_t action) const {
  if (action < 0 || action >= num_actions) throw InputError("action index out of range");
  auto it = logits.find(key);
  if (it == logits.end()) return -std::log(static_cast<double>(num_actions));
  const auto& l = it->second;
  const double m = *std::max_element(l.begin(), l.end());
  if (l[action] == kNegInf) return kNegInf;
  double z = 0.0;
  for (double v : l) z += std::exp(v - m);
  return l[action] - m - std::log(z);
}

void TabularPolicy::validate() const {
  if (num_actions < 1) throw InputError("policy has no actions");
  if (feat.k < 1) throw InputError("featurizer window must be at least 1");
  for (const auto& [key, row] : logits) {
    check_key_token(key, "policy key");
    if (static_cast<int>(row.size()) != num_actions)
      throw InputError("logit row for '" + key + "' has wrong arity");
    bool any_finite = false;
    for (double v : row) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw InputError("logit must be finite or -inf");
      any_finite = any_finite || std::isfinite(v);
    }
    if (!any_finite) throw InputError("logit row for '" + key + "' has no finite entry");
  }
}

TabularPolicy uniform_policy(int num_actions, Featurizer feat) {
  if (num_actions < 1) throw InputError("policy has no actions");
  TabularPolicy p;
  p.num_actions = num_actions;
  p.feat = feat;
  return p;
}

double action_loglik(const TabularPolicy& policy, const Trajectory& t) {
  double total = 0.0;
  History h;
  for (size_t step = 0; step < t.actions.size(); ++step) {
    h.obs.push_back(t.obs[step]);
    const double lp = policy.log_prob(policy.feat.key(h), t.actions[step]);
    if (lp == kNegInf) return kNegInf;
    total += lp;
    h.actions.push_back(t.actions[step]);
    h.rewards.push_back(t.rewards[step]);
  }
  return total;
}

EpisodeNoise sample_episode_noise(const PomdpSpec& pomdp, Rng& rng) {
  EpisodeNoise n;
  n.initial = static_cast<int32_t>(rng.categorical(pomdp.init.probs));
  n.trans.reserve(pomdp.horizon - 1);
  for (int t = 0; t + 1 < pomdp.horizon; ++t)
    n.trans.push_back(static_cast<int32_t>(rng.categorical(pomdp.trans_noise.probs)));
  n.obs.reserve(pomdp.horizon);
  for (int t = 0; t < pomdp.horizon; ++t) n.obs.push_back(pomdp.obs->sample_noise(rng));
  return n;
}

Trajectory rollout_with_noise(const PomdpSpec& pomdp, const ActionSelector& sel,
                              const EpisodeNoise& noise, Rng& action_rng) {
  const int T = pomdp.horizon;
  if (static_cast<int>(noise.trans.size()) != T - 1 ||
      static_cast<int>(noise.obs.size()) != T)
    throw InputError("episode noise does not match the horizon");
  if (sel.num_actions() != pomdp.num_actions())
    throw ConstructionError("selector action count does not match the environment");
  Trajectory out;
  History h;
  int32_t s = noise.initial;
  for (int t = 1; t <= T; ++t) {
    out.states.push_back(s);
    const std::string o = pomdp.obs->apply(s, noise.obs[t - 1]);
    out.obs.push_back(o);
    h.obs.push_back(o);
    if (t == T) break;
    const auto probs = sel.action_probs(t, h, s);
    if (static_cast<int>(probs.size()) != pomdp.num_actions())
      throw ConstructionError("selector returned a wrong-arity distribution");
    const auto a = static_cast<int32_t>(action_rng.categorical(probs));
    const double r = pomdp.r(s, a);
    out.actions.push_back(a);
    out.rewards.push_back(r);
    out.action_logprobs.push_back(std::log(probs[a]));
    h.actions.push_back(a);
    h.rewards.push_back(r);
    s = pomdp.next_state(s, a, noise.trans[t - 1]);
  }
  return out;
}

Trajectory env_rollout(const PomdpSpec& pomdp, const ActionSelector& sel, Rng& rng) {
  const EpisodeNoise noise = sample_episode_noise(pomdp, rng);
  return rollout_with_noise(pomdp, sel, noise, rng);
}

Observation trajectory_evidence(const CompiledPomdp& compiled, const Trajectory& t,
                                int steps) {
  if (steps < 0 || steps > compiled.horizon)
    throw InputError("evidence prefix length out of range");
  if (static_cast<int>(t.obs.size()) != compiled.horizon)
    throw InputError("trajectory horizon does not match the compiled model");
  Observation obs;
  for (int i = 0; i < steps; ++i)
    obs.entries.emplace_back(compiled.o_nodes[i], t.obs[i]);
  for (int i = 0; i + 1 < steps; ++i)
    obs.entries.emplace_back(compiled.a_nodes[i],
                             compiled.action_labels[t.actions[i]]);
  return obs;
}

}  // namespace cfrl
