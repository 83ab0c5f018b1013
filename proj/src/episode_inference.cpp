#include "cfrl/episode_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfrl {

namespace {

void check_evidence(const PomdpSpec& pomdp, const History& evidence) {
  evidence.validate();
  if (static_cast<int>(evidence.obs.size()) > pomdp.horizon)
    throw InputError("evidence is longer than the horizon");
  for (int32_t a : evidence.actions)
    if (a < 0 || a >= pomdp.num_actions())
      throw InputError("evidence action out of range");
}

// One filtering step: push alpha through the logged action, then absorb the
// next observation's likelihood row. Rows are renormalized to dodge
// underflow; only ratios matter downstream.
void normalize_or_throw(std::vector<double>& row, int step) {
  double sum = 0.0;
  for (double v : row) sum += v;
  if (!(sum > 0.0))
    throw ContradictionError("evidence prefix has zero probability at step " +
                             std::to_string(step));
  for (double& v : row) v /= sum;
}

std::vector<double> obs_likelihood_row(const PomdpSpec& pomdp,
                                       const std::string& obs) {
  std::vector<double> row(pomdp.num_states());
  double max_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> ll(pomdp.num_states());
  for (int32_t s = 0; s < pomdp.num_states(); ++s) {
    ll[s] = pomdp.obs->loglik(s, obs);
    max_ll = std::max(max_ll, ll[s]);
  }
  if (max_ll == -std::numeric_limits<double>::infinity())
    return std::vector<double>(pomdp.num_states(), 0.0);
  for (int32_t s = 0; s < pomdp.num_states(); ++s)
    row[s] = std::isinf(ll[s]) ? 0.0 : std::exp(ll[s] - max_ll);
  return row;
}

}  // namespace

std::vector<std::vector<double>> filter_marginals(const PomdpSpec& pomdp,
                                                  const History& evidence) {
  if (evidence.obs.empty() && evidence.actions.empty()) return {};
  check_evidence(pomdp, evidence);
  const int t = static_cast<int>(evidence.obs.size());
  const int n = pomdp.num_states();
  std::vector<std::vector<double>> alpha(t, std::vector<double>(n, 0.0));

  const auto lik0 = obs_likelihood_row(pomdp, evidence.obs[0]);
  for (int32_t s = 0; s < n; ++s) alpha[0][s] = pomdp.init.probs[s] * lik0[s];
  normalize_or_throw(alpha[0], 1);

  for (int i = 1; i < t; ++i) {
    const int32_t a = evidence.actions[i - 1];
    std::vector<double>& next = alpha[i];
    for (int32_t s = 0; s < n; ++s) {
      if (alpha[i - 1][s] == 0.0) continue;
      for (size_t u = 0; u < pomdp.trans_noise.probs.size(); ++u) {
        const double pu = pomdp.trans_noise.probs[u];
        if (pu == 0.0) continue;
        next[pomdp.next_state(s, a, static_cast<int32_t>(u))] += alpha[i - 1][s] * pu;
      }
    }
    const auto lik = obs_likelihood_row(pomdp, evidence.obs[i]);
    for (int32_t s = 0; s < n; ++s) next[s] *= lik[s];
    normalize_or_throw(next, i + 1);
  }
  return alpha;
}

std::vector<int32_t> sample_state_path(const PomdpSpec& pomdp, const History& evidence,
                                       Rng& rng) {
  if (evidence.obs.empty() && evidence.actions.empty()) return {};
  const auto alpha = filter_marginals(pomdp, evidence);
  const int t = static_cast<int>(alpha.size());
  const int n = pomdp.num_states();
  std::vector<int32_t> path(t);
  path[t - 1] = static_cast<int32_t>(rng.categorical(alpha[t - 1]));
  for (int i = t - 2; i >= 0; --i) {
    const int32_t a = evidence.actions[i];
    std::vector<double> w(n, 0.0);
    for (int32_t s = 0; s < n; ++s)
      if (alpha[i][s] > 0.0) w[s] = alpha[i][s] * pomdp.trans_prob(s, a, path[i + 1]);
    normalize_or_throw(w, i + 1);  // positive by the filter's construction
    path[i] = static_cast<int32_t>(rng.categorical(w));
  }
  return path;
}

EpisodeNoise sample_posterior_noise(const PomdpSpec& pomdp, const History& evidence,
                                    Rng& rng) {
  if (evidence.obs.empty() && evidence.actions.empty())
    return sample_episode_noise(pomdp, rng);
  check_evidence(pomdp, evidence);
  const auto path = sample_state_path(pomdp, evidence, rng);
  const int t = static_cast<int>(path.size());
  const int T = pomdp.horizon;

  EpisodeNoise noise;
  noise.initial = path[0];  // the initial state is its own noise variable
  noise.trans.resize(T - 1);
  noise.obs.resize(T);

  // Transition noise between observed steps: prior restricted to draws that
  // reproduce the sampled jump.
  const auto& probs = pomdp.trans_noise.probs;
  for (int i = 0; i + 1 < t; ++i) {
    std::vector<double> w(probs.size(), 0.0);
    for (size_t u = 0; u < probs.size(); ++u)
      if (pomdp.next_state(path[i], evidence.actions[i], static_cast<int32_t>(u)) ==
          path[i + 1])
        w[u] = probs[u];
    noise.trans[i] = static_cast<int32_t>(rng.categorical(w));
  }
  for (int i = std::max(t - 1, 0); i < T - 1; ++i)
    noise.trans[i] = static_cast<int32_t>(rng.categorical(probs));

  for (int i = 0; i < t; ++i)
    noise.obs[i] = pomdp.obs->posterior_noise(path[i], evidence.obs[i], rng);
  for (int i = t; i < T; ++i) noise.obs[i] = pomdp.obs->sample_noise(rng);
  return noise;
}

}  // namespace cfrl
