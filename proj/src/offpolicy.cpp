#include "cfrl/offpolicy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cfrl/episode_inference.hpp"
#include "cfrl/errors.hpp"
#include "cfrl/parallel.hpp"
#include "cfrl/text.hpp"
#include "json.hpp"

namespace cfrl {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kReplaySchema = "cfrl.replay.v1";

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation / sqrt(n); NaN below two samples.
double std_error_of(const std::vector<double>& v, double mean) {
  const size_t n = v.size();
  if (n < 2) return kNan;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1)) /
         std::sqrt(static_cast<double>(n));
}

double behavior_loglik(const Trajectory& traj) {
  double s = 0.0;
  for (double lp : traj.action_logprobs) s += lp;
  return s;
}

}  // namespace

void ReplayBuffer::validate() const {
  for (size_t i = 0; i < episodes.size(); ++i) {
    const Trajectory& tr = episodes[i].traj;
    const std::string where = "episode " + std::to_string(i);
    if (tr.obs.empty()) throw InputError(where + " is empty");
    if (tr.states.size() != tr.obs.size())
      throw InputError(where + " has mismatched states and observations");
    if (tr.actions.size() + 1 != tr.obs.size())
      throw InputError(where + " needs one action per non-final step");
    if (tr.rewards.size() != tr.actions.size() ||
        tr.action_logprobs.size() != tr.actions.size())
      throw InputError(where + " has mismatched rewards or log-probs");
    for (double lp : tr.action_logprobs)
      if (!std::isfinite(lp))
        throw InputError(where + " has a non-finite behavior log-prob");
  }
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ReplayBuffer collect_episodes(const PomdpSpec& env, const ActionSelector& mu,
                              const std::string& behavior_id, int n,
                              uint64_t seed, const std::string& env_hash) {
  if (n < 0) throw InputError("episode count must be non-negative");
  ReplayBuffer out;
  out.env_hash = env_hash;
  out.seed = seed;
  out.episodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = derive_rng(seed, {static_cast<uint64_t>(Stream::kData),
                                static_cast<uint64_t>(i)});
    out.episodes.push_back({env_rollout(env, mu, rng), behavior_id});
  }
  return out;
}

void save_replay(const ReplayBuffer& buffer, const std::string& path) {
  buffer.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  nlohmann::ordered_json head;
  head["schema"] = kReplaySchema;
  head["env_hash"] = buffer.env_hash;
  head["seed"] = buffer.seed;
  out << head.dump() << '\n';
  for (const ReplayEpisode& ep : buffer.episodes) {
    nlohmann::ordered_json j;
    j["behavior"] = ep.behavior_id;
    j["states"] = ep.traj.states;
    j["obs"] = ep.traj.obs;
    j["actions"] = ep.traj.actions;
    j["rewards"] = ep.traj.rewards;
    j["logprobs"] = ep.traj.action_logprobs;
    out << j.dump() << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

ReplayBuffer load_replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  int line_no = 0;
  auto next_json = [&](nlohmann::json& j) {
    ++line_no;
    j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw InputError(path + " line " + std::to_string(line_no) +
                       " is not a JSON object");
  };
  if (!std::getline(in, line)) throw InputError(path + " is empty");
  nlohmann::json head;
  next_json(head);
  if (head.value("schema", "") != kReplaySchema)
    throw InputError(path + " has an unsupported replay schema");
  ReplayBuffer out;
  try {
    out.env_hash = head.at("env_hash").get<std::string>();
    out.seed = head.at("seed").get<uint64_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      next_json(j);
      ReplayEpisode ep;
      ep.behavior_id = j.at("behavior").get<std::string>();
      ep.traj.states = j.at("states").get<std::vector<int32_t>>();
      ep.traj.obs = j.at("obs").get<std::vector<std::string>>();
      ep.traj.actions = j.at("actions").get<std::vector<int32_t>>();
      ep.traj.rewards = j.at("rewards").get<std::vector<double>>();
      ep.traj.action_logprobs = j.at("logprobs").get<std::vector<double>>();
      out.episodes.push_back(std::move(ep));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + " line " + std::to_string(line_no) + ": " + e.what());
  }
  out.validate();
  return out;
}

std::string eval_csv_header() {
  return "estimator,t,estimate,stderr,n_effective,n_used,skipped";
}

std::string eval_csv_row(const EvalReport& r) {
  std::string row = r.estimator;
  row += ',' + std::to_string(r.t);
  row += ',' + format_double(r.estimate);
  row += ',' + format_double(r.std_error);
  row += ',' + format_double(r.n_effective);
  row += ',' + std::to_string(r.n_used);
  row += ',' + std::to_string(r.skipped);
  return row;
}

void write_eval_csv(const std::string& path, const std::vector<EvalReport>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << eval_csv_header() << '\n';
  for (const EvalReport& r : rows) out << eval_csv_row(r) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

EvalReport is_evaluate(const ReplayBuffer& buffer, const TabularPolicy& pi,
                       IsMode mode) {
  buffer.validate();
  pi.validate();
  if (buffer.episodes.empty())
    throw InputError("importance sampling needs a non-empty buffer");
  const size_t n = buffer.episodes.size();
  std::vector<double> logw(n), returns(n);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    const Trajectory& tr = buffer.episodes[i].traj;
    logw[i] = action_loglik(pi, tr) - behavior_loglik(tr);
    returns[i] = trajectory_return(tr);
    max_logw = std::max(max_logw, logw[i]);
  }
  if (!std::isfinite(max_logw))
    throw SupportCollapseError(
        "target policy puts zero probability on every logged episode");

  // Rescaled weights: exact invariance of the self-normalized estimate and
  // of n_effective under a common factor on all weights.
  double sum_w = 0.0, sum_w2 = 0.0, sum_wg = 0.0;
  std::vector<double> scaled(n);
  for (size_t i = 0; i < n; ++i) {
    scaled[i] = std::exp(logw[i] - max_logw);
    sum_w += scaled[i];
    sum_w2 += scaled[i] * scaled[i];
    sum_wg += scaled[i] * returns[i];
  }

  EvalReport r;
  r.estimator = "is";
  r.n_used = static_cast<int>(n);
  r.n_effective = sum_w * sum_w / sum_w2;
  if (mode == IsMode::kOrdinary) {
    std::vector<double> wg(n);
    for (size_t i = 0; i < n; ++i) wg[i] = std::exp(logw[i]) * returns[i];
    r.estimate = mean_of(wg);
    r.std_error = std_error_of(wg, r.estimate);
  } else {
    r.estimate = sum_wg / sum_w;
    if (n < 2) {
      r.std_error = kNan;
    } else {
      double ss = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double d = scaled[i] * (returns[i] - r.estimate);
        ss += d * d;
      }
      r.std_error = std::sqrt(ss) / sum_w;
    }
  }
  return r;
}

MismatchedModel corrupt_prior(const PomdpSpec& model, double epsilon,
                              const std::vector<int32_t>& twin) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw InputError("corruption rate must lie in [0, 1]");
  const int n = model.num_states();
  if (static_cast<int>(twin.size()) != n)
    throw InputError("twin map must cover every state");
  for (int32_t s : twin)
    if (s < 0 || s >= n) throw InputError("twin map points outside the state space");
  MismatchedModel out{model, epsilon};
  std::vector<double>& probs = out.model.init.probs;
  std::vector<double> next(probs.size(), 0.0);
  for (int s = 0; s < n; ++s) {
    next[s] += (1.0 - epsilon) * probs[s];
    next[twin[s]] += epsilon * probs[s];
  }
  probs = std::move(next);
  out.model.validate();
  return out;
}

EvalReport mb_evaluate(const PomdpSpec& model, const ActionSelector& pi,
                       int n_rollouts, uint64_t seed, int workers) {
  if (n_rollouts < 1) throw InputError("model evaluation needs at least one rollout");
  std::vector<double> returns(n_rollouts);
  parallel_for(n_rollouts, workers, [&](int i) {
    Rng rng = derive_rng(seed, {static_cast<uint64_t>(Stream::kEval),
                                static_cast<uint64_t>(i)});
    returns[i] = trajectory_return(env_rollout(model, pi, rng));
  });
  EvalReport r;
  r.estimator = "mb";
  r.estimate = mean_of(returns);
  r.std_error = std_error_of(returns, r.estimate);
  r.n_effective = static_cast<double>(n_rollouts);
  r.n_used = n_rollouts;
  return r;
}

EvalReport mb_evaluate(const MismatchedModel& mismatched, const ActionSelector& pi,
                       int n_rollouts, uint64_t seed, int workers) {
  return mb_evaluate(mismatched.model, pi, n_rollouts, seed, workers);
}

EvalReport cf_evaluate(const PomdpSpec& model, const ActionSelector& pi,
                       const ReplayBuffer& buffer, int t,
                       int n_cf_per_episode, uint64_t seed, int workers) {
  buffer.validate();
  if (buffer.episodes.empty())
    throw InputError("counterfactual evaluation needs a non-empty buffer");
  if (t < 0 || t > model.horizon)
    throw InputError("conditioning steps must lie in [0, horizon]");
  if (n_cf_per_episode < 1)
    throw InputError("need at least one counterfactual rollout per episode");
  const int n = static_cast<int>(buffer.episodes.size());
  // One slot per episode keeps the reduction independent of worker count.
  std::vector<double> slots(n, kNan);
  parallel_for(n, workers, [&](int i) {
    const Trajectory& traj = buffer.episodes[i].traj;
    const History prefix = t == 0 ? History{} : history_prefix(traj, t);
    Rng rng = derive_rng(seed, {static_cast<uint64_t>(Stream::kEval),
                                static_cast<uint64_t>(i)});
    try {
      double sum = 0.0;
      for (int j = 0; j < n_cf_per_episode; ++j) {
        const EpisodeNoise noise = sample_posterior_noise(model, prefix, rng);
        sum += trajectory_return(rollout_with_noise(model, pi, noise, rng));
      }
      slots[i] = sum / n_cf_per_episode;
    } catch (const ContradictionError&) {
      // logged prefix impossible under this model; NaN slot marks the skip
    }
  });
  std::vector<double> values;
  values.reserve(n);
  int skipped = 0;
  for (double v : slots) {
    if (std::isnan(v))
      ++skipped;
    else
      values.push_back(v);
  }
  EvalReport r;
  r.estimator = "cf";
  r.t = t;
  r.n_used = static_cast<int>(values.size());
  r.skipped = skipped;
  r.n_effective = static_cast<double>(values.size());
  if (values.empty()) {
    r.estimate = kNan;
    r.std_error = kNan;
  } else {
    r.estimate = mean_of(values);
    r.std_error = std_error_of(values, r.estimate);
  }
  return r;
}

std::vector<EvalReport> sweep_conditioning(const PomdpSpec& model,
                                           const ActionSelector& pi,
                                           const ReplayBuffer& buffer,
                                           const std::vector<int>& t_list,
                                           int n_cf_per_episode, uint64_t seed,
                                           int workers) {
  std::vector<EvalReport> out;
  out.reserve(t_list.size());
  for (int t : t_list)
    out.push_back(cf_evaluate(model, pi, buffer, t, n_cf_per_episode,
                              derive_seed(seed, {static_cast<uint64_t>(t)}),
                              workers));
  return out;
}

}  // namespace cfrl
