#pragma once

// Off-policy evaluation of a target policy from logged episodes: importance
// sampling over recorded behavior log-probs, model rollouts from the scenario
// prior, and counterfactual replay that pins posterior scenario noise for a
// conditioning prefix. Also the replay-buffer store and the controlled prior
// corruption used by the model-mismatch experiments.

#include <cstdint>
#include <string>
#include <vector>

#include "cfrl/pomdp.hpp"
#include "cfrl/rng.hpp"

namespace cfrl {

struct ReplayEpisode {
  Trajectory traj;
  std::string behavior_id;
};

// All episodes come from one environment; env_hash is the caller's digest of
// that configuration and seed is the master seed they were drawn under.
struct ReplayBuffer {
  std::vector<ReplayEpisode> episodes;
  std::string env_hash;
  uint64_t seed = 0;

  void validate() const;  // consistent shapes, finite behavior log-probs
};

// 64-bit FNV-1a over the bytes; used for env-config digests.
uint64_t fnv1a64(const std::string& s);

// n on-policy episodes; episode i uses rng derived from (seed, i) so the
// buffer does not depend on collection order.
ReplayBuffer collect_episodes(const PomdpSpec& env, const ActionSelector& mu,
                              const std::string& behavior_id, int n,
                              uint64_t seed, const std::string& env_hash);

// JSON-lines, schema cfrl.replay.v1: one header line, one episode per line.
void save_replay(const ReplayBuffer& buffer, const std::string& path);
ReplayBuffer load_replay(const std::string& path);

struct EvalReport {
  std::string estimator;   // "is" | "mb" | "cf"
  int t = -1;              // conditioning steps; -1 when not applicable
  double estimate = 0.0;
  double std_error = 0.0;  // NaN when fewer than two independent samples
  double n_effective = 0.0;
  int n_used = 0;
  int skipped = 0;
};

std::string eval_csv_header();  // estimator,t,estimate,stderr,n_effective,n_used,skipped
std::string eval_csv_row(const EvalReport& r);
void write_eval_csv(const std::string& path, const std::vector<EvalReport>& rows);

enum class IsMode { kOrdinary, kSelfNormalized };

// Per-episode weight exp(loglik(pi) - recorded behavior loglik). Ordinary
// averages w*G over all episodes; self-normalized divides by the weight sum
// and is exactly invariant to rescaling all weights. Throws
// SupportCollapseError when pi rules out every logged episode.
EvalReport is_evaluate(const ReplayBuffer& buffer, const TabularPolicy& pi,
                       IsMode mode = IsMode::kSelfNormalized);

// Model whose scenario prior leans toward a designated unsolvable twin of
// each initial state; epsilon 0 keeps the model exact.
struct MismatchedModel {
  PomdpSpec model;
  double epsilon = 0.0;
};

// Moves eps of each state's prior mass onto twin[state]. Transition,
// observation, and reward kernels are untouched.
MismatchedModel corrupt_prior(const PomdpSpec& model, double epsilon,
                              const std::vector<int32_t>& twin);

// Mean return over fresh model rollouts from the scenario prior. Rollout i
// draws from rng derived from (seed, i), so any worker count gives the same
// report.
EvalReport mb_evaluate(const PomdpSpec& model, const ActionSelector& pi,
                       int n_rollouts, uint64_t seed, int workers = 1);
EvalReport mb_evaluate(const MismatchedModel& mismatched, const ActionSelector& pi,
                       int n_rollouts, uint64_t seed, int workers = 1);

// Counterfactual evaluation: per episode, condition the scenario posterior on
// the first t observation steps (logged actions included), then replay under
// pi with fresh action noise; noise beyond the prefix comes from the prior.
// Episodes whose prefix contradicts the model are skipped and counted.
EvalReport cf_evaluate(const PomdpSpec& model, const ActionSelector& pi,
                       const ReplayBuffer& buffer, int t,
                       int n_cf_per_episode, uint64_t seed, int workers = 1);

// cf_evaluate once per entry of t_list, in the given order.
std::vector<EvalReport> sweep_conditioning(const PomdpSpec& model,
                                           const ActionSelector& pi,
                                           const ReplayBuffer& buffer,
                                           const std::vector<int>& t_list,
                                           int n_cf_per_episode, uint64_t seed,
                                           int workers = 1);

}  // namespace cfrl
