#include "cfrl/policy_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <utility>

#include "cfrl/episode_inference.hpp"
#include "cfrl/errors.hpp"
#include "cfrl/offpolicy.hpp"
#include "cfrl/parallel.hpp"
#include "cfrl/rng.hpp"
#include "cfrl/text.hpp"

namespace cfrl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double recorded_loglik(const Trajectory& t) {
  double s = 0.0;
  for (double lp : t.action_logprobs) s += lp;
  return s;
}

void check_batch_shape(const ImprovementBatch& b) {
  const size_t n = b.trajectories.size();
  if (n == 0) throw InputError("improvement batch is empty");
  if (b.returns.size() != n || b.loglik_diffs.size() != n)
    throw InputError("improvement batch fields disagree in length");
  if (!(b.eta > 0.0)) throw InputError("temperature must be positive");
}

// exp((G - max G)/eta + (diff - max diff)): a positive rescaling of the
// true weights, max-subtracted per component so that shifting all returns
// by a representable constant leaves every value bit-identical.
std::vector<double> batch_weights(const ImprovementBatch& b) {
  double g_max = -kInf, d_max = -kInf;
  for (size_t i = 0; i < b.returns.size(); ++i) {
    g_max = std::max(g_max, b.returns[i]);
    d_max = std::max(d_max, b.loglik_diffs[i]);
  }
  if (!std::isfinite(g_max) || !std::isfinite(d_max))
    throw ImprovementError("every improvement weight vanished");
  std::vector<double> w(b.returns.size());
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = std::exp((b.returns[i] - g_max) / b.eta +
                    (b.loglik_diffs[i] - d_max));
  return w;
}

}  // namespace

std::vector<double> ImprovementBatch::log_weights() const {
  check_batch_shape(*this);
  std::vector<double> out(returns.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = returns[i] / eta + loglik_diffs[i];
  return out;
}

ImprovementBatch make_batch(std::vector<Trajectory> trajectories,
                            const TabularPolicy& pi_k, double eta) {
  if (!(eta > 0.0)) throw InputError("temperature must be positive");
  ImprovementBatch b;
  b.eta = eta;
  b.returns.reserve(trajectories.size());
  b.loglik_diffs.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    b.returns.push_back(trajectory_return(t));
    b.loglik_diffs.push_back(action_loglik(pi_k, t) - recorded_loglik(t));
  }
  b.trajectories = std::move(trajectories);
  return b;
}

TabularPolicy improve(const ImprovementBatch& batch, const TabularPolicy& pi_k,
                      double kappa) {
  check_batch_shape(batch);
  if (!(kappa > 0.0)) throw InputError("smoothing must be positive");
  pi_k.validate();
  const std::vector<double> w = batch_weights(batch);

  // Contributions accumulate in (episode, step) order; together with the
  // sorted key map this makes the update independent of scheduling.
  std::map<std::string, std::vector<double>> counts;
  for (size_t i = 0; i < batch.trajectories.size(); ++i) {
    const Trajectory& traj = batch.trajectories[i];
    History h;
    for (size_t step = 0; step < traj.actions.size(); ++step) {
      h.obs.push_back(traj.obs[step]);
      const int32_t a = traj.actions[step];
      if (a < 0 || a >= pi_k.num_actions)
        throw InputError("batch action outside the policy's action space");
      auto& row = counts.try_emplace(pi_k.feat.key(h),
                                     std::vector<double>(pi_k.num_actions, 0.0))
                      .first->second;
      row[a] += w[i];
      h.actions.push_back(a);
      h.rewards.push_back(traj.rewards[step]);
    }
  }

  TabularPolicy out = pi_k;
  for (const auto& [key, row] : counts) {
    std::vector<double> logits(pi_k.num_actions);
    for (int a = 0; a < pi_k.num_actions; ++a) logits[a] = std::log(row[a] + kappa);
    out.set_logits(key, std::move(logits));
  }
  out.validate();
  return out;
}

double BetaSchedule::operator()(int k) const {
  if (k < 0) throw InputError("schedule index must be non-negative");
  return std::exp(-static_cast<double>(k) / tau);
}

PlannerMixture::PlannerMixture(const ActionSelector& expert,
                               const ActionSelector& pi, double beta)
    : expert_(&expert), pi_(&pi), beta_(beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw InputError("mixture coefficient must lie in [0, 1]");
  if (expert.num_actions() != pi.num_actions())
    throw InputError("mixture components disagree on the action count");
}

int PlannerMixture::num_actions() const { return pi_->num_actions(); }

std::vector<double> PlannerMixture::action_probs(int step, const History& h,
                                                 int32_t state) const {
  std::vector<double> e = expert_->action_probs(step, h, state);
  const std::vector<double> p = pi_->action_probs(step, h, state);
  for (size_t a = 0; a < e.size(); ++a)
    e[a] = beta_ * e[a] + (1.0 - beta_) * p[a];
  return e;
}

FullInfoPlan plan_full_info(const PomdpSpec& pomdp) {
  pomdp.validate();
  const int n_states = pomdp.num_states();
  const int n_actions = pomdp.num_actions();
  const int n_noise = static_cast<int>(pomdp.trans_noise.support.size());
  const int horizon = pomdp.horizon;
  FullInfoPlan plan;
  plan.value.assign(horizon, std::vector<double>(n_states, 0.0));
  plan.best.assign(horizon, std::vector<int32_t>(n_states, 0));
  for (int g = 1; g < horizon; ++g) {
    for (int s = 0; s < n_states; ++s) {
      double best_v = -kInf;
      int32_t best_a = 0;
      for (int a = 0; a < n_actions; ++a) {
        double v = pomdp.reward[s * n_actions + a];
        for (int u = 0; u < n_noise; ++u) {
          const int32_t next = pomdp.trans[(s * n_actions + a) * n_noise + u];
          v += pomdp.trans_noise.probs[u] * plan.value[g - 1][next];
        }
        if (v > best_v) {  // strict: ties keep the smallest action
          best_v = v;
          best_a = a;
        }
      }
      plan.value[g][s] = best_v;
      plan.best[g][s] = best_a;
    }
  }
  for (int s = 0; s < n_states; ++s)
    plan.expected_return += pomdp.init.probs[s] * plan.value[horizon - 1][s];
  return plan;
}

ExpertSelector::ExpertSelector(const FullInfoPlan& plan, int horizon,
                               int num_actions)
    : plan_(&plan), horizon_(horizon), num_actions_(num_actions) {
  if (static_cast<int>(plan.value.size()) != horizon)
    throw InputError("plan horizon disagrees with the model");
}

int ExpertSelector::num_actions() const { return num_actions_; }

std::vector<double> ExpertSelector::action_probs(int step, const History&,
                                                 int32_t state) const {
  const int left = horizon_ - step;  // decisions remaining, this one included
  if (step < 1 || left < 1 || left >= static_cast<int>(plan_->best.size()))
    throw InputError("expert queried outside the decision range");
  std::vector<double> probs(num_actions_, 0.0);
  probs[plan_->best[left].at(state)] = 1.0;
  return probs;
}

void SearchConfig::validate() const {
  if (iterations < 0) throw InputError("iteration count must be non-negative");
  if (rollouts < 1) throw InputError("need at least one rollout per iteration");
  if (n_cf < 1) throw InputError("need at least one counterfactual rollout");
  if (refresh_period < 1) throw InputError("refresh period must be positive");
  if (!(eta > 0.0)) throw InputError("temperature must be positive");
  if (!(kappa > 0.0)) throw InputError("smoothing must be positive");
  if (!(beta.tau > 0.0)) throw InputError("schedule time constant must be positive");
  if (eval_rollouts < 1) throw InputError("need at least one evaluation rollout");
  if (workers < 1) throw InputError("worker count must be positive");
}

std::string metrics_csv_header() {
  return "iter,algo,beta,mean_train_return,true_eval_return,stderr,skipped";
}

std::string metrics_csv_row(const SearchMetrics& m) {
  std::string row = std::to_string(m.iter);
  row += ',' + m.algo;
  row += ',' + format_double(m.beta);
  row += ',' + format_double(m.mean_train_return);
  row += ',' + format_double(m.true_eval_return);
  row += ',' + format_double(m.std_error);
  row += ',' + std::to_string(m.skipped);
  return row;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<SearchMetrics>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << metrics_csv_header() << '\n';
  for (const SearchMetrics& m : rows) out << metrics_csv_row(m) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

namespace {

enum class SearchKind { kModelPrior, kFullPrefix, kFirstObs };

const char* kind_name(SearchKind kind) {
  switch (kind) {
    case SearchKind::kModelPrior: return "mbps";
    case SearchKind::kFullPrefix: return "cfgps";
    default: return "gpslike";
  }
}

SearchResult run_search(SearchKind kind, const PomdpSpec& model,
                        const PomdpSpec& env, const ActionSelector& expert,
                        const TabularPolicy& pi0, const SearchConfig& cfg,
                        const CheckpointFn& checkpoint) {
  cfg.validate();
  model.validate();
  env.validate();
  pi0.validate();
  if (pi0.num_actions != model.num_actions() ||
      model.num_actions() != env.num_actions())
    throw InputError("policy, model and environment disagree on actions");
  if (expert.num_actions() != pi0.num_actions)
    throw InputError("expert disagrees on the action count");

  const auto u64 = [](auto v) { return static_cast<uint64_t>(v); };
  SearchResult out;
  TabularPolicy pi = pi0;
  TabularPolicy mu = pi0;  // behavior policy for the anchored variants
  for (int k = 0; k < cfg.iterations; ++k) {
    const double beta = cfg.beta(k);
    const PolicySelector pi_sel(pi);
    const PlannerMixture lambda(expert, pi_sel, beta);

    std::vector<Trajectory> trajs;
    int skipped = 0;
    if (kind == SearchKind::kModelPrior) {
      trajs.resize(cfg.rollouts);
      parallel_for(cfg.rollouts, cfg.workers, [&](int i) {
        Rng rng = derive_rng(cfg.seed, {u64(Stream::kRollout), u64(k), u64(i)});
        trajs[i] = env_rollout(model, lambda, rng);
      });
    } else {
      const int t_cond = kind == SearchKind::kFullPrefix ? model.horizon : 1;
      std::vector<Trajectory> logged(cfg.rollouts);
      const PolicySelector mu_sel(mu);
      parallel_for(cfg.rollouts, cfg.workers, [&](int i) {
        Rng rng = derive_rng(cfg.seed, {u64(Stream::kData), u64(k), u64(i)});
        logged[i] = env_rollout(env, mu_sel, rng);
      });
      // One posterior scenario per logged episode, n_cf rollouts sharing it.
      std::vector<std::optional<std::vector<Trajectory>>> slots(cfg.rollouts);
      parallel_for(cfg.rollouts, cfg.workers, [&](int i) {
        try {
          Rng post_rng =
              derive_rng(cfg.seed, {u64(Stream::kPosterior), u64(k), u64(i)});
          const EpisodeNoise noise = sample_posterior_noise(
              model, history_prefix(logged[i], t_cond), post_rng);
          std::vector<Trajectory> rolls(cfg.n_cf);
          for (int j = 0; j < cfg.n_cf; ++j) {
            Rng action_rng = derive_rng(
                cfg.seed, {u64(Stream::kRollout), u64(k), u64(i), u64(j)});
            rolls[j] = rollout_with_noise(model, lambda, noise, action_rng);
          }
          slots[i] = std::move(rolls);
        } catch (const ContradictionError&) {
          // logged prefix impossible under the (mismatched) model
        }
      });
      for (auto& slot : slots) {
        if (!slot) {
          ++skipped;
          continue;
        }
        for (Trajectory& t : *slot) trajs.push_back(std::move(t));
      }
    }

    SearchMetrics row;
    row.iter = k;
    row.algo = kind_name(kind);
    row.beta = beta;
    row.skipped = skipped;
    if (trajs.empty()) {
      row.mean_train_return = kNan;  // every episode contradicted; no update
    } else {
      const ImprovementBatch batch = make_batch(std::move(trajs), pi, cfg.eta);
      double train = 0.0;
      for (double g : batch.returns) train += g;
      row.mean_train_return = train / static_cast<double>(batch.returns.size());
      pi = improve(batch, pi, cfg.kappa);
    }

    const PolicySelector eval_sel(pi);
    const EvalReport eval =
        mb_evaluate(env, eval_sel, cfg.eval_rollouts,
                    derive_seed(cfg.seed, {u64(Stream::kEval), u64(k)}),
                    cfg.workers);
    row.true_eval_return = eval.estimate;
    row.std_error = eval.std_error;
    out.metrics.push_back(std::move(row));

    if (checkpoint) checkpoint(k, pi);
    if (kind != SearchKind::kModelPrior && (k + 1) % cfg.refresh_period == 0)
      mu = pi;
  }
  out.policy = std::move(pi);
  return out;
}

}  // namespace

SearchResult mb_ps(const PomdpSpec& model, const PomdpSpec& env,
                   const ActionSelector& expert, const TabularPolicy& pi0,
                   const SearchConfig& cfg, const CheckpointFn& checkpoint) {
  return run_search(SearchKind::kModelPrior, model, env, expert, pi0, cfg,
                    checkpoint);
}

SearchResult cf_gps(const PomdpSpec& model, const PomdpSpec& env,
                    const ActionSelector& expert, const TabularPolicy& pi0,
                    const SearchConfig& cfg, const CheckpointFn& checkpoint) {
  return run_search(SearchKind::kFullPrefix, model, env, expert, pi0, cfg,
                    checkpoint);
}

SearchResult gps_like(const PomdpSpec& model, const PomdpSpec& env,
                      const ActionSelector& expert, const TabularPolicy& pi0,
                      const SearchConfig& cfg, const CheckpointFn& checkpoint) {
  return run_search(SearchKind::kFirstObs, model, env, expert, pi0, cfg,
                    checkpoint);
}

}  // namespace cfrl
