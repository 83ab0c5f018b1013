#pragma once

// Return-weighted-regression policy improvement and the three search loops
// built on it: model-based search from the scenario prior (mb_ps),
// counterfactually-guided search anchored in logged real episodes (cf_gps),
// and the first-observation-only ablation (gps_like). Also the exact
// full-information planner used as the privileged expert.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfrl/pomdp.hpp"

namespace cfrl {

// Weighted trajectories for one improvement step. Returns and the policy
// log-likelihood ratio are kept separate so the weight exp(G/eta + diff)
// can be max-subtracted per component; that makes the improvement exactly
// invariant to shifting all returns by a representable constant.
struct ImprovementBatch {
  std::vector<Trajectory> trajectories;  // action_logprobs = generating policy
  std::vector<double> returns;
  std::vector<double> loglik_diffs;  // loglik(pi_k) - loglik(generating policy)
  double eta = 1.0;

  // log w_i = G_i/eta + loglik_diff_i
  std::vector<double> log_weights() const;
};

ImprovementBatch make_batch(std::vector<Trajectory> trajectories,
                            const TabularPolicy& pi_k, double eta);

// Weighted maximum likelihood for the tabular softmax: per feature key and
// action, new logit = log(sum of weights + kappa). Keys absent from the
// batch keep pi_k's logits. Throws ImprovementError when every weight is 0.
TabularPolicy improve(const ImprovementBatch& batch, const TabularPolicy& pi_k,
                      double kappa = 0.1);

// beta(k) = exp(-k / tau); beta(0) = 1, monotone non-increasing.
struct BetaSchedule {
  double tau = 500.0;
  double operator()(int k) const;
};

// Per-action blend beta * expert + (1 - beta) * pi.
class PlannerMixture : public ActionSelector {
 public:
  PlannerMixture(const ActionSelector& expert, const ActionSelector& pi,
                 double beta);
  int num_actions() const override;
  std::vector<double> action_probs(int step, const History& h,
                                   int32_t state) const override;

 private:
  const ActionSelector* expert_;
  const ActionSelector* pi_;
  double beta_;
};

// Exact finite-horizon dynamic program on the fully observed model.
// value[g][s] is the optimal return with g decisions left; best[g][s] the
// maximizing action (lowest index on ties), defined for g >= 1.
struct FullInfoPlan {
  std::vector<std::vector<double>> value;
  std::vector<std::vector<int32_t>> best;
  double expected_return = 0.0;  // against the scenario prior
};

FullInfoPlan plan_full_info(const PomdpSpec& pomdp);

// Privileged expert: plays best[decisions_left][true state] deterministically.
class ExpertSelector : public ActionSelector {
 public:
  ExpertSelector(const FullInfoPlan& plan, int horizon, int num_actions);
  int num_actions() const override;
  std::vector<double> action_probs(int step, const History& h,
                                   int32_t state) const override;

 private:
  const FullInfoPlan* plan_;
  int horizon_;
  int num_actions_;
};

struct SearchConfig {
  int iterations = 0;    // K
  int rollouts = 0;      // N fresh episodes per iteration
  int n_cf = 10;         // counterfactual rollouts per logged episode
  int refresh_period = 5;  // iterations between behavior-policy refreshes
  double eta = 1.0;
  double kappa = 0.1;
  BetaSchedule beta;
  int eval_rollouts = 1000;  // true-env evaluation sample per iteration
  int workers = 1;
  uint64_t seed = 0;

  void validate() const;
};

struct SearchMetrics {
  int iter = 0;
  std::string algo;
  double beta = 0.0;
  double mean_train_return = 0.0;
  double true_eval_return = 0.0;
  double std_error = 0.0;
  int skipped = 0;
};

std::string metrics_csv_header();  // iter,algo,beta,mean_train_return,...
std::string metrics_csv_row(const SearchMetrics& m);
void write_metrics_csv(const std::string& path,
                       const std::vector<SearchMetrics>& rows);

struct SearchResult {
  TabularPolicy policy;
  std::vector<SearchMetrics> metrics;  // one row per iteration, in order
};

using CheckpointFn = std::function<void(int iter, const TabularPolicy&)>;

// Model-based search: every iteration draws N full episodes from the model's
// scenario prior under the planner mixture, improves, and evaluates on env.
SearchResult mb_ps(const PomdpSpec& model, const PomdpSpec& env,
                   const ActionSelector& expert, const TabularPolicy& pi0,
                   const SearchConfig& cfg, const CheckpointFn& checkpoint = {});

// Counterfactually-guided search: N real episodes from env under the current
// behavior policy; each episode's full history pins one posterior scenario
// in which n_cf mixture rollouts run with fresh action noise. The behavior
// policy refreshes to pi_k every refresh_period iterations.
SearchResult cf_gps(const PomdpSpec& model, const PomdpSpec& env,
                    const ActionSelector& expert, const TabularPolicy& pi0,
                    const SearchConfig& cfg, const CheckpointFn& checkpoint = {});

// cf_gps with the posterior conditioned on the first observation only.
SearchResult gps_like(const PomdpSpec& model, const PomdpSpec& env,
                      const ActionSelector& expert, const TabularPolicy& pi0,
                      const SearchConfig& cfg, const CheckpointFn& checkpoint = {});

}  // namespace cfrl
