#pragma once

// Finite POMDPs and their unrolled SCM form. A PomdpSpec is tabular in
// states, actions, transitions and rewards; observations go through an
// abstract model so that environments whose observation noise has no
// tractable finite tabulation (per-cell masking) still fit. S_1 equals its
// own noise variable, so the initial-state prior doubles as the scenario
// distribution.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cfrl/errors.hpp"
#include "cfrl/rng.hpp"
#include "cfrl/scm.hpp"

namespace cfrl {

// One realized draw of an observation-noise variable. Tabular models use a
// single index; mask-based models use one indicator per cell.
using ObsNoise = std::vector<int32_t>;

// Finite tabulation of an observation conditional: f_o(s, u) with one
// categorical noise variable. `noise` is a template whose id is re-stamped
// per step when unrolling.
struct TabularObs {
  NoiseSpec noise;
  std::vector<std::string> obs_labels;
  std::vector<int32_t> table;  // [state][noise], noise fastest

  int32_t apply(int32_t state, int32_t u) const;
};

struct ObservationModel {
  virtual ~ObservationModel() = default;

  // Noise is exogenous: its distribution never depends on the state.
  virtual ObsNoise sample_noise(Rng& rng) const = 0;
  // Deterministic application of noise to a state.
  virtual std::string apply(int32_t state, const ObsNoise& noise) const = 0;
  // log p(obs | state); -inf when impossible.
  virtual double loglik(int32_t state, const std::string& obs) const = 0;
  // Exact sample from p(noise | state, obs). Throws ContradictionError when
  // the pair is impossible.
  virtual ObsNoise posterior_noise(int32_t state, const std::string& obs,
                                   Rng& rng) const = 0;
  // Finite form when one exists; null otherwise.
  virtual const TabularObs* tabular() const { return nullptr; }
};

// Observation model backed entirely by a TabularObs.
class TabularObsModel : public ObservationModel {
 public:
  explicit TabularObsModel(TabularObs t);

  ObsNoise sample_noise(Rng& rng) const override;
  std::string apply(int32_t state, const ObsNoise& noise) const override;
  double loglik(int32_t state, const std::string& obs) const override;
  ObsNoise posterior_noise(int32_t state, const std::string& obs,
                           Rng& rng) const override;
  const TabularObs* tabular() const override { return &t_; }

 private:
  int obs_index(const std::string& obs) const;
  TabularObs t_;
  std::map<std::string, int> obs_index_;
};

struct PomdpSpec {
  std::vector<std::string> state_labels;
  std::vector<std::string> action_labels;
  int horizon = 1;  // T
  NoiseSpec init;   // U_s1; support must equal state_labels (S_1 = U_s1)
  NoiseSpec trans_noise;       // template; id re-stamped per step
  std::vector<int32_t> trans;  // [s][a][u] -> next state, u fastest
  std::vector<double> reward;  // [s][a]
  double reward_min = 0.0;     // declared bounds, validated against the table
  double reward_max = 0.0;
  std::shared_ptr<const ObservationModel> obs;

  int num_states() const { return static_cast<int>(state_labels.size()); }
  int num_actions() const { return static_cast<int>(action_labels.size()); }
  int32_t next_state(int32_t s, int32_t a, int32_t u) const;
  double r(int32_t s, int32_t a) const;
  double trans_prob(int32_t s, int32_t a, int32_t s_next) const;

  // Totality, domain sizes, T >= 1, init support = state labels, bounds.
  void validate() const;
};

struct Trajectory {
  std::vector<int32_t> states;          // s_1..s_T
  std::vector<std::string> obs;         // o_1..o_T
  std::vector<int32_t> actions;         // a_1..a_{T-1}
  std::vector<double> rewards;          // r_1..r_{T-1}
  std::vector<double> action_logprobs;  // under the generating policy
};

// Undiscounted return: sum of rewards.
double trajectory_return(const Trajectory& t);

// Alternating prefix (o_1, a_1, ..., a_{t-1}, o_t). Rewards ride along for
// featurizers that want them; they are not part of the alternation.
struct History {
  std::vector<std::string> obs;
  std::vector<int32_t> actions;
  std::vector<double> rewards;

  void validate() const;  // obs.size() == actions.size() + 1, rewards match
};

History history_prefix(const Trajectory& t, int steps);  // first `steps` obs

// Feature key: step index plus the most recent k observations, optionally
// the most recent k rewards. Keys never contain whitespace or '='. An
// obs_map, when set, re-encodes each observation label before it enters the
// key; it must be a pure function of the label (environments with very wide
// observation spaces supply one so tabular keys stay learnable). The map is
// runtime configuration, not policy data: it is not serialized and must be
// re-attached after loading a policy from text.
struct Featurizer {
  int k = 1;
  bool include_rewards = false;
  std::function<std::string(const std::string&)> obs_map;

  std::string key(const History& h) const;
};

// Softmax policy over action indices, keyed by featurizer output. Unseen
// keys act uniform. -inf logits are allowed (hard zeros) but a key must
// keep at least one finite logit.
struct TabularPolicy {
  int num_actions = 0;
  Featurizer feat;
  std::map<std::string, std::vector<double>> logits;

  void set_logits(const std::string& key, std::vector<double> row);
  std::vector<double> probs(const std::string& key) const;
  double log_prob(const std::string& key, int32_t action) const;
  void validate() const;
};

TabularPolicy uniform_policy(int num_actions, Featurizer feat = {});

// Sum over steps of log pi(a_t | h_t); -inf when any action has zero
// probability, never a crash.
double action_loglik(const TabularPolicy& policy, const Trajectory& t);

// Action source for rollouts. `state` is the true state so privileged
// experts fit the same interface; pure policies ignore it.
struct ActionSelector {
  virtual ~ActionSelector() = default;
  virtual int num_actions() const = 0;
  virtual std::vector<double> action_probs(int step, const History& h,
                                           int32_t state) const = 0;
};

class PolicySelector : public ActionSelector {
 public:
  explicit PolicySelector(const TabularPolicy& p) : p_(&p) {}
  int num_actions() const override { return p_->num_actions; }
  std::vector<double> action_probs(int, const History& h, int32_t) const override {
    return p_->probs(p_->feat.key(h));
  }

 private:
  const TabularPolicy* p_;
};

// All exogenous environment randomness of one episode.
struct EpisodeNoise {
  int32_t initial = 0;             // value of U_s1 (= s_1)
  std::vector<int32_t> trans;      // u for steps 1..T-1
  std::vector<ObsNoise> obs;       // steps 1..T
};

EpisodeNoise sample_episode_noise(const PomdpSpec& pomdp, Rng& rng);

// Deterministic given the noise; actions drawn from `sel` via action_rng.
Trajectory rollout_with_noise(const PomdpSpec& pomdp, const ActionSelector& sel,
                              const EpisodeNoise& noise, Rng& action_rng);

// Direct simulation without building the SCM.
Trajectory env_rollout(const PomdpSpec& pomdp, const ActionSelector& sel, Rng& rng);

// --- Unrolled SCM form -----------------------------------------------------

// Node ids: S1..ST, O1..OT, H1..HT, A1..A{T-1}, R1..R{T-1}, G (T >= 2);
// horizon 1 compiles to {S1, O1} alone. History nodes are the deterministic
// concatenation of observations and actions so far; action mechanisms are
// the uniformized policy conditional over the history domain.
struct CompiledPomdp {
  Scm scm;
  int horizon = 0;
  std::vector<std::string> s_nodes, o_nodes, h_nodes, a_nodes, r_nodes;
  std::string g_node;  // empty when horizon == 1
  std::vector<std::string> env_noise_ids;     // u_s*, u_o*
  std::vector<std::string> action_noise_ids;  // u_a*

  // One history-domain entry: the observation/action index prefix it encodes.
  struct HistEntry {
    std::vector<int32_t> obs;
    std::vector<int32_t> actions;
  };
  std::vector<std::vector<HistEntry>> h_domains;  // [t-1][value index]

  // Labels the compiled model was built from, kept for policy swaps.
  std::vector<std::string> state_labels, action_labels, obs_labels;
};

// Requires a tabular observation model (CapacityError otherwise) and a
// reward-free featurizer (ConstructionError otherwise).
CompiledPomdp compile(const PomdpSpec& pomdp, const TabularPolicy& policy);

// The policy-swap intervention: replaces every A_t mechanism (and its
// uniformized noise) with the new policy's; environment mechanisms and
// noise specs are reused unchanged.
CompiledPomdp swap_policy(const CompiledPomdp& compiled, const TabularPolicy& policy);

// Evidence on (O_1..O_t, A_1..A_{min(t, T-1)}) from a logged trajectory,
// for hindsight queries against the compiled model.
Observation trajectory_evidence(const CompiledPomdp& compiled, const Trajectory& t,
                                int steps);

}  // namespace cfrl
