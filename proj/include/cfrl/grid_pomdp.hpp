#pragma once

// Exact POMDP view of the grid. The scenario space is the full set of valid
// cell layouts, the initial distribution is the generator's output law
// computed by dynamic programming over its backward walk, and observations
// keep their per-cell mask noise through an abstract model (their finite
// tabulation would be exponential in the cell count).

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfrl/grid.hpp"
#include "cfrl/pomdp.hpp"

namespace cfrl {

struct GridSpace {
  GridPushConfig cfg;
  std::vector<std::string> labels;  // sorted flat cell strings
  std::unordered_map<std::string, int32_t> index;

  int32_t num_states() const { return static_cast<int32_t>(labels.size()); }
  int32_t find(const std::string& label) const;  // InputError when absent
  GridLevel level(int32_t s) const;
};

// All layouts with the configured box/target counts and one agent. Throws
// CapacityError (pointing at the desk preset) when the count exceeds the cap.
GridSpace enumerate_space(const GridPushConfig& cfg, size_t max_states = 200000);

// Exact law of generate_level: uniform solved placement, the backward-walk
// kernel iterated k ~ U[3, 3*width] times, conditioned on not ending solved.
std::vector<double> generator_prior(const GridSpace& space);

// Unsolvable twin of each state: its first box moved to the first corner
// holding no target, box or agent (kept in place when it already sits dead
// in a corner). Deterministic; used to corrupt scenario priors.
std::vector<int32_t> degenerate_twins(const GridSpace& space);

// Per-cell mask noise: one indicator per cell per step; masked cells outside
// the reveal window read "empty", window cells are exact. No finite
// tabulation is exposed, so exact engine paths reject grids upfront.
class GridObsModel : public ObservationModel {
 public:
  GridObsModel(const GridPushConfig& cfg, std::vector<std::string> state_labels);

  ObsNoise sample_noise(Rng& rng) const override;
  std::string apply(int32_t state, const ObsNoise& noise) const override;
  double loglik(int32_t state, const std::string& obs) const override;
  ObsNoise posterior_noise(int32_t state, const std::string& obs,
                           Rng& rng) const override;

 private:
  bool in_window(int32_t state, int cell) const;

  GridPushConfig cfg_;
  std::vector<std::string> labels_;
  std::vector<int> agent_;
};

// Full adapter: enumerated scenario space, exact generator prior, the
// deterministic dynamics as a point-noise kernel, mask observations.
PomdpSpec as_pomdp(const GridPushConfig& cfg, size_t max_states = 200000);

// Featurizer whose obs_map is grid_obs_summary. Raw mask observations give
// almost every rollout step a fresh key; policies trained on grid
// observations need this re-encoding to generalize.
Featurizer grid_summary_featurizer(int k = 1);

}  // namespace cfrl
