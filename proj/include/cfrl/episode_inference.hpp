#pragma once

// Exact hindsight over one logged episode prefix. Evidence is the recorded
// observations and actions (rewards ride along but carry no conditioning;
// they are a deterministic readout). The posterior factors along the state
// chain: forward filtering, backward path sampling, then per-step noise
// draws conditioned on the sampled path. Equivalent to the full-enumeration
// engine posterior restricted to environment noise, but linear in the step
// count, which is what makes grid-sized scenario spaces workable.

#include <cstdint>
#include <vector>

#include "cfrl/pomdp.hpp"

namespace cfrl {

// Filtered state marginals p(s_i | o_1..i, a_1..i-1), one row per observed
// step, each row normalized. Empty evidence gives an empty result. Throws
// ContradictionError when the prefix has zero probability under the model.
std::vector<std::vector<double>> filter_marginals(const PomdpSpec& pomdp,
                                                  const History& evidence);

// Exact joint draw of the state path s_1..s_t given the evidence.
std::vector<int32_t> sample_state_path(const PomdpSpec& pomdp, const History& evidence,
                                       Rng& rng);

// One draw of the episode's full environment noise: everything the evidence
// touches (initial state, transitions between observed steps, observation
// noise of observed steps) comes from the exact posterior; every later draw
// comes from the prior. The result plugs straight into rollout_with_noise.
EpisodeNoise sample_posterior_noise(const PomdpSpec& pomdp, const History& evidence,
                                    Rng& rng);

}  // namespace cfrl
