#pragma once

// Two-door toy: a prize sits behind the left or right door with equal
// probability, a noisy hint reports the correct door with accuracy alpha,
// and the agent opens one door. Horizon 2 (hint step, then a terminal
// observation step). The follow-the-hint policy is worth exactly alpha;
// any constant policy is worth 0.5.

#include "cfrl/pomdp.hpp"

namespace cfrl {

PomdpSpec two_door(double alpha = 0.8);

// Deterministically opens the door the first hint named (hard zeros on the
// other action).
TabularPolicy follow_obs_policy();

}  // namespace cfrl
