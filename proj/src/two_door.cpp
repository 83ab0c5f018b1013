#include "cfrl/two_door.hpp"

#include <limits>
#include <memory>

namespace cfrl {

PomdpSpec two_door(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha outside [0,1]");
  PomdpSpec p;
  p.state_labels = {"L", "R"};
  p.action_labels = {"openL", "openR"};
  p.horizon = 2;
  p.init = {"u_s", {"L", "R"}, {0.5, 0.5}};
  p.trans_noise = {"u_t", {"-"}, {1.0}};
  // The prize does not move: S2 = S1 for every action.
  p.trans = {0, 0, 1, 1};
  p.reward = {1.0, 0.0, 0.0, 1.0};
  p.reward_min = 0.0;
  p.reward_max = 1.0;
  TabularObs obs;
  obs.noise = {"u_o", {"hit", "miss"}, {alpha, 1.0 - alpha}};
  obs.obs_labels = {"left", "right"};
  obs.table = {0, 1, 1, 0};  // hit reports the true door, miss flips it
  p.obs = std::make_shared<TabularObsModel>(std::move(obs));
  return p;
}

TabularPolicy follow_obs_policy() {
  const double ninf = -std::numeric_limits<double>::infinity();
  TabularPolicy p = uniform_policy(2);
  p.set_logits("1|left", {0.0, ninf});
  p.set_logits("1|right", {ninf, 0.0});
  return p;
}

}  // namespace cfrl
