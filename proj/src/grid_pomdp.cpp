#include "cfrl/grid_pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace cfrl {

namespace {

double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

// Next k-combination of cell indices in lexicographic order.
bool advance_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

int32_t GridSpace::find(const std::string& label) const {
  const auto it = index.find(label);
  if (it == index.end()) throw InputError("layout is not in the enumerated space");
  return it->second;
}

GridLevel GridSpace::level(int32_t s) const {
  return level_from_label(labels.at(s), cfg.width, cfg.height);
}

GridSpace enumerate_space(const GridPushConfig& cfg, size_t max_states) {
  cfg.validate();
  std::vector<int> interior;
  for (int r = 1; r < cfg.height - 1; ++r)
    for (int c = 1; c < cfg.width - 1; ++c) interior.push_back(r * cfg.width + c);
  const int ni = static_cast<int>(interior.size());
  const double count =
      choose(ni, cfg.n_boxes) * choose(ni, cfg.n_boxes) * (ni - cfg.n_boxes);
  if (count > static_cast<double>(max_states))
    throw CapacityError("the scenario space has " + std::to_string(count) +
                        " layouts, above the cap of " + std::to_string(max_states) +
                        "; exact adapters need the desk preset");

  std::string blank(static_cast<size_t>(cfg.width) * cfg.height, kCellWall);
  for (int c : interior) blank[c] = kCellEmpty;

  GridSpace space;
  space.cfg = cfg;
  std::vector<int> targets(cfg.n_boxes), boxes(cfg.n_boxes);
  for (int i = 0; i < cfg.n_boxes; ++i) targets[i] = boxes[i] = i;
  std::vector<int> t_idx = targets;
  do {
    std::vector<int> b_idx(cfg.n_boxes);
    for (int i = 0; i < cfg.n_boxes; ++i) b_idx[i] = i;
    bool more_boxes = true;
    while (more_boxes) {
      for (int agent = 0; agent < ni; ++agent) {
        if (std::find(b_idx.begin(), b_idx.end(), agent) != b_idx.end()) continue;
        std::string cells = blank;
        for (int t : t_idx) cells[interior[t]] = kCellTarget;
        for (int b : b_idx)
          cells[interior[b]] =
              cells[interior[b]] == kCellTarget ? kCellBoxOnTarget : kCellBox;
        cells[interior[agent]] = cells[interior[agent]] == kCellTarget
                                     ? kCellAgentOnTarget
                                     : kCellAgent;
        space.labels.push_back(std::move(cells));
      }
      more_boxes = cfg.n_boxes > 0 && advance_combination(b_idx, ni);
    }
  } while (cfg.n_boxes > 0 && advance_combination(t_idx, ni));

  std::sort(space.labels.begin(), space.labels.end());
  for (int32_t i = 0; i < space.num_states(); ++i) space.index[space.labels[i]] = i;
  return space;
}

std::vector<double> generator_prior(const GridSpace& space) {
  const int n = space.num_states();
  std::vector<char> is_solved(n, 0);
  std::vector<int32_t> solved_states;
  for (int32_t s = 0; s < n; ++s) {
    if (space.labels[s].find(kCellBox) == std::string::npos) {
      is_solved[s] = 1;
      solved_states.push_back(s);
    }
  }

  std::vector<double> cur(n, 0.0);
  for (int32_t s : solved_states) cur[s] = 1.0 / solved_states.size();
  if (space.cfg.n_boxes == 0) return cur;  // placement is the whole draw

  // Cache each state's backward options once; the kernel is reused 3w times.
  std::vector<std::vector<int32_t>> options(n);
  for (int32_t s = 0; s < n; ++s)
    for (const GridLevel& next : reverse_moves(space.level(s)))
      options[s].push_back(space.find(next.cells));

  const int k_max = 3 * space.cfg.width;
  const double k_weight = 1.0 / (k_max - 2);  // k uniform over {3..3w}
  std::vector<double> total(n, 0.0), next(n);
  for (int k = 1; k <= k_max; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int32_t s = 0; s < n; ++s) {
      if (cur[s] == 0.0) continue;
      if (options[s].empty())
        throw ConstructionError("backward walk hit a stuck state; prior undefined");
      const double w = cur[s] / options[s].size();
      for (int32_t o : options[s]) next[o] += w;
    }
    cur.swap(next);
    if (k >= 3)
      for (int32_t s = 0; s < n; ++s) total[s] += k_weight * cur[s];
  }

  double kept = 0.0;
  for (int32_t s = 0; s < n; ++s) {
    if (is_solved[s]) total[s] = 0.0;  // the generator redraws solved results
    kept += total[s];
  }
  if (kept <= 0.0)
    throw ConstructionError("backward walk never leaves the solved set");
  for (double& p : total) p /= kept;
  return total;
}

std::vector<int32_t> degenerate_twins(const GridSpace& space) {
  const auto& cfg = space.cfg;
  const int corners[4] = {cfg.width + 1, 2 * cfg.width - 2,
                          (cfg.height - 2) * cfg.width + 1,
                          (cfg.height - 1) * cfg.width - 2};
  std::vector<int32_t> twins(space.num_states());
  for (int32_t s = 0; s < space.num_states(); ++s) {
    const std::string& cells = space.labels[s];
    if (cfg.n_boxes == 0) {
      twins[s] = s;
      continue;
    }
    const auto box = cells.find_first_of("B*");
    const bool already_dead =
        cells[box] == kCellBox &&
        std::find(std::begin(corners), std::end(corners), static_cast<int>(box)) !=
            std::end(corners);
    if (already_dead) {
      twins[s] = s;
      continue;
    }
    int32_t twin = -1;
    for (int c : corners) {
      if (cells[c] != kCellEmpty) continue;  // target, box or agent in the way
      std::string moved = cells;
      moved[box] = cells[box] == kCellBoxOnTarget ? kCellTarget : kCellEmpty;
      moved[c] = kCellBox;
      twin = space.find(moved);
      break;
    }
    if (twin < 0)
      throw ConstructionError("no free corner to break solvability with");
    twins[s] = twin;
  }
  return twins;
}

GridObsModel::GridObsModel(const GridPushConfig& cfg,
                           std::vector<std::string> state_labels)
    : cfg_(cfg), labels_(std::move(state_labels)) {
  cfg_.validate();
  if (labels_.empty()) throw ConstructionError("observation model with no states");
  agent_.reserve(labels_.size());
  for (const auto& label : labels_)
    agent_.push_back(level_from_label(label, cfg_.width, cfg_.height).agent_cell());
}

bool GridObsModel::in_window(int32_t state, int cell) const {
  const int a = agent_[state];
  const int dr = std::abs(a / cfg_.width - cell / cfg_.width);
  const int dc = std::abs(a % cfg_.width - cell % cfg_.width);
  return dr <= cfg_.window_radius && dc <= cfg_.window_radius;
}

ObsNoise GridObsModel::sample_noise(Rng& rng) const {
  ObsNoise noise(labels_[0].size());
  for (auto& bit : noise) bit = rng.bernoulli(cfg_.p_mask);
  return noise;
}

std::string GridObsModel::apply(int32_t state, const ObsNoise& noise) const {
  std::string out = labels_.at(state);
  if (noise.size() != out.size()) throw InputError("mask vector has the wrong size");
  for (size_t c = 0; c < out.size(); ++c)
    if (noise[c] && !in_window(state, static_cast<int>(c))) out[c] = kCellEmpty;
  return out;
}

double GridObsModel::loglik(int32_t state, const std::string& obs) const {
  const std::string& truth = labels_.at(state);
  if (obs.size() != truth.size()) return -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (size_t c = 0; c < truth.size(); ++c) {
    if (in_window(state, static_cast<int>(c)) || truth[c] == kCellEmpty) {
      if (obs[c] != truth[c]) return -std::numeric_limits<double>::infinity();
    } else if (obs[c] == truth[c]) {
      ll += std::log(1.0 - cfg_.p_mask);
    } else if (obs[c] == kCellEmpty) {
      ll += std::log(cfg_.p_mask);
    } else {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return ll;
}

ObsNoise GridObsModel::posterior_noise(int32_t state, const std::string& obs,
                                       Rng& rng) const {
  const std::string& truth = labels_.at(state);
  if (obs.size() != truth.size())
    throw ContradictionError("observation has the wrong cell count");
  ObsNoise noise(truth.size());
  for (size_t c = 0; c < truth.size(); ++c) {
    const bool window = in_window(state, static_cast<int>(c));
    if (window || truth[c] == kCellEmpty) {
      if (obs[c] != truth[c])
        throw ContradictionError("observation contradicts the state");
      noise[c] = rng.bernoulli(cfg_.p_mask);  // mask bit is unobservable here
    } else if (obs[c] == truth[c]) {
      if (cfg_.p_mask >= 1.0)
        throw ContradictionError("unmasked reading under certain masking");
      noise[c] = 0;
    } else if (obs[c] == kCellEmpty) {
      if (cfg_.p_mask <= 0.0)
        throw ContradictionError("masked reading under zero masking");
      noise[c] = 1;
    } else {
      throw ContradictionError("observation contradicts the state");
    }
  }
  return noise;
}

PomdpSpec as_pomdp(const GridPushConfig& cfg, size_t max_states) {
  const GridSpace space = enumerate_space(cfg, max_states);
  PomdpSpec p;
  p.state_labels = space.labels;
  p.action_labels.assign(kGridActionLabels, kGridActionLabels + kNumGridActions);
  p.horizon = cfg.horizon;
  p.init = {"u_s", space.labels, generator_prior(space)};
  p.trans_noise = {"u_t", {"-"}, {1.0}};  // dynamics are deterministic
  const int n = space.num_states();
  p.trans.resize(static_cast<size_t>(n) * kNumGridActions);
  p.reward.resize(static_cast<size_t>(n) * kNumGridActions);
  for (int32_t s = 0; s < n; ++s) {
    const GridLevel level = space.level(s);
    for (int a = 0; a < kNumGridActions; ++a) {
      const auto [next, reward] =
          step(level, static_cast<GridAction>(a), cfg.rewards);
      p.trans[static_cast<size_t>(s) * kNumGridActions + a] = space.find(next.cells);
      p.reward[static_cast<size_t>(s) * kNumGridActions + a] = reward;
    }
  }
  p.reward_min = *std::min_element(p.reward.begin(), p.reward.end());
  p.reward_max = *std::max_element(p.reward.begin(), p.reward.end());
  p.obs = std::make_shared<GridObsModel>(cfg, space.labels);
  p.validate();
  return p;
}

Featurizer grid_summary_featurizer(int k) {
  Featurizer f;
  f.k = k;
  f.obs_map = [](const std::string& obs) { return grid_obs_summary(obs); };
  return f;
}

}  // namespace cfrl
