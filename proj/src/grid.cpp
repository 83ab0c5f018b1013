#include "cfrl/grid.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_set>

namespace cfrl {

namespace {

// Row deltas per action/direction, order up, down, left, right.
constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

char remove_agent(char c) { return c == kCellAgentOnTarget ? kCellTarget : kCellEmpty; }
char add_agent(char c) { return c == kCellTarget ? kCellAgentOnTarget : kCellAgent; }
char remove_box(char c) { return c == kCellBoxOnTarget ? kCellTarget : kCellEmpty; }
char add_box(char c) { return c == kCellTarget ? kCellBoxOnTarget : kCellBox; }

// A cell the agent or a box may enter: in bounds and holding nothing solid.
bool enterable(const GridLevel& l, int r, int c) {
  if (r < 0 || r >= l.height || c < 0 || c >= l.width) return false;
  const char x = l.at(r, c);
  return x == kCellEmpty || x == kCellTarget;
}

}  // namespace

bool cell_is_wall(char c) { return c == kCellWall; }
bool cell_has_box(char c) { return c == kCellBox || c == kCellBoxOnTarget; }
bool cell_has_agent(char c) { return c == kCellAgent || c == kCellAgentOnTarget; }
bool cell_has_target(char c) {
  return c == kCellTarget || c == kCellBoxOnTarget || c == kCellAgentOnTarget;
}
bool cell_valid(char c) {
  return c == kCellWall || c == kCellEmpty || c == kCellBox || c == kCellTarget ||
         c == kCellAgent || c == kCellBoxOnTarget || c == kCellAgentOnTarget;
}

void GridPushConfig::validate() const {
  if (width < 3 || height < 3)
    throw InputError("grid needs at least one interior cell inside the walls");
  if (n_boxes < 0) throw InputError("negative box count");
  if (interior_cells() < n_boxes + 1)
    throw InputError("interior too small for the boxes plus the agent");
  if (horizon < 1) throw InputError("horizon must be at least 1");
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw InputError("p_mask must lie in [0, 1]");
  if (window_radius < 0) throw InputError("negative window radius");
}

GridPushConfig desk_config() {
  GridPushConfig cfg;
  cfg.width = 5;
  cfg.height = 5;
  cfg.n_boxes = 1;
  cfg.horizon = 12;
  cfg.p_mask = 0.7;
  cfg.window_radius = 1;
  return cfg;
}

GridPushConfig paper_config() {
  GridPushConfig cfg;
  cfg.width = 10;
  cfg.height = 10;
  cfg.n_boxes = 3;
  cfg.horizon = 50;
  cfg.p_mask = 0.9;
  cfg.window_radius = 1;
  return cfg;
}

const char* const kGridActionLabels[kNumGridActions] = {"up", "down", "left", "right",
                                                        "noop"};

int GridLevel::agent_cell() const {
  for (size_t i = 0; i < cells.size(); ++i)
    if (cell_has_agent(cells[i])) return static_cast<int>(i);
  throw InputError("level has no agent");
}

bool GridLevel::solved() const {
  return cells.find(kCellBox) == std::string::npos;
}

bool GridLevel::pre_solved() const {
  return solved() && cells.find(kCellBoxOnTarget) == std::string::npos;
}

void GridLevel::validate() const {
  if (width < 3 || height < 3) throw InputError("level too small for walls");
  if (cells.size() != static_cast<size_t>(width) * height)
    throw InputError("cell string does not match the level dimensions");
  int agents = 0, boxes = 0, targets = 0;
  for (char c : cells) {
    if (!cell_valid(c)) throw InputError(std::string("unknown cell '") + c + "'");
    agents += cell_has_agent(c);
    boxes += cell_has_box(c);
    targets += cell_has_target(c);
  }
  if (agents != 1) throw InputError("level must contain exactly one agent");
  if (boxes != targets) throw InputError("box and target counts differ");
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if ((r == 0 || r == height - 1 || c == 0 || c == width - 1) &&
          at(r, c) != kCellWall)
        throw InputError("border cells must be walls");
}

std::pair<GridLevel, double> step(const GridLevel& level, GridAction action,
                                  const GridRewards& rewards) {
  if (level.solved()) return {level, 0.0};
  if (action == GridAction::kNoop) return {level, 0.0};
  const int d = static_cast<int>(action);
  const int p = level.agent_cell();
  const int pr = p / level.width, pc = p % level.width;
  const int qr = pr + kDr[d], qc = pc + kDc[d];
  const char dest = level.at(qr, qc);  // border walls keep q in bounds
  GridLevel next = level;
  auto& cells = next.cells;
  const auto q = static_cast<size_t>(qr) * level.width + qc;
  if (dest == kCellEmpty || dest == kCellTarget) {
    cells[p] = remove_agent(cells[p]);
    cells[q] = add_agent(cells[q]);
    return {next, 0.0};
  }
  if (!cell_has_box(dest)) return {next, 0.0};  // wall
  const int br = qr + kDr[d], bc = qc + kDc[d];
  if (!enterable(level, br, bc)) return {next, 0.0};  // box blocked
  const auto b = static_cast<size_t>(br) * level.width + bc;
  double reward = 0.0;
  if (cells[b] == kCellTarget) reward += rewards.push_on;
  if (cells[q] == kCellBoxOnTarget) reward += rewards.push_off;
  cells[b] = add_box(cells[b]);
  cells[q] = remove_box(cells[q]);
  cells[p] = remove_agent(cells[p]);
  cells[q] = add_agent(cells[q]);
  if (next.solved()) reward += rewards.solve;
  return {next, reward};
}

std::string observe(const GridLevel& level, const GridPushConfig& cfg, Rng& rng) {
  const int a = level.agent_cell();
  const int ar = a / level.width, ac = a % level.width;
  std::string out = level.cells;
  for (int r = 0; r < level.height; ++r)
    for (int c = 0; c < level.width; ++c) {
      const bool masked = rng.bernoulli(cfg.p_mask);  // one draw per cell, always
      const bool in_window = std::abs(r - ar) <= cfg.window_radius &&
                             std::abs(c - ac) <= cfg.window_radius;
      if (masked && !in_window) out[static_cast<size_t>(r) * level.width + c] = kCellEmpty;
    }
  return out;
}

std::string grid_obs_summary(const std::string& obs) {
  std::string a, b, t;
  for (size_t i = 0; i < obs.size(); ++i) {
    const char c = obs[i];
    const std::string idx = std::to_string(i);
    if (cell_has_agent(c)) a += (a.empty() ? "" : ".") + idx;
    if (cell_has_box(c)) b += (b.empty() ? "" : ".") + idx;
    if (cell_has_target(c)) t += (t.empty() ? "" : ".") + idx;
  }
  if (b.empty()) b = "?";
  if (t.empty()) t = "?";
  return "a" + a + "b" + b + "t" + t;
}

namespace {

// Push-reachability search state: sorted box cells plus a canonical agent
// cell (the smallest index reachable without pushing anything).
struct SearchKey {
  std::string bytes;  // box cells then agent representative, one byte each
};

std::vector<int> flood(const std::string& cells, int width, int /*height*/,
                       const std::vector<int>& boxes, int from) {
  std::vector<char> seen(cells.size(), 0);
  std::vector<char> solid(cells.size(), 0);
  for (size_t i = 0; i < cells.size(); ++i) solid[i] = cells[i] == kCellWall;
  for (int b : boxes) solid[b] = 1;
  std::deque<int> queue{from};
  seen[from] = 1;
  std::vector<int> out;
  while (!queue.empty()) {
    const int p = queue.front();
    queue.pop_front();
    out.push_back(p);
    for (int d = 0; d < 4; ++d) {
      const int q = p + kDr[d] * width + kDc[d];
      if (!seen[q] && !solid[q]) {  // border walls bound the fill
        seen[q] = 1;
        queue.push_back(q);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string encode(const std::vector<int>& boxes, int rep) {
  std::string key;
  key.reserve(boxes.size() + 1);
  for (int b : boxes) key.push_back(static_cast<char>(b));
  key.push_back(static_cast<char>(rep));
  return key;
}

}  // namespace

bool solvable_check(const GridLevel& level, size_t max_configs) {
  level.validate();
  std::vector<int> boxes;
  std::vector<char> is_target(level.cells.size(), 0);
  for (size_t i = 0; i < level.cells.size(); ++i) {
    if (cell_has_box(level.cells[i])) boxes.push_back(static_cast<int>(i));
    is_target[i] = cell_has_target(level.cells[i]);
  }
  const auto all_on_target = [&](const std::vector<int>& bs) {
    for (int b : bs)
      if (!is_target[b]) return false;
    return true;
  };
  if (all_on_target(boxes)) return true;

  struct Node {
    std::vector<int> boxes;
    std::vector<int> region;  // agent-reachable cells, sorted
  };
  std::unordered_set<std::string> visited;
  std::deque<Node> queue;
  {
    Node start{boxes, flood(level.cells, level.width, level.height, boxes,
                            level.agent_cell())};
    visited.insert(encode(start.boxes, start.region.front()));
    queue.push_back(std::move(start));
  }
  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    for (size_t i = 0; i < node.boxes.size(); ++i) {
      const int b = node.boxes[i];
      for (int d = 0; d < 4; ++d) {
        const int delta = kDr[d] * level.width + kDc[d];
        const int pusher = b - delta, dest = b + delta;
        if (!std::binary_search(node.region.begin(), node.region.end(), pusher))
          continue;
        if (level.cells[dest] == kCellWall) continue;
        if (std::binary_search(node.boxes.begin(), node.boxes.end(), dest)) continue;
        std::vector<int> next = node.boxes;
        next[i] = dest;
        std::sort(next.begin(), next.end());
        if (all_on_target(next)) return true;
        auto region = flood(level.cells, level.width, level.height, next, b);
        auto key = encode(next, region.front());
        if (!visited.insert(std::move(key)).second) continue;
        if (visited.size() > max_configs)
          throw CapacityError("solvability search exceeded " +
                              std::to_string(max_configs) + " configurations");
        queue.push_back({std::move(next), std::move(region)});
      }
    }
  }
  return false;
}

std::vector<GridLevel> reverse_moves(const GridLevel& level) {
  std::vector<GridLevel> out;
  const int p = level.agent_cell();
  const int pr = p / level.width, pc = p % level.width;
  for (int d = 0; d < 4; ++d) {
    const int qr = pr - kDr[d], qc = pc - kDc[d];  // where the agent came from
    if (!enterable(level, qr, qc)) continue;
    const auto q = static_cast<size_t>(qr) * level.width + qc;
    GridLevel walk = level;
    walk.cells[p] = remove_agent(walk.cells[p]);
    walk.cells[q] = add_agent(walk.cells[q]);
    out.push_back(walk);
    const int fr = pr + kDr[d], fc = pc + kDc[d];  // box the forward push moved
    if (fr < 0 || fr >= level.height || fc < 0 || fc >= level.width) continue;
    const auto f = static_cast<size_t>(fr) * level.width + fc;
    if (!cell_has_box(level.cells[f])) continue;
    GridLevel pull = walk;
    pull.cells[f] = remove_box(pull.cells[f]);
    pull.cells[p] = add_box(pull.cells[p]);
    out.push_back(pull);
  }
  return out;
}

GridLevel generate_level(const GridPushConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<int> interior_cells;
  for (int r = 1; r < cfg.height - 1; ++r)
    for (int c = 1; c < cfg.width - 1; ++c) interior_cells.push_back(r * cfg.width + c);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    // Solved placement: boxes sit on their targets, agent anywhere else.
    GridLevel level;
    level.width = cfg.width;
    level.height = cfg.height;
    level.cells.assign(static_cast<size_t>(cfg.width) * cfg.height, kCellWall);
    for (int c : interior_cells) level.cells[c] = kCellEmpty;
    std::vector<int> free = interior_cells;
    for (int i = 0; i < cfg.n_boxes; ++i) {
      const int j = rng.uniform_int(static_cast<int>(free.size()));
      level.cells[free[j]] = kCellBoxOnTarget;
      free.erase(free.begin() + j);
    }
    level.cells[free[rng.uniform_int(static_cast<int>(free.size()))]] = kCellAgent;
    if (cfg.n_boxes == 0) return level;  // pre-solved by construction

    const int k = 3 + rng.uniform_int(3 * cfg.width - 2);  // uniform in [3, 3*width]
    bool stuck = false;
    for (int i = 0; i < k; ++i) {
      const auto options = reverse_moves(level);
      if (options.empty()) {
        stuck = true;
        break;
      }
      level = options[rng.uniform_int(static_cast<int>(options.size()))];
    }
    if (stuck || level.solved()) continue;  // solved starts carry nothing to do
    return level;
  }
  throw GenerationError("no usable level after 1000 attempts; the config is too tight");
}

GridLevel parse_level(const std::string& text) {
  GridLevel level;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (level.height == 0) level.width = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != level.width)
      throw InputError("ragged level rows");
    level.cells += line;
    ++level.height;
  }
  level.validate();
  return level;
}

std::string print_level(const GridLevel& level) {
  std::string out;
  for (int r = 0; r < level.height; ++r) {
    out.append(level.cells, static_cast<size_t>(r) * level.width,
               static_cast<size_t>(level.width));
    out.push_back('\n');
  }
  return out;
}

GridLevel level_from_label(const std::string& label, int width, int height) {
  GridLevel level;
  level.width = width;
  level.height = height;
  level.cells = label;
  level.validate();
  return level;
}

}  // namespace cfrl
