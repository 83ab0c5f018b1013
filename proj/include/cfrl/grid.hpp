#pragma once

// Partially observed box-pushing grid. Levels are value types over a flat
// cell string; dynamics are pure functions. The generator plays the game
// backwards from a solved layout, which makes every emitted level solvable
// by construction; solvable_check is the independent audit of that claim.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfrl/errors.hpp"
#include "cfrl/rng.hpp"

namespace cfrl {

// Cell alphabet. A target never moves; boxes and the agent ride on top of it.
constexpr char kCellWall = '#';
constexpr char kCellEmpty = '.';
constexpr char kCellBox = 'B';
constexpr char kCellTarget = 'T';
constexpr char kCellAgent = 'A';
constexpr char kCellBoxOnTarget = '*';
constexpr char kCellAgentOnTarget = '+';

bool cell_is_wall(char c);
bool cell_has_box(char c);
bool cell_has_agent(char c);
bool cell_has_target(char c);
bool cell_valid(char c);

struct GridRewards {
  double push_on = 1.0;    // box lands on a target
  double push_off = -1.0;  // box leaves a target
  double solve = 10.0;     // last box lands, paid once
};

struct GridPushConfig {
  int width = 5;
  int height = 5;
  int n_boxes = 1;
  int horizon = 12;
  double p_mask = 0.7;    // per-cell chance of reading "empty" outside the window
  int window_radius = 1;  // Chebyshev radius of the exact window around the agent
  GridRewards rewards;

  int interior_cells() const { return (width - 2) * (height - 2); }
  void validate() const;
};

// Small preset whose joint scenario space stays exactly enumerable.
GridPushConfig desk_config();
// Large preset for simulation only; exact-inference adapters reject it.
GridPushConfig paper_config();

enum class GridAction : int32_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoop = 4 };
inline constexpr int kNumGridActions = 5;
extern const char* const kGridActionLabels[kNumGridActions];

struct GridLevel {
  int width = 0;
  int height = 0;
  std::string cells;  // row-major, width*height chars

  char at(int r, int c) const { return cells[static_cast<size_t>(r) * width + c]; }
  int agent_cell() const;  // flat index; InputError when absent
  bool solved() const;     // no box off a target
  bool pre_solved() const; // no boxes at all, so the solve bonus is unreachable
  void validate() const;   // alphabet, one agent, #boxes == #targets, border walls

  friend bool operator==(const GridLevel&, const GridLevel&) = default;
};

// Deterministic dynamics: the agent moves unless blocked and pushes a box
// iff the square behind it is free; illegal moves are no-ops. Solved levels
// are absorbing with zero reward. Never throws on a valid level.
std::pair<GridLevel, double> step(const GridLevel& level, GridAction action,
                                  const GridRewards& rewards);

// Noisy rendering: one mask draw per cell in row-major order; cells outside
// the reveal window read "empty" when masked, window cells are exact.
// Returns the flat cell string of the observation.
std::string observe(const GridLevel& level, const GridPushConfig& cfg, Rng& rng);

// Compact re-encoding of an observation string: the agent cell plus the
// visible box and target cells ('?' when none is visible). Collapses the
// exponentially many mask patterns that differ only in which walls or empty
// cells are hidden, which raw-string policy keys cannot afford. Pure
// function of the observation; no true-state access.
std::string grid_obs_summary(const std::string& obs);

// Exhaustive reachability over (box set, agent region) configurations.
// Throws CapacityError when the search would visit more than max_configs.
bool solvable_check(const GridLevel& level, size_t max_configs = 5000000);

// Reverse play: uniform solved placement, then k ~ U[3, 3*width] uniform
// legal backward moves, rejected until the result is not already solved.
// Throws GenerationError after 1000 failed attempts.
GridLevel generate_level(const GridPushConfig& cfg, Rng& rng);

// Every level reachable from `level` by one backward move (a reversed walk
// or a reversed push), in a fixed order. Used by both the generator and the
// exact enumeration of its output distribution.
std::vector<GridLevel> reverse_moves(const GridLevel& level);

// Text form: one row per line. Round trips bit-exactly.
GridLevel parse_level(const std::string& text);
std::string print_level(const GridLevel& level);

// Rebuild a level from the flat cell string used as a state label.
GridLevel level_from_label(const std::string& label, int width, int height);

}  // namespace cfrl
