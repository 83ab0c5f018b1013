#pragma once

// Config-driven experiment commands shared by the CLI and the tests: build
// the environment and its (possibly prior-corrupted) model, run one command,
// write its artifacts plus a run manifest. Every artifact byte is a pure
// function of (config text, seed); worker count and timestamps never reach
// the data files.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfrl/config.hpp"
#include "cfrl/grid.hpp"
#include "cfrl/pomdp.hpp"

namespace cfrl {

// Command-line overrides; a flag beats the config value for the same knob.
struct RunOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

// True environment plus the model the estimators and planners see. An
// uncorrupted model aliases the environment tables; corruption only bends
// the scenario prior. `digest` canonically describes the true environment
// and its hash is stamped into replay buffers.
struct BuiltEnv {
  PomdpSpec env;
  PomdpSpec model;
  double corruption = 0.0;
  bool is_grid = false;
  GridPushConfig grid_cfg;
  std::string digest;

  std::string hash() const;
};

BuiltEnv build_env(const Config& cfg);

struct RunResult {
  std::string out_dir;
  std::vector<std::string> outputs;  // relative to out_dir, creation order
  bool verify_pass = true;           // false only for a failing `verify`
  std::string report_text;           // verify's human-readable report
};

RunResult cmd_gen_data(const Config& cfg, const RunOverrides& ov = {});
RunResult cmd_eval(const Config& cfg, const RunOverrides& ov = {});
RunResult cmd_search(const Config& cfg, const RunOverrides& ov = {});
RunResult cmd_verify(const Config& cfg, const RunOverrides& ov = {});

// Dispatch by CLI command name: gen-data | eval | search | verify.
RunResult run_command(const std::string& command, const Config& cfg,
                      const RunOverrides& ov = {});

}  // namespace cfrl
