#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "cfrl/experiment.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 runtime error, 4 verify failure.
// Command-line misuse counts as a config error.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitVerifyFailed = 4;

struct CommandFlags {
  std::string config;
  uint64_t seed = 0;
  int workers = 0;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* sub, CommandFlags& flags) {
  sub->add_option("--config", flags.config, "experiment config file")
      ->required();
  flags.seed_opt =
      sub->add_option("--seed", flags.seed, "master seed (overrides [run] seed)");
  flags.workers_opt = sub->add_option("--workers", flags.workers,
                                      "worker threads (overrides [run] workers)");
  flags.out_opt =
      sub->add_option("--out", flags.out, "output directory (overrides [run] out)");
}

cfrl::RunOverrides to_overrides(const CommandFlags& flags) {
  cfrl::RunOverrides ov;
  if (flags.seed_opt->count() > 0) ov.seed = flags.seed;
  if (flags.workers_opt->count() > 0) ov.workers = flags.workers;
  if (flags.out_opt->count() > 0) ov.out_dir = flags.out;
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual reinforcement learning laboratory"};
  app.require_subcommand(1);

  // One flag block per subcommand; std::map keeps the bound storage stable.
  std::map<std::string, CommandFlags> flags;
  add_common(app.add_subcommand("gen-data", "roll out a behavior policy and "
                                            "write a replay buffer"),
             flags["gen-data"]);
  add_common(app.add_subcommand("eval", "run an off-policy evaluator or the "
                                        "conditioning sweep"),
             flags["eval"]);
  add_common(app.add_subcommand("search", "run a policy-search loop"),
             flags["search"]);
  add_common(app.add_subcommand("verify", "run the invariant suite"),
             flags["verify"]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const CommandFlags& active = flags.at(sub->get_name());
  try {
    const cfrl::RunResult res =
        cfrl::run_command(sub->get_name(), cfrl::Config::load(active.config),
                          to_overrides(active));
    if (!res.report_text.empty()) std::cout << res.report_text;
    for (const std::string& rel : res.outputs)
      std::cout << "wrote " << res.out_dir << "/" << rel << "\n";
    return res.verify_pass ? kExitOk : kExitVerifyFailed;
  } catch (const cfrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
