#include "cfrl/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cfrl/grid_pomdp.hpp"
#include "cfrl/invariants.hpp"
#include "cfrl/offpolicy.hpp"
#include "cfrl/policy_search.hpp"
#include "cfrl/pomdp_text.hpp"
#include "cfrl/text.hpp"
#include "cfrl/two_door.hpp"

namespace fs = std::filesystem;

namespace cfrl {

namespace {

const std::set<std::string> kRunKeys = {"run.seed", "run.out", "run.workers"};
const std::set<std::string> kEnvKeys = {"env.kind", "env.alpha", "env.preset",
                                        "env.horizon", "env.p_mask"};
const std::set<std::string> kModelKeys = {"model.corruption"};
const std::set<std::string> kDataKeys = {"data.episodes", "data.behavior",
                                         "data.output"};
const std::set<std::string> kEvalKeys = {
    "eval.estimator", "eval.policy", "eval.feat_k", "eval.buffer",
    "eval.rollouts",  "eval.n_cf",   "eval.t",      "eval.t_list",
    "eval.output"};
const std::set<std::string> kSearchKeys = {
    "search.algo",          "search.iterations",
    "search.rollouts",      "search.n_cf",
    "search.refresh",       "search.eta",
    "search.kappa",         "search.tau",
    "search.eval_rollouts", "search.feat_k",
    "search.metrics",       "search.checkpoint_period",
    "search.checkpoint_prefix"};
const std::set<std::string> kVerifyKeys = {"verify.random_scms",
                                           "verify.self_test_fault",
                                           "verify.output"};

std::set<std::string> merge(std::initializer_list<const std::set<std::string>*> sets) {
  std::set<std::string> out;
  for (const auto* s : sets) out.insert(s->begin(), s->end());
  return out;
}

struct RunContext {
  uint64_t seed = 0;
  int workers = 1;
  fs::path out;
  RunManifest manifest;
};

RunContext begin_run(const Config& cfg, const RunOverrides& ov,
                     const std::string& command) {
  RunContext ctx;
  if (ov.seed)
    ctx.seed = *ov.seed;
  else if (cfg.has("run.seed"))
    ctx.seed = cfg.get_u64("run.seed");
  else
    throw ConfigError("a master seed is required: set [run] seed or pass --seed");
  ctx.workers = ov.workers ? *ov.workers
                           : static_cast<int>(cfg.get_int("run.workers", 1));
  if (ctx.workers < 1)
    throw ConfigError("worker count must be at least one",
                      ov.workers ? -1 : cfg.line_of("run.workers"));
  ctx.out = ov.out_dir ? *ov.out_dir : cfg.get_string("run.out", ".");
  fs::create_directories(ctx.out);

  ctx.manifest.command = command;
  ctx.manifest.config_hash = hash_hex(cfg.raw_text());
  ctx.manifest.seed = ctx.seed;
  ctx.manifest.started_at = utc_timestamp();
  write_manifest(ctx.manifest, (ctx.out / "manifest.json").string());
  return ctx;
}

// Resolves a relative artifact path inside the output directory, creating
// intermediate directories.
std::string out_path(const RunContext& ctx, const std::string& rel) {
  const fs::path p = ctx.out / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

RunResult finish_run(RunContext& ctx, std::vector<std::string> outputs) {
  ctx.manifest.outputs = outputs;
  ctx.manifest.finished_at = utc_timestamp();
  write_manifest(ctx.manifest, (ctx.out / "manifest.json").string());
  RunResult res;
  res.out_dir = ctx.out.string();
  res.outputs = std::move(outputs);
  return res;
}

TabularPolicy resolve_policy(const Config& cfg, const std::string& key,
                             const BuiltEnv& b, int feat_k) {
  const std::string value = cfg.get_string(key, "uniform");
  if (value == "uniform")
    return uniform_policy(b.env.num_actions(), Featurizer{feat_k, false});
  if (value == "follow_obs") {
    if (b.is_grid)
      throw ConfigError("follow_obs is a two-door policy", cfg.line_of(key));
    return follow_obs_policy();
  }
  if (!fs::exists(value))
    throw ConfigError("referenced file does not exist: " + value, cfg.line_of(key));
  TabularPolicy p = load_policy(value);
  if (p.num_actions != b.env.num_actions())
    throw ConfigError("policy at " + value + " has " +
                          std::to_string(p.num_actions) +
                          " actions but the environment has " +
                          std::to_string(b.env.num_actions()),
                      cfg.line_of(key));
  return p;
}

ReplayBuffer load_buffer(const Config& cfg, const std::string& key,
                         const BuiltEnv& b) {
  const std::string path = cfg.get_string(key);
  if (!fs::exists(path))
    throw ConfigError("referenced file does not exist: " + path, cfg.line_of(key));
  ReplayBuffer buf = load_replay(path);
  if (buf.env_hash != b.hash())
    throw InputError("replay buffer at " + path +
                     " was collected on a different environment (hash " +
                     buf.env_hash + ", expected " + b.hash() + ")");
  return buf;
}

}  // namespace

std::string BuiltEnv::hash() const { return hash_hex(digest); }

BuiltEnv build_env(const Config& cfg) {
  BuiltEnv b;
  const std::string kind = cfg.get_string("env.kind");
  if (kind == "two_door") {
    const double alpha = cfg.get_double("env.alpha", 0.8);
    try {
      b.env = two_door(alpha);
    } catch (const Error& e) {
      throw ConfigError(e.what(), cfg.line_of("env.alpha"));
    }
    b.digest = "two_door alpha=" + format_double(alpha);
  } else if (kind == "grid") {
    const std::string preset = cfg.get_string("env.preset");
    GridPushConfig gc;
    if (preset == "desk")
      gc = desk_config();
    else if (preset == "paper")
      gc = paper_config();
    else
      throw ConfigError("unknown grid preset '" + preset + "'",
                        cfg.line_of("env.preset"));
    if (cfg.has("env.horizon"))
      gc.horizon = static_cast<int>(cfg.get_int("env.horizon"));
    if (cfg.has("env.p_mask")) gc.p_mask = cfg.get_double("env.p_mask");
    try {
      gc.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what(), cfg.line_of("env.preset"));
    }
    b.is_grid = true;
    b.grid_cfg = gc;
    b.env = as_pomdp(gc);
    b.digest = "grid w=" + std::to_string(gc.width) +
               " h=" + std::to_string(gc.height) +
               " boxes=" + std::to_string(gc.n_boxes) +
               " horizon=" + std::to_string(gc.horizon) +
               " p_mask=" + format_double(gc.p_mask) +
               " radius=" + std::to_string(gc.window_radius) +
               " push_on=" + format_double(gc.rewards.push_on) +
               " push_off=" + format_double(gc.rewards.push_off) +
               " solve=" + format_double(gc.rewards.solve);
  } else {
    throw ConfigError("unknown env kind '" + kind + "'", cfg.line_of("env.kind"));
  }

  b.corruption = cfg.get_double("model.corruption", 0.0);
  if (b.corruption == 0.0) {
    b.model = b.env;
  } else if (!b.is_grid) {
    throw ConfigError("prior corruption needs the grid environment",
                      cfg.line_of("model.corruption"));
  } else {
    try {
      const GridSpace space = enumerate_space(b.grid_cfg);
      b.model = corrupt_prior(b.env, b.corruption, degenerate_twins(space)).model;
    } catch (const InputError& e) {
      throw ConfigError(e.what(), cfg.line_of("model.corruption"));
    }
  }
  return b;
}

RunResult cmd_gen_data(const Config& cfg, const RunOverrides& ov) {
  cfg.require_known(merge({&kRunKeys, &kEnvKeys, &kDataKeys}));
  RunContext ctx = begin_run(cfg, ov, "gen-data");
  const BuiltEnv b = build_env(cfg);
  const int n = static_cast<int>(cfg.get_int("data.episodes"));
  if (n < 0)
    throw ConfigError("episode count must be nonnegative",
                      cfg.line_of("data.episodes"));
  const std::string behavior_id = cfg.get_string("data.behavior", "uniform");
  const TabularPolicy mu = resolve_policy(cfg, "data.behavior", b, 1);
  const PolicySelector sel(mu);
  const ReplayBuffer buffer =
      collect_episodes(b.env, sel, behavior_id, n, ctx.seed, b.hash());
  const std::string rel = cfg.get_string("data.output", "replay.jsonl");
  save_replay(buffer, out_path(ctx, rel));
  return finish_run(ctx, {rel});
}

RunResult cmd_eval(const Config& cfg, const RunOverrides& ov) {
  cfg.require_known(merge({&kRunKeys, &kEnvKeys, &kModelKeys, &kEvalKeys}));
  RunContext ctx = begin_run(cfg, ov, "eval");
  const BuiltEnv b = build_env(cfg);
  const std::string est = cfg.get_string("eval.estimator");
  const int feat_k = static_cast<int>(cfg.get_int("eval.feat_k", 1));
  const TabularPolicy pi = resolve_policy(cfg, "eval.policy", b, feat_k);
  const PolicySelector sel(pi);
  const int n_cf = static_cast<int>(cfg.get_int("eval.n_cf", 1));

  std::vector<EvalReport> rows;
  if (est == "is" || est == "is_ordinary") {
    rows.push_back(is_evaluate(load_buffer(cfg, "eval.buffer", b), pi,
                               est == "is" ? IsMode::kSelfNormalized
                                           : IsMode::kOrdinary));
  } else if (est == "mb") {
    rows.push_back(mb_evaluate(b.model, sel,
                               static_cast<int>(cfg.get_int("eval.rollouts", 10000)),
                               ctx.seed, ctx.workers));
  } else if (est == "cf") {
    rows.push_back(cf_evaluate(b.model, sel, load_buffer(cfg, "eval.buffer", b),
                               static_cast<int>(cfg.get_int("eval.t")), n_cf,
                               ctx.seed, ctx.workers));
  } else if (est == "sweep") {
    rows = sweep_conditioning(b.model, sel, load_buffer(cfg, "eval.buffer", b),
                              cfg.get_int_list("eval.t_list"), n_cf, ctx.seed,
                              ctx.workers);
  } else {
    throw ConfigError("unknown estimator '" + est + "'",
                      cfg.line_of("eval.estimator"));
  }
  const std::string rel = cfg.get_string("eval.output", "eval.csv");
  write_eval_csv(out_path(ctx, rel), rows);
  return finish_run(ctx, {rel});
}

RunResult cmd_search(const Config& cfg, const RunOverrides& ov) {
  cfg.require_known(merge({&kRunKeys, &kEnvKeys, &kModelKeys, &kSearchKeys}));
  RunContext ctx = begin_run(cfg, ov, "search");
  const BuiltEnv b = build_env(cfg);

  const std::string algo = cfg.get_string("search.algo");
  SearchResult (*runner)(const PomdpSpec&, const PomdpSpec&, const ActionSelector&,
                         const TabularPolicy&, const SearchConfig&,
                         const CheckpointFn&) = nullptr;
  if (algo == "mbps")
    runner = &mb_ps;
  else if (algo == "cfgps")
    runner = &cf_gps;
  else if (algo == "gpslike")
    runner = &gps_like;
  else
    throw ConfigError("unknown algo '" + algo + "'", cfg.line_of("search.algo"));

  SearchConfig sc;
  sc.iterations = static_cast<int>(cfg.get_int("search.iterations"));
  sc.rollouts = static_cast<int>(cfg.get_int("search.rollouts"));
  sc.n_cf = static_cast<int>(cfg.get_int("search.n_cf", 10));
  sc.refresh_period = static_cast<int>(cfg.get_int("search.refresh", 5));
  sc.eta = cfg.get_double("search.eta", 1.0);
  sc.kappa = cfg.get_double("search.kappa", 0.1);
  sc.beta.tau = cfg.get_double("search.tau", 500.0);
  sc.eval_rollouts = static_cast<int>(cfg.get_int("search.eval_rollouts", 1000));
  sc.workers = ctx.workers;
  sc.seed = ctx.seed;
  try {
    sc.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  const int feat_k = static_cast<int>(cfg.get_int("search.feat_k", 1));
  const TabularPolicy pi0 =
      uniform_policy(b.env.num_actions(), Featurizer{feat_k, false});
  const FullInfoPlan plan = plan_full_info(b.model);
  const ExpertSelector expert(plan, b.model.horizon, b.model.num_actions());

  const int period = static_cast<int>(cfg.get_int("search.checkpoint_period", 0));
  if (period < 0)
    throw ConfigError("checkpoint period must be nonnegative",
                      cfg.line_of("search.checkpoint_period"));
  const std::string prefix = cfg.get_string("search.checkpoint_prefix", "policy");

  std::vector<std::string> outputs;
  const std::string init_rel = prefix + "_init.txt";
  save_policy(pi0, out_path(ctx, init_rel));
  outputs.push_back(init_rel);

  const CheckpointFn checkpoint = [&](int iter, const TabularPolicy& p) {
    if (period == 0 || (iter + 1) % period != 0) return;
    char name[64];
    std::snprintf(name, sizeof(name), "_iter%04d.txt", iter + 1);
    const std::string rel = prefix + name;
    save_policy(p, out_path(ctx, rel));
    outputs.push_back(rel);
  };

  const SearchResult res = runner(b.model, b.env, expert, pi0, sc, checkpoint);

  const std::string final_rel = prefix + "_final.txt";
  save_policy(res.policy, out_path(ctx, final_rel));
  outputs.push_back(final_rel);
  const std::string metrics_rel = cfg.get_string("search.metrics", "metrics.csv");
  write_metrics_csv(out_path(ctx, metrics_rel), res.metrics);
  outputs.push_back(metrics_rel);
  return finish_run(ctx, std::move(outputs));
}

RunResult cmd_verify(const Config& cfg, const RunOverrides& ov) {
  cfg.require_known(merge({&kRunKeys, &kVerifyKeys}));
  RunContext ctx = begin_run(cfg, ov, "verify");
  const int n_random = static_cast<int>(cfg.get_int("verify.random_scms", 20));
  if (n_random < 0)
    throw ConfigError("random model count must be nonnegative",
                      cfg.line_of("verify.random_scms"));
  const std::string fault = cfg.get_string("verify.self_test_fault", "none");
  if (fault != "none" && fault != "mechanism_table")
    throw ConfigError("unknown self-test fault '" + fault + "'",
                      cfg.line_of("verify.self_test_fault"));

  const VerifyReport report = verify_suite(ctx.seed, n_random, fault);
  const std::string rel = cfg.get_string("verify.output", "verify.txt");
  {
    std::ofstream out(out_path(ctx, rel), std::ios::binary);
    if (!out) throw InputError("cannot write report: " + rel);
    out << report.to_text();
  }
  RunResult res = finish_run(ctx, {rel});
  res.verify_pass = report.all_pass();
  res.report_text = report.to_text();
  return res;
}

RunResult run_command(const std::string& command, const Config& cfg,
                      const RunOverrides& ov) {
  if (command == "gen-data") return cmd_gen_data(cfg, ov);
  if (command == "eval") return cmd_eval(cfg, ov);
  if (command == "search") return cmd_search(cfg, ov);
  if (command == "verify") return cmd_verify(cfg, ov);
  throw InputError("unknown command '" + command + "'");
}

}  // namespace cfrl
