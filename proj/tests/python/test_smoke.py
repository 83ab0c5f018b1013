import math

import pytest

import cfrl


def chain_scm():
    nodes = [
        cfrl.NodeDef("a", ["0", "1"]),
        cfrl.NodeDef("b", ["0", "1"]),
        cfrl.NodeDef("c", ["0", "1"]),
    ]
    noise = [
        cfrl.NoiseSpec("u_a", ["0", "1"], [0.3, 0.7]),
        cfrl.NoiseSpec("u_b", ["0", "1"], [0.8, 0.2]),
        cfrl.NoiseSpec("u_c", ["0", "1"], [0.9, 0.1]),
    ]
    mechanisms = [
        cfrl.Mechanism("a", [], "u_a", [0, 1]),
        cfrl.Mechanism("b", ["a"], "u_b", [0, 1, 1, 0]),
        cfrl.Mechanism("c", ["b"], "u_c", [0, 1, 1, 0]),
    ]
    return cfrl.Scm(nodes, noise, mechanisms)


def test_chain_interventional_marginal():
    scm = chain_scm()
    do_b1 = cfrl.Intervention([cfrl.constant_mechanism("b", "u_b", 2, 1)])
    dist = cfrl.interventional_marginal(scm, do_b1, ["c"])
    assert dist.prob([1]) == pytest.approx(0.9, abs=1e-12)
    assert dist.total() == pytest.approx(1.0, abs=1e-12)


def test_counterfactual_query_consistency():
    scm = chain_scm()
    obs = cfrl.Observation({"a": "1", "c": "1"})
    dist = cfrl.counterfactual_query(scm, obs, cfrl.Intervention([]), ["c"])
    assert dist.prob([1]) == pytest.approx(1.0, abs=1e-12)


def test_posterior_weights_normalized():
    scm = chain_scm()
    post = cfrl.infer_noise_posterior(scm, cfrl.Observation({"b": "1"}))
    assert len(post) > 0
    assert sum(post.weights) == pytest.approx(1.0, abs=1e-12)


def test_two_door_follow_obs_value():
    env = cfrl.two_door(0.8)
    assert env.horizon == 2
    report = cfrl.mb_evaluate(env, cfrl.follow_obs_policy(), 20000, seed=7)
    assert abs(report.estimate - 0.8) < 3 * report.std_error


def test_replay_roundtrip(tmp_path):
    env = cfrl.two_door()
    mu = cfrl.uniform_policy(env.num_actions)
    buf = cfrl.collect_episodes(env, mu, "uniform", 50, 11, "twodoor")
    path = str(tmp_path / "replay.jsonl")
    cfrl.save_replay(buf, path)
    loaded = cfrl.load_replay(path)
    assert len(loaded) == 50
    assert loaded.env_hash == "twodoor"
    assert loaded.episode(0).actions == buf.episode(0).actions


def test_cf_evaluate_matches_truth():
    env = cfrl.two_door(0.8)
    mu = cfrl.uniform_policy(env.num_actions)
    buf = cfrl.collect_episodes(env, mu, "uniform", 4000, 3, "twodoor")
    report = cfrl.cf_evaluate(env, cfrl.follow_obs_policy(), buf, t=2,
                              n_cf_per_episode=1, seed=5)
    assert report.skipped == 0
    assert abs(report.estimate - 0.8) < 4 * report.std_error


def test_is_self_normalized_on_policy():
    env = cfrl.two_door()
    mu = cfrl.uniform_policy(env.num_actions)
    buf = cfrl.collect_episodes(env, mu, "uniform", 500, 9, "twodoor")
    report = cfrl.is_evaluate(buf, mu, cfrl.IsMode.SELF_NORMALIZED)
    mean = sum(cfrl.trajectory_return(buf.episode(i)) for i in range(500)) / 500
    assert report.estimate == pytest.approx(mean, abs=1e-12)


def test_grid_summary_and_rollout():
    cfg = cfrl.desk_config()
    env = cfrl.as_pomdp(cfg)
    assert env.num_states == 648
    traj = cfrl.env_rollout(env, cfrl.uniform_policy(env.num_actions),
                            cfrl.Rng(4))
    assert len(traj.obs) == cfg.horizon
    summary = cfrl.grid_obs_summary(traj.obs[0])
    assert summary.startswith("a")
    assert "b" in summary and "t" in summary


def test_search_smoke():
    env = cfrl.two_door(0.8)
    plan = cfrl.plan_full_info(env)
    cfg = cfrl.SearchConfig()
    cfg.iterations = 30
    cfg.rollouts = 200
    cfg.eval_rollouts = 300
    cfg.beta.tau = 5.0
    cfg.seed = 13
    res = cfrl.policy_search("mbps", env, env, plan,
                             cfrl.uniform_policy(env.num_actions), cfg)
    assert len(res.metrics) == 30
    final = cfrl.mb_evaluate(env, res.policy, 4000, seed=21)
    assert final.estimate >= 0.75


def test_verify_suite_pass_and_fault():
    ok = cfrl.verify_suite(17, 2)
    assert ok.all_pass
    assert "VERIFY PASS" in ok.to_text()
    bad = cfrl.verify_suite(17, 2, fault="mechanism_table")
    assert not bad.all_pass


def test_errors_are_python_exceptions():
    with pytest.raises(cfrl.CfrlError):
        cfrl.NoiseSpec("u", ["0", "1"], [0.5, 0.6])
        cfrl.Scm([cfrl.NodeDef("a", ["0", "1"])],
                 [cfrl.NoiseSpec("u", ["0", "1"], [0.5, 0.6])],
                 [cfrl.Mechanism("a", [], "u", [0, 1])])
