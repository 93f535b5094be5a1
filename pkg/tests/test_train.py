import numpy as np
import pytest

from iqpborn.datasets import TargetStats, synth_pairwise_table
from iqpborn.errors import ConfigError
from iqpborn.initializers import InitStrategy, PatchDraw, center, draw
from iqpborn.mmd import MMDConfig
from iqpborn.oracle import build_state, model_distribution
from iqpborn.topology import GeneratorIndex, make_graph
from iqpborn.train import TrainConfig, train


def small_setup(n=5):
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.3, -0.2, 0.4, 0.1, 0.0], [(0, 1, 0.1)])
    return g, idx, TargetStats.exact(table), MMDConfig.low_body(n)


def test_loss_stays_zero_at_perfect_init():
    n = 4
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    rng = np.random.default_rng(3)
    theta0 = rng.uniform(-0.8, 0.8, idx.m)
    target = TargetStats.exact(model_distribution(build_state(g, idx, theta0)))
    cfg = MMDConfig.low_body(n)
    init = PatchDraw(theta0.copy(), theta0.copy(), seed=0)
    tcfg = TrainConfig(steps=5, engine="exact", eval_every=1, seed=1)
    trace = train(g, idx, init, target, cfg, tcfg)
    assert np.allclose(trace.losses(), 0.0, atol=1e-10)
    assert np.allclose(trace.final_params, theta0, atol=1e-12)


def test_exact_descent_is_monotone():
    g, idx, target, cfg = small_setup()
    strat = InitStrategy("unbiased", 0.05)
    c = center(strat, g, idx)
    d = draw(strat, c, None, g, idx, seed=7)
    tcfg = TrainConfig(steps=40, learning_rate=0.2, engine="exact", eval_every=1, seed=1)
    trace = train(g, idx, d, target, cfg, tcfg)
    losses = trace.losses()
    assert np.all(np.diff(losses) <= 1e-10)
    assert losses[-1] < losses[0]


def test_identity_center_gradient_is_zero():
    g, idx, target, cfg = small_setup()
    init = PatchDraw(np.zeros(idx.m), np.zeros(idx.m), seed=0)
    tcfg = TrainConfig(steps=3, engine="exact", eval_every=1, seed=1)
    trace = train(g, idx, init, target, cfg, tcfg)
    # exact identity point is stationary: parameters never move
    assert np.allclose(trace.final_params, 0.0, atol=1e-14)
    assert np.allclose(np.diff(trace.losses()), 0.0, atol=1e-14)
    # a small drawn patch escapes it
    strat = InitStrategy("identity", 0.03)
    d = draw(strat, center(strat, g, idx), None, g, idx, seed=5)
    trace2 = train(g, idx, d, target, cfg, tcfg)
    assert not np.allclose(trace2.final_params, d.sample, atol=1e-14)


def test_trace_reproducible_and_csv():
    g, idx, target, cfg = small_setup()
    strat = InitStrategy("marginal", 0.1)
    c = center(strat, g, idx, target)
    d = draw(strat, c, None, g, idx, seed=2)
    tcfg = TrainConfig(steps=12, subsets=64, z_samples=64, eval_every=4,
                       eval_subsets=128, eval_z_samples=64, seed=9)
    t1 = train(g, idx, d, target, cfg, tcfg)
    t2 = train(g, idx, d, target, cfg, tcfg)
    assert np.array_equal(t1.final_params, t2.final_params)
    assert t1.losses().tolist() == t2.losses().tolist()
    csv = t1.to_csv()
    header, *rows = csv.splitlines()
    assert header == "step,loss,se,seconds"
    steps = [int(r.split(",")[0]) for r in rows]
    assert steps == sorted(steps) and len(set(steps)) == len(steps)
    ptext = t1.params_text()
    assert len(ptext.splitlines()) == idx.m
    back = np.array([float(x) for x in ptext.split()])
    assert np.array_equal(back, t1.final_params)


def test_mc_gradient_consistency_with_exact():
    g, idx, target, cfg = small_setup()
    rng = np.random.default_rng(0)
    theta = rng.uniform(-0.4, 0.4, idx.m)
    from iqpborn.mmd import MCLossConfig, loss_and_gradient_mc, loss_gradient

    exact = loss_gradient(g, idx, theta, target, cfg)
    reps = np.array([
        loss_and_gradient_mc(g, idx, theta, target, cfg, MCLossConfig(96, 256, seed=s))[1]
        for s in range(100)
    ])
    mean = reps.mean(axis=0)
    se = reps.std(axis=0, ddof=1) / np.sqrt(len(reps))
    assert np.all(np.abs(mean - exact) <= 5 * se + 1e-9)


def test_adam_optimizer_runs():
    g, idx, target, cfg = small_setup()
    strat = InitStrategy("unbiased", 0.05)
    d = draw(strat, center(strat, g, idx), None, g, idx, seed=3)
    tcfg = TrainConfig(steps=15, learning_rate=0.05, optimizer="adam", engine="exact",
                       eval_every=5, seed=1)
    trace = train(g, idx, d, target, cfg, tcfg)
    losses = trace.losses()
    assert losses[-1] < losses[0]


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(steps=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(optimizer="sgd9000")
