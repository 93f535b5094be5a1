import math

import numpy as np
import pytest

from iqpborn.analysis import (
    cross_moments_empirical,
    curvature_patch_bound,
    curvature_report_sweep,
    identity_patch_floor,
    loss_exact_batch,
    mmd_concentration_bound,
    patch_floor_constant,
    restricted_topology_floor,
    var_correlator_empirical,
    var_correlator_predicted,
    variance_scan,
    variance_se,
)
from iqpborn.datasets import TargetStats, synth_pairwise_table
from iqpborn.errors import ConfigError, PreconditionError
from iqpborn.initializers import InitStrategy, center
from iqpborn.mmd import (
    MMDConfig,
    curvature_closed_unbiased,
    loss_exact_subsets,
    weight,
)
from iqpborn.topology import GeneratorIndex, QubitSubset, make_graph


def test_predicted_variance_examples():
    g = make_graph("all_to_all", 8)
    assert var_correlator_predicted(g, QubitSubset(8, [3])) == 2.0**-8
    g0 = make_graph("edgeless", 5)
    assert var_correlator_predicted(g0, QubitSubset(5, [2])) == 0.5
    gm = make_graph("explicit", 4, edges=[(0, 1), (2, 3)])  # 1-regular matching
    assert var_correlator_predicted(gm, QubitSubset(4, [0])) == 0.25


def test_empirical_variance_matches_prediction():
    cases = [
        (make_graph("edgeless", 5), [2]),
        (make_graph("explicit", 4, edges=[(0, 1), (2, 3)]), [0]),
        (make_graph("ring", 8), [2, 3]),
    ]
    for i, (g, members) in enumerate(cases):
        idx = GeneratorIndex(g)
        A = QubitSubset(g.n, members)
        est = var_correlator_empirical(g, idx, A, 60_000, seed=100 + i)
        pred = var_correlator_predicted(g, A)
        assert abs(est.variance - pred) <= 4 * est.se_variance
        assert abs(est.mean) <= 4 * est.se_mean


def test_empirical_variance_deterministic():
    g = make_graph("ring", 6)
    idx = GeneratorIndex(g)
    A = QubitSubset(6, [1])
    e1 = var_correlator_empirical(g, idx, A, 5000, seed=4)
    e2 = var_correlator_empirical(g, idx, A, 5000, seed=4)
    assert e1 == e2


def test_cross_moments_vanish():
    g = make_graph("all_to_all", 6)
    idx = GeneratorIndex(g)
    est = cross_moments_empirical(g, idx, QubitSubset(6, [0, 2]), QubitSubset(6, [1]),
                                  40_000, seed=9)
    assert abs(est.mean_ab) <= 4 * est.se_ab
    assert abs(est.mean_aab) <= 4 * est.se_aab


def test_concentration_bound_value():
    assert mmd_concentration_bound(10) == pytest.approx(5 / 1024)


def test_variance_below_concentration_bound():
    n = 8
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    target = TargetStats.product([0.3] * n)
    cfg = MMDConfig.low_body(n)
    scan = variance_scan(InitStrategy("full"), g, idx, target, cfg, [1.0], 3000, seed=2)
    row = scan.rows[0]
    assert row.var <= mmd_concentration_bound(n) + 3 * row.se


def test_restricted_topology_floor_ring():
    n = 8
    ring = make_graph("ring", n)
    cfg = MMDConfig.low_body(n)
    target = TargetStats.product([0.5] * n)
    floor = restricted_topology_floor(ring, target, cfg, k_max=1)
    single = 4 * weight(cfg, 1) ** 2 * 0.25 * 2.0**-3
    assert floor == pytest.approx(n * single, rel=1e-12)
    # the floor really bounds the empirical full-angle loss variance
    idx = GeneratorIndex(ring)
    scan = variance_scan(InitStrategy("full"), ring, idx, target, cfg, [1.0], 4000, seed=3)
    row = scan.rows[0]
    assert row.var + 3 * row.se >= floor


def test_identity_patch_floor_formula():
    c = patch_floor_constant()
    assert c == pytest.approx(-2 * math.log(math.sin(2.0) / 2.0), abs=1e-15)
    assert c == pytest.approx(1.5764604333, abs=1e-9)
    assert identity_patch_floor(6, 0.0) == 0.0
    want = (16 * 0.3**4 * 6 / 45) * math.exp(-c * 6 * 0.3**2)
    assert identity_patch_floor(6, 0.3) == pytest.approx(want, rel=1e-12)
    with pytest.raises(PreconditionError):
        identity_patch_floor(6, 1.2)
    with pytest.raises(PreconditionError):
        identity_patch_floor(0, 0.3)


def test_identity_patch_floor_respected_empirically():
    n, r = 6, 0.3
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    A = QubitSubset(n, [2])
    m_A = 1 * (n + 1 - 1)
    est = var_correlator_empirical(g, idx, A, 30_000, seed=11, r=r)
    floor = identity_patch_floor(m_A, r)
    assert est.variance >= floor - 3 * est.se_variance


def test_curvature_patch_bound_constants():
    # p_sigma = 0.1 corresponds to sigma with exp(-1/(2s^2)) = 0.8
    sigma = math.sqrt(-1.0 / (2.0 * math.log(0.8)))
    cfg = MMDConfig(sigma, 4)
    bound = curvature_patch_bound(cfg, m=10, c_alpha=0.5, delta=0.25)
    assert bound.a == pytest.approx(0.36, abs=1e-12)
    assert bound.beta1 == pytest.approx(13.9968, abs=1e-9)
    assert bound.beta2 == pytest.approx(88.4736, abs=1e-9)
    assert bound.r_max <= 3 / 8
    # floor shape and admissibility
    r = bound.r_max / 2
    assert bound.floor(r) == pytest.approx(0.75 * r**4 / 45 * 0.25, rel=1e-12)
    with pytest.raises(PreconditionError):
        bound.floor(bound.r_max * 1.5)
    # tiny delta shrinks everything
    small = curvature_patch_bound(cfg, m=10, c_alpha=0.5, delta=1e-6)
    assert small.r_max < bound.r_max
    with pytest.raises(ConfigError):
        curvature_patch_bound(cfg, m=10, c_alpha=0.5, delta=0.5)


def test_curvature_patch_bound_no_guarantee():
    cfg = MMDConfig.low_body(6)
    bound = curvature_patch_bound(cfg, m=21, c_alpha=-0.2, delta=0.25)
    assert not bound.guaranteed
    assert bound.r_max == 0.0
    assert bound.floor(0.0) == 0.0


def test_patch_variance_respects_curvature_floor():
    n = 6
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.4, -0.3, 0.2, 0.1, 0.35, -0.15],
                                 [(0, 1, 0.06), (2, 3, -0.05)])
    target = TargetStats.exact(table)
    cfg = MMDConfig.low_body(n)
    strat = InitStrategy("marginal", 0.0)
    from iqpborn.mmd import curvature

    c_theta = center(strat, g, idx, target)
    c_alpha = max(
        abs(curvature(g, idx, c_theta, target, cfg, a).total) for a in range(n)
    )
    bound = curvature_patch_bound(cfg, idx.m, c_alpha, delta=0.25)
    assert bound.guaranteed
    r = bound.r_max / 2
    scan = variance_scan(InitStrategy("marginal", r / (math.pi / 2)), g, idx, target,
                         cfg, [r / (math.pi / 2)], 4000, seed=6)
    row = scan.rows[0]
    assert row.var >= bound.floor(r) - 3 * row.se


def test_variance_scan_zero_scale_and_csv():
    n = 5
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    target = TargetStats.product([0.2] * n)
    cfg = MMDConfig.low_body(n)
    scan = variance_scan(InitStrategy("unbiased", 1.0), g, idx, target, cfg,
                         [0.0, 0.1, 0.3], 500, seed=8)
    assert scan.rows[0].var == 0.0
    csv = scan.to_csv()
    assert csv.splitlines()[0] == "strategy,n,scale,draws,var,se"
    assert len(csv.splitlines()) == 4
    assert scan.argmax_scale in (0.1, 0.3)
    again = variance_scan(InitStrategy("unbiased", 1.0), g, idx, target, cfg,
                          [0.0, 0.1, 0.3], 500, seed=8)
    assert again.to_csv() == csv


def test_variance_scan_mc_engine_close_to_exact():
    n = 6
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.3] * n, [(0, 1, 0.1)])
    target = TargetStats.exact(table)
    cfg = MMDConfig.low_body(n)
    ex = variance_scan(InitStrategy("unbiased", 1.0), g, idx, target, cfg, [0.2],
                       600, seed=4)
    mc = variance_scan(InitStrategy("unbiased", 1.0), g, idx, target, cfg, [0.2],
                       600, seed=4, engine="mc", mc_subsets=96, mc_z_samples=512)
    # the estimator adds noise variance on top of the exact-loss variance
    assert mc.rows[0].var >= ex.rows[0].var - 3 * ex.rows[0].se
    assert mc.rows[0].var <= 12 * ex.rows[0].var


def test_curvature_sweep_centers():
    n = 6
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.4, -0.3, 0.2, 0.1, 0.35, -0.15], [(0, 1, 0.08)])
    target = TargetStats.exact(table)
    cfg = MMDConfig.low_body(n)

    unb = curvature_report_sweep(InitStrategy("unbiased", 0.0), g, idx, target, cfg)
    for rep, closed in zip(unb.reports, unb.closed):
        assert closed == pytest.approx(curvature_closed_unbiased(cfg), abs=1e-15)
        assert rep.total == pytest.approx(closed, abs=1e-9)
        assert rep.mismatch == pytest.approx(0.0, abs=1e-10)

    ident = curvature_report_sweep(InitStrategy("identity", 0.0), g, idx, target, cfg)
    for rep, closed in zip(ident.reports, ident.closed):
        assert rep.total == pytest.approx(closed, abs=1e-9)
        assert rep.total <= 0.0

    marg = curvature_report_sweep(InitStrategy("marginal", 0.0), g, idx, target, cfg)
    for rep, closed in zip(marg.reports, marg.closed):
        assert rep.total == pytest.approx(closed, abs=1e-9)
    csv = marg.to_csv()
    assert csv.splitlines()[0] == "alpha,total,mismatch,sensitivity"


def test_variance_se_formula():
    assert variance_se(2.0, 101) == pytest.approx(2.0 * math.sqrt(2 / 100))
    assert math.isinf(variance_se(1.0, 1))


def test_loss_exact_batch_matches_subset_form(rng):
    n = 7
    g = make_graph("ring", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.25] * n, [(1, 2, 0.1)])
    target = TargetStats.exact(table)
    cfg = MMDConfig(sigma=1.1, n=n)
    thetas = rng.uniform(-np.pi / 2, np.pi / 2, (6, idx.m))
    batch = loss_exact_batch(g, idx, thetas, target, cfg)
    for k in range(6):
        assert batch[k] == pytest.approx(
            loss_exact_subsets(g, idx, thetas[k], target, cfg), abs=1e-12
        )


def test_variance_scan_worker_invariance():
    n = 6
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    table = synth_pairwise_table(n, [0.3] * n, [(0, 1, 0.1)])
    target = TargetStats.exact(table)
    cfg = MMDConfig.low_body(n)
    one = variance_scan(InitStrategy("marginal", 1.0), g, idx, target, cfg,
                        [0.05, 0.2], 3000, seed=12, workers=1)
    two = variance_scan(InitStrategy("marginal", 1.0), g, idx, target, cfg,
                        [0.05, 0.2], 3000, seed=12, workers=3)
    assert one.to_csv() == two.to_csv()
