"""Compiled core vs NumPy fallback: identical contracts, matching numbers."""

import numpy as np
import pytest

from iqpborn._kernels import BACKEND, get_backend

core = pytest.importorskip("iqpborn._kernels._core")
fb = get_backend("fallback")


def _case(seed, d=6, ns=3, npair=4):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=ns + npair)
    srow = rng.integers(0, d, ns).astype(np.int32)
    prow_a = rng.integers(0, d, npair).astype(np.int32)
    prow_b = ((prow_a + 1 + rng.integers(0, d - 1, npair)) % d).astype(np.int32)
    return theta, srow, prow_a, prow_b, d


def test_backend_selected():
    assert BACKEND in ("compiled", "fallback")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mc_corr_streams_identical(seed):
    theta, srow, pa, pb, d = _case(seed)
    for chunk in (64, 256):
        a = core.mc_corr(theta, srow, pa, pb, d, 1000, 42, chunk, True)
        b = fb.mc_corr(theta, srow, pa, pb, d, 1000, 42, chunk, True)
        assert a[0] == pytest.approx(b[0], abs=1e-10)
        assert a[1] == pytest.approx(b[1], abs=1e-10)
        np.testing.assert_allclose(a[2], b[2], atol=1e-10)


def test_mc_chunk_cap_is_bit_compatible():
    # zero-padding the fold never changes sums: capped and uncapped agree
    theta, srow, pa, pb, d = _case(5)
    small = core.mc_corr(theta, srow, pa, pb, d, 100, 7, 128, False)
    big = core.mc_corr(theta, srow, pa, pb, d, 100, 7, 4096, False)
    assert small[:2] == big[:2]


def test_exact_corr_agreement():
    for seed in range(4):
        theta, srow, pa, pb, d = _case(seed, d=8)
        za, ga = core.exact_corr(theta, srow, pa, pb, d, True)
        zb, gb = fb.exact_corr(theta, srow, pa, pb, d, True)
        assert za == pytest.approx(zb, abs=1e-12)
        np.testing.assert_allclose(ga, gb, atol=1e-12)
        z2a, _ = core.exact_corr(theta, srow, pa, pb, d, False)
        assert z2a == pytest.approx(za, abs=1e-12)


def test_exact_corr_batch_agreement():
    theta, srow, pa, pb, d = _case(3, d=7)
    rng = np.random.default_rng(0)
    thetas = rng.normal(size=(11, len(theta)))
    za = core.exact_corr_batch(thetas, srow, pa, pb, d)
    zb = fb.exact_corr_batch(thetas, srow, pa, pb, d)
    np.testing.assert_allclose(za, zb, atol=1e-12)


def test_exact_loss_batch_agreement():
    rng = np.random.default_rng(2)
    n = 6
    edges = np.array([(j, k) for j in range(n) for k in range(j + 1, n)], dtype=np.int64)
    e0 = np.ascontiguousarray(edges[:, 0])
    e1 = np.ascontiguousarray(edges[:, 1])
    m = n + len(edges)
    thetas = rng.uniform(-1.5, 1.5, (9, m))
    raw = rng.random(1 << n) + 1e-3
    q = raw / raw.sum()
    la = core.exact_loss_batch(thetas, e0, e1, n, q, 0.7)
    lb = fb.exact_loss_batch(thetas, e0, e1, n, q, 0.7)
    np.testing.assert_allclose(la, lb, atol=1e-13)


def test_fallback_package_level(monkeypatch):
    # the package works end to end on the pure backend
    import iqpborn._kernels as kmod

    monkeypatch.setattr(kmod, "mc_corr", fb.mc_corr)
    monkeypatch.setattr(kmod, "exact_corr", fb.exact_corr)
    monkeypatch.setattr(kmod, "exact_corr_batch", fb.exact_corr_batch)
    monkeypatch.setattr(kmod, "exact_loss_batch", fb.exact_loss_batch)
    from iqpborn.correlators import EstimatorBudget, z_exact, z_mc
    from iqpborn.topology import GeneratorIndex, QubitSubset, make_graph

    g = make_graph("ring", 5)
    idx = GeneratorIndex(g)
    rng = np.random.default_rng(1)
    theta = rng.uniform(-1, 1, idx.m)
    A = QubitSubset(5, [1, 3])
    est = z_mc(g, idx, theta, A, EstimatorBudget(50_000, seed=3))
    assert abs(est.value - z_exact(g, idx, theta, A)) <= 5 * est.std_error
