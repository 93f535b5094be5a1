import numpy as np
import pytest

from iqpborn.errors import CapacityError, DimensionError
from iqpborn.oracle import (
    DistributionTable,
    all_correlators,
    build_state,
    expval_zA,
    model_distribution,
    sample,
)
from iqpborn.topology import GeneratorIndex, QubitSubset, make_graph

from conftest import random_graph, random_subset, random_theta


def test_identity_circuit_is_delta():
    g = make_graph("all_to_all", 4)
    idx = GeneratorIndex(g)
    state = build_state(g, idx, np.zeros(idx.m))
    assert abs(state[0] - 1.0) < 1e-12
    assert np.all(np.abs(state[1:]) < 1e-12)
    dist = model_distribution(state)
    assert dist.probs[0] == pytest.approx(1.0, abs=1e-12)


def test_single_qubit_pi4_is_uniform():
    g = make_graph("edgeless", 1)
    idx = GeneratorIndex(g)
    dist = model_distribution(build_state(g, idx, [np.pi / 4]))
    assert np.allclose(dist.probs, [0.5, 0.5], atol=1e-12)


def test_norm_preserved():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(1, 8))
        g = random_graph(rng, n)
        idx = GeneratorIndex(g)
        state = build_state(g, idx, random_theta(rng, idx))
        assert abs(np.vdot(state, state).real - 1.0) < 1e-12


def test_expval_trivia():
    g = make_graph("ring", 3)
    idx = GeneratorIndex(g)
    state = build_state(g, idx, np.zeros(idx.m))
    assert expval_zA(state, QubitSubset(3)) == pytest.approx(1.0)
    # uniform state: every nontrivial parity balances out
    uniform = np.full(8, 1 / np.sqrt(8), dtype=complex)
    assert expval_zA(uniform, QubitSubset(3, [0, 2])) == pytest.approx(0.0, abs=1e-12)


def test_unbiased_point_is_uniform_distribution():
    n = 5
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    theta = np.zeros(idx.m)
    theta[:n] = np.pi / 4
    dist = model_distribution(build_state(g, idx, theta))
    assert np.allclose(dist.probs, 1 / 2**n, atol=1e-12)


def test_pair_angles_keep_marginals_uniform():
    # with all singles at pi/4, every single-qubit marginal stays 1/2
    rng = np.random.default_rng(11)
    n = 4
    g = make_graph("all_to_all", n)
    idx = GeneratorIndex(g)
    theta = random_theta(rng, idx)
    theta[:n] = np.pi / 4
    dist = model_distribution(build_state(g, idx, theta))
    for q in range(n):
        assert expval_zA(build_state(g, idx, theta), QubitSubset(n, [q])) == pytest.approx(
            0.0, abs=1e-10
        )
    assert dist.probs.sum() == pytest.approx(1.0)


def test_all_correlators_matches_expval():
    rng = np.random.default_rng(3)
    n = 6
    g = random_graph(rng, n)
    idx = GeneratorIndex(g)
    state = build_state(g, idx, random_theta(rng, idx))
    corr = all_correlators(model_distribution(state))
    for _ in range(10):
        A = random_subset(rng, n)
        assert corr[A.mask()] == pytest.approx(expval_zA(state, A), abs=1e-10)


def test_sampling_matches_table():
    rng = np.random.default_rng(9)
    n = 4
    g = make_graph("ring", n)
    idx = GeneratorIndex(g)
    dist = model_distribution(build_state(g, idx, random_theta(rng, idx)))
    count = 100_000
    rows = sample(dist, count, seed=1234)
    assert rows.shape == (count, n)
    masks = np.zeros(count, dtype=np.int64)
    for q in range(n):
        masks |= rows[:, q].astype(np.int64) << q
    freq = np.bincount(masks, minlength=2**n) / count
    se = np.sqrt(dist.probs * (1 - dist.probs) / count)
    assert np.all(np.abs(freq - dist.probs) <= 4 * se + 1e-12)


def test_sampling_deterministic():
    dist = DistributionTable(np.full(8, 1 / 8))
    assert np.array_equal(sample(dist, 100, seed=7), sample(dist, 100, seed=7))


def test_capacity_error():
    g = make_graph("edgeless", 25)
    idx = GeneratorIndex(g)
    with pytest.raises(CapacityError):
        build_state(g, idx, np.zeros(idx.m))


def test_expval_dimension_error():
    g = make_graph("ring", 3)
    idx = GeneratorIndex(g)
    state = build_state(g, idx, np.zeros(idx.m))
    with pytest.raises(DimensionError):
        expval_zA(state, QubitSubset(4, [0]))
