import numpy as np
import pytest

from iqpborn.errors import ConfigError, DimensionError, InvalidObservableError
from iqpborn.topology import (
    GeneratorIndex,
    GeneratorLabel,
    InteractionGraph,
    QubitSubset,
    anticommuting_generators,
    external_neighborhood,
    light_cone,
    light_cone_struct,
    make_graph,
    read_graph,
    write_graph,
)

from conftest import random_graph, random_subset


def test_external_neighborhood_chain_example():
    # 5-qubit chain 0-1-2-3, subset {1,2}: outside neighbors are {0,3}
    g = make_graph("explicit", 5, edges=[(0, 1), (1, 2), (2, 3)])
    A = QubitSubset(5, [1, 2])
    assert external_neighborhood(g, A).members() == (0, 3)
    assert light_cone(g, A) == 4


def test_external_neighborhood_trivia():
    g = make_graph("ring", 6)
    assert external_neighborhood(g, QubitSubset(6)).is_empty
    g0 = make_graph("edgeless", 6)
    assert external_neighborhood(g0, QubitSubset(6, [1, 3])).is_empty


def test_light_cone_all_to_all_saturates():
    g = make_graph("all_to_all", 7)
    for members in ([0], [2, 5], list(range(7))):
        assert light_cone(g, QubitSubset(7, members)) == 7


def test_light_cone_edgeless_is_subset_size():
    g = make_graph("edgeless", 9)
    assert light_cone(g, QubitSubset(9, [0, 4, 8])) == 3


def test_light_cone_empty_subset_rejected():
    g = make_graph("ring", 5)
    with pytest.raises(InvalidObservableError):
        light_cone(g, QubitSubset(5))


def test_dimension_mismatch_rejected():
    g = make_graph("ring", 5)
    with pytest.raises(DimensionError):
        external_neighborhood(g, QubitSubset(4, [0]))


def test_anticommuting_generators_small():
    g = make_graph("explicit", 2, edges=[(0, 1)])
    got = anticommuting_generators(g, QubitSubset(2, [0]))
    assert got == [GeneratorLabel((0,)), GeneratorLabel((0, 1))]
    assert anticommuting_generators(g, QubitSubset(2)) == []


def test_anticommuting_full_subset_all_to_all():
    n = 6
    g = make_graph("all_to_all", n)
    got = anticommuting_generators(g, QubitSubset.full(n))
    assert got == [GeneratorLabel((j,)) for j in range(n)]


def test_anticommuting_count_all_to_all():
    # |A_A| = |A| (n + 1 - |A|) on the complete graph
    rng = np.random.default_rng(7)
    for n in (3, 5, 8):
        g = make_graph("all_to_all", n)
        for _ in range(10):
            A = random_subset(rng, n, nonempty=True)
            m_A = len(anticommuting_generators(g, A))
            assert m_A == len(A) * (n + 1 - len(A))


def test_kregular_light_cone_bounds():
    rng = np.random.default_rng(3)
    for n, K in ((8, 3), (10, 4), (12, 2)):
        g = make_graph("k_regular", n, K=K, seed=5)
        assert all(g.degree(q) == K for q in range(n))
        for _ in range(20):
            A = random_subset(rng, n, nonempty=True)
            d = light_cone(g, A)
            assert max(len(A), K + 1) <= d <= min(n, (K + 1) * len(A))


def test_neighborhood_disjoint_from_subset():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        g = random_graph(rng, n)
        A = random_subset(rng, n)
        N = external_neighborhood(g, A)
        assert not (set(A.members()) & set(N.members()))


def test_make_graph_shapes():
    assert len(make_graph("all_to_all", 4).edges) == 6
    assert make_graph("ring", 5).edges == ((0, 1), (0, 4), (1, 2), (2, 3), (3, 4))
    assert make_graph("edgeless", 3).edges == ()
    with pytest.raises(ConfigError):
        make_graph("k_regular", 5, K=3, seed=0)  # K*n odd
    with pytest.raises(ConfigError):
        make_graph("k_regular", 4, K=4, seed=0)  # K >= n


def test_kregular_deterministic_per_seed():
    g1 = make_graph("k_regular", 10, K=3, seed=42)
    g2 = make_graph("k_regular", 10, K=3, seed=42)
    assert g1.edges == g2.edges


def test_graph_validation():
    with pytest.raises(ConfigError):
        InteractionGraph(3, ((0, 0),))
    with pytest.raises(ConfigError):
        InteractionGraph(3, ((0, 1), (0, 1)))
    with pytest.raises(ConfigError):
        InteractionGraph(3, ((0, 3),))


def test_generator_index_ordering():
    g = make_graph("explicit", 4, edges=[(1, 3), (0, 2), (0, 1)])
    idx = GeneratorIndex(g)
    assert idx.m == 4 + 3
    labels = idx.labels
    assert [lab.qubits for lab in labels[:4]] == [(0,), (1,), (2,), (3,)]
    assert [lab.qubits for lab in labels[4:]] == [(0, 1), (0, 2), (1, 3)]
    assert idx.position(GeneratorLabel((0, 2))) == 5
    assert idx.position(GeneratorLabel((2,))) == 2


def test_light_cone_struct_consistency():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        g = random_graph(rng, n)
        idx = GeneratorIndex(g)
        A = random_subset(rng, n, nonempty=True)
        lc = light_cone_struct(g, idx, A)
        assert lc.d == light_cone(g, A)
        assert lc.m_A == len(anticommuting_generators(g, A))
        assert len(lc.srow) == len(A)


def test_graph_file_roundtrip(tmp_path):
    g = make_graph("explicit", 6, edges=[(0, 5), (1, 2)])
    path = tmp_path / "g.txt"
    write_graph(g, path)
    assert read_graph(path) == g


def test_subset_basics():
    A = QubitSubset(130, [0, 64, 129])
    assert len(A) == 3
    assert 64 in A and 63 not in A
    assert A.mask() == (1 << 0) | (1 << 64) | (1 << 129)
    assert QubitSubset.from_mask(130, A.mask()) == A
    assert QubitSubset(5).is_empty
