import numpy as np
import pytest

from iqpborn.topology import GeneratorIndex, QubitSubset, make_graph


def random_graph(rng, n):
    """A random graph drawn from the kinds used throughout the tests."""
    kind = rng.choice(["all_to_all", "ring", "edgeless", "explicit"])
    if kind == "explicit":
        edges = [
            (j, k)
            for j in range(n)
            for k in range(j + 1, n)
            if rng.random() < 0.4
        ]
        return make_graph("explicit", n, edges=edges)
    if kind == "ring" and n < 3:
        kind = "all_to_all"
    return make_graph(kind, n)


def random_subset(rng, n, nonempty=False):
    while True:
        members = [q for q in range(n) if rng.random() < 0.5]
        if members or not nonempty:
            return QubitSubset(n, members)


def random_theta(rng, idx: GeneratorIndex, scale=np.pi / 2):
    return rng.uniform(-scale, scale, idx.m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
