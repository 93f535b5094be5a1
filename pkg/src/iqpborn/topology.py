"""Interaction graphs, qubit subsets, generator indexing, and Pauli light cones.

Qubit indices are 0-based everywhere in code and file formats. Generator
ordering is fixed as all n single-qubit generators first (position j for
qubit j), followed by the two-qubit generators in lexicographic edge order.
All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, InvalidObservableError

_WORD = 64


class QubitSubset:
    """Fixed-length bit vector labelling a Pauli-Z observable Z_A.

    Stored as packed 64-bit words sized at construction, so subsets of
    graphs with n well beyond 64 qubits (up to 1024 and more) are cheap.
    The empty subset is valid and denotes the identity observable.
    """

    __slots__ = ("n", "_words")

    def __init__(self, n: int, members: Iterable[int] = ()):
        if n <= 0:
            raise ConfigError(f"subset length must be positive, got {n}")
        words = np.zeros((n + _WORD - 1) // _WORD, dtype=np.uint64)
        for q in members:
            q = int(q)
            if not 0 <= q < n:
                raise DimensionError(f"qubit {q} out of range for n={n}")
            words[q // _WORD] |= np.uint64(1) << np.uint64(q % _WORD)
        words.flags.writeable = False
        self.n = n
        self._words = words

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "QubitSubset":
        if mask < 0 or mask >> n:
            raise DimensionError(f"mask {mask} does not fit in n={n} bits")
        return cls(n, (q for q in range(n) if (mask >> q) & 1))

    @classmethod
    def full(cls, n: int) -> "QubitSubset":
        return cls(n, range(n))

    def mask(self) -> int:
        """Subset as a Python integer bit mask (bit i set iff qubit i in A)."""
        out = 0
        for w, word in enumerate(self._words):
            out |= int(word) << (w * _WORD)
        return out

    def members(self) -> tuple[int, ...]:
        return tuple(
            q for q in range(self.n) if (int(self._words[q // _WORD]) >> (q % _WORD)) & 1
        )

    def __contains__(self, q: int) -> bool:
        if not 0 <= q < self.n:
            return False
        return bool((int(self._words[q // _WORD]) >> (q % _WORD)) & 1)

    def __len__(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    @property
    def is_empty(self) -> bool:
        return not self._words.any()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, QubitSubset)
            and self.n == other.n
            and bool(np.array_equal(self._words, other._words))
        )

    def __hash__(self) -> int:
        return hash((self.n, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"QubitSubset(n={self.n}, members={self.members()})"


@dataclass(frozen=True)
class GeneratorLabel:
    """Label of one circuit generator: a single qubit (j,) or an edge (j, k)."""

    qubits: tuple[int, ...]

    def __post_init__(self):
        if len(self.qubits) not in (1, 2):
            raise ConfigError(f"generator must touch 1 or 2 qubits, got {self.qubits}")
        if len(self.qubits) == 2 and not self.qubits[0] < self.qubits[1]:
            raise ConfigError(f"pair label must be ordered j<k, got {self.qubits}")

    @property
    def is_pair(self) -> bool:
        return len(self.qubits) == 2


@dataclass(frozen=True)
class InteractionGraph:
    """Qubit count plus an unordered two-qubit edge set (no self loops)."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n <= 0:
            raise ConfigError(f"qubit count must be positive, got {self.n}")
        seen = set()
        for j, k in self.edges:
            if j == k:
                raise ConfigError(f"self loop ({j},{k}) not allowed")
            if not (0 <= j < k < self.n):
                raise ConfigError(f"edge ({j},{k}) out of range for n={self.n}")
            if (j, k) in seen:
                raise ConfigError(f"duplicate edge ({j},{k})")
            seen.add((j, k))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for j, k in self.edges:
            adj[j].append(k)
            adj[k].append(j)
        return tuple(tuple(sorted(a)) for a in adj)

    def degree(self, q: int) -> int:
        return sum(1 for j, k in self.edges if q in (j, k))

    def max_degree(self) -> int:
        deg = [0] * self.n
        for j, k in self.edges:
            deg[j] += 1
            deg[k] += 1
        return max(deg) if deg else 0


@dataclass(frozen=True)
class GeneratorIndex:
    """Stable bijection between parameter positions and generator labels.

    Positions 0..n-1 are the single-qubit generators; positions n..m-1 are
    the edges of the graph in lexicographic order.
    """

    graph: InteractionGraph
    labels: tuple[GeneratorLabel, ...] = field(init=False)

    def __post_init__(self):
        singles = [GeneratorLabel((j,)) for j in range(self.graph.n)]
        pairs = [GeneratorLabel(e) for e in self.graph.edges]
        object.__setattr__(self, "labels", tuple(singles + pairs))

    @property
    def m(self) -> int:
        return len(self.labels)

    def position(self, label: GeneratorLabel) -> int:
        if not label.is_pair:
            j = label.qubits[0]
            if not 0 <= j < self.graph.n:
                raise DimensionError(f"qubit {j} out of range")
            return j
        try:
            return self.graph.n + self.graph.edges.index(label.qubits)
        except ValueError:
            raise ConfigError(f"edge {label.qubits} not in graph") from None

    def pair_positions(self) -> dict[tuple[int, int], int]:
        return {e: self.graph.n + i for i, e in enumerate(self.graph.edges)}


def _check_subset(g: InteractionGraph, A: QubitSubset) -> None:
    if A.n != g.n:
        raise DimensionError(f"subset has n={A.n}, graph has n={g.n}")


def external_neighborhood(g: InteractionGraph, A: QubitSubset) -> QubitSubset:
    """Qubits outside A adjacent to at least one qubit in A."""
    _check_subset(g, A)
    out = set()
    for j, k in g.edges:
        jin, kin = j in A, k in A
        if jin and not kin:
            out.add(k)
        elif kin and not jin:
            out.add(j)
    return QubitSubset(g.n, out)


def light_cone(g: InteractionGraph, A: QubitSubset) -> int:
    """Effective Pauli light cone of Z_A: |A| + |N_E(A)|."""
    _check_subset(g, A)
    if A.is_empty:
        raise InvalidObservableError("light cone undefined for the empty subset")
    return len(A) + len(external_neighborhood(g, A))


def anticommuting_generators(g: InteractionGraph, A: QubitSubset) -> list[GeneratorLabel]:
    """Generators whose Pauli-X string anti-commutes with Z_A.

    These are the singles on qubits in A plus the edges with exactly one
    endpoint in A; they are the only parameters that influence z_A.
    """
    _check_subset(g, A)
    out = [GeneratorLabel((j,)) for j in range(g.n) if j in A]
    for j, k in g.edges:
        if (j in A) != (k in A):
            out.append(GeneratorLabel((j, k)))
    return out


@dataclass(frozen=True)
class LightConeStruct:
    """Flattened view of the anti-commuting generator set for the engines.

    ``rows`` lists the light-cone qubits (A then its external neighborhood,
    sorted); the sign of row r stands for (-1)^{z_q} of qubit q = rows[r].
    ``positions`` are parameter indices into the full theta vector, singles
    first then pairs, matching the concatenation (srow, (prow_a, prow_b)).
    """

    rows: np.ndarray
    srow: np.ndarray
    prow_a: np.ndarray
    prow_b: np.ndarray
    positions: np.ndarray

    @property
    def d(self) -> int:
        return len(self.rows)

    @property
    def m_A(self) -> int:
        return len(self.positions)


_STRUCT_CACHE_CAP = 8192


def _edge_arrays(g: InteractionGraph):
    # private per-instance cache; value semantics of the frozen graph unchanged
    got = g.__dict__.get("_lc_cache")
    if got is None:
        arr = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
        got = (arr[:, 0].copy(), arr[:, 1].copy(), {})
        object.__setattr__(g, "_lc_cache", got)
    return got


def light_cone_struct(g: InteractionGraph, idx: GeneratorIndex, A: QubitSubset) -> LightConeStruct:
    _check_subset(g, A)
    e0, e1, cache = _edge_arrays(g)
    key = A.mask()
    hit = cache.get(key)
    if hit is not None:
        return hit
    members = np.asarray(A.members(), dtype=np.int64)
    in_a = np.zeros(g.n, dtype=bool)
    in_a[members] = True
    esel = in_a[e0] != in_a[e1] if len(e0) else np.zeros(0, dtype=bool)
    sel0, sel1 = e0[esel], e1[esel]
    cone = np.unique(np.concatenate([members, sel0, sel1]))
    struct = LightConeStruct(
        rows=cone.astype(np.int32),
        srow=np.searchsorted(cone, members).astype(np.int32),
        prow_a=np.searchsorted(cone, sel0).astype(np.int32),
        prow_b=np.searchsorted(cone, sel1).astype(np.int32),
        positions=np.concatenate([members, g.n + np.nonzero(esel)[0]]).astype(np.int64),
    )
    if len(cache) >= _STRUCT_CACHE_CAP:
        cache.clear()
    cache[key] = struct
    return struct


def make_graph(kind: str, n: int, *, K: int | None = None, seed: int | None = None,
               edges: Sequence[tuple[int, int]] | None = None) -> InteractionGraph:
    """Build a named interaction graph: all_to_all | ring | edgeless | k_regular | explicit."""
    if kind == "all_to_all":
        return InteractionGraph(n, tuple(itertools.combinations(range(n), 2)))
    if kind == "ring":
        if n < 3:
            raise ConfigError("ring needs n >= 3")
        es = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
        return InteractionGraph(n, tuple(es))
    if kind == "edgeless":
        return InteractionGraph(n, ())
    if kind == "k_regular":
        if K is None or seed is None:
            raise ConfigError("k_regular needs K and seed")
        if K >= n or (K * n) % 2 != 0 or K < 0:
            raise ConfigError(f"infeasible K-regular parameters K={K}, n={n}")
        import networkx as nx

        rg = nx.random_regular_graph(K, n, seed=seed)
        es = tuple(sorted((min(u, v), max(u, v)) for u, v in rg.edges()))
        return InteractionGraph(n, es)
    if kind == "explicit":
        if edges is None:
            raise ConfigError("explicit graph needs an edge list")
        return InteractionGraph(n, tuple((min(j, k), max(j, k)) for j, k in edges))
    raise ConfigError(f"unknown graph kind {kind!r}")


def read_graph(path) -> InteractionGraph:
    """Read the explicit-graph text format: first line n, then one 'j k' per line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"empty graph file {path}")
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        j, k = ln.split()
        edges.append((int(j), int(k)))
    return make_graph("explicit", n, edges=edges)


def write_graph(g: InteractionGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n}\n")
        for j, k in g.edges:
            fh.write(f"{j} {k}\n")
