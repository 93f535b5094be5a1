"""Brute-force statevector oracle: independent ground truth at small n.

The IQP circuit is a Hadamard layer, a diagonal phase layer, and another
Hadamard layer, so the state is built as H^{(x)n} D(theta) H^{(x)n}|0..0>
with D applying exp(i theta_b (-1)^{b.z}) per generator. Basis index
convention: bit i of the integer index is qubit i (qubit 0 = LSB).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError
from .topology import GeneratorIndex, InteractionGraph, QubitSubset

ORACLE_LIMIT_DEFAULT = 20


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along axis 0 (length 2^k)."""
    a = np.array(a, copy=True)
    n = a.shape[0]
    h = 1
    while h < n:
        b = a.reshape((n // (2 * h), 2, h) + a.shape[1:])
        top = b[:, 0] + b[:, 1]
        bot = b[:, 0] - b[:, 1]
        b[:, 0] = top
        b[:, 1] = bot
        h *= 2
    return a


@dataclass(frozen=True)
class DistributionTable:
    """Full probability table over bit strings, indexed by the integer mask."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        size = p.shape[0]
        if size & (size - 1) or p.ndim != 1:
            raise DimensionError("probability table length must be a power of two")
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-10:
            raise DimensionError("probabilities must be nonnegative and sum to 1")
        p = np.clip(p, 0.0, None)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return int(self.probs.shape[0]).bit_length() - 1


def phase_vector(g: InteractionGraph, idx: GeneratorIndex, theta) -> np.ndarray:
    """phi(z) = sum_b theta_b (-1)^{b.z} for every basis index z."""
    theta = np.asarray(theta, dtype=np.float64)
    n = g.n
    zs = np.arange(1 << n, dtype=np.uint64)
    signs = np.empty((n, 1 << n))
    for q in range(n):
        signs[q] = 1.0 - 2.0 * ((zs >> np.uint64(q)) & np.uint64(1)).astype(np.float64)
    phi = theta[:n] @ signs
    for rank, (j, k) in enumerate(g.edges):
        phi += theta[n + rank] * (signs[j] * signs[k])
    return phi


def build_state(g: InteractionGraph, idx: GeneratorIndex, theta,
                *, limit: int = ORACLE_LIMIT_DEFAULT) -> np.ndarray:
    """Statevector of the IQP circuit applied to |0...0>."""
    if g.n > limit:
        raise CapacityError(f"oracle limited to {limit} qubits, got n={g.n}")
    phi = phase_vector(g, idx, theta)
    amps = fwht(np.exp(1j * phi)) / (1 << g.n)
    return amps


def expval_zA(state: np.ndarray, A: QubitSubset) -> float:
    """<Z_A> = sum_z (-1)^{sum_{i in A} z_i} |amp_z|^2."""
    size = state.shape[0]
    n = size.bit_length() - 1
    if A.n != n:
        raise DimensionError(f"subset n={A.n} does not match state n={n}")
    zs = np.arange(size, dtype=np.uint64)
    parity = np.bitwise_count(zs & np.uint64(A.mask())) & np.uint64(1)
    signs = 1.0 - 2.0 * parity.astype(np.float64)
    return float(signs @ np.abs(state) ** 2)


def model_distribution(state: np.ndarray) -> DistributionTable:
    return DistributionTable(np.abs(state) ** 2)


def all_correlators(dist: DistributionTable) -> np.ndarray:
    """z_A for every subset at once: the Walsh-Hadamard transform of the table."""
    return fwht(dist.probs)


def sample(dist: DistributionTable, count: int, seed: int) -> np.ndarray:
    """Draw bit-string rows (count, n) by inverse CDF, deterministic per seed."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    picks = np.searchsorted(cdf, rng.random(count), side="right")
    n = dist.n
    rows = np.empty((count, n), dtype=np.uint8)
    for q in range(n):
        rows[:, q] = (picks >> q) & 1
    return rows
