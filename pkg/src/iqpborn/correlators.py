"""Model correlators z_A(theta) and their derivatives.

Three interchangeable engines: exact enumeration over the light cone,
the closed product form when all pair angles vanish, and a seeded
Monte-Carlo estimator that scales to hundreds of qubits.

All engines evaluate the same uniform average over bit strings z,

    z_A = mean_z cos(2 * sum_{b in A_A} theta_b * (-1)^{b.z}),

where A_A is the set of generators anti-commuting with Z_A. Only the
light-cone qubits of A enter the signs, so exact enumeration costs
2^{d_A} rather than 2^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .errors import CapacityError, ConfigError, PreconditionError
from .topology import GeneratorIndex, InteractionGraph, QubitSubset, light_cone_struct

EXACT_LIMIT_DEFAULT = 22


@dataclass(frozen=True)
class EstimatorBudget:
    """Budget for the Monte-Carlo engine: sample count, seed, reduction chunk."""

    n_samples: int
    seed: int
    chunk: int = 1024

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.chunk < 1 or (self.chunk & (self.chunk - 1)) != 0:
            raise ConfigError("chunk must be a positive power of two")


@dataclass(frozen=True)
class CorrelatorEstimate:
    value: float
    std_error: float
    n_samples: int


def _theta_array(idx: GeneratorIndex, theta) -> np.ndarray:
    arr = np.ascontiguousarray(theta, dtype=np.float64)
    if arr.shape != (idx.m,):
        raise ConfigError(f"theta has shape {arr.shape}, expected ({idx.m},)")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("theta contains non-finite values")
    return arr


def z_exact(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset,
            *, limit: int = EXACT_LIMIT_DEFAULT) -> float:
    """Exact correlator by enumerating the 2^{d_A} light-cone sign patterns."""
    th = _theta_array(idx, theta)
    if A.is_empty:
        return 1.0
    lc = light_cone_struct(g, idx, A)
    if lc.d > limit:
        raise CapacityError(f"light cone d_A={lc.d} exceeds exact limit {limit}")
    z, _ = kernels.exact_corr(th[lc.positions], lc.srow, lc.prow_a, lc.prow_b, lc.d, False)
    return float(z)


def z_product(idx: GeneratorIndex, theta, A: QubitSubset) -> float:
    """Closed form prod_{j in A} cos(2 theta_j); needs all pair angles exactly 0."""
    th = _theta_array(idx, theta)
    n = idx.graph.n
    if A.n != n:
        raise ConfigError(f"subset n={A.n} does not match graph n={n}")
    if np.any(th[n:] != 0.0):
        raise PreconditionError("z_product requires all pair-generator angles to be 0")
    out = 1.0
    for j in A.members():
        out *= math.cos(2.0 * th[j])
    return out


def z_mc(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset,
         budget: EstimatorBudget) -> CorrelatorEstimate:
    """Unbiased Monte-Carlo estimate over i.i.d. uniform light-cone signs.

    Deterministic given (seed, chunk); per-sample cost O(|A_A|).
    """
    th = _theta_array(idx, theta)
    if A.is_empty:
        return CorrelatorEstimate(1.0, 0.0, budget.n_samples)
    lc = light_cone_struct(g, idx, A)
    total, total_sq, _ = kernels.mc_corr(
        th[lc.positions], lc.srow, lc.prow_a, lc.prow_b, lc.d,
        budget.n_samples, np.uint64(budget.seed & 0xFFFFFFFFFFFFFFFF),
        budget.chunk, False,
    )
    return _estimate(total, total_sq, budget.n_samples)


def _estimate(total: float, total_sq: float, n: int) -> CorrelatorEstimate:
    mean = total / n
    if n > 1:
        var = max(0.0, (total_sq - total * total / n) / (n - 1))
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return CorrelatorEstimate(mean, se, n)


def z_and_grad_mc_sparse(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset,
                         budget: EstimatorBudget) -> tuple[CorrelatorEstimate, np.ndarray, np.ndarray]:
    """Correlator estimate plus its gradient restricted to the anti-commuting
    parameters: returns (estimate, positions, gradient values)."""
    th = _theta_array(idx, theta)
    if A.is_empty:
        return (CorrelatorEstimate(1.0, 0.0, budget.n_samples),
                np.zeros(0, dtype=np.int64), np.zeros(0))
    lc = light_cone_struct(g, idx, A)
    total, total_sq, gsum = kernels.mc_corr(
        th[lc.positions], lc.srow, lc.prow_a, lc.prow_b, lc.d,
        budget.n_samples, np.uint64(budget.seed & 0xFFFFFFFFFFFFFFFF),
        budget.chunk, True,
    )
    return _estimate(total, total_sq, budget.n_samples), lc.positions, gsum / budget.n_samples


def z_and_grad_mc(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset,
                  budget: EstimatorBudget) -> tuple[CorrelatorEstimate, np.ndarray]:
    """One sample batch yielding the correlator estimate and its full gradient.

    The returned gradient has length m with zeros outside the anti-commuting
    set of A.
    """
    est, positions, gvals = z_and_grad_mc_sparse(g, idx, theta, A, budget)
    grad = np.zeros(idx.m)
    grad[positions] = gvals
    return est, grad


def grad_z(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset,
           engine="exact", *, limit: int = EXACT_LIMIT_DEFAULT) -> np.ndarray:
    """Gradient of z_A w.r.t. every parameter (analytic, not parameter-shift).

    Component alpha is 0 whenever generator alpha is outside A_A; otherwise
    it is the z-average of -2 (-1)^{b_alpha.z} sin(2 phi(z)). Pass
    engine="exact" or an EstimatorBudget for the Monte-Carlo engine.
    """
    th = _theta_array(idx, theta)
    grad = np.zeros(idx.m)
    if A.is_empty:
        return grad
    lc = light_cone_struct(g, idx, A)
    if isinstance(engine, EstimatorBudget):
        _, grad = z_and_grad_mc(g, idx, theta, A, engine)
        return grad
    if engine != "exact":
        raise ConfigError(f"unknown engine {engine!r}")
    if lc.d > limit:
        raise CapacityError(f"light cone d_A={lc.d} exceeds exact limit {limit}")
    _, gvals = kernels.exact_corr(th[lc.positions], lc.srow, lc.prow_a, lc.prow_b, lc.d, True)
    grad[lc.positions] = gvals
    return grad


def d2_z(g: InteractionGraph, idx: GeneratorIndex, theta, A: QubitSubset, alpha: int,
         *, limit: int = EXACT_LIMIT_DEFAULT) -> float:
    """Second derivative of z_A w.r.t. one parameter: -4 z_A inside A_A, else 0."""
    if A.is_empty:
        return 0.0
    lc = light_cone_struct(g, idx, A)
    if alpha not in lc.positions:
        return 0.0
    return -4.0 * z_exact(g, idx, theta, A, limit=limit)
