"""Initialization centers and patch draws for the five strategies.

Strategies: full-angle random, identity, unbiased (singles at pi/4),
marginal matching (cos(2 theta_j) = t_j, pairs 0), and the covariance
scheme (marginal singles held fixed, pair draws rescaled by target
covariances C_jk / C_max). Patch half-width is r = (pi/2) s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlators import z_product
from .datasets import TargetStats, covariances
from .errors import ConfigError, DataError
from .topology import GeneratorIndex, InteractionGraph, QubitSubset

VARIANTS = ("full", "identity", "unbiased", "marginal", "covariance")


@dataclass(frozen=True)
class InitStrategy:
    variant: str
    scale: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown init variant {self.variant!r}")
        if not 0.0 <= self.scale <= 1.0:
            raise ConfigError(f"scale must lie in [0, 1], got {self.scale}")
        if self.variant == "full" and self.scale != 1.0:
            raise ConfigError("full-angle initialization forces scale 1")

    @property
    def half_width(self) -> float:
        return (math.pi / 2.0) * self.scale

    @property
    def needs_target(self) -> bool:
        return self.variant in ("marginal", "covariance")


@dataclass(frozen=True)
class PatchDraw:
    center: np.ndarray
    sample: np.ndarray
    seed: int
    notes: tuple[str, ...] = ()


def center(strategy: InitStrategy, g: InteractionGraph, idx: GeneratorIndex,
           target: TargetStats | None = None) -> np.ndarray:
    theta = np.zeros(idx.m)
    if strategy.variant in ("full", "identity"):
        return theta
    if strategy.variant == "unbiased":
        theta[: g.n] = math.pi / 4.0
        return theta
    if target is None:
        raise ConfigError(f"{strategy.variant} initialization needs target stats")
    if target.n != g.n:
        raise DataError(f"target has n={target.n}, graph has n={g.n}")
    for j in range(g.n):
        t_j = target.t_single(j)
        if abs(t_j) > 1.0:
            raise DataError(f"corrupt one-body correlator t_{j}={t_j}")
        # branch with theta in [0, pi/2]: sin(2 theta) = sqrt(1 - t^2) >= 0
        theta[j] = math.acos(t_j) / 2.0
    return theta


def draw(strategy: InitStrategy, center_theta: np.ndarray, target: TargetStats | None,
         g: InteractionGraph, idx: GeneratorIndex, seed: int) -> PatchDraw:
    """Componentwise uniform patch draw, deterministic per seed."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 7)))
    r = strategy.half_width
    notes: tuple[str, ...] = ()
    if strategy.variant == "covariance":
        if target is None:
            raise ConfigError("covariance initialization needs target stats")
        sample = center_theta.copy()  # single-qubit angles stay fixed
        cov = covariances(target)
        if cov.C_max > 0.0:
            scale_jk = np.array([cov.C[j, k] / cov.C_max for j, k in g.edges])
        else:
            scale_jk = np.zeros(len(g.edges))
            notes = ("C_max is zero; all pair draws forced to 0",)
        sample[g.n :] = scale_jk * rng.uniform(-r, r, len(g.edges))
    else:
        sample = center_theta + rng.uniform(-r, r, idx.m)
    return PatchDraw(center_theta.copy(), sample, seed, notes)


@dataclass(frozen=True)
class MarginalMatchReport:
    passed: bool
    tolerance: float
    offenders: tuple[tuple[int, float, float], ...] = ()  # (qubit, z_j, t_j)


def verify_marginal_match(g: InteractionGraph, idx: GeneratorIndex,
                          center_theta: np.ndarray, target: TargetStats,
                          tol: float = 1e-12) -> MarginalMatchReport:
    """Check z_j(center) == t_j for all j (product form applies: pairs are 0)."""
    bad = []
    for j in range(g.n):
        z_j = z_product(idx, center_theta, QubitSubset(g.n, [j]))
        t_j = target.t_single(j)
        if abs(z_j - t_j) > tol:
            bad.append((j, z_j, t_j))
    return MarginalMatchReport(not bad, tol, tuple(bad))
