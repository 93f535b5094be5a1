"""Variance/curvature experiment engines and closed-form predictions.

Covers the full-angle correlator law Var[z_A] = 2^(-d_A), the loss
concentration ceiling 5/2^n, the identity-patch and curvature-driven
variance floors with their explicit constants, and the scan machinery
behind the variance-versus-scale and curvature-sweep experiments.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .datasets import TargetStats, covariances
from .errors import CapacityError, ConfigError, InvalidObservableError, PreconditionError
from .initializers import InitStrategy, center as init_center
from .mmd import (
    MCLossConfig,
    MMDConfig,
    curvature,
    curvature_closed_identity,
    curvature_closed_marginal,
    curvature_closed_unbiased,
    loss_mc,
    weights_by_size,
)
from .topology import (
    GeneratorIndex,
    InteractionGraph,
    QubitSubset,
    light_cone,
    light_cone_struct,
)


def var_correlator_predicted(g: InteractionGraph, A: QubitSubset) -> float:
    """Full-angle variance of z_A: 2^(-d_A) with d_A the Pauli light cone."""
    return 2.0 ** (-light_cone(g, A))


def variance_se(var_hat: float, n_draws: int) -> float:
    """Normal-theory standard error of a sample variance."""
    if n_draws < 2:
        return float("inf")
    return var_hat * math.sqrt(2.0 / (n_draws - 1))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    draws: int


def _patch_thetas(rng, center_sub: np.ndarray, r: float, count: int) -> np.ndarray:
    return center_sub[None, :] + rng.uniform(-r, r, (count, len(center_sub)))


def var_correlator_empirical(g: InteractionGraph, idx: GeneratorIndex, A: QubitSubset,
                             draws: int, seed: int, *, r: float = math.pi / 2,
                             center_theta: np.ndarray | None = None,
                             limit: int = 24) -> MomentEstimate:
    """Sample mean/variance of z_A over uniform patch draws (exact evaluation).

    Only the anti-commuting parameters are drawn; the others never enter z_A.
    """
    if A.is_empty:
        raise InvalidObservableError("variance of the trivial correlator is 0")
    lc = light_cone_struct(g, idx, A)
    if lc.d > limit:
        raise CapacityError(f"light cone d_A={lc.d} exceeds exact batch limit {limit}")
    c_sub = np.zeros(lc.m_A) if center_theta is None else np.asarray(center_theta)[lc.positions]
    vals = np.empty(draws)
    chunk = 1 << 14
    for ci, start in enumerate(range(0, draws, chunk)):
        count = min(chunk, draws - start)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 31, ci)))
        thetas = _patch_thetas(rng, c_sub, r, count)
        vals[start : start + count] = kernels.exact_corr_batch(
            thetas, lc.srow, lc.prow_a, lc.prow_b, lc.d
        )
    mean = float(vals.mean())
    var = float(vals.var(ddof=1))
    return MomentEstimate(mean, var, float(vals.std(ddof=1) / math.sqrt(draws)),
                          variance_se(var, draws), draws)


@dataclass(frozen=True)
class CrossMomentEstimate:
    mean_ab: float       # E[z_A z_B]
    se_ab: float
    mean_aab: float      # E[z_A^2 z_B]
    se_aab: float
    draws: int


def cross_moments_empirical(g: InteractionGraph, idx: GeneratorIndex, A: QubitSubset,
                            B: QubitSubset, draws: int, seed: int,
                            *, limit: int = 24) -> CrossMomentEstimate:
    """Joint full-angle moments of two correlators over shared parameter draws."""
    lca = light_cone_struct(g, idx, A)
    lcb = light_cone_struct(g, idx, B)
    if max(lca.d, lcb.d) > limit:
        raise CapacityError("light cone exceeds exact batch limit")
    prod_ab = np.empty(draws)
    prod_aab = np.empty(draws)
    chunk = 1 << 13
    r = math.pi / 2
    for ci, start in enumerate(range(0, draws, chunk)):
        count = min(chunk, draws - start)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 37, ci)))
        thetas = rng.uniform(-r, r, (count, idx.m))
        za = kernels.exact_corr_batch(
            np.ascontiguousarray(thetas[:, lca.positions]), lca.srow, lca.prow_a, lca.prow_b, lca.d
        )
        zb = kernels.exact_corr_batch(
            np.ascontiguousarray(thetas[:, lcb.positions]), lcb.srow, lcb.prow_a, lcb.prow_b, lcb.d
        )
        prod_ab[start : start + count] = za * zb
        prod_aab[start : start + count] = za * za * zb
    return CrossMomentEstimate(
        float(prod_ab.mean()), float(prod_ab.std(ddof=1) / math.sqrt(draws)),
        float(prod_aab.mean()), float(prod_aab.std(ddof=1) / math.sqrt(draws)),
        draws,
    )


def mmd_concentration_bound(n: int) -> float:
    """All-to-all full-angle ceiling: Var[loss] <= 5 / 2^n."""
    return 5.0 / 2.0**n


def restricted_topology_floor(g: InteractionGraph, target: TargetStats, cfg: MMDConfig,
                              k_max: int) -> float:
    """Certified partial lower bound on the full-angle loss variance.

    Sums 4 w_A^2 t_A^2 2^(-min(n, (K+1)|A|)) over nonempty subsets with
    |A| <= k_max; every term is nonnegative, so truncation keeps it a valid
    lower bound. K is the maximum degree of the graph.
    """
    import itertools

    n = g.n
    K = g.max_degree()
    w = weights_by_size(cfg)
    total = 0.0
    for k in range(1, k_max + 1):
        expo = min(n, (K + 1) * k)
        for combo in itertools.combinations(range(n), k):
            t = target.t(QubitSubset(n, combo))
            total += 4.0 * w[k] ** 2 * t**2 * 2.0 ** (-expo)
    return total


def patch_floor_constant() -> float:
    """The decay constant c = -2 ln(sinc 2) of the identity-patch floor."""
    return -2.0 * math.log(math.sin(2.0) / 2.0)


def identity_patch_floor(m_A: int, r: float) -> float:
    """Variance floor for z_A in an identity patch: (16 r^4 m_A / 45) e^(-c m_A r^2)."""
    if not 0.0 <= r <= 1.0:
        raise PreconditionError(f"floor requires r in [0, 1], got {r}")
    if m_A < 1:
        raise PreconditionError("m_A must be >= 1")
    c = patch_floor_constant()
    return (16.0 * r**4 * m_A / 45.0) * math.exp(-c * m_A * r**2)


@dataclass(frozen=True)
class PatchBound:
    """Admissible radius and variance floor of the curvature-to-variance bound."""

    guaranteed: bool
    c_alpha: float
    delta: float
    a: float
    gamma: float
    beta1: float
    beta2: float
    r_max: float

    def floor(self, r: float) -> float:
        if not self.guaranteed:
            return 0.0
        if r > self.r_max + 1e-15:
            raise PreconditionError(f"r={r} exceeds admissible r_max={self.r_max}")
        return (1.0 - self.delta) * (r**4 / 45.0) * self.c_alpha**2


def curvature_patch_bound(cfg: MMDConfig, m: int, c_alpha: float, delta: float) -> PatchBound:
    """Constants and admissible radius of the curvature-to-variance bound.

    a = 4 p (1-p), gamma = 4, beta1 = 192 (m-1) p^2 (1-p)^2, beta2 = a^2 gamma^6 / 6;
    r^2 <= delta c^2 / (2 beta1 c + beta2) and r <= 3/(2 gamma) = 3/8.
    A nonpositive curvature yields an explicit no-guarantee result.
    """
    if not 0.0 < delta <= 3.0 / 8.0:
        raise ConfigError("delta must lie in (0, 3/8]")
    p = cfg.p_sigma
    a = 4.0 * p * (1.0 - p)
    gamma = 4.0
    beta1 = 192.0 * (m - 1) * p**2 * (1.0 - p) ** 2
    beta2 = a**2 * gamma**6 / 6.0
    if c_alpha <= 0.0:
        return PatchBound(False, c_alpha, delta, a, gamma, beta1, beta2, 0.0)
    r_max = min(
        math.sqrt(delta * c_alpha**2 / (2.0 * beta1 * c_alpha + beta2)),
        3.0 / (2.0 * gamma),
    )
    return PatchBound(True, c_alpha, delta, a, gamma, beta1, beta2, r_max)


def loss_exact_batch(g: InteractionGraph, idx: GeneratorIndex, thetas: np.ndarray,
                     target: TargetStats, cfg: MMDConfig, *, limit: int = 16) -> np.ndarray:
    """Exact loss for a batch of parameter vectors.

    Evaluates the kernel two-sample form (identical to the subset sum) with
    the compiled kernel when available.
    """
    n = g.n
    if n > limit:
        raise CapacityError(f"exact batch loss limited to n <= {limit}")
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    if len(g.edges):
        earr = np.asarray(g.edges, dtype=np.int64)
        e0, e1 = np.ascontiguousarray(earr[:, 0]), np.ascontiguousarray(earr[:, 1])
    else:
        e0 = e1 = np.zeros(0, dtype=np.int64)
    q_probs = target.table().probs
    fac = 1.0 - 2.0 * cfg.p_sigma
    return kernels.exact_loss_batch(thetas, e0, e1, n, q_probs, fac)


@dataclass(frozen=True)
class ScanRow:
    scale: float
    draws: int
    var: float
    se: float


@dataclass(frozen=True)
class VarianceScan:
    strategy: str
    n: int
    rows: tuple[ScanRow, ...]
    engine: str

    @property
    def argmax_scale(self) -> float:
        best = max(self.rows, key=lambda r: r.var)
        return best.scale

    @property
    def max_var(self) -> float:
        return max(r.var for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("strategy,n,scale,draws,var,se\n")
        for r in self.rows:
            buf.write(f"{self.strategy},{self.n},{r.scale:.10g},{r.draws},{r.var:.12g},{r.se:.12g}\n")
        return buf.getvalue()


def _scan_draw_batch(strategy: InitStrategy, scale: float, center_theta, pair_scales,
                     g, idx, seed: int, scale_idx: int, chunk_idx: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 11, scale_idx, chunk_idx)))
    r = (math.pi / 2.0) * scale
    if strategy.variant == "covariance":
        thetas = np.tile(center_theta, (count, 1))
        thetas[:, g.n :] = pair_scales[None, :] * rng.uniform(-r, r, (count, len(g.edges)))
        return thetas
    return center_theta[None, :] + rng.uniform(-r, r, (count, idx.m))


def variance_scan(strategy: InitStrategy, g: InteractionGraph, idx: GeneratorIndex,
                  target: TargetStats, cfg: MMDConfig, scales, draws_per_scale: int,
                  seed: int, *, engine="exact", mc_subsets: int = 0, mc_z_samples: int = 0,
                  limit: int = 16, workers: int = 1) -> VarianceScan:
    """Per-scale loss variance over i.i.d. patch draws of the strategy.

    engine="exact" evaluates the exact loss per draw (small n); engine="mc"
    evaluates the stochastic estimator with the given budgets, matching the
    quantity plotted in large-scale studies. Draw chunks carry their own
    seed streams and land in indexed slots, so results are identical for
    any worker count.
    """
    center_theta = init_center(strategy, g, idx, target if strategy.needs_target else None)
    pair_scales = None
    if strategy.variant == "covariance":
        cov = covariances(target)
        if cov.C_max > 0:
            pair_scales = np.array([cov.C[j, k] / cov.C_max for j, k in g.edges])
        else:
            pair_scales = np.zeros(len(g.edges))
    if engine == "exact":
        target.table()  # build shared read-only state before workers start
    elif engine == "mc":
        target.halved("A")
        target.halved("B")
    else:
        raise ConfigError(f"unknown scan engine {engine!r}")

    chunk = 2048

    def run_chunk(si, s, ci, start, count, out):
        thetas = _scan_draw_batch(strategy, float(s), center_theta, pair_scales,
                                  g, idx, seed, si, ci, count)
        if engine == "exact":
            out[start : start + count] = loss_exact_batch(g, idx, thetas, target, cfg,
                                                          limit=limit)
        else:
            for k in range(count):
                mc = MCLossConfig(mc_subsets, mc_z_samples,
                                  seed=int(np.random.SeedSequence(
                                      entropy=(int(seed), 13, si, start + k)
                                  ).generate_state(1, np.uint64)[0]))
                out[start + k] = loss_mc(g, idx, thetas[k], target, cfg, mc).value

    tasks = []
    buffers: dict[int, np.ndarray] = {}
    for si, s in enumerate(scales):
        if s == 0.0 and engine == "exact":
            continue
        buffers[si] = np.empty(draws_per_scale)
        for ci, start in enumerate(range(0, draws_per_scale, chunk)):
            count = min(chunk, draws_per_scale - start)
            tasks.append((si, float(s), ci, start, count, buffers[si]))

    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda t: run_chunk(*t), tasks))
    else:
        for t in tasks:
            run_chunk(*t)

    rows = []
    for si, s in enumerate(scales):
        if s == 0.0 and engine == "exact":
            rows.append(ScanRow(float(s), draws_per_scale, 0.0, 0.0))
            continue
        var = float(buffers[si].var(ddof=1))
        rows.append(ScanRow(float(s), draws_per_scale, var, variance_se(var, draws_per_scale)))
    return VarianceScan(strategy.variant, g.n, tuple(rows), engine)


@dataclass(frozen=True)
class CurvatureSweep:
    center: str
    reports: tuple
    closed: tuple[float, ...]
    argmax_alpha: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("alpha,total,mismatch,sensitivity\n")
        for r in self.reports:
            buf.write(f"{r.alpha},{r.total:.12g},{r.mismatch:.12g},{r.sensitivity:.12g}\n")
        return buf.getvalue()


def curvature_report_sweep(strategy: InitStrategy, g: InteractionGraph, idx: GeneratorIndex,
                           target: TargetStats, cfg: MMDConfig,
                           *, limit: int = 14) -> CurvatureSweep:
    """Exact curvature per single-qubit direction at the strategy's center,
    paired with the matching closed form."""
    center_theta = init_center(strategy, g, idx, target if strategy.needs_target else None)
    reports = []
    closed = []
    for alpha in range(g.n):
        reports.append(curvature(g, idx, center_theta, target, cfg, alpha, limit=limit))
        if strategy.variant in ("identity", "full"):
            closed.append(curvature_closed_identity(target, cfg, alpha, limit=limit))
        elif strategy.variant == "unbiased":
            closed.append(curvature_closed_unbiased(cfg))
        else:
            closed.append(curvature_closed_marginal(target, cfg, alpha, limit=limit))
    argmax = max(range(g.n), key=lambda a: abs(reports[a].total))
    return CurvatureSweep(strategy.variant, tuple(reports), tuple(closed), argmax)
