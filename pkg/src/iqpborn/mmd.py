"""MMD loss in three realizations, plus gradients and curvature analysis.

The loss is a weighted sum over qubit subsets of squared correlator
differences; with a Gaussian kernel of bandwidth sigma the subset weights
form the Bernoulli product measure with per-qubit inclusion probability
p_sigma = (1 - exp(-1/(2 sigma^2))) / 2. The subset form and the kernel
two-sample form are exactly equal, which the tests exercise as an identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .correlators import EstimatorBudget, z_and_grad_mc_sparse, z_mc
from .datasets import TargetStats
from .errors import CapacityError, ConfigError, DimensionError
from .oracle import DistributionTable, build_state, fwht, phase_vector
from .topology import GeneratorIndex, InteractionGraph, QubitSubset

SUBSET_SUM_LIMIT_DEFAULT = 14


@dataclass(frozen=True)
class MMDConfig:
    """Bandwidth sigma plus qubit count; p_sigma is always derived, never stored."""

    sigma: float
    n: int

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"bandwidth must be positive and finite, got {self.sigma}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")

    @property
    def p_sigma(self) -> float:
        return (1.0 - math.exp(-1.0 / (2.0 * self.sigma**2))) / 2.0

    @classmethod
    def low_body(cls, n: int) -> "MMDConfig":
        """The sigma = sqrt(n) regime that emphasizes low-body correlators."""
        return cls(math.sqrt(n), n)


def weight(cfg: MMDConfig, size: int) -> float:
    """w_A for |A| = size: (1-p)^(n-size) p^size."""
    if not 0 <= size <= cfg.n:
        raise ConfigError(f"|A|={size} out of range for n={cfg.n}")
    p = cfg.p_sigma
    return (1.0 - p) ** (cfg.n - size) * p**size


def weights_by_size(cfg: MMDConfig) -> np.ndarray:
    p = cfg.p_sigma
    ks = np.arange(cfg.n + 1)
    return (1.0 - p) ** (cfg.n - ks) * p**ks


@dataclass(frozen=True)
class LossEstimate:
    value: float
    std_error: float
    n_subsets: int = 0
    breakdown: dict | None = None


@dataclass(frozen=True)
class MCLossConfig:
    """Budgets for the stochastic loss: subset draws and z samples per replica."""

    subsets: int
    z_samples: int
    seed: int
    chunk: int = 1024

    def __post_init__(self):
        if self.subsets < 1 or self.z_samples < 1:
            raise ConfigError("subsets and z_samples must be >= 1")


@dataclass(frozen=True)
class CurvatureReport:
    alpha: int
    total: float
    mismatch: float
    sensitivity: float


def _check_exact_capacity(n: int, limit: int) -> None:
    if n > limit:
        raise CapacityError(f"2^n subset sum limited to n <= {limit}, got n={n}")


def _popcounts(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)


def model_correlators_all(g: InteractionGraph, idx: GeneratorIndex, theta,
                          *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> np.ndarray:
    """z_A for every subset mask via one statevector pass."""
    _check_exact_capacity(g.n, limit)
    state = build_state(g, idx, theta, limit=limit)
    return fwht(np.abs(state) ** 2)


def loss_exact_subsets(g: InteractionGraph, idx: GeneratorIndex, theta,
                       target: TargetStats, cfg: MMDConfig,
                       *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> float:
    """Exact loss: sum over all 2^n subsets of w_A (z_A - t_A)^2."""
    if target.n != g.n or cfg.n != g.n:
        raise DimensionError("graph, target, and config qubit counts must agree")
    _check_exact_capacity(g.n, limit)
    z_all = model_correlators_all(g, idx, theta, limit=limit)
    t_all = target.all_correlators()
    w_all = weights_by_size(cfg)[_popcounts(g.n)]
    return float(w_all @ (z_all - t_all) ** 2)


def loss_exact_kernel(p_model: DistributionTable, p_target: DistributionTable,
                      cfg: MMDConfig, *, limit: int = 20) -> float:
    """Kernel two-sample form: sum_{x,y} d(x) k(x,y) d(y), d = p - q.

    The Gaussian kernel on bit strings factorizes per bit (factor 1 for
    equal bits, 1 - 2 p_sigma for different bits), so k d is applied one
    bit axis at a time. This route never touches correlators.
    """
    n = p_model.n
    if p_target.n != n or cfg.n != n:
        raise DimensionError("tables and config must share n")
    if n > limit:
        raise CapacityError(f"kernel form limited to n <= {limit}")
    d = p_model.probs - p_target.probs
    fac = 1.0 - 2.0 * cfg.p_sigma
    kd = d.copy()
    h = 1
    while h < (1 << n):
        b = kd.reshape(-1, 2, h)
        top = b[:, 0] + fac * b[:, 1]
        bot = fac * b[:, 0] + b[:, 1]
        b[:, 0] = top
        b[:, 1] = bot
        h *= 2
    return float(d @ kd)


def _subset_masks(cfg: MMDConfig, count: int, seed: int) -> list[int]:
    """Subsets drawn from the w_A measure: each qubit included Bernoulli(p_sigma)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 101)))
    incl = rng.random((count, cfg.n)) < cfg.p_sigma
    masks = []
    for row in incl:
        mask = 0
        for q in np.nonzero(row)[0]:
            mask |= 1 << int(q)
        masks.append(mask)
    return masks


def _replica_seed(seed: int, i: int, replica: int) -> int:
    ss = np.random.SeedSequence(entropy=(int(seed), 202, int(i), int(replica)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _replica_targets(target: TargetStats) -> tuple[TargetStats, TargetStats]:
    if target.kind == "empirical":
        return target.halved("A"), target.halved("B")
    return target, target


def loss_mc(g: InteractionGraph, idx: GeneratorIndex, theta, target: TargetStats,
            cfg: MMDConfig, mc: MCLossConfig, *, z_engine: str = "mc") -> LossEstimate:
    """Unbiased stochastic loss over sampled subsets.

    Each drawn subset contributes (z1 - t1)(z2 - t2) built from two fully
    independent replicas (separate z batches, disjoint data halves), so the
    expectation is exactly sum_A w_A (z_A - t_A)^2. Values are not clamped;
    small negative estimates are legal and reported as-is.
    """
    est, _ = _loss_mc_impl(g, idx, theta, target, cfg, mc, want_grad=False,
                           z_engine=z_engine)
    return est


def loss_and_gradient_mc(g: InteractionGraph, idx: GeneratorIndex, theta,
                         target: TargetStats, cfg: MMDConfig, mc: MCLossConfig,
                         *, z_engine: str = "mc") -> tuple[LossEstimate, np.ndarray]:
    """One subset batch yielding the loss estimate and the full loss gradient.

    The gradient estimate pairs the replica-1 correlator gradient with the
    replica-2 difference, keeping both estimators unbiased.
    """
    return _loss_mc_impl(g, idx, theta, target, cfg, mc, want_grad=True,
                         z_engine=z_engine)


def _loss_mc_impl(g, idx, theta, target, cfg, mc, *, want_grad, z_engine):
    if target.n != g.n or cfg.n != g.n:
        raise DimensionError("graph, target, and config qubit counts must agree")
    theta = np.asarray(theta, dtype=np.float64)
    t1_stats, t2_stats = _replica_targets(target)
    masks = _subset_masks(cfg, mc.subsets, mc.seed)
    vals = np.zeros(mc.subsets)
    grad = np.zeros(idx.m) if want_grad else None
    by_size: dict[int, list] = {}
    z_table = None
    if z_engine == "exact":
        # same transform route as exact targets, so a matching model gives
        # exactly zero differences
        z_table = model_correlators_all(g, idx, theta)
    for i, mask in enumerate(masks):
        size = int(mask).bit_count()
        if mask == 0:
            by_size.setdefault(0, []).append(0.0)
            continue
        A = QubitSubset.from_mask(g.n, mask)
        t1 = t1_stats.t(A)
        t2 = t2_stats.t(A)
        gpos = gvals = None
        if z_engine == "exact":
            z1 = z2 = float(z_table[mask])
            if want_grad:
                from .correlators import grad_z

                gpos = np.arange(idx.m)
                gvals = grad_z(g, idx, theta, A)
        elif z_engine == "mc":
            b1 = EstimatorBudget(mc.z_samples, seed=_replica_seed(mc.seed, i, 1), chunk=mc.chunk)
            b2 = EstimatorBudget(mc.z_samples, seed=_replica_seed(mc.seed, i, 2), chunk=mc.chunk)
            if want_grad:
                est1, gpos, gvals = z_and_grad_mc_sparse(g, idx, theta, A, b1)
                z1 = est1.value
            else:
                z1 = z_mc(g, idx, theta, A, b1).value
            z2 = z_mc(g, idx, theta, A, b2).value
        else:
            raise ConfigError(f"unknown z engine {z_engine!r}")
        vals[i] = (z1 - t1) * (z2 - t2)
        if want_grad:
            grad[gpos] += 2.0 * gvals * (z2 - t2)
        by_size.setdefault(size, []).append(vals[i])
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(mc.subsets)) if mc.subsets > 1 else 0.0
    breakdown = {k: (float(np.mean(v)), len(v)) for k, v in sorted(by_size.items())}
    if want_grad:
        grad /= mc.subsets
    return LossEstimate(value, se, mc.subsets, breakdown), grad


def _generator_masks(g: InteractionGraph, idx: GeneratorIndex) -> np.ndarray:
    masks = np.empty(idx.m, dtype=np.int64)
    for pos, lab in enumerate(idx.labels):
        mask = 0
        for q in lab.qubits:
            mask |= 1 << q
        masks[pos] = mask
    return masks


def loss_gradient(g: InteractionGraph, idx: GeneratorIndex, theta,
                  target: TargetStats, cfg: MMDConfig, engine="exact",
                  *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> np.ndarray:
    """Gradient of the loss: sum_A 2 w_A g_A (z_A - t_A), all m components.

    engine="exact" evaluates the full subset sum analytically via transforms;
    pass an MCLossConfig for the stochastic estimator.
    """
    if isinstance(engine, MCLossConfig):
        _, grad = loss_and_gradient_mc(g, idx, theta, target, cfg, engine)
        return grad
    if engine != "exact":
        raise ConfigError(f"unknown engine {engine!r}")
    if target.n != g.n or cfg.n != g.n:
        raise DimensionError("graph, target, and config qubit counts must agree")
    _check_exact_capacity(g.n, limit)
    n = g.n
    size = 1 << n
    phi = phase_vector(g, idx, theta)
    u = np.exp(1j * phi)
    amp = fwht(u) / size
    z_all = fwht(np.abs(amp) ** 2)
    t_all = target.all_correlators()
    w_all = weights_by_size(cfg)[_popcounts(n)]
    residual = 2.0 * w_all * (z_all - t_all)
    v = fwht(fwht(residual) * np.conj(amp))
    im = np.imag(v * u)
    grad_by_mask = -(2.0 / size) * fwht(im)
    return grad_by_mask[_generator_masks(g, idx)]


def _grad_all_for_alpha(g, idx, theta, alpha: int) -> np.ndarray:
    """g_A^{(alpha)} for every subset mask via one transform pass."""
    n = g.n
    size = 1 << n
    phi = phase_vector(g, idx, theta)
    u = np.exp(1j * phi)
    amp = fwht(u) / size
    mask_a = int(_generator_masks(g, idx)[alpha])
    ys = np.arange(size, dtype=np.uint64)
    sigma = 1.0 - 2.0 * (np.bitwise_count(ys & np.uint64(mask_a)) & np.uint64(1)).astype(float)
    damp = 1j * fwht(sigma * u) / size
    dp = 2.0 * np.real(np.conj(amp) * damp)
    return fwht(dp)


def _anticommuting_subset_mask_filter(g, idx, alpha: int, n: int) -> np.ndarray:
    """Boolean filter over subset masks A with alpha in the anti-commuting set."""
    lab = idx.labels[alpha]
    masks = np.arange(1 << n, dtype=np.uint64)
    if not lab.is_pair:
        return ((masks >> np.uint64(lab.qubits[0])) & np.uint64(1)).astype(bool)
    bj = ((masks >> np.uint64(lab.qubits[0])) & np.uint64(1)).astype(bool)
    bk = ((masks >> np.uint64(lab.qubits[1])) & np.uint64(1)).astype(bool)
    return bj ^ bk


def curvature(g: InteractionGraph, idx: GeneratorIndex, theta, target: TargetStats,
              cfg: MMDConfig, alpha: int, *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> CurvatureReport:
    """Second derivative of the loss along one parameter, decomposed as
    data-mismatch plus model-sensitivity contributions."""
    if target.n != g.n or cfg.n != g.n:
        raise DimensionError("graph, target, and config qubit counts must agree")
    _check_exact_capacity(g.n, limit)
    n = g.n
    z_all = model_correlators_all(g, idx, theta, limit=limit)
    t_all = target.all_correlators()
    g_all = _grad_all_for_alpha(g, idx, theta, alpha)
    w_all = weights_by_size(cfg)[_popcounts(n)]
    keep = _anticommuting_subset_mask_filter(g, idx, alpha, n)
    mismatch = float(np.sum(2.0 * w_all[keep] * 4.0 * z_all[keep] * (t_all[keep] - z_all[keep])))
    sensitivity = float(np.sum(2.0 * w_all[keep] * g_all[keep] ** 2))
    return CurvatureReport(alpha, mismatch + sensitivity, mismatch, sensitivity)


def _mask_products(values: np.ndarray) -> np.ndarray:
    """prod_{j in A} values[j] for every subset mask."""
    n = len(values)
    out = np.ones(1 << n)
    for q in range(n):
        step = 1 << q
        out = out.reshape(-1, 2 * step)
        out[:, step:] = out[:, :step] * values[q]
        out = out.ravel()
    return out


def curvature_closed_identity(target: TargetStats, cfg: MMDConfig, alpha_qubit: int,
                              *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> float:
    """Closed form at the identity center: -sum_{A owns alpha} 8 w_A (1 - t_A)."""
    n = cfg.n
    _check_exact_capacity(n, limit)
    t_all = target.all_correlators()
    w_all = weights_by_size(cfg)[_popcounts(n)]
    masks = np.arange(1 << n, dtype=np.uint64)
    keep = ((masks >> np.uint64(alpha_qubit)) & np.uint64(1)).astype(bool)
    return float(-np.sum(8.0 * w_all[keep] * (1.0 - t_all[keep])))


def curvature_closed_unbiased(cfg: MMDConfig) -> float:
    """At the unbiased center the curvature is sensitivity-only: 8 w_{alpha}."""
    return 8.0 * weight(cfg, 1)


def curvature_closed_marginal(target: TargetStats, cfg: MMDConfig, alpha_qubit: int,
                              *, limit: int = SUBSET_SUM_LIMIT_DEFAULT) -> float:
    """Closed form at the marginal-matching center.

    sum_{A owns alpha} 8 w_A [ (t_A - prod t_j) prod t_j + (1-t_alpha^2) prod_{j != alpha} t_j^2 ].
    """
    n = cfg.n
    _check_exact_capacity(n, limit)
    t_all = target.all_correlators()
    singles = np.array([target.t_single(j) for j in range(n)])
    prod_t = _mask_products(singles)
    prod_t2 = _mask_products(singles**2)
    w_all = weights_by_size(cfg)[_popcounts(n)]
    masks = np.arange(1 << n, dtype=np.uint64)
    keep = ((masks >> np.uint64(alpha_qubit)) & np.uint64(1)).astype(bool)
    t_a = singles[alpha_qubit]
    mismatch = (t_all[keep] - prod_t[keep]) * prod_t[keep]
    # strip alpha from the squared product by mask (dividing is unsafe at t_alpha = 0)
    rest_masks = masks[keep] ^ np.uint64(1 << alpha_qubit)
    sens = (1.0 - t_a**2) * prod_t2[rest_masks.astype(np.int64)]
    return float(np.sum(8.0 * w_all[keep] * (mismatch + sens)))


def curvature_truncated2(target: TargetStats, cfg: MMDConfig, alpha_qubit: int,
                         center: str) -> float:
    """Loss curvature truncated to correlators of weight at most 2.

    center="identity" returns the magnitude form (every term nonnegative);
    center="marginal" returns the signed value. Works at any n since only
    one- and two-body target stats enter.
    """
    n = cfg.n
    p = cfg.p_sigma
    lead = 8.0 * p * (1.0 - p) ** (n - 1)
    sub = 8.0 * p**2 * (1.0 - p) ** (n - 2) if n >= 2 else 0.0
    t_a = target.t_single(alpha_qubit)
    if center == "identity":
        acc = lead * (1.0 - t_a)
        for j in range(n):
            if j != alpha_qubit:
                acc += sub * (1.0 - target.t_pair(min(j, alpha_qubit), max(j, alpha_qubit)))
        return acc
    if center == "marginal":
        acc = lead * (1.0 - t_a**2)
        for j in range(n):
            if j == alpha_qubit:
                continue
            t_j = target.t_single(j)
            t_aj = target.t_pair(min(j, alpha_qubit), max(j, alpha_qubit))
            acc += sub * ((t_aj - t_a * t_j) * t_a * t_j + (1.0 - t_a**2) * t_j**2)
        return acc
    raise ConfigError(f"unknown center {center!r}")


def report_json(value: float, std_error: float, cfg: MMDConfig, seed) -> str:
    return json.dumps(
        {
            "value": value,
            "std_error": std_error,
            "n": cfg.n,
            "sigma": cfg.sigma,
            "p_sigma": cfg.p_sigma,
            "seed": seed,
        }
    )
