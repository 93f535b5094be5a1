"""Target distributions: ingestion, synthetic generators, and empirical stats.

Bit convention (used everywhere): bit value b contributes (-1)^b to a
parity, so bit 0 maps to +1. Dataset files are plain text, one row of
'0'/'1' characters per line, optionally preceded by a `#n=<int>` header.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .oracle import DistributionTable, fwht
from .topology import QubitSubset


@dataclass(frozen=True)
class BitDataset:
    rows: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint8)
        if rows.ndim != 2:
            raise DataError("dataset rows must be a 2-D bit array")
        if rows.size and rows.max() > 1:
            raise DataError("dataset entries must be 0/1")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def half(self, which: str) -> "BitDataset":
        """Disjoint halves A/B (even/odd rows); their union is the dataset."""
        if which == "A":
            return BitDataset(self.rows[0::2], self.provenance + "|half=A")
        if which == "B":
            return BitDataset(self.rows[1::2], self.provenance + "|half=B")
        raise ConfigError(f"half must be 'A' or 'B', got {which!r}")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#n={self.n}\n")
            for row in self.rows:
                fh.write("".join("1" if b else "0" for b in row) + "\n")

    @classmethod
    def load(cls, path) -> "BitDataset":
        n = None
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for ln in fh:
                ln = ln.strip()
                if not ln:
                    continue
                if ln.startswith("#"):
                    if ln.startswith("#n="):
                        n = int(ln[3:])
                    continue
                rows.append([1 if c == "1" else 0 for c in ln])
        if not rows:
            raise DataError(f"no rows in dataset file {path}")
        arr = np.asarray(rows, dtype=np.uint8)
        if n is not None and arr.shape[1] != n:
            raise DataError(f"row length {arr.shape[1]} does not match header n={n}")
        return cls(arr, provenance=str(path))


class TargetStats:
    """Provider of target correlators t_A with three backends.

    Empirical: parity means over a bit dataset (memoized per subset).
    Exact: sums over a full distribution table.
    Product: t_A = prod_{j in A} t_j from given one-body correlators.
    """

    def __init__(self, kind: str, n: int, *, dataset: BitDataset | None = None,
                 table: DistributionTable | None = None, t_singles=None):
        self.kind = kind
        self.n = n
        self._dataset = dataset
        self._table = table
        self._t_singles = None if t_singles is None else np.asarray(t_singles, dtype=np.float64)
        self._memo: dict[int, float] = {}
        self._all: np.ndarray | None = None

    @classmethod
    def empirical(cls, dataset: BitDataset) -> "TargetStats":
        if dataset.n_rows == 0:
            raise DataError("empirical stats need a nonempty dataset")
        return cls("empirical", dataset.n, dataset=dataset)

    @classmethod
    def exact(cls, table: DistributionTable) -> "TargetStats":
        return cls("exact", table.n, table=table)

    @classmethod
    def product(cls, t_singles) -> "TargetStats":
        t = np.asarray(t_singles, dtype=np.float64)
        if np.any(np.abs(t) > 1.0):
            raise DataError("one-body correlators must lie in [-1, 1]")
        return cls("product", len(t), t_singles=t)

    def halved(self, which: str) -> "TargetStats":
        """Independent half-split view (empirical backend only; exact stats have no halves)."""
        if self.kind != "empirical":
            return self
        if not hasattr(self, "_half_cache"):
            self._half_cache = {}
        got = self._half_cache.get(which)
        if got is None:
            got = TargetStats.empirical(self._dataset.half(which))
            self._half_cache[which] = got
        return got

    def t_mask(self, mask: int) -> float:
        if mask == 0:
            return 1.0
        got = self._memo.get(mask)
        if got is not None:
            return got
        if self.kind == "empirical":
            cols = [q for q in range(self.n) if (mask >> q) & 1]
            parity = self._dataset.rows[:, cols].sum(axis=1) & 1
            val = 1.0 - 2.0 * float(parity.mean())
        elif self.kind == "exact":
            if self._all is None:
                self._all = fwht(self._table.probs)
            val = float(self._all[mask])
        else:
            val = 1.0
            for q in range(self.n):
                if (mask >> q) & 1:
                    val *= float(self._t_singles[q])
        self._memo[mask] = val
        return val

    def t(self, A: QubitSubset) -> float:
        if A.n != self.n:
            raise DimensionError(f"subset n={A.n} does not match stats n={self.n}")
        return self.t_mask(A.mask())

    def t_single(self, j: int) -> float:
        return self.t_mask(1 << j)

    def t_pair(self, j: int, k: int) -> float:
        return self.t_mask((1 << j) | (1 << k))

    def table(self) -> DistributionTable:
        """Full probability table of the target (small n only).

        Empirical stats return the row histogram; product stats build the
        independent-bit table.
        """
        if self._table is not None:
            return self._table
        if self.n > 26:
            raise DataError(f"probability table infeasible at n={self.n}")
        if self.kind == "empirical":
            masks = np.zeros(self._dataset.n_rows, dtype=np.uint64)
            for q in range(self.n):
                masks |= self._dataset.rows[:, q].astype(np.uint64) << np.uint64(q)
            hist = np.bincount(masks.astype(np.int64), minlength=1 << self.n).astype(np.float64)
            self._table = DistributionTable(hist / self._dataset.n_rows)
        else:
            table = np.ones(1)
            for q in range(self.n):
                p0 = (1.0 + self._t_singles[q]) / 2.0
                table = np.concatenate([table * p0, table * (1.0 - p0)])
            self._table = DistributionTable(table)
        return self._table

    def all_correlators(self) -> np.ndarray:
        """t_A for every subset mask; needs n small enough for a 2^n table."""
        if self._all is not None:
            return self._all
        if self.n > 26:
            raise DataError(f"all-subset correlators infeasible at n={self.n}")
        if self.kind == "exact":
            self._all = fwht(self._table.probs)
        elif self.kind == "empirical":
            masks = np.zeros(self._dataset.n_rows, dtype=np.uint64)
            for q in range(self.n):
                masks |= self._dataset.rows[:, q].astype(np.uint64) << np.uint64(q)
            hist = np.bincount(masks.astype(np.int64), minlength=1 << self.n).astype(np.float64)
            self._all = fwht(hist / self._dataset.n_rows)
        else:
            table = np.ones(1)
            for q in range(self.n):
                p0 = (1.0 + self._t_singles[q]) / 2.0
                table = np.concatenate([table * p0, table * (1.0 - p0)])
            self._all = fwht(table)
        return self._all


def synth_product(n: int, marginals, rows: int, seed: int) -> BitDataset:
    """Independent bits: bit j is 0 with probability (1 + t_j)/2."""
    t = _as_marginals(n, marginals)
    rng = np.random.default_rng(seed)
    p_one = (1.0 - t) / 2.0
    data = (rng.random((rows, n)) < p_one[None, :]).astype(np.uint8)
    return BitDataset(data, provenance=f"synth_product(n={n},rows={rows},seed={seed})")


def _as_marginals(n: int, marginals) -> np.ndarray:
    t = np.asarray(marginals, dtype=np.float64)
    if t.ndim == 0:
        t = np.full(n, float(t))
    if t.shape != (n,):
        raise ConfigError(f"need {n} marginals, got shape {t.shape}")
    if np.any(np.abs(t) > 1.0):
        raise ConfigError("marginals must lie in [-1, 1]")
    return t


def _pair_joint(tj: float, tk: float, c: float) -> np.ndarray:
    """Joint distribution over (s_j, s_k) in {+1,-1}^2 with E[s_j s_k] = t_j t_k + c."""
    tjk = tj * tk + c
    probs = np.empty(4)
    for i, (a, b) in enumerate(((1, 1), (1, -1), (-1, 1), (-1, -1))):
        probs[i] = (1.0 + a * tj + b * tk + a * b * tjk) / 4.0
    if np.any(probs < -1e-12):
        raise ConfigError(
            f"planted strength {c} incompatible with marginals ({tj}, {tk})")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _base_marginals(n: int, marginals, flip_prob: float) -> np.ndarray:
    t = _as_marginals(n, marginals)
    if not 0.0 <= flip_prob < 0.5:
        raise ConfigError("flip_prob must lie in [0, 0.5)")
    mu = 1.0 - 2.0 * flip_prob
    base = t / mu
    if np.any(np.abs(base) > 1.0):
        raise ConfigError(f"marginals {t} unreachable with flip_prob={flip_prob}")
    return base


def _check_planted(n: int, planted) -> None:
    used = set()
    for j, k, _ in planted:
        if j == k or not (0 <= j < n and 0 <= k < n):
            raise ConfigError(f"bad planted pair ({j},{k})")
        if j in used or k in used:
            raise ConfigError("planted pairs must be disjoint")
        used.update((j, k))


def _flip_blocks(n: int, flip_prob: float, flip_block_size) -> list[range]:
    if flip_prob == 0.0:
        return []
    size = n if flip_block_size is None else int(flip_block_size)
    if size < 2:
        raise ConfigError("flip_block_size must be >= 2")
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def synth_pairwise(n: int, marginals, planted, rows: int, seed: int,
                   *, flip_prob: float = 0.0, flip_block_size: int | None = None) -> BitDataset:
    """Product base plus correlated XOR flips: planted pairs and optional
    shared block flips.

    ``planted`` is a list of (j, k, c_jk) with disjoint pairs, giving exact
    pair covariances on the pre-flip bits. ``flip_prob`` applies one shared
    flip per row to each block of ``flip_block_size`` consecutive qubits
    (the whole register when the size is None). Flips rescale marginals by
    mu = 1 - 2 q, compensated internally so the requested marginals hold,
    and spread covariance t0_j t0_k (1 - mu^2) over every within-block pair:
    the locally-dense correlation structure of real data. Planted pairs must
    not straddle two flip blocks.
    """
    base = _base_marginals(n, marginals, flip_prob)
    _check_planted(n, planted)
    blocks = _flip_blocks(n, flip_prob, flip_block_size)
    if blocks:
        block_of = {q: i for i, blk in enumerate(blocks) for q in blk}
        for j, k, _ in planted:
            if block_of[j] != block_of[k]:
                raise ConfigError(f"planted pair ({j},{k}) straddles flip blocks")
    rng = np.random.default_rng(seed)
    data = (rng.random((rows, n)) < ((1.0 - base) / 2.0)[None, :]).astype(np.uint8)
    for j, k, c in planted:
        probs = _pair_joint(base[j], base[k], c)
        picks = rng.choice(4, size=rows, p=probs)
        # outcomes ordered (s_j,s_k) = (+,+),(+,-),(-,+),(-,-); s=-1 maps to bit 1
        data[:, j] = ((picks >> 1) & 1).astype(np.uint8)
        data[:, k] = (picks & 1).astype(np.uint8)
    for blk in blocks:
        flips = rng.random(rows) < flip_prob
        cols = list(blk)
        data[np.ix_(flips, cols)] ^= 1
    desc = (f"synth_pairwise(n={n},pairs={len(planted)},rows={rows},seed={seed},"
            f"flip_prob={flip_prob},flip_block_size={flip_block_size})")
    return BitDataset(data, provenance=desc)


def synth_pairwise_table(n: int, marginals, planted, *, flip_prob: float = 0.0,
                         flip_block_size: int | None = None) -> DistributionTable:
    """Exact distribution table of the pairwise generator (small n only)."""
    if n > 20:
        raise ConfigError("exact pairwise table limited to n <= 20")
    base = _base_marginals(n, marginals, flip_prob)
    _check_planted(n, planted)
    blocks = _flip_blocks(n, flip_prob, flip_block_size)
    if blocks:
        block_of = {q: i for i, blk in enumerate(blocks) for q in blk}
        for j, k, _ in planted:
            if block_of[j] != block_of[k]:
                raise ConfigError(f"planted pair ({j},{k}) straddles flip blocks")
    used = {q for j, k, _ in planted for q in (j, k)}
    probs = np.ones(1 << n)
    zs = np.arange(1 << n, dtype=np.uint64)
    bits = [(zs >> np.uint64(q)) & np.uint64(1) for q in range(n)]
    for q in range(n):
        if q in used:
            continue
        p1 = (1.0 - base[q]) / 2.0
        probs *= np.where(bits[q] == 1, p1, 1.0 - p1)
    for j, k, c in planted:
        joint = _pair_joint(base[j], base[k], c)
        cell = bits[j].astype(np.int64) * 2 + bits[k].astype(np.int64)
        probs *= joint[cell]
    for blk in blocks:
        # mix in the block-complemented table: flip the bits of the block
        cols = list(blk)
        mask = np.uint64(sum(1 << q for q in cols))
        flipped_index = (zs ^ mask).astype(np.int64)
        probs = (1.0 - flip_prob) * probs + flip_prob * probs[flipped_index]
    return DistributionTable(probs)


@dataclass(frozen=True)
class CovarianceMatrix:
    C: np.ndarray
    C_max: float = field(init=False)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.float64)
        off = C - np.diag(np.diag(C))
        object.__setattr__(self, "C_max", float(np.abs(off).max()) if C.shape[0] > 1 else 0.0)


def covariances(stats: TargetStats) -> CovarianceMatrix:
    """C_jk = t_jk - t_j t_k (diagonal unused)."""
    n = stats.n
    C = np.zeros((n, n))
    singles = [stats.t_single(j) for j in range(n)]
    for j in range(n):
        for k in range(j + 1, n):
            C[j, k] = C[k, j] = stats.t_pair(j, k) - singles[j] * singles[k]
    return CovarianceMatrix(C)


@dataclass(frozen=True)
class Assumption1Report:
    C_const: float
    k_max: int
    max_deviation: dict[int, float]
    bound: dict[int, float]
    passed_by_order: dict[int, bool]

    @property
    def passed(self) -> bool:
        return all(self.passed_by_order.values())


def check_assumption1(stats: TargetStats, C_const: float, k_max: int) -> Assumption1Report:
    """Per order k in [2, k_max]: max_{|A|=k} |t_A - prod t_j| vs (C/n)^{k/2}."""
    n = stats.n
    singles = np.array([stats.t_single(j) for j in range(n)])
    max_dev: dict[int, float] = {}
    bound: dict[int, float] = {}
    ok: dict[int, bool] = {}
    for k in range(2, k_max + 1):
        worst = 0.0
        for combo in itertools.combinations(range(n), k):
            mask = 0
            prod = 1.0
            for q in combo:
                mask |= 1 << q
                prod *= singles[q]
            worst = max(worst, abs(stats.t_mask(mask) - prod))
        max_dev[k] = float(worst)
        bound[k] = (C_const / n) ** (k / 2.0)
        ok[k] = bool(worst <= bound[k] + 1e-12)
    return Assumption1Report(C_const, k_max, max_dev, bound, ok)


@dataclass(frozen=True)
class Assumption2Report:
    best_qubit: int
    max_fluctuation: float  # max_alpha (1 - t_alpha^2)


def check_assumption2(stats: TargetStats) -> Assumption2Report:
    fl = np.array([1.0 - stats.t_single(j) ** 2 for j in range(stats.n)])
    best = int(np.argmax(fl))
    return Assumption2Report(best, float(fl[best]))
