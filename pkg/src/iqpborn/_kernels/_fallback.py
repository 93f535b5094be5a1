"""Pure-NumPy implementation of the hot correlator kernels.

Semantics match the compiled core exactly: the same counter-based SplitMix64
sign streams and the same chunked binary-tree reduction, so results agree
across backends to floating-point roundoff and are deterministic given
(seed, chunk) regardless of how work is split.
"""

from __future__ import annotations

import numpy as np

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    return x


def _signs_for(seed: int, start: int, count: int, d: int) -> np.ndarray:
    """Sign matrix (count, d) in {-1,+1} for global sample indices start..start+count."""
    n_words = (d + 63) // 64
    base = np.arange(start, start + count, dtype=np.uint64) * np.uint64(n_words)
    signs = np.empty((count, d), dtype=np.float64)
    for w in range(n_words):
        words = _mix(np.uint64(seed) + _GOLD * (base + np.uint64(w) + np.uint64(1)))
        for t in range(min(64, d - 64 * w)):
            bits = (words >> np.uint64(t)) & np.uint64(1)
            signs[:, 64 * w + t] = 1.0 - 2.0 * bits.astype(np.float64)
    return signs


def _fold(a: np.ndarray) -> np.ndarray:
    """Binary-tree sum over axis 0; length must be a power of two."""
    while a.shape[0] > 1:
        a = a[0::2] + a[1::2]
    return a[0]


def _pad_pow2(a: np.ndarray, size: int) -> np.ndarray:
    if a.shape[0] == size:
        return a
    pad = np.zeros((size,) + a.shape[1:], dtype=a.dtype)
    pad[: a.shape[0]] = a
    return pad


def _phases(theta, srow, prow_a, prow_b, signs):
    ns = len(srow)
    phi = signs[:, srow] @ theta[:ns]
    if len(prow_a):
        phi += (signs[:, prow_a] * signs[:, prow_b]) @ theta[ns:]
    return phi


def mc_corr(theta, srow, prow_a, prow_b, d, n_samples, seed, chunk, want_grad):
    """Monte-Carlo sums over uniform sign samples.

    Returns (sum cos(2 phi), sum cos^2(2 phi), per-generator sums of
    -2 sign_g sin(2 phi) or None).
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    ns = len(srow)
    m = ns + len(prow_a)
    total = 0.0
    total_sq = 0.0
    grad = np.zeros(m) if want_grad else None
    # zero-padding never alters the tree sums, so cap the fold width
    while chunk // 2 >= n_samples and chunk > 1:
        chunk //= 2
    for start in range(0, n_samples, chunk):
        count = min(chunk, n_samples - start)
        signs = _signs_for(seed, start, count, d)
        phi = _phases(theta, srow, prow_a, prow_b, signs)
        vals = np.cos(2.0 * phi)
        total += float(_fold(_pad_pow2(vals, chunk)))
        total_sq += float(_fold(_pad_pow2(vals * vals, chunk)))
        if want_grad:
            gsigns = signs[:, srow]
            if len(prow_a):
                gsigns = np.concatenate([gsigns, signs[:, prow_a] * signs[:, prow_b]], axis=1)
            gvals = (-2.0 * np.sin(2.0 * phi))[:, None] * gsigns
            grad += _fold(_pad_pow2(gvals, chunk))
    return total, total_sq, grad


def _pattern_signs(d: int, start: int, count: int) -> np.ndarray:
    pats = np.arange(start, start + count, dtype=np.uint64)
    signs = np.empty((count, d), dtype=np.float64)
    for t in range(d):
        signs[:, t] = 1.0 - 2.0 * ((pats >> np.uint64(t)) & np.uint64(1)).astype(np.float64)
    return signs


def exact_corr(theta, srow, prow_a, prow_b, d, want_grad):
    """Exact mean over all 2^d sign patterns of the light cone."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    ns = len(srow)
    m = ns + len(prow_a)
    size = 1 << d
    step = min(size, 1 << 14)
    total = 0.0
    grad = np.zeros(m) if want_grad else None
    for start in range(0, size, step):
        signs = _pattern_signs(d, start, min(step, size - start))
        phi = _phases(theta, srow, prow_a, prow_b, signs)
        total += float(np.cos(2.0 * phi).sum())
        if want_grad:
            gsigns = signs[:, srow]
            if len(prow_a):
                gsigns = np.concatenate([gsigns, signs[:, prow_a] * signs[:, prow_b]], axis=1)
            grad += (-2.0 * np.sin(2.0 * phi)) @ gsigns
    if want_grad:
        grad /= size
    return total / size, grad


def _fwht_inplace(a: np.ndarray) -> np.ndarray:
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


def exact_loss_batch(thetas, e0, e1, n, q_probs, fac):
    """Exact MMD loss per draw via the kernel two-sample form.

    Same contract as the compiled kernel: statevector phases from the
    generator signs, Walsh-Hadamard to amplitudes, then
    (p - q)^T K (p - q) with per-bit kernel factors (1, fac).
    """
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    size = 1 << n
    zs = np.arange(size, dtype=np.uint64)
    bits = [
        1.0 - 2.0 * ((zs >> np.uint64(q)) & np.uint64(1)).astype(np.float64)
        for q in range(n)
    ]
    cols = bits + [bits[j] * bits[k] for j, k in zip(e0, e1)]
    signs = np.stack(cols, axis=1)
    out = np.empty(thetas.shape[0])
    chunk = max(1, (1 << 21) // size)
    for start in range(0, thetas.shape[0], chunk):
        block = thetas[start : start + chunk]
        u = np.exp(1j * (signs @ block.T))
        amp = _fwht_inplace(u) / size
        d = np.abs(amp) ** 2 - q_probs[:, None]
        kd = d.copy()
        h = 1
        while h < size:
            b = kd.reshape(size // (2 * h), 2, h, -1)
            top = b[:, 0] + fac * b[:, 1]
            bot = fac * b[:, 0] + b[:, 1]
            b[:, 0] = top
            b[:, 1] = bot
            h *= 2
        out[start : start + block.shape[0]] = np.sum(d * kd, axis=0)
    return out


def exact_corr_batch(thetas, srow, prow_a, prow_b, d):
    """Exact correlator for a batch of parameter draws (D, m_A)."""
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    n_draws = thetas.shape[0]
    ns = len(srow)
    size = 1 << d
    signs = _pattern_signs(d, 0, size)
    base = signs[:, srow]
    if len(prow_a):
        base = np.concatenate([base, signs[:, prow_a] * signs[:, prow_b]], axis=1)
    out = np.empty(n_draws)
    step = max(1, (1 << 22) // size)
    for start in range(0, n_draws, step):
        block = thetas[start : start + step]
        phi = base @ block.T
        out[start : start + len(block)] = np.cos(2.0 * phi).mean(axis=0)
    return out
