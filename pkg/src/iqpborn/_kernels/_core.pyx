# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled correlator kernels.

Mirrors _fallback.py: identical SplitMix64 counter streams and the same
chunked binary-tree reduction, so both backends produce matching results.
"""

from libc.math cimport cos, sin
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64

cdef u64 _GOLD = 0x9E3779B97F4A7C15ULL
cdef u64 _M1 = 0xBF58476D1CE4E5B9ULL
cdef u64 _M2 = 0x94D049BB133111EBULL


cdef inline u64 _mix(u64 x) nogil:
    x ^= x >> 30
    x *= _M1
    x ^= x >> 27
    x *= _M2
    x ^= x >> 31
    return x


cdef inline double _fold(double* buf, Py_ssize_t n) nogil:
    # adjacent-pair binary tree; n must be a power of two
    cdef Py_ssize_t i
    while n > 1:
        for i in range(n // 2):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        n //= 2
    return buf[0]


def mc_corr(const double[::1] theta, const int[::1] srow, const int[::1] prow_a, const int[::1] prow_b,
            int d, long long n_samples, unsigned long long seed, long long chunk,
            bint want_grad):
    """Monte-Carlo sums of cos(2 phi), cos^2(2 phi), and -2 sign_g sin(2 phi)."""
    cdef Py_ssize_t ns = srow.shape[0]
    cdef Py_ssize_t npair = prow_a.shape[0]
    cdef Py_ssize_t m = ns + npair
    cdef Py_ssize_t n_words = (d + 63) // 64
    cdef long long start, count, i, gidx
    cdef Py_ssize_t j, k, t
    cdef double phi, c2, s2
    cdef double total = 0.0, total_sq = 0.0

    # zero-padding never alters the tree sums, so cap the fold width
    while chunk // 2 >= n_samples and chunk > 1:
        chunk //= 2

    grad_arr = np.zeros(m, dtype=np.float64) if want_grad else None
    cdef double[::1] grad = grad_arr if want_grad else None

    cdef u64* wbuf = <u64*> malloc(n_words * sizeof(u64))
    cdef double* sbuf = <double*> malloc(d * sizeof(double))
    cdef double* vbuf = <double*> malloc(chunk * sizeof(double))
    cdef double* v2buf = <double*> malloc(chunk * sizeof(double))
    cdef double* gbuf = <double*> malloc(m * chunk * sizeof(double)) if want_grad else NULL
    if wbuf == NULL or sbuf == NULL or vbuf == NULL or v2buf == NULL or (want_grad and gbuf == NULL):
        free(wbuf); free(sbuf); free(vbuf); free(v2buf); free(gbuf)
        raise MemoryError

    try:
        with nogil:
            start = 0
            while start < n_samples:
                count = n_samples - start
                if count > chunk:
                    count = chunk
                for i in range(count):
                    gidx = start + i
                    for j in range(n_words):
                        wbuf[j] = _mix(seed + _GOLD * (<u64>(gidx * n_words + j + 1)))
                    for t in range(d):
                        sbuf[t] = 1.0 - 2.0 * <double>((wbuf[t >> 6] >> (t & 63)) & 1ULL)
                    phi = 0.0
                    for k in range(ns):
                        phi += theta[k] * sbuf[srow[k]]
                    for k in range(npair):
                        phi += theta[ns + k] * (sbuf[prow_a[k]] * sbuf[prow_b[k]])
                    c2 = cos(2.0 * phi)
                    vbuf[i] = c2
                    v2buf[i] = c2 * c2
                    if want_grad:
                        s2 = -2.0 * sin(2.0 * phi)
                        for k in range(ns):
                            gbuf[k * chunk + i] = s2 * sbuf[srow[k]]
                        for k in range(npair):
                            gbuf[(ns + k) * chunk + i] = s2 * sbuf[prow_a[k]] * sbuf[prow_b[k]]
                for i in range(count, chunk):
                    vbuf[i] = 0.0
                    v2buf[i] = 0.0
                if want_grad:
                    for k in range(m):
                        for i in range(count, chunk):
                            gbuf[k * chunk + i] = 0.0
                total += _fold(vbuf, chunk)
                total_sq += _fold(v2buf, chunk)
                if want_grad:
                    for k in range(m):
                        grad[k] += _fold(gbuf + k * chunk, chunk)
                start += chunk
    finally:
        free(wbuf); free(sbuf); free(vbuf); free(v2buf); free(gbuf)

    return total, total_sq, grad_arr


def exact_corr(const double[::1] theta, const int[::1] srow, const int[::1] prow_a, const int[::1] prow_b,
               int d, bint want_grad):
    """Exact mean over all 2^d light-cone sign patterns."""
    cdef Py_ssize_t ns = srow.shape[0]
    cdef Py_ssize_t npair = prow_a.shape[0]
    cdef Py_ssize_t m = ns + npair
    cdef u64 size = 1ULL << d
    cdef u64 p
    cdef Py_ssize_t k, t, g
    cdef double phi, s2, block
    cdef double total = 0.0

    if want_grad:
        grad_arr = np.zeros(m, dtype=np.float64)
        return _exact_with_grad(theta, srow, prow_a, prow_b, d, grad_arr), grad_arr

    # Gray-code walk: one sign flip per step keeps phi updates O(flips).
    flip_ptr_arr = np.zeros(d + 1, dtype=np.int64)
    cdef long long[::1] flip_ptr = flip_ptr_arr
    for k in range(ns):
        flip_ptr[srow[k] + 1] += 1
    for k in range(npair):
        flip_ptr[prow_a[k] + 1] += 1
        flip_ptr[prow_b[k] + 1] += 1
    for t in range(d):
        flip_ptr[t + 1] += flip_ptr[t]
    fill_arr = flip_ptr_arr.copy()
    cdef long long[::1] fill = fill_arr
    flip_gen_arr = np.zeros(flip_ptr[d], dtype=np.int64)
    cdef long long[::1] flip_gen = flip_gen_arr
    for k in range(ns):
        flip_gen[fill[srow[k]]] = k
        fill[srow[k]] += 1
    for k in range(npair):
        flip_gen[fill[prow_a[k]]] = ns + k
        fill[prow_a[k]] += 1
        flip_gen[fill[prow_b[k]]] = ns + k
        fill[prow_b[k]] += 1

    cdef double* sign = <double*> malloc(m * sizeof(double))
    if sign == NULL:
        raise MemoryError
    try:
        with nogil:
            phi = 0.0
            for k in range(m):
                sign[k] = 1.0
                phi += theta[k]
            block = cos(2.0 * phi)
            p = 1
            while p < size:
                # trailing-zero count of p gives the Gray-flipped bit
                t = 0
                while not (p >> t) & 1ULL:
                    t += 1
                for k in range(flip_ptr[t], flip_ptr[t + 1]):
                    g = flip_gen[k]
                    phi -= 2.0 * theta[g] * sign[g]
                    sign[g] = -sign[g]
                block += cos(2.0 * phi)
                if (p & 0xFFFULL) == 0xFFFULL:
                    total += block
                    block = 0.0
                p += 1
            total += block
    finally:
        free(sign)
    return total / <double>size, None


cdef double _exact_with_grad(const double[::1] theta, const int[::1] srow, const int[::1] prow_a,
                             const int[::1] prow_b, int d, double[::1] grad):
    cdef Py_ssize_t ns = srow.shape[0]
    cdef Py_ssize_t npair = prow_a.shape[0]
    cdef Py_ssize_t m = ns + npair
    cdef u64 size = 1ULL << d
    cdef u64 p
    cdef Py_ssize_t k, t
    cdef double phi, s2
    cdef double total = 0.0
    cdef double* sbuf = <double*> malloc(d * sizeof(double))
    cdef double* gs = <double*> malloc(m * sizeof(double))
    if sbuf == NULL or gs == NULL:
        free(sbuf); free(gs)
        raise MemoryError
    try:
        with nogil:
            for p in range(size):
                for t in range(d):
                    sbuf[t] = 1.0 - 2.0 * <double>((p >> t) & 1ULL)
                phi = 0.0
                for k in range(ns):
                    gs[k] = sbuf[srow[k]]
                    phi += theta[k] * gs[k]
                for k in range(npair):
                    gs[ns + k] = sbuf[prow_a[k]] * sbuf[prow_b[k]]
                    phi += theta[ns + k] * gs[ns + k]
                total += cos(2.0 * phi)
                s2 = -2.0 * sin(2.0 * phi)
                for k in range(m):
                    grad[k] += s2 * gs[k]
    finally:
        free(sbuf); free(gs)
    for k in range(m):
        grad[k] /= <double>size
    return total / <double>size


def exact_loss_batch(const double[:, ::1] thetas, const long long[::1] e0, const long long[::1] e1,
                     int n, const double[::1] q_probs, double fac):
    """Exact MMD loss for a batch of parameter vectors.

    Builds the statevector phases by a Gray-code walk, Hadamard-transforms
    to amplitudes, and evaluates the kernel two-sample form
    (p - q)^T K (p - q) with the per-bit factorized Gaussian kernel.
    """
    cdef Py_ssize_t n_draws = thetas.shape[0]
    cdef Py_ssize_t n_edges = e0.shape[0]
    cdef Py_ssize_t m = n + n_edges
    cdef u64 size = 1ULL << n
    cdef u64 p, y
    cdef Py_ssize_t k, t, dr, g, h, i, base
    cdef double phi, re, im, x0, x1, scale, acc

    out_arr = np.empty(n_draws, dtype=np.float64)
    cdef double[::1] out = out_arr

    # per-bit flip lists over all m generators
    flip_ptr_arr = np.zeros(n + 1, dtype=np.int64)
    cdef long long[::1] flip_ptr = flip_ptr_arr
    for k in range(n):
        flip_ptr[k + 1] += 1
    for k in range(n_edges):
        flip_ptr[e0[k] + 1] += 1
        flip_ptr[e1[k] + 1] += 1
    for t in range(n):
        flip_ptr[t + 1] += flip_ptr[t]
    fill_arr = flip_ptr_arr.copy()
    cdef long long[::1] fill = fill_arr
    flip_gen_arr = np.zeros(flip_ptr[n], dtype=np.int64)
    cdef long long[::1] flip_gen = flip_gen_arr
    for k in range(n):
        flip_gen[fill[k]] = k
        fill[k] += 1
    for k in range(n_edges):
        flip_gen[fill[e0[k]]] = n + k
        fill[e0[k]] += 1
        flip_gen[fill[e1[k]]] = n + k
        fill[e1[k]] += 1

    cdef double* sign = <double*> malloc(m * sizeof(double))
    cdef double* ure = <double*> malloc(size * sizeof(double))
    cdef double* uim = <double*> malloc(size * sizeof(double))
    cdef double* dvec = <double*> malloc(size * sizeof(double))
    cdef double* kd = <double*> malloc(size * sizeof(double))
    if sign == NULL or ure == NULL or uim == NULL or dvec == NULL or kd == NULL:
        free(sign); free(ure); free(uim); free(dvec); free(kd)
        raise MemoryError

    scale = 1.0 / <double>size
    try:
        with nogil:
            for dr in range(n_draws):
                phi = 0.0
                for k in range(m):
                    sign[k] = 1.0
                    phi += thetas[dr, k]
                ure[0] = cos(phi)
                uim[0] = sin(phi)
                y = 0
                p = 1
                while p < size:
                    t = 0
                    while not (p >> t) & 1ULL:
                        t += 1
                    for k in range(flip_ptr[t], flip_ptr[t + 1]):
                        g = flip_gen[k]
                        phi -= 2.0 * thetas[dr, g] * sign[g]
                        sign[g] = -sign[g]
                    y ^= 1ULL << t
                    ure[y] = cos(phi)
                    uim[y] = sin(phi)
                    p += 1
                # in-place Walsh-Hadamard on u
                h = 1
                while h < <Py_ssize_t>size:
                    base = 0
                    while base < <Py_ssize_t>size:
                        for i in range(base, base + h):
                            x0 = ure[i]; x1 = ure[i + h]
                            ure[i] = x0 + x1; ure[i + h] = x0 - x1
                            x0 = uim[i]; x1 = uim[i + h]
                            uim[i] = x0 + x1; uim[i + h] = x0 - x1
                        base += 2 * h
                    h *= 2
                for i in range(<Py_ssize_t>size):
                    re = ure[i] * scale
                    im = uim[i] * scale
                    dvec[i] = re * re + im * im - q_probs[i]
                    kd[i] = dvec[i]
                # per-bit kernel butterfly: (x0 + fac x1, fac x0 + x1)
                h = 1
                while h < <Py_ssize_t>size:
                    base = 0
                    while base < <Py_ssize_t>size:
                        for i in range(base, base + h):
                            x0 = kd[i]; x1 = kd[i + h]
                            kd[i] = x0 + fac * x1
                            kd[i + h] = fac * x0 + x1
                        base += 2 * h
                    h *= 2
                acc = 0.0
                for i in range(<Py_ssize_t>size):
                    acc += dvec[i] * kd[i]
                out[dr] = acc
    finally:
        free(sign); free(ure); free(uim); free(dvec); free(kd)
    return out_arr


def exact_corr_batch(const double[:, ::1] thetas, const int[::1] srow, const int[::1] prow_a,
                     const int[::1] prow_b, int d):
    """Exact correlator for a batch of parameter draws (D, m_A)."""
    cdef Py_ssize_t n_draws = thetas.shape[0]
    cdef Py_ssize_t ns = srow.shape[0]
    cdef Py_ssize_t npair = prow_a.shape[0]
    cdef Py_ssize_t m = ns + npair
    cdef u64 size = 1ULL << d
    cdef u64 p
    cdef Py_ssize_t k, t, dr, g
    cdef double phi, total

    out_arr = np.empty(n_draws, dtype=np.float64)
    cdef double[::1] out = out_arr

    flip_ptr_arr = np.zeros(d + 1, dtype=np.int64)
    cdef long long[::1] flip_ptr = flip_ptr_arr
    for k in range(ns):
        flip_ptr[srow[k] + 1] += 1
    for k in range(npair):
        flip_ptr[prow_a[k] + 1] += 1
        flip_ptr[prow_b[k] + 1] += 1
    for t in range(d):
        flip_ptr[t + 1] += flip_ptr[t]
    fill_arr = flip_ptr_arr.copy()
    cdef long long[::1] fill = fill_arr
    flip_gen_arr = np.zeros(flip_ptr[d], dtype=np.int64)
    cdef long long[::1] flip_gen = flip_gen_arr
    for k in range(ns):
        flip_gen[fill[srow[k]]] = k
        fill[srow[k]] += 1
    for k in range(npair):
        flip_gen[fill[prow_a[k]]] = ns + k
        fill[prow_a[k]] += 1
        flip_gen[fill[prow_b[k]]] = ns + k
        fill[prow_b[k]] += 1

    cdef double* sign = <double*> malloc(m * sizeof(double))
    if sign == NULL:
        raise MemoryError
    try:
        with nogil:
            for dr in range(n_draws):
                phi = 0.0
                for k in range(m):
                    sign[k] = 1.0
                    phi += thetas[dr, k]
                total = cos(2.0 * phi)
                p = 1
                while p < size:
                    t = 0
                    while not (p >> t) & 1ULL:
                        t += 1
                    for k in range(flip_ptr[t], flip_ptr[t + 1]):
                        g = flip_gen[k]
                        phi -= 2.0 * thetas[dr, g] * sign[g]
                        sign[g] = -sign[g]
                    total += cos(2.0 * phi)
                    p += 1
                out[dr] = total / <double>size
    finally:
        free(sign)
    return out_arr
