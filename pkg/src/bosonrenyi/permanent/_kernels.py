"""Numba kernels for the permanent.

Matrices arrive split into real/imaginary float64 planes.  The outer sums use
Kahan compensation, so these functions are compiled *without* fastmath
(reassociation would cancel the compensation term).  Only the column-product
helper is allowed to contract multiply-adds.
"""
import numpy as np
import numba as nb

_DEBRUIJN = 0x022FDD63CC95386D


def _debruijn_table():
    tab = np.zeros(64, dtype=np.int64)
    for i in range(64):
        tab[(((1 << i) * _DEBRUIJN) & 0xFFFFFFFFFFFFFFFF) >> 58] = i
    return tab


CTZ_TABLE = _debruijn_table()
DEBRUIJN = np.uint64(_DEBRUIJN)


@nb.njit(nogil=True, cache=True)
def _ctz(k, tab):
    # index of the lowest set bit of a nonzero uint64
    low = k & (~k + np.uint64(1))
    return tab[(low * DEBRUIJN) >> np.uint64(58)]


@nb.njit(nogil=True, cache=True, fastmath={"contract"})
def _column_product(re, im, m):
    # 4 interleaved chains break the serial multiply dependency
    p0r = 1.0
    p0i = 0.0
    p1r = 1.0
    p1i = 0.0
    p2r = 1.0
    p2i = 0.0
    p3r = 1.0
    p3i = 0.0
    l = 0
    while l + 4 <= m:
        x = p0r * re[l] - p0i * im[l]
        p0i = p0r * im[l] + p0i * re[l]
        p0r = x
        x = p1r * re[l + 1] - p1i * im[l + 1]
        p1i = p1r * im[l + 1] + p1i * re[l + 1]
        p1r = x
        x = p2r * re[l + 2] - p2i * im[l + 2]
        p2i = p2r * im[l + 2] + p2i * re[l + 2]
        p2r = x
        x = p3r * re[l + 3] - p3i * im[l + 3]
        p3i = p3r * im[l + 3] + p3i * re[l + 3]
        p3r = x
        l += 4
    while l < m:
        x = p0r * re[l] - p0i * im[l]
        p0i = p0r * im[l] + p0i * re[l]
        p0r = x
        l += 1
    ar = p0r * p1r - p0i * p1i
    ai = p0r * p1i + p0i * p1r
    br = p2r * p3r - p2i * p3i
    bi = p2r * p3i + p2i * p3r
    return ar * br - ai * bi, ar * bi + ai * br


@nb.njit(nogil=True, cache=True)
def bbfg_chunk(ar, ai, start, stop, tab):
    """Partial BBFG sum over Gray-code steps ``start <= k < stop``.

    Row 0 carries the fixed ``delta_1 = +1``; Gray bit ``b`` drives row ``b + 1``.
    Column sums are seeded from scratch at ``start``.  Returns the Kahan pair
    ``(sum_re, comp_re, sum_im, comp_im)`` with true sum ~ ``sum - comp``.
    """
    m = ar.shape[0]
    delta = np.ones(m)
    g = start ^ (start >> np.uint64(1))
    sign = 1.0
    for b in range(m - 1):
        if (g >> np.uint64(b)) & np.uint64(1):
            delta[b + 1] = -1.0
            sign = -sign
    re = np.zeros(m)
    im = np.zeros(m)
    for j in range(m):
        d = delta[j]
        for l in range(m):
            re[l] += d * ar[j, l]
            im[l] += d * ai[j, l]
    ar2 = 2.0 * ar
    ai2 = 2.0 * ai
    tr = 0.0
    ti = 0.0
    cr = 0.0
    ci = 0.0
    k = start
    while k < stop:
        if k != start:
            j = _ctz(k, tab) + 1
            d = delta[j]
            for l in range(m):
                re[l] -= d * ar2[j, l]
                im[l] -= d * ai2[j, l]
            delta[j] = -d
            sign = -sign
        pr, pi = _column_product(re, im, m)
        y = sign * pr - cr
        t = tr + y
        cr = (t - tr) - y
        tr = t
        y = sign * pi - ci
        t = ti + y
        ci = (t - ti) - y
        ti = t
        k += np.uint64(1)
    return tr, cr, ti, ci


@nb.njit(nogil=True, cache=True)
def ryser_gray(ar, ai, tab):
    """Ryser inclusion-exclusion over column subsets, Gray-code ordered.

    ``perm A = (-1)^M sum_S (-1)^{|S|} prod_i sum_{j in S} a_ij``.
    """
    m = ar.shape[0]
    re = np.zeros(m)
    im = np.zeros(m)
    inset = np.zeros(m, dtype=np.bool_)
    tr = 0.0
    ti = 0.0
    cr = 0.0
    ci = 0.0
    size = 0
    n = np.uint64(1) << np.uint64(m)
    k = np.uint64(1)
    while k < n:
        c = _ctz(k, tab)
        if inset[c]:
            inset[c] = False
            size -= 1
            for i in range(m):
                re[i] -= ar[i, c]
                im[i] -= ai[i, c]
        else:
            inset[c] = True
            size += 1
            for i in range(m):
                re[i] += ar[i, c]
                im[i] += ai[i, c]
        pr, pi = _column_product(re, im, m)
        if (m - size) & 1:
            pr = -pr
            pi = -pi
        y = pr - cr
        t = tr + y
        cr = (t - tr) - y
        tr = t
        y = pi - ci
        t = ti + y
        ci = (t - ti) - y
        ti = t
        k += np.uint64(1)
    return tr - cr, ti - ci


@nb.njit(nogil=True, cache=True)
def naive_heap(ar, ai):
    """Definitional sum over all M! permutations (Heap's algorithm)."""
    m = ar.shape[0]
    perm = np.arange(m)
    c = np.zeros(m, dtype=np.int64)
    tr = 0.0
    ti = 0.0
    cr = 0.0
    ci = 0.0
    count = 0
    while True:
        pr = 1.0
        pi = 0.0
        for j in range(m):
            xr = ar[j, perm[j]]
            xi = ai[j, perm[j]]
            x = pr * xr - pi * xi
            pi = pr * xi + pi * xr
            pr = x
        y = pr - cr
        t = tr + y
        cr = (t - tr) - y
        tr = t
        y = pi - ci
        t = ti + y
        ci = (t - ti) - y
        ti = t
        count += 1
        # advance to the next permutation
        i = 1
        while i < m and c[i] >= i:
            c[i] = 0
            i += 1
        if i >= m:
            break
        if i % 2 == 0:
            sw = 0
        else:
            sw = c[i]
        tmp = perm[sw]
        perm[sw] = perm[i]
        perm[i] = tmp
        c[i] += 1
    return tr - cr, ti - ci, count
