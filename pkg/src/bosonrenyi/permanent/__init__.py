"""Matrix permanents of complex matrices.

Four routes, all returning :class:`PermanentResult`:

* :func:`perm_naive` -- the definitional sum over permutations (oracle, M <= 12)
* :func:`perm_ryser` -- Ryser's inclusion-exclusion with Gray-code updates
* :func:`perm_bbfg` -- the BBFG (Glynn) signed sum over ``delta in {+-1}^M``
* :func:`perm_bbfg_parallel` -- BBFG split into contiguous Gray-code chunks

:func:`permanent` dispatches by name and first splits off blocks that are
decoupled by exact zeros.

Before enumeration every row is rescaled by an exact power of two so that its
largest entry has modulus in [0.5, 1).  The accumulated binary exponent is
applied once at the end, which keeps the M-fold products inside the float64
range without touching the mantissas.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels

NAIVE_MAX = 12
RYSER_MAX = 34
BBFG_MAX = 50

METHODS = ("naive", "ryser", "bbfg", "bbfg_parallel")


@dataclass(frozen=True)
class PermanentResult:
    value: complex
    method: str
    terms: int
    accumulation: str = "compensated"

    def __complex__(self):
        return complex(self.value)


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("permanent needs M >= 1")
    return a


def _split_scaled(a: np.ndarray):
    """Row-normalise by powers of two; return (real, imag, total_exponent)."""
    mags = np.abs(a).max(axis=1)
    if np.any(mags == 0):
        return None
    _, exps = np.frexp(mags)
    scaled = np.ldexp(a.real, -exps[:, None]), np.ldexp(a.imag, -exps[:, None])
    return (np.ascontiguousarray(scaled[0]), np.ascontiguousarray(scaled[1]),
            int(exps.sum()))


def _finish(re: float, im: float, exponent: int, method: str, terms: int) -> PermanentResult:
    try:
        value = complex(math.ldexp(re, exponent), math.ldexp(im, exponent))
    except OverflowError:
        raise OverflowError(
            f"permanent overflows float64 (binary exponent {exponent})") from None
    return PermanentResult(value, method, terms)


def _check_size(m: int, limit: int, method: str):
    if m > limit:
        raise ValueError(f"{method}: M={m} exceeds the size guard {limit}")


def perm_naive(a) -> PermanentResult:
    a = _as_matrix(a)
    m = a.shape[0]
    _check_size(m, NAIVE_MAX, "naive")
    split = _split_scaled(a)
    if split is None:
        return PermanentResult(0j, "naive", math.factorial(m))
    ar, ai, e = split
    re, im, count = _kernels.naive_heap(ar, ai)
    return _finish(re, im, e, "naive", int(count))


def perm_ryser(a, max_size: int = RYSER_MAX) -> PermanentResult:
    a = _as_matrix(a)
    m = a.shape[0]
    _check_size(m, max_size, "ryser")
    terms = (1 << m) - 1
    split = _split_scaled(a)
    if split is None:
        return PermanentResult(0j, "ryser", terms)
    ar, ai, e = split
    re, im = _kernels.ryser_gray(ar, ai, _kernels.CTZ_TABLE)
    return _finish(re, im, e, "ryser", terms)


def _kahan_combine(partials):
    # partials are (sum_re, comp_re, sum_im, comp_im); fixed order => reproducible
    out = []
    for part in (0, 2):
        total = 0.0
        comp = 0.0
        for p in partials:
            for v in (p[part], -p[part + 1]):
                y = v - comp
                t = total + y
                comp = (t - total) - y
                total = t
        out.append(total - comp)
    return out


def _chunks(n: int, workers: int):
    return [(n * c // workers, n * (c + 1) // workers) for c in range(workers)]


def _bbfg(a, workers: int, method: str) -> PermanentResult:
    a = _as_matrix(a)
    m = a.shape[0]
    _check_size(m, BBFG_MAX, method)
    terms = 1 << (m - 1)
    split = _split_scaled(a)
    if split is None:
        return PermanentResult(0j, method, terms)
    ar, ai, e = split
    tab = _kernels.CTZ_TABLE
    bounds = [(lo, hi) for lo, hi in _chunks(terms, workers) if hi > lo]

    def run(bound):
        lo, hi = bound
        return _kernels.bbfg_chunk(ar, ai, np.uint64(lo), np.uint64(hi), tab)

    if len(bounds) == 1:
        partials = [run(bounds[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            partials = list(pool.map(run, bounds))
    re, im = _kahan_combine(partials)
    return _finish(re, im, e - (m - 1), method, terms)


def perm_bbfg(a) -> PermanentResult:
    return _bbfg(a, 1, "bbfg")


def perm_bbfg_parallel(a, workers: int = 2) -> PermanentResult:
    """BBFG over ``workers`` contiguous chunks of the Gray sequence.

    Each chunk reseeds its column sums directly (O(M^2)), so chunks share
    nothing; partial sums are combined in chunk order.  ``workers=1`` takes
    exactly the path of :func:`perm_bbfg`.
    """
    if int(workers) != workers or workers < 1:
        raise ValueError(f"worker count must be a positive integer, got {workers!r}")
    return _bbfg(a, int(workers), "bbfg_parallel")


def _single(a, method: str, workers: int) -> PermanentResult:
    if method == "naive":
        return perm_naive(a)
    if method == "ryser":
        return perm_ryser(a)
    if method == "bbfg":
        return perm_bbfg(a)
    return perm_bbfg_parallel(a, workers)


def support_blocks(a: np.ndarray):
    """Connected components of the bipartite row/column graph of the nonzeros.

    Returns a list of ``(rows, cols)`` index arrays, or ``None`` when some
    component has more rows than columns (then every permutation product
    hits an exact zero and the permanent vanishes).
    """
    from scipy.sparse import bmat, csr_matrix
    from scipy.sparse.csgraph import connected_components

    m = a.shape[0]
    nz = csr_matrix(a != 0)
    n_comp, labels = connected_components(bmat([[None, nz], [nz.T, None]]), directed=False)
    row_lab, col_lab = labels[:m], labels[m:]
    blocks = []
    for c in range(n_comp):
        rows = np.nonzero(row_lab == c)[0]
        cols = np.nonzero(col_lab == c)[0]
        if rows.size != cols.size:
            return None
        if rows.size:
            blocks.append((rows, cols))
    return blocks


def permanent(a, method: str = "bbfg", workers: int = 1, decompose: bool = True) -> PermanentResult:
    """Dispatch to one engine, first splitting off exactly decoupled blocks.

    With ``decompose`` the matrix is permuted into block-diagonal form along
    its exact-zero pattern and the block permanents are multiplied; a single
    dense block goes straight to the engine unchanged.
    """
    method = method.replace("-", "_")
    if method == "bbfg_par":
        method = "bbfg_parallel"
    if method not in METHODS:
        raise ValueError(f"unknown permanent method {method!r}; choose from {METHODS}")
    a = _as_matrix(a)
    if not decompose:
        return _single(a, method, workers)
    blocks = support_blocks(a)
    if blocks is None:
        return PermanentResult(0j, method, 0)
    if len(blocks) == 1:
        return _single(a, method, workers)
    value = 1 + 0j
    terms = 0
    for rows, cols in blocks:
        res = _single(a[np.ix_(rows, cols)], method, workers)
        value *= res.value
        terms += res.terms
    return PermanentResult(value, method, terms)


__all__ = [
    "PermanentResult",
    "perm_naive",
    "perm_ryser",
    "perm_bbfg",
    "perm_bbfg_parallel",
    "permanent",
    "support_blocks",
    "METHODS",
]
