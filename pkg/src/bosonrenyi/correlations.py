"""Correlation matrices Z, the swap matrix A_Z and their polynomial-time diagnostics.

For an initial Fock state with particles on sites ``p_1 < p_2 < ... < p_N`` and
subsystem A = sites ``1..L_A``::

    z[j, l] = sum_{m <= L_A} conj(y[p_j, m]) * y[p_l, m]

MI puts one particle on every site, CDW on the even sites ``2, 4, ..., L``.
``perm A_Z`` with ``A_Z = [[I - Z, Z], [Z, I - Z]]`` equals ``Tr rho_A^2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .single_particle import LatticeSpec, Propagator, propagator, solve_open_chain

DEFAULT_EPS = 1e-10


@dataclass(frozen=True)
class InitialState:
    kind: str

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("MI", "CDW"):
            raise ValueError(f"initial state must be 'MI' or 'CDW', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    def check(self, L: int):
        if self.kind == "CDW" and L % 2:
            raise ValueError(f"CDW needs an even number of sites, got L={L}")

    def particle_count(self, L: int) -> int:
        self.check(L)
        return L if self.kind == "MI" else L // 2

    def occupied_sites(self, L: int) -> np.ndarray:
        """Zero-based indices of the initially occupied sites."""
        self.check(L)
        if self.kind == "MI":
            return np.arange(L)
        return np.arange(1, L, 2)


MI = InitialState("MI")
CDW = InitialState("CDW")


@dataclass(frozen=True)
class CutSpec:
    L_A: int

    @classmethod
    def half(cls, L: int) -> "CutSpec":
        return cls(L // 2)

    def check(self, L: int):
        # L_A in {0, L} would make Z trivial and is not a bipartition
        if not 1 <= self.L_A <= L - 1:
            raise ValueError(f"subsystem size must satisfy 1 <= L_A <= L-1, got L_A={self.L_A}, L={L}")


@dataclass(frozen=True)
class CorrelationMatrix:
    z: np.ndarray = field(repr=False)
    state: InitialState
    tJ: float
    L: int
    L_A: int

    @property
    def N(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class SwapMatrix:
    a: np.ndarray = field(repr=False)
    source: CorrelationMatrix

    @property
    def size(self) -> int:
        """Matrix size, twice the particle number."""
        return self.a.shape[0]


def build_z(y: Propagator, state: InitialState, cut: CutSpec | None = None) -> CorrelationMatrix:
    L = y.L
    if cut is None:
        cut = CutSpec.half(L)
    cut.check(L)
    rows = state.occupied_sites(L)
    ya = y.y[rows, : cut.L_A]
    z = ya.conj() @ ya.T
    return CorrelationMatrix(z, state, y.tJ, L, cut.L_A)


def correlation_matrix(L: int, state, tJ: float, L_A: int | None = None) -> CorrelationMatrix:
    """Convenience: Z for ``L`` sites at time ``tJ`` (half cut unless ``L_A`` given)."""
    if isinstance(state, str):
        state = InitialState(state)
    y = propagator(solve_open_chain(LatticeSpec(L)), tJ)
    cut = CutSpec(L // 2 if L_A is None else L_A)
    return build_z(y, state, cut)


def build_swap_matrix(z: CorrelationMatrix) -> SwapMatrix:
    n = z.N
    eye = np.eye(n)
    a = np.empty((2 * n, 2 * n), dtype=np.complex128)
    a[:n, :n] = eye - z.z
    a[:n, n:] = z.z
    a[n:, :n] = z.z
    a[n:, n:] = eye - z.z
    return SwapMatrix(a, z)


def g_value(a: SwapMatrix) -> float:
    """Mean row-wise infinity norm of A_Z, evaluated on the N rows of Z.

    The lower block-row of A_Z is a column permutation of the upper one, so
    both give the same maxima and the 2N-row mean equals the N-row mean.
    """
    z = a.source.z
    absz = np.abs(z)
    comp = np.abs(np.eye(z.shape[0]) - z)
    return float(np.maximum(absz, comp).max(axis=1).mean())


def entropy_density_like(z: CorrelationMatrix) -> float:
    """``1/2 - mean_j |z_jj - 1/2|``; equals ``1 - g`` for physical Z."""
    d = np.real(np.diag(z.z))
    return float(0.5 - np.abs(d - 0.5).mean())


def volume_law_lower_bound(g: float, size: int) -> float:
    """Rigorous lower bound ``1e-5 (1 - g)^2 * size`` on S_2."""
    if not -1e-12 <= g <= 1 + 1e-12:
        raise ValueError(f"g must lie in [0, 1], got {g}")
    return 1e-5 * (1.0 - g) ** 2 * size


def conjectured_bound(g: float, size: int, const: float) -> float:
    """``const * (1 - g) * size``; report-only, the constant is unknown."""
    return const * (1.0 - g) * size


# -- Bessel functions and the short-time bandwidth ---------------------------


def bessel_j(nmax: int, x: float) -> np.ndarray:
    """``J_0(x) .. J_nmax(x)`` by Miller's downward recurrence.

    ``J_{n-1} = (2n/x) J_n - J_{n+1}``, started well above both ``nmax`` and
    ``x`` and normalised with ``J_0 + 2 sum_k J_{2k} = 1``.
    """
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    x = float(x)
    if x == 0.0:
        out = np.zeros(nmax + 1)
        out[0] = 1.0
        return out
    if x < 0:
        out = bessel_j(nmax, -x)
        out[1::2] *= -1
        return out
    top = max(nmax, int(x)) + 30 + int(2 * math.sqrt(40.0 * max(nmax, x)))
    top += top % 2
    vals = np.zeros(top + 2)
    vals[top] = 1e-300
    norm = 0.0
    for n in range(top, 0, -1):
        vals[n - 1] = (2.0 * n / x) * vals[n] - vals[n + 1]
        if abs(vals[n - 1]) > 1e250:
            vals[n - 1 :] *= 1e-250
            norm *= 1e-250
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * vals[n - 1]
    norm += vals[0]
    return vals[: nmax + 1] / norm


def beta_estimate(tJ: float, eps: float = DEFAULT_EPS) -> float:
    """Closed-form width estimate ``(e/2) x - ln(sqrt(pi e x) eps)`` with ``x = 2tJ``."""
    x = 2.0 * tJ
    return math.e / 2.0 * x - math.log(math.sqrt(math.pi * math.e * x) * eps)


def bessel_beta(tJ: float, eps: float = DEFAULT_EPS) -> int:
    """Smallest ``beta >= 1`` with ``|J_n(2tJ)| < eps`` for every ``n >= beta``.

    Requiring the whole tail (not a single index) avoids stopping at an
    accidental near-zero of the oscillating region ``n < 2tJ``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if tJ < 0:
        raise ValueError("tJ must be nonnegative")
    if tJ == 0:
        return 1
    x = 2.0 * tJ
    nmax = int(max(beta_estimate(tJ, eps), x)) + 20
    while True:
        j = np.abs(bessel_j(nmax, x))
        big = np.nonzero(j >= eps)[0]
        beta = int(big[-1]) + 1 if big.size else 1
        if beta < nmax - 5:
            return max(beta, 1)
        nmax *= 2


@dataclass
class StructureReport:
    L: int
    tJ: float
    eps: float
    width: int
    band_lo: int
    band_hi: int
    identity_residual: float
    zero_residual: float
    coupling_residual: float
    beta: int
    two_beta: int
    four_tJ: float
    block_valid: bool

    def to_dict(self) -> dict:
        return asdict(self)


def z_block_structure(z: CorrelationMatrix, eps: float = DEFAULT_EPS) -> StructureReport:
    """Compare Z^MI with the block form ``diag(I, Z'_band, 0)``.

    The band is the set of indices whose row of ``Z - Z(t=0)`` has an entry
    above ``eps``; its extent is the support width.  The block form is only
    meaningful when the band leaves both an identity and a zero block.
    Indices in the report are one-based.
    """
    if z.state.kind != "MI" or 2 * z.L_A != z.L:
        raise ValueError("block structure is defined for MI with the half cut")
    n = z.N
    p0 = np.diag((np.arange(n) < z.L_A).astype(float))
    dev = np.abs(z.z - p0)
    rows = np.nonzero((dev > eps).any(axis=1))[0]
    if rows.size:
        lo, hi = int(rows[0]), int(rows[-1])
        width = hi - lo + 1
    else:
        lo, hi = z.L_A, z.L_A - 1
        width = 0
    ident = dev[:lo, :lo]
    zero = dev[hi + 1 :, hi + 1 :]
    outside = np.ones((n, n), dtype=bool)
    outside[lo : hi + 1, lo : hi + 1] = False
    outside[:lo, :lo] = False
    outside[hi + 1 :, hi + 1 :] = False
    beta = bessel_beta(z.tJ, eps)
    return StructureReport(
        L=z.L,
        tJ=z.tJ,
        eps=eps,
        width=width,
        band_lo=lo + 1,
        band_hi=hi + 1,
        identity_residual=float(ident.max()) if ident.size else 0.0,
        zero_residual=float(zero.max()) if zero.size else 0.0,
        coupling_residual=float(dev[outside].max()) if outside.any() else 0.0,
        beta=beta if z.tJ > 0 else 0,
        two_beta=2 * beta if z.tJ > 0 else 0,
        four_tJ=4.0 * z.tJ,
        block_valid=bool(lo > 0 and hi < n - 1),
    )
