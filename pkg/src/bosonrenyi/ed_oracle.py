"""Exact diagonalization of the Bose-Hubbard chain in a fixed-N Fock basis.

This is the independent referee for the permanent formula: no local
occupation cutoff, only particle-number conservation.  Also provides finite-U
quenches and the Page value (mean S_2 of random fixed-N states).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .correlations import CutSpec, InitialState
from .entropy import EntropyPoint, time_average

BASIS_MAX = 5_000_000
DIAG_MAX = 20_000


def _compositions(L: int, N: int):
    """Occupation tuples with sum N in descending lexicographic order."""
    if L == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions(L - 1, N - first):
            yield (first,) + rest


class FockBasis:
    """Occupation vectors ``(n_1, ..., n_L)`` with ``sum n_j = N``."""

    def __init__(self, L: int, N: int):
        self.L = L
        self.N = N
        self.states = np.array(list(_compositions(L, N)), dtype=np.int64).reshape(-1, L)
        self._index = {tuple(s): i for i, s in enumerate(self.states.tolist())}
        self._cuts = {}

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return len(self)

    def index(self, occupation) -> int:
        return self._index[tuple(int(n) for n in occupation)]

    def bipartition(self, L_A: int):
        """Sector-resolved factorisation at the cut after site ``L_A``.

        Returns a list of ``(basis_rows, a_idx, b_idx, a_dim, b_dim)``, one per
        particle number in A, so that ``psi[basis_rows]`` scattered into an
        ``a_dim x b_dim`` matrix at ``(a_idx, b_idx)`` is that sector's block.
        """
        if L_A in self._cuts:
            return self._cuts[L_A]
        left = self.states[:, :L_A]
        right = self.states[:, L_A:]
        n_a = left.sum(axis=1)
        sectors = []
        for na in np.unique(n_a):
            rows = np.nonzero(n_a == na)[0]
            _, a_idx = np.unique(left[rows], axis=0, return_inverse=True)
            _, b_idx = np.unique(right[rows], axis=0, return_inverse=True)
            a_idx = a_idx.ravel()
            b_idx = b_idx.ravel()
            sectors.append((rows, a_idx, b_idx, int(a_idx.max()) + 1, int(b_idx.max()) + 1))
        self._cuts[L_A] = sectors
        return sectors


def enumerate_basis(L: int, N: int) -> FockBasis:
    if L < 1 or N < 0:
        raise ValueError(f"need L >= 1 and N >= 0, got L={L}, N={N}")
    dim = math.comb(N + L - 1, N)
    if dim > BASIS_MAX:
        raise ValueError(f"Fock basis of dimension {dim} exceeds the guard {BASIS_MAX}")
    return FockBasis(L, N)


@dataclass
class ManyBodyState:
    basis: FockBasis = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class QuenchSpec:
    L: int
    state: str = "MI"
    J: float = 1.0
    U: float = 0.0
    omega: tuple | None = None
    times: tuple = ()

    def __post_init__(self):
        InitialState(self.state).check(self.L)
        if self.omega is not None:
            if len(self.omega) != self.L or not np.all(np.isfinite(self.omega)):
                raise ValueError("omega must hold L finite site potentials")


def fock_state(basis: FockBasis, kind: str) -> ManyBodyState:
    occ = np.zeros(basis.L, dtype=np.int64)
    occ[InitialState(kind).occupied_sites(basis.L)] = 1
    if occ.sum() != basis.N:
        raise ValueError(f"{kind} state has {occ.sum()} particles, basis holds {basis.N}")
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[basis.index(occ)] = 1.0
    return ManyBodyState(basis, psi)


def build_hamiltonian(basis: FockBasis, spec: QuenchSpec) -> sp.csr_matrix:
    """Open-chain Bose-Hubbard Hamiltonian as a real sparse matrix."""
    L = basis.L
    states = basis.states
    omega = np.zeros(L) if spec.omega is None else np.asarray(spec.omega, dtype=float)
    diag = 0.5 * spec.U * (states * (states - 1)).sum(axis=1) + states @ omega
    rows, cols, vals = [], [], []
    for i, occ in enumerate(states.tolist()):
        for j in range(L - 1):
            # b_j^+ b_{j+1}: move a boson from j+1 to j
            if occ[j + 1] > 0:
                new = list(occ)
                amp = math.sqrt((new[j] + 1) * new[j + 1])
                new[j] += 1
                new[j + 1] -= 1
                k = basis.index(new)
                rows += [k, i]
                cols += [i, k]
                vals += [-spec.J * amp, -spec.J * amp]
    h = sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()
    return (h + sp.diags(diag)).tocsr()


@dataclass
class Eigensystem:
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)


def diagonalize(h) -> Eigensystem:
    dim = h.shape[0]
    if dim > DIAG_MAX:
        raise ValueError(f"dimension {dim} exceeds the full-diagonalization guard {DIAG_MAX}")
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    if np.iscomplexobj(dense) and not np.any(dense.imag):
        dense = dense.real
    w, v = scipy.linalg.eigh(dense, overwrite_a=True, check_finite=False)
    return Eigensystem(w, v)


class Evolution:
    """``psi(t) = exp(-iHt) psi0`` from one spectral decomposition."""

    def __init__(self, h, psi0: ManyBodyState, system: Eigensystem | None = None):
        self.system = system if system is not None else diagonalize(h)
        self.psi0 = psi0
        self._coeff = self.system.vectors.T.conj() @ psi0.amplitudes

    def at(self, tJ: float) -> ManyBodyState:
        phase = np.exp(-1j * self.system.energies * tJ)
        return ManyBodyState(self.psi0.basis, self.system.vectors @ (phase * self._coeff))

    def energy(self) -> float:
        return float(np.real(np.vdot(self._coeff, self.system.energies * self._coeff)))


def evolve(h, psi0: ManyBodyState, tJ: float) -> ManyBodyState:
    if tJ == 0:
        return ManyBodyState(psi0.basis, psi0.amplitudes.copy())
    return Evolution(h, psi0).at(tJ)


def purity(psi: ManyBodyState, cut: CutSpec) -> float:
    """``Tr rho_A^2`` as the sum of fourth powers of the Schmidt values."""
    cut.check(psi.basis.L)
    amps = psi.amplitudes
    total = 0.0
    for rows, a_idx, b_idx, a_dim, b_dim in psi.basis.bipartition(cut.L_A):
        block = np.zeros((a_dim, b_dim), dtype=np.complex128)
        block[a_idx, b_idx] = amps[rows]
        s = np.linalg.svd(block, compute_uv=False)
        total += float(np.sum(s**4))
    return total


def renyi2_exact(psi: ManyBodyState, cut: CutSpec) -> float:
    return -math.log(purity(psi, cut)) + 0.0


def one_body_density(psi: ManyBodyState) -> np.ndarray:
    """``C[j, l] = <b_j^+ b_l>`` in the full chain."""
    basis = psi.basis
    L = basis.L
    amps = psi.amplitudes
    states = basis.states
    c = np.zeros((L, L), dtype=np.complex128)
    prob = np.abs(amps) ** 2
    c[np.diag_indices(L)] = prob @ states
    for i, occ in enumerate(states.tolist()):
        if amps[i] == 0:
            continue
        for l in range(L):
            if occ[l] == 0:
                continue
            for j in range(L):
                if j == l:
                    continue
                new = list(occ)
                amp = math.sqrt(new[l] * (new[j] + 1))
                new[l] -= 1
                new[j] += 1
                # <new| b_j^+ b_l |occ> contributes conj(psi_new) psi_occ
                c[j, l] += np.conj(amps[basis.index(new)]) * amps[i] * amp
    return c


def page_value(basis: FockBasis, cut: CutSpec, samples: int = 1024, seed: int = 0):
    """Mean and standard error of S_2 over random normalised fixed-N states.

    Amplitudes are i.i.d. complex Gaussians (Haar measure on the sphere),
    drawn from a Philox counter-based generator seeded with ``seed``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    values = np.empty(samples)
    for s in range(samples):
        v = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        v /= np.linalg.norm(v)
        values[s] = renyi2_exact(ManyBodyState(basis, v), cut)
    return time_average(values)


def finite_u_scan(spec: QuenchSpec, cut: CutSpec | None = None,
                  system: Eigensystem | None = None) -> list[EntropyPoint]:
    """S_2(t) traces from exact evolution at interaction ``spec.U``."""
    state = InitialState(spec.state)
    N = state.particle_count(spec.L)
    if N == spec.L and spec.L > 10:
        raise ValueError("finite-U scans at unit filling are limited to L <= 10")
    cut = CutSpec.half(spec.L) if cut is None else cut
    basis = enumerate_basis(spec.L, N)
    h = build_hamiltonian(basis, spec)
    evo = Evolution(h, fock_state(basis, state.kind), system)
    out = []
    for tJ in spec.times:
        psi = evo.at(tJ)
        out.append(EntropyPoint(L=spec.L, L_A=cut.L_A, state=state.kind, tJ=float(tJ),
                                S2=renyi2_exact(psi, cut), perm_method="ed"))
    return out
