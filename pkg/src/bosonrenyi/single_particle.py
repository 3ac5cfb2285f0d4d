"""Single-particle problem of the open-boundary hopping chain.

The chain Hamiltonian ``-J sum_j (b_j^+ b_{j+1} + h.c.)`` is tridiagonal, so its
eigenpairs are known in closed form.  Everything downstream (correlation
matrices, permanents, Gaussian references) is built from the propagator
``y_{j,l}(t) = sum_k x_{k,j} exp(-i eps_k t) x_{k,l}``.

Times are dimensionless ``tJ`` throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    J: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"site count L must be a positive integer, got {self.L!r}")
        if not self.J > 0:
            raise ValueError(f"hopping J must be positive, got {self.J!r}")


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues ``eps_k`` and eigenvector table ``x[k, l]`` (row = mode, column = site)."""

    spec: LatticeSpec
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return self.spec.L


@dataclass(frozen=True)
class Propagator:
    """Unitary ``L x L`` matrix ``y[j, l]`` at dimensionless time ``tJ``."""

    y: np.ndarray = field(repr=False)
    tJ: float
    spec: LatticeSpec

    @property
    def L(self) -> int:
        return self.spec.L


def solve_open_chain(spec: LatticeSpec) -> SpectralBasis:
    L = spec.L
    k = np.arange(1, L + 1)
    theta = k * np.pi / (L + 1)
    eigenvalues = -2.0 * spec.J * np.cos(theta)
    x = np.sqrt(2.0 / (L + 1)) * np.sin(np.outer(theta, k))
    eigenvalues.setflags(write=False)
    x.setflags(write=False)
    return SpectralBasis(spec, eigenvalues, x)


def propagator(basis: SpectralBasis, tJ: float) -> Propagator:
    if tJ < 0:
        raise ValueError(f"time must be nonnegative, got tJ={tJ}")
    if tJ == 0:
        # exact identity, so that t = 0 swap matrices are exact permutations
        y = np.eye(basis.spec.L, dtype=np.complex128)
        y.setflags(write=False)
        return Propagator(y, 0.0, basis.spec)
    x = basis.eigenvectors
    # phases use eps/J so that only the dimensionless tJ enters
    phase = np.exp(-1j * (basis.eigenvalues / basis.spec.J) * tJ)
    y = x.T @ (phase[:, None] * x)
    y.setflags(write=False)
    return Propagator(y, float(tJ), basis.spec)


def propagator_rows(basis: SpectralBasis, tJ: float, rows, cols) -> np.ndarray:
    """Sub-block ``y[rows][:, cols]`` without forming the full matrix.

    Used by large-L scans (L ~ 1000) where only a few rows/columns are needed.
    """
    x = basis.eigenvectors
    phase = np.exp(-1j * (basis.eigenvalues / basis.spec.J) * tJ)
    return x[:, rows].T @ (phase[:, None] * x[:, cols])
