"""Diagonal operators in a fixed eigenbasis and sine synthesis on (0, 1).

A nonnegative self-adjoint operator enters the solver only through its
spectrum: states are coefficient vectors in the eigenbasis, the operator
acts diagonally, and fractional powers are powers of the eigenvalues.
The one concrete instance provided is the Dirichlet operator
(-theta d^2/dx^2)^gamma on (0, 1), whose eigenpairs are analytic; any
other spectrum can be injected through the diagonal constructor, at the
price of losing physical-space synthesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UsageError

__all__ = [
    "SpectralOperator",
    "StateVector",
    "QuadratureGrid",
    "diagonal_operator",
    "dirichlet_laplacian_1d",
    "midpoint_grid",
    "norm_gamma",
    "synthesize",
    "analyze",
]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Coefficients of a state in the operator's eigenbasis."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise UsageError("coefficients must form a nonempty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise UsageError("coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def modes(self) -> int:
        return self.coeffs.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """A v = sum_n lambda_n v_n e_n with 0 < lambda_1 <= ... <= lambda_N.

    ``eigenfunction_eval(n, x)`` evaluates e_n at the points x for the
    1-based mode index n; it is None for spectra injected without a
    physical-space representation.
    """

    eigenvalues: np.ndarray
    eigenfunction_eval: Optional[Callable[[int, np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        lam = np.array(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise UsageError("eigenvalues must form a nonempty 1-D array")
        if not np.all(np.isfinite(lam)):
            raise UsageError("eigenvalues must be finite")
        if lam[0] <= 0.0:
            raise UsageError("eigenvalues must be positive")
        if np.any(np.diff(lam) < 0.0):
            raise UsageError("eigenvalues must be nondecreasing")
        lam.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def modes(self) -> int:
        return self.eigenvalues.size


def diagonal_operator(eigenvalues) -> SpectralOperator:
    """Operator from an explicit spectrum, without eigenfunctions."""
    return SpectralOperator(eigenvalues=eigenvalues)


def dirichlet_laplacian_1d(theta: float, gamma_pow: float, N: int) -> SpectralOperator:
    """(-theta d^2/dx^2)^gamma_pow on (0, 1) with Dirichlet conditions.

    Eigenvalues (theta n^2 pi^2)^gamma_pow, eigenfunctions
    sqrt(2) sin(n pi x), n = 1..N.
    """
    if not (isinstance(theta, (int, float)) and math.isfinite(theta) and theta > 0.0):
        raise UsageError("theta must be a positive finite real")
    if not (isinstance(gamma_pow, (int, float)) and math.isfinite(gamma_pow) and gamma_pow > 0.0):
        raise UsageError("gamma_pow must be a positive finite real")
    if not (isinstance(N, int) and N >= 1):
        raise UsageError("N must be an integer >= 1")
    n = np.arange(1, N + 1, dtype=float)
    lam = (theta * n**2 * np.pi**2) ** gamma_pow

    def sine(mode: int, x) -> np.ndarray:
        return math.sqrt(2.0) * np.sin(mode * np.pi * np.asarray(x, dtype=float))

    return SpectralOperator(eigenvalues=lam, eigenfunction_eval=sine)


def norm_gamma(op: SpectralOperator, v: StateVector, gamma_prime: float) -> float:
    """The fractional-power norm (sum lambda_n^{2 gamma'} v_n^2)^{1/2}.

    gamma' = 0 is the plain norm; negative gamma' gives the dual-space
    scale.
    """
    if not (isinstance(gamma_prime, (int, float)) and math.isfinite(gamma_prime)):
        raise UsageError("gamma_prime must be a finite real")
    if v.modes != op.modes:
        raise UsageError("state length does not match the operator's mode count")
    w = op.eigenvalues**gamma_prime * v.coeffs
    return float(np.linalg.norm(w))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and weights for integrals over (0, 1)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 1 or x.size < 1 or w.shape != x.shape:
            raise UsageError("points and weights must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise UsageError("grid entries must be finite")
        if np.any(x <= 0.0) or np.any(x >= 1.0):
            raise UsageError("quadrature points must lie strictly inside (0, 1)")
        if np.any(np.diff(x) <= 0.0):
            raise UsageError("quadrature points must be strictly increasing")
        if np.any(w <= 0.0):
            raise UsageError("quadrature weights must be positive")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.size


def midpoint_grid(M: int) -> QuadratureGrid:
    """Composite midpoint rule with M cells.

    Midpoints keep the discrete sines exactly orthogonal below the
    aliasing threshold, so analyze(synthesize(v)) = v to roundoff
    whenever M >= 2N.
    """
    if not (isinstance(M, int) and M >= 1):
        raise UsageError("M must be an integer >= 1")
    x = (np.arange(M, dtype=float) + 0.5) / M
    w = np.full(M, 1.0 / M)
    return QuadratureGrid(points=x, weights=w)


def _basis_matrix(op: SpectralOperator, grid: QuadratureGrid) -> np.ndarray:
    if op.eigenfunction_eval is None:
        raise UsageError("operator has no eigenfunction representation")
    if grid.size < 2 * op.modes:
        raise UsageError("grid must have at least 2 N points to avoid aliasing")
    E = np.empty((grid.size, op.modes))
    for n in range(1, op.modes + 1):
        E[:, n - 1] = op.eigenfunction_eval(n, grid.points)
    return E


def synthesize(op: SpectralOperator, v: StateVector, grid: QuadratureGrid) -> np.ndarray:
    """Point values u(x_j) = sum_n v_n e_n(x_j) on the grid."""
    if v.modes != op.modes:
        raise UsageError("state length does not match the operator's mode count")
    return _basis_matrix(op, grid) @ v.coeffs


def analyze(op: SpectralOperator, grid: QuadratureGrid, values) -> StateVector:
    """Coefficients v_n = sum_j w_j u(x_j) e_n(x_j) from grid values."""
    u = np.asarray(values, dtype=float)
    if u.shape != grid.points.shape:
        raise UsageError("values must match the grid, one entry per point")
    if not np.all(np.isfinite(u)):
        raise UsageError("values must be finite")
    E = _basis_matrix(op, grid)
    return StateVector(coeffs=E.T @ (grid.weights * u))
