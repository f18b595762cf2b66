"""Nonlinear right-hand sides f: H -> H with explicit Lipschitz budgets.

Every instance carries, next to the evaluator itself, the local
Lipschitz bound kappa(rho) valid on the ball of radius rho and the norm
of f(0).  Stability margins and contraction arguments consume those two
numbers, never an empirical fit, so the evaluator and its budget are
built together from the same parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, UsageError
from .spectral import QuadratureGrid, SpectralOperator, StateVector, analyze, synthesize

__all__ = [
    "Nonlinearity",
    "GShape",
    "EnergyNonlinearitySpec",
    "make_global_lipschitz",
    "make_energy_nonlinearity",
]


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """An evaluator together with its Lipschitz budget.

    ``kappa(rho)`` bounds the Lipschitz constant of the evaluator on the
    ball of radius rho; ``f_zero_norm`` equals the norm of f(0) exactly.
    """

    evaluator: Callable[[StateVector], StateVector]
    kappa: Callable[[float], float]
    f_zero_norm: float
    kind: str = "custom"

    def __call__(self, v: StateVector) -> StateVector:
        return self.evaluator(v)


def _check_nonneg(value, name: str) -> float:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0.0):
        raise UsageError(f"{name} must be a finite real >= 0")
    return float(value)


def make_global_lipschitz(kappa_const: float, offset: StateVector) -> Nonlinearity:
    """f(v) = kappa_const * sin(v) + offset, componentwise in the basis.

    The sine is 1-Lipschitz in every component, so kappa_const is a
    global Lipschitz constant, independent of the ball radius.
    """
    kap = _check_nonneg(kappa_const, "kappa_const")
    if not isinstance(offset, StateVector):
        raise UsageError("offset must be a StateVector")

    def evaluator(v: StateVector) -> StateVector:
        if v.modes != offset.modes:
            raise UsageError("state length does not match the offset")
        return StateVector(kap * np.sin(v.coeffs) + offset.coeffs)

    def kappa(rho: float) -> float:
        _check_nonneg(rho, "rho")
        return kap

    return Nonlinearity(
        evaluator=evaluator,
        kappa=kappa,
        f_zero_norm=offset.norm,
        kind="global_lipschitz",
    )


class GShape(Enum):
    SINE_PROFILE = "sine_profile"


@dataclass(frozen=True)
class EnergyNonlinearitySpec:
    """Parameters of f(v) = F(int u^2) * projection of h_sup sin(u).

    F(r) = a + b r^nu with nu = 0 (constant) or nu >= 1 (C^1 growth);
    exponents in (0, 1) are rejected because F would not be C^1 at 0.
    The pointwise factor is G(x, y) = h(x) sin(y) with h constant at
    h_sup, so G(x, 0) = 0 and G is h_sup-Lipschitz in y.
    """

    a: float
    b: float
    nu: float
    h_sup: float
    g_shape: GShape = GShape.SINE_PROFILE

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _check_nonneg(self.a, "a"))
        object.__setattr__(self, "b", _check_nonneg(self.b, "b"))
        object.__setattr__(self, "h_sup", _check_nonneg(self.h_sup, "h_sup"))
        nu = _check_nonneg(self.nu, "nu")
        if 0.0 < nu < 1.0:
            raise DomainError("nu in (0, 1) is rejected: F(r) = a + b r^nu is not C^1 at 0")
        object.__setattr__(self, "nu", nu)
        if not isinstance(self.g_shape, GShape):
            raise UsageError("g_shape must be a GShape member")


def make_energy_nonlinearity(
    spec: EnergyNonlinearitySpec, op: SpectralOperator, grid: QuadratureGrid
) -> Nonlinearity:
    """Energy-modulated sine nonlinearity evaluated through the grid.

    evaluator(v): synthesize u, form the energy r = int u^2 by
    quadrature, scale the projected pointwise part h_sup sin(u) by
    F(r) = a + b r^nu.  kappa(rho) is the closed-form budget

        2 rho^2 h_sup sup_{[0, rho^2]} |F'| + (a + b rho^{2 nu}) h_sup,

    which collapses to h_sup (a + b rho^{2 nu} + 2 b nu rho^{2 nu})
    for the power-law F.
    """
    if not isinstance(spec, EnergyNonlinearitySpec):
        raise UsageError("spec must be an EnergyNonlinearitySpec")
    if op.eigenfunction_eval is None:
        raise UsageError("operator has no eigenfunction representation")
    if grid.size < 2 * op.modes:
        raise UsageError("grid must have at least 2 N points to avoid aliasing")
    a, b, nu, h_sup = spec.a, spec.b, spec.nu, spec.h_sup

    def evaluator(v: StateVector) -> StateVector:
        u = synthesize(op, v, grid)
        r = float(grid.weights @ (u * u))
        big_f = a + b * r**nu
        g = analyze(op, grid, h_sup * np.sin(u))
        return StateVector(big_f * g.coeffs)

    def kappa(rho: float) -> float:
        _check_nonneg(rho, "rho")
        return h_sup * (a + b * rho ** (2.0 * nu) + 2.0 * b * nu * rho ** (2.0 * nu))

    return Nonlinearity(evaluator=evaluator, kappa=kappa, f_zero_norm=0.0, kind="energy")
