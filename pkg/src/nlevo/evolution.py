"""Linear and semilinear trajectory solvers in the eigenbasis.

Each mode carries its own relaxation tables s(., lambda_n) and
R(., lambda_n) on the user mesh; the mild-solution formula

    u_n(t) = s(t, lambda_n) u0_n + (r(., lambda_n) * g_n)(t)

is evaluated by Stieltjes integration against R, exactly as in
``volterra.convolve_r``.  The semilinear solver marches node by node:
the forcing history is frozen, and only the current node's value enters
through the last quadrature cell, giving a fixed-point problem whose
contraction factor is kappa * (cell weight of r), small for any
reasonable mesh.  Non-convergence is reported, never silenced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import SolverError, UsageError
from .kernels import KernelPair
from .nonlinear import Nonlinearity
from .spectral import SpectralOperator, StateVector
from .volterra import TimeMesh, _cached_weights, _delta_ir, _pl_cumulative, _solve_s_block

__all__ = [
    "EvolutionProblem",
    "SolverConfig",
    "Trajectory",
    "ResidualReport",
    "solve_linear",
    "solve_semilinear",
    "residual_check",
    "write_trajectory_csv",
]

Forcing = Union[None, np.ndarray, Nonlinearity]


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """Operator, kernel pair, initial data, forcing, and time mesh.

    ``forcing`` is one of: None (homogeneous), a callable t -> coefficient
    array, an array with one row per mesh node, or a Nonlinearity.  The
    first three feed solve_linear, the last solve_semilinear.
    """

    op: SpectralOperator
    pair: KernelPair
    u0: StateVector
    mesh: TimeMesh
    forcing: Forcing = None

    def __post_init__(self) -> None:
        if not isinstance(self.op, SpectralOperator):
            raise UsageError("op must be a SpectralOperator")
        if not isinstance(self.u0, StateVector):
            raise UsageError("u0 must be a StateVector")
        if not isinstance(self.mesh, TimeMesh):
            raise UsageError("mesh must be a TimeMesh")
        if self.u0.modes != self.op.modes:
            raise UsageError("u0 length does not match the operator's mode count")
        f = self.forcing
        if f is None or isinstance(f, Nonlinearity) or callable(f):
            return
        arr = np.array(f, dtype=float)
        if arr.shape != (self.mesh.nodes.size, self.op.modes):
            raise UsageError("forcing array must have shape (nodes, modes)")
        if not np.all(np.isfinite(arr)):
            raise UsageError("forcing values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "forcing", arr)


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    mode_parallelism: bool = True

    def __post_init__(self) -> None:
        tol = self.picard_tol
        if not (isinstance(tol, (int, float)) and math.isfinite(tol) and tol > 0.0):
            raise UsageError("picard_tol must be a positive finite real")
        if not (isinstance(self.picard_max_iters, int) and self.picard_max_iters >= 1):
            raise UsageError("picard_max_iters must be an integer >= 1")
        if not isinstance(self.mode_parallelism, bool):
            raise UsageError("mode_parallelism must be a boolean")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Computed states, one row of coefficients per mesh node.

    ``picard_iters[m]`` counts the fixed-point iterations spent at node
    m (zero where no iteration happened) and ``picard_residuals[m]``
    records the final update size there.
    """

    mesh: TimeMesh
    states: np.ndarray
    picard_iters: np.ndarray
    picard_residuals: np.ndarray

    def __post_init__(self) -> None:
        states = np.array(self.states, dtype=float)
        n_nodes = self.mesh.nodes.size
        if states.ndim != 2 or states.shape[0] != n_nodes:
            raise UsageError("states must have one row per mesh node")
        if not np.all(np.isfinite(states)):
            raise UsageError("states must be finite")
        iters = np.array(self.picard_iters, dtype=int)
        resid = np.array(self.picard_residuals, dtype=float)
        if iters.shape != (n_nodes,) or resid.shape != (n_nodes,):
            raise UsageError("diagnostics must have one entry per mesh node")
        for arr in (states, iters, resid):
            arr.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "picard_iters", iters)
        object.__setattr__(self, "picard_residuals", resid)

    @property
    def modes(self) -> int:
        return self.states.shape[1]

    def state(self, m: int) -> StateVector:
        return StateVector(self.states[m])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _mode_tables(prob: EvolutionProblem, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode s and R tables at the user nodes, columns in mode order."""
    lam = prob.op.eigenvalues
    if cfg.mode_parallelism:
        try:
            return _solve_s_block(prob.pair, prob.mesh, lam)
        except SolverError:
            pass  # redo mode by mode below so the error names the culprit
    s_cols, r_cols = [], []
    for n in range(lam.size):
        try:
            s_n, r_n = _solve_s_block(prob.pair, prob.mesh, lam[n : n + 1])
        except SolverError as err:
            raise SolverError(
                f"relaxation tables failed for mode {n + 1} "
                f"(eigenvalue {lam[n]:.6g}): {err}"
            ) from err
        s_cols.append(s_n[:, 0])
        r_cols.append(r_n[:, 0])
    return np.column_stack(s_cols), np.column_stack(r_cols)


def _sample_forcing(prob: EvolutionProblem) -> np.ndarray:
    nodes = prob.mesh.nodes
    modes = prob.op.modes
    f = prob.forcing
    if f is None:
        return np.zeros((nodes.size, modes))
    if isinstance(f, np.ndarray):
        return f
    rows = np.empty((nodes.size, modes))
    for m, t in enumerate(nodes):
        g = np.asarray(f(t), dtype=float)
        if g.shape != (modes,):
            raise UsageError(f"forcing callable must return {modes} coefficients (t={t:.6g})")
        rows[m] = g
    if not np.all(np.isfinite(rows)):
        raise UsageError("forcing values must be finite")
    return rows


def solve_linear(prob: EvolutionProblem, cfg: Optional[SolverConfig] = None) -> Trajectory:
    """Trajectory of the linear problem with fixed forcing."""
    cfg = cfg or SolverConfig()
    if isinstance(prob.forcing, Nonlinearity):
        raise UsageError("forcing is a Nonlinearity; use solve_semilinear")
    s_block, r_block = _mode_tables(prob, cfg)
    G = _sample_forcing(prob)
    nodes = prob.mesh.nodes
    h = np.diff(nodes)
    U = np.empty((nodes.size, prob.op.modes))
    for n in range(prob.op.modes):
        slopes = np.diff(G[:, n]) / h
        D = _delta_ir(nodes, r_block[:, n])
        U[:, n] = s_block[:, n] * prob.u0.coeffs[n] + G[0, n] * r_block[:, n] + D @ slopes
    zeros = np.zeros(nodes.size)
    return Trajectory(mesh=prob.mesh, states=U, picard_iters=zeros, picard_residuals=zeros)


def _primitive_rows(
    nodes: np.ndarray, vals: np.ndarray, cumint: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """int_0^{x_p} of the piecewise-linear columns of vals, per column."""
    i = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
    dx = (x - nodes[i])[:, None]
    width = (nodes[i + 1] - nodes[i])[:, None]
    slope = (vals[i + 1] - vals[i]) / width
    return cumint[i] + vals[i] * dx + 0.5 * slope * dx * dx


def _is_zero_map(f: Nonlinearity) -> bool:
    # kappa identically zero makes f constant; f(0) = 0 then pins it at zero
    return f.kappa(1.0) == 0.0 and f.f_zero_norm == 0.0


def solve_semilinear(prob: EvolutionProblem, cfg: Optional[SolverConfig] = None) -> Trajectory:
    """Trajectory of the semilinear problem by one-step-implicit iteration."""
    cfg = cfg or SolverConfig()
    f = prob.forcing
    if not isinstance(f, Nonlinearity):
        raise UsageError("forcing is not a Nonlinearity; use solve_linear")
    nodes = prob.mesh.nodes
    n_nodes = nodes.size
    modes = prob.op.modes
    u0 = prob.u0.coeffs
    iters = np.zeros(n_nodes, dtype=int)
    resid = np.zeros(n_nodes)
    if not np.any(u0) and _is_zero_map(f):
        return Trajectory(
            mesh=prob.mesh,
            states=np.zeros((n_nodes, modes)),
            picard_iters=iters,
            picard_residuals=resid,
        )
    s_block, r_block = _mode_tables(prob, cfg)
    cumint = _pl_cumulative_block(nodes, r_block)
    h = np.diff(nodes)
    U = np.empty((n_nodes, modes))
    G = np.empty((n_nodes, modes))
    U[0] = u0
    G[0] = _eval_f(f, U[0], nodes[0])
    for m in range(1, n_nodes):
        x = nodes[m] - nodes[: m + 1]
        irx = _primitive_rows(nodes, r_block, cumint, x)
        cells = irx[:-1] - irx[1:]
        known = G[0] * r_block[m]
        if m >= 2:
            slopes = np.diff(G[:m], axis=0) / h[: m - 1, None]
            known += (cells[: m - 1] * slopes).sum(axis=0)
        w_last = cells[m - 1] / h[m - 1]
        base = s_block[m] * u0 + known - w_last * G[m - 1]
        u_curr = U[m - 1]
        step = math.inf
        for it in range(1, cfg.picard_max_iters + 1):
            u_next = base + w_last * _eval_f(f, u_curr, nodes[m])
            step = float(np.linalg.norm(u_next - u_curr))
            u_curr = u_next
            if step <= cfg.picard_tol:
                break
        else:
            raise SolverError(
                f"fixed-point iteration stalled at t={nodes[m]:.6g}: "
                f"residual {step:.3e} after {cfg.picard_max_iters} iterations"
            )
        iters[m] = it
        resid[m] = step
        U[m] = u_curr
        G[m] = _eval_f(f, u_curr, nodes[m])
    return Trajectory(mesh=prob.mesh, states=U, picard_iters=iters, picard_residuals=resid)


def _pl_cumulative_block(nodes: np.ndarray, vals: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)[:, None]
    inner = np.cumsum(0.5 * h * (vals[:-1] + vals[1:]), axis=0)
    return np.vstack([np.zeros((1, vals.shape[1])), inner])


def _eval_f(f: Nonlinearity, coeffs: np.ndarray, t: float) -> np.ndarray:
    try:
        out = f(StateVector(coeffs))
    except UsageError:
        raise
    except Exception as err:
        raise SolverError(f"nonlinearity evaluation failed at t={t:.6g}: {err}") from err
    return out.coeffs


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    worst_mode: int
    worst_time: float
    passed: bool


def residual_check(traj: Trajectory, prob: EvolutionProblem, tol: float) -> ResidualReport:
    """Check u_n + lambda_n (l * u_n) = u0_n + (l * g_n) per mode.

    The convolutions here use plain product-integration weights on the
    user mesh, a different route than the fine-mesh tables behind the
    solver, so agreement is evidence rather than tautology.  On meshes
    too coarse for a mode's initial layer the quadrature itself limits
    the residual; grade the mesh if stiff modes must be certified.
    """
    if not (isinstance(tol, (int, float)) and math.isfinite(tol) and tol > 0.0):
        raise UsageError("tol must be a positive finite real")
    if traj.states.shape[1] != prob.op.modes:
        raise UsageError("trajectory mode count does not match the problem")
    if not np.array_equal(traj.mesh.nodes, prob.mesh.nodes):
        raise UsageError("trajectory and problem meshes differ")
    if isinstance(prob.forcing, Nonlinearity):
        G = np.empty_like(traj.states)
        for m in range(traj.states.shape[0]):
            G[m] = _eval_f(prob.forcing, traj.states[m], traj.mesh.nodes[m])
    else:
        G = _sample_forcing(prob)
    W = _cached_weights(prob.pair, prob.mesh.nodes)
    lam = prob.op.eigenvalues
    res = traj.states + (W @ traj.states) * lam[None, :] - traj.states[0][None, :] - W @ G
    flat = int(np.argmax(np.abs(res)))
    node, mode = np.unravel_index(flat, res.shape)
    max_res = float(np.abs(res[node, mode]))
    return ResidualReport(
        max_residual=max_res,
        worst_mode=int(mode) + 1,
        worst_time=float(traj.mesh.nodes[node]),
        passed=max_res <= tol,
    )


def write_trajectory_csv(traj: Trajectory, op: SpectralOperator, path, precision: int = 17) -> None:
    """Columns t, norm, norm_half, u_1..u_k with k = min(modes, 8)."""
    if traj.states.shape[1] != op.modes:
        raise UsageError("trajectory mode count does not match the operator")
    k = min(op.modes, 8)
    lam = op.eigenvalues
    norms = traj.norms()
    half = np.sqrt((traj.states**2 * lam[None, :]).sum(axis=1))
    fmt = f"%.{precision}g"
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,norm,norm_half," + ",".join(f"u_{j + 1}" for j in range(k)) + "\n")
        for m, t in enumerate(traj.mesh.nodes):
            row = [t, norms[m], half[m]] + list(traj.states[m, :k])
            fh.write(",".join(fmt % x for x in row) + "\n")
