"""Time meshes, product-integration weights, and scalar relaxation tables.

For a kernel pair (k, l) and a rate mu >= 0, the relaxation function
s(t, mu) solves the scalar Volterra equation

    s(t) + mu * (l * s)(t) = 1,        s(0) = 1,

and the resolvent kernel r(t, mu) solves r + mu * (l * r) = l.  The two
are tied together by s' = -mu * r and by s = k * r, which is what
``verify_sr_relations`` checks through two independent quadrature routes.

Discretization: the convolution is product-integrated, i.e. on each mesh
cell the smooth factor is interpolated linearly while l is integrated
exactly through its running moments, giving a lower-triangular system
solved by forward substitution.  Because l is integrable but typically
unbounded at 0, solves run on an internal refinement of the user mesh
(union with an algebraically graded mesh of the same size) and the table
is restricted back to the user nodes.

r itself is never the unknown of a discrete system: its primitive
R(t) = int_0^t r satisfies R + mu * (l * R) = int_0^t l, whose discrete
solution is identically (1 - s)/mu in the scheme above, so pointwise
values come from differencing R and convolutions against r are evaluated
in Stieltjes form on the piecewise-linear R.  This sidesteps the
interpolation of an unbounded kernel entirely.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, SolverError, UsageError
from .kernels import (
    KernelFamily,
    KernelPair,
    _pl_convolution_half,
    eval_k,
    eval_l,
    k_moments,
    l_moments,
)

__all__ = [
    "Grading",
    "UNIFORM",
    "TimeMesh",
    "make_mesh",
    "RelaxationKind",
    "RelaxationTable",
    "SRRelationsReport",
    "solve_s",
    "solve_r",
    "solve_forced",
    "convolve_r",
    "verify_sr_relations",
]


@dataclass(frozen=True)
class Grading:
    """Power-law node placement t_j = T * (j / M) ** exponent.

    exponent 1 is the uniform mesh; larger exponents crowd nodes
    toward t = 0 where the relaxation functions lose smoothness.
    """

    exponent: float

    def __post_init__(self) -> None:
        e = self.exponent
        if not (isinstance(e, (int, float)) and math.isfinite(e)):
            raise UsageError("grading exponent must be a finite real")
        if e < 1.0:
            raise UsageError("grading exponent must be >= 1")
        object.__setattr__(self, "exponent", float(e))


UNIFORM = Grading(1.0)


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Strictly increasing nodes 0 = t_0 < ... < t_M = horizon.

    ``grading`` records how the nodes were generated when they came from
    ``make_mesh``; hand-built node arrays leave it as None.
    """

    horizon: float
    nodes: np.ndarray
    grading: Optional[Grading] = None

    def __post_init__(self) -> None:
        T = self.horizon
        if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0.0):
            raise UsageError("horizon must be a positive finite real")
        arr = np.array(self.nodes, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise UsageError("nodes must be a 1-D array with at least two entries")
        if not np.all(np.isfinite(arr)):
            raise UsageError("nodes must be finite")
        if arr[0] != 0.0:
            raise UsageError("first node must be exactly 0")
        if arr[-1] != T:
            raise UsageError("last node must equal the horizon")
        if np.any(np.diff(arr) <= 0.0):
            raise UsageError("nodes must be strictly increasing")
        arr.flags.writeable = False
        object.__setattr__(self, "horizon", float(T))
        object.__setattr__(self, "nodes", arr)

    @property
    def steps(self) -> int:
        return self.nodes.size - 1


def make_mesh(horizon: float, steps: int, grading: Grading = UNIFORM) -> TimeMesh:
    """Mesh with ``steps`` cells on [0, horizon] under the given grading."""
    if not (isinstance(horizon, (int, float)) and math.isfinite(horizon) and horizon > 0.0):
        raise UsageError("horizon must be a positive finite real")
    if not (isinstance(steps, int) and steps >= 2):
        raise UsageError("steps must be an integer >= 2")
    if not isinstance(grading, Grading):
        raise UsageError("grading must be a Grading instance")
    frac = np.arange(steps + 1, dtype=float) / steps
    nodes = horizon * frac**grading.exponent
    nodes[-1] = horizon
    return TimeMesh(horizon=float(horizon), nodes=nodes, grading=grading)


class RelaxationKind(Enum):
    S = "s"
    R = "r"


@dataclass(frozen=True, eq=False)
class RelaxationTable:
    """Values of s(., mu) or r(., mu) on a mesh.

    kind S: ``values[m] = s(t_m)`` for every node, ``cum`` is None.
    kind R: ``values[m-1] = r(t_m)`` for the nodes past zero (r is
    unbounded at 0 for every cataloged family), and ``cum[m]`` holds the
    primitive R(t_m) = int_0^{t_m} r, which is what convolutions against
    r actually consume.
    """

    pair: KernelPair
    mesh: TimeMesh
    mu: float
    kind: RelaxationKind
    values: np.ndarray
    cum: Optional[np.ndarray] = None

    def write_csv(self, path) -> None:
        """Two columns (t, value), full double precision."""
        t = self.mesh.nodes if self.kind is RelaxationKind.S else self.mesh.nodes[1:]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,value\n")
            for ti, vi in zip(t, self.values):
                fh.write(f"{ti:.17g},{vi:.17g}\n")


# -- internal mesh refinement and weights --------------------------------------

_MERGE_REL = 1e-9
_CACHE_SIZE = 8
_weight_cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()


def _grading_exponent(pair: KernelPair) -> float:
    # Strength of the t -> 0 layer: s(t) - 1 ~ -mu t^alpha / Gamma(1+alpha)
    # for the power-type families, so piecewise-linear interpolation needs
    # nodes crowded like t_j ~ (j/M)^rho with rho ~ 2/alpha to keep the
    # cell error uniform.  The distributed-order layer is only
    # logarithmically sharper than alpha = 1.
    if pair.family is KernelFamily.DISTRIBUTED_ORDER:
        return 2.0
    return float(np.clip((2.0 - pair.alpha) / pair.alpha, 1.0, 9.0))


def _thin_nodes(cand: np.ndarray, protected: np.ndarray, gap: float) -> np.ndarray:
    """Drop unprotected nodes closer than gap to the last kept node."""
    keep = np.ones(cand.size, dtype=bool)
    last = cand[0]
    for i in range(1, cand.size):
        if not protected[i] and cand[i] - last < gap:
            keep[i] = False
        else:
            last = cand[i]
    return cand[keep]


_AUX_CAP = 3072
_LAYER_RESOLUTION = 8.0


def _stiff_aux_steps(pair: KernelPair, mesh: TimeMesh, mu_scale: float) -> int:
    """Auxiliary node count that resolves the initial layer at rate mu_scale.

    s(., mu) falls on the scale t* where mu * int_0^t l reaches 1.  If the
    first graded cell steps over t*, product integration rings there like a
    trapezoid rule on a stiff problem, so the graded mesh is densified until
    a few nodes sit inside the layer.  The count is capped: rates too stiff
    for the cap fail validation instead of returning a ringing table.
    """
    if not mu_scale > 0.0:
        return mesh.steps
    T = mesh.horizon
    L_T, _ = l_moments(pair, T)
    if mu_scale * L_T <= 1.0:
        return mesh.steps
    grid = T * np.logspace(-15.0, 0.0, 241)
    L_grid, _ = l_moments(pair, grid)
    t_star = grid[np.searchsorted(L_grid, 1.0 / mu_scale)]
    rho = _grading_exponent(pair)
    need = int(np.ceil((_LAYER_RESOLUTION * T / t_star) ** (1.0 / rho)))
    return max(mesh.steps, min(_AUX_CAP, need))


def _overlay_nodes(
    pair: KernelPair, mesh: TimeMesh, aux_steps: Optional[int] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Union of the user nodes with a graded mesh of aux_steps cells.

    Returns (fine_nodes, user_index) with
    fine_nodes[user_index] == mesh.nodes.  aux_steps defaults to the user
    step count; relaxation solves at stiff rates pass a larger count so the
    grading reaches into the initial layer.  Non-user nodes closer than
    _MERGE_REL * horizon to their predecessor are dropped: near-duplicate
    cells would otherwise cancel catastrophically in the weights.
    """
    t = mesh.nodes
    T = mesh.horizon
    M = mesh.steps
    Ma = M if aux_steps is None else int(aux_steps)
    rho = _grading_exponent(pair)
    gap = _MERGE_REL * T
    jj = np.arange(Ma + 1, dtype=float)
    aux = np.maximum(T * (jj / Ma) ** rho, jj * gap)
    # an auxiliary node riding within gap of a user node on either side
    # would create a near-degenerate cell, so discard it up front
    j = np.searchsorted(t, aux)
    dist_left = aux - t[np.maximum(j - 1, 0)]
    dist_right = t[np.minimum(j, M)] - aux
    aux = aux[np.minimum(np.abs(dist_left), np.abs(dist_right)) >= gap]
    cand = np.sort(np.concatenate([t, aux]))
    fine = _thin_nodes(cand, np.isin(cand, t), gap)
    idx = np.searchsorted(fine, t)
    if not np.array_equal(fine[idx], t):
        raise SolverError("internal mesh refinement lost user nodes")
    return fine, idx


def _weight_matrix(pair: KernelPair, nodes: np.ndarray) -> np.ndarray:
    """Product-integration weights W with (W g)_m ~ int_0^{t_m} l(t_m - s) g(s) ds.

    Cell moments of l(t_m - .) are exact (differences of the running
    moments), the smooth factor g is linear on each cell.  Rows sum to
    int_0^{t_m} l exactly, which is what makes (1 - s)/mu the exact
    discrete primitive of r.
    """
    t = nodes
    n = t.size
    D = np.maximum(t[:, None] - t[None, :], 0.0)
    L2, Lam2 = l_moments(pair, D)
    A = L2[:, :-1] - L2[:, 1:]
    B = t[:, None] * A - (Lam2[:, :-1] - Lam2[:, 1:])
    width = t[1:] - t[:-1]
    left = (t[None, 1:] * A - B) / width
    right = (B - t[None, :-1] * A) / width
    W = np.zeros((n, n))
    W[:, :-1] += left
    W[:, 1:] += right
    return W


def _cached_weights(pair: KernelPair, nodes: np.ndarray) -> np.ndarray:
    key = (pair, nodes.tobytes())
    hit = _weight_cache.get(key)
    if hit is not None:
        _weight_cache.move_to_end(key)
        return hit
    W = _weight_matrix(pair, nodes)
    _weight_cache[key] = W
    while len(_weight_cache) > _CACHE_SIZE:
        _weight_cache.popitem(last=False)
    return W


def _fine_system(
    pair: KernelPair, mesh: TimeMesh, mu_scale: float = 0.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fine_nodes, user_index, W on the fine mesh); W is cached.

    mu_scale is the largest relaxation rate the system will be solved at;
    it only densifies the auxiliary grading when the rate is stiff for the
    mesh, so mild rates share one cached W per (pair, mesh).
    """
    fine, idx = _overlay_nodes(pair, mesh, _stiff_aux_steps(pair, mesh, mu_scale))
    return fine, idx, _cached_weights(pair, fine)


def _solve_lower(W: np.ndarray, mu, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution for y + mu * (W y) = rhs; mu may be a vector."""
    n = W.shape[0]
    mu_arr = np.asarray(mu, dtype=float)
    rhs_arr = np.asarray(rhs, dtype=float)
    shape = (n,) + mu_arr.shape
    rhs_full = np.broadcast_to(rhs_arr.reshape(rhs_arr.shape + (1,) * mu_arr.ndim), shape)
    diag = np.ascontiguousarray(W.diagonal())
    y = np.empty(shape)
    y[0] = rhs_full[0]
    for m in range(1, n):
        acc = W[m, :m] @ y[:m]
        y[m] = (rhs_full[m] - mu_arr * acc) / (1.0 + mu_arr * diag[m])
    return y


_MONOTONE_TOL = 1e-4
_RANGE_TOL = 1e-9
_EQ_RESIDUAL_TOL = 1e-8


def _validate_s(s: np.ndarray, W: np.ndarray, mu) -> None:
    # Columns of s are relaxation tables; values in [0, 1], nonincreasing,
    # residual at roundoff is a theorem for completely positive pairs.  The
    # discrete tables carry quadrature error on top, and at stiff rates
    # that error shows up as a faint ripple in the decayed tail, so the
    # shape tolerances are sized to flag solver defects (sign errors, an
    # unresolved layer ringing with O(1) amplitude) and to wave the
    # stiffness residue through.  Tests assert the sharp tolerances
    # directly on the returned tables in the regimes where they hold.
    if not np.all(np.isfinite(s)):
        raise SolverError("relaxation solve produced non-finite values")
    if np.any(s > 1.0 + _RANGE_TOL) or np.any(s < -_RANGE_TOL):
        raise SolverError("relaxation values escaped [0, 1]")
    if np.any(np.diff(s, axis=0) > _MONOTONE_TOL):
        raise SolverError("relaxation values are not nonincreasing")
    resid = np.abs(s + np.asarray(mu) * (W @ s) - 1.0)
    if float(resid.max()) > _EQ_RESIDUAL_TOL:
        raise SolverError("relaxation residual above tolerance")


def _solve_s_block(pair: KernelPair, mesh: TimeMesh, mus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """s and its resolvent primitive R at the user nodes, one column per rate.

    Rates are grouped by the auxiliary density their layer needs and each
    group is solved on its own fine mesh, so a rate's table depends only on
    (pair, mesh, rate) and never on the other rates in the block.  R is
    returned for positive rates only in the sense that callers must not
    divide by zero themselves; the zero-rate column simply gets
    R = int_0^t l, the mu -> 0 limit of (1 - s)/mu.
    """
    mus = np.asarray(mus, dtype=float)
    aux = np.array([_stiff_aux_steps(pair, mesh, float(m)) for m in mus])
    n_user = mesh.nodes.size
    s_user = np.empty((n_user, mus.size))
    R_user = np.empty((n_user, mus.size))
    for count in np.unique(aux):
        cols = np.flatnonzero(aux == count)
        fine, idx = _overlay_nodes(pair, mesh, int(count))
        W = _cached_weights(pair, fine)
        s_fine = _solve_lower(W, mus[cols], np.ones(fine.size))
        _validate_s(s_fine, W, mus[cols])
        s_user[:, cols] = s_fine[idx]
        pos = mus[cols] > 0.0
        R_fine = np.empty_like(s_fine)
        R_fine[:, pos] = (1.0 - s_fine[:, pos]) / mus[cols][pos]
        if np.any(~pos):
            L_fine, _ = l_moments(pair, fine)
            R_fine[:, ~pos] = L_fine[:, None]
        R_user[:, cols] = R_fine[idx]
    return s_user, R_user


def solve_s(pair: KernelPair, mesh: TimeMesh, mu: float) -> RelaxationTable:
    """Relaxation function s(., mu) on the mesh nodes."""
    if not (isinstance(mu, (int, float)) and math.isfinite(mu) and mu >= 0.0):
        raise DomainError("mu must be a finite real >= 0")
    fine, idx, W = _fine_system(pair, mesh, float(mu))
    s_fine = _solve_lower(W, float(mu), np.ones(fine.size))
    _validate_s(s_fine, W, float(mu))
    return RelaxationTable(
        pair=pair, mesh=mesh, mu=float(mu), kind=RelaxationKind.S, values=s_fine[idx]
    )


def _three_point_derivative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of the local quadratic through consecutive triples.

    Returned at x[1:]: interior points use the centered nonuniform
    formula, the last point the one-sided formula on the final triple.
    """
    d1 = x[1:-1] - x[:-2]
    d2 = x[2:] - x[1:-1]
    y0, y1, y2 = y[:-2], y[1:-1], y[2:]
    mid = (
        -d2 / (d1 * (d1 + d2)) * y0
        + (d2 - d1) / (d1 * d2) * y1
        + d1 / (d2 * (d1 + d2)) * y2
    )
    dl1, dl2 = d1[-1], d2[-1]
    end = (
        dl2 / (dl1 * (dl1 + dl2)) * y[-3]
        - (dl1 + dl2) / (dl1 * dl2) * y[-2]
        + (dl1 + 2.0 * dl2) / (dl2 * (dl1 + dl2)) * y[-1]
    )
    return np.concatenate([mid, [end]])


_R_MIN_STEPS = 256
_R_STARTUP_SKIP = 8


def _r_pointwise(pair: KernelPair, mesh: TimeMesh, mu: float) -> np.ndarray:
    # Pointwise r comes from differencing the primitive R, and that only
    # cancels the discretization error of R when the error varies smoothly
    # from node to node.  The overlay mesh interleaves two node families
    # and breaks that smoothness, so the differencing runs on a standalone
    # graded mesh and the result is carried over by interpolating the
    # bounded ratio q = r / l in the variable xi = int_0^t l, in which q
    # stays smooth down to 0.
    T = mesh.horizon
    M2 = max(2 * mesh.steps, _R_MIN_STEPS, _stiff_aux_steps(pair, mesh, mu))
    rho = _grading_exponent(pair)
    j = np.arange(M2 + 1, dtype=float)
    # grading with a uniform floor: cells narrower than the merge scale
    # would be pure cancellation noise in the weights, and a rough cell
    # pattern would make the discretization error of R too rough to
    # difference, so the floor branch is kept exactly uniform
    g_nodes = np.maximum(T * (j / M2) ** rho, j * (_MERGE_REL * T))
    g_nodes[-1] = T
    W = _cached_weights(pair, g_nodes)
    s_g = _solve_lower(W, float(mu), np.ones(g_nodes.size))
    _validate_s(s_g, W, float(mu))
    R_g = (1.0 - s_g) / float(mu)
    r_g = _three_point_derivative(g_nodes, R_g)
    q_g = r_g / eval_l(pair, g_nodes[1:])
    xi_g, _ = l_moments(pair, g_nodes)
    xi_user, _ = l_moments(pair, mesh.nodes[1:])
    # the discrete R carries an O(1) relative start-up error over the
    # first few cells (piecewise-linear interpolation cannot follow the
    # kink of R at 0), decaying like index^-2; those entries are dropped
    # and the exact limit q(0) = 1 anchors the interpolation instead
    skip = _R_STARTUP_SKIP
    q_user = np.interp(
        xi_user,
        np.concatenate([[0.0], xi_g[1 + skip :]]),
        np.concatenate([[1.0], q_g[skip:]]),
    )
    return q_user * eval_l(pair, mesh.nodes[1:])


def solve_r(pair: KernelPair, mesh: TimeMesh, mu: float) -> RelaxationTable:
    """Resolvent kernel r(., mu) on the mesh nodes past zero.

    The table carries both pointwise values and the primitive
    R = (1 - s)/mu at the nodes (``cum``); convolutions consume the
    primitive, which is exact within the discrete scheme, while the
    pointwise values come from differencing R on a smooth graded mesh.
    """
    if not (isinstance(mu, (int, float)) and math.isfinite(mu) and mu > 0.0):
        raise DomainError("mu must be a finite real > 0")
    fine, idx, W = _fine_system(pair, mesh, float(mu))
    s_fine = _solve_lower(W, float(mu), np.ones(fine.size))
    _validate_s(s_fine, W, float(mu))
    R_fine = (1.0 - s_fine) / float(mu)
    values = _r_pointwise(pair, mesh, mu)
    if np.any(values <= 0.0):
        raise SolverError("resolvent kernel lost positivity")
    return RelaxationTable(
        pair=pair,
        mesh=mesh,
        mu=float(mu),
        kind=RelaxationKind.R,
        values=values,
        cum=R_fine[idx],
    )


def solve_forced(pair: KernelPair, mesh: TimeMesh, mu: float, v0: float, forcing) -> np.ndarray:
    """Solution of y + mu * (l * y) = v0 + (l * g) at the mesh nodes.

    This is the scalar mild solution with initial value v0 and forcing g:
    y = s(., mu) v0 + (r(., mu) * g).  ``forcing`` may be a constant, a
    callable of t, or an array of values at the mesh nodes (interpolated
    linearly onto the internal fine mesh).
    """
    if not (isinstance(mu, (int, float)) and math.isfinite(mu) and mu >= 0.0):
        raise DomainError("mu must be a finite real >= 0")
    if not (isinstance(v0, (int, float)) and math.isfinite(v0)):
        raise UsageError("v0 must be a finite real")
    fine, idx, W = _fine_system(pair, mesh, float(mu))
    g = _forcing_on(forcing, mesh, fine)
    rhs = float(v0) + W @ g
    y = _solve_lower(W, float(mu), rhs)
    if not np.all(np.isfinite(y)):
        raise SolverError("forced relaxation solve produced non-finite values")
    return y[idx]


def _forcing_on(forcing, mesh: TimeMesh, fine: np.ndarray) -> np.ndarray:
    if callable(forcing):
        g = np.asarray(forcing(fine), dtype=float)
        if g.shape != fine.shape:
            raise UsageError("forcing callable must map nodes to values elementwise")
    elif np.ndim(forcing) == 0:
        g = np.full(fine.size, float(forcing))
    else:
        arr = np.asarray(forcing, dtype=float)
        if arr.shape != mesh.nodes.shape:
            raise UsageError("forcing array must have one value per mesh node")
        g = np.interp(fine, mesh.nodes, arr)
    if not np.all(np.isfinite(g)):
        raise UsageError("forcing values must be finite")
    return g


# -- convolution against r ------------------------------------------------------


def _pl_cumulative(nodes: np.ndarray, vals: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)
    return np.concatenate([[0.0], np.cumsum(0.5 * h * (vals[:-1] + vals[1:]))])


def _eval_primitive(nodes: np.ndarray, vals: np.ndarray, cumint: np.ndarray, x: np.ndarray) -> np.ndarray:
    """int_0^x of the piecewise-linear interpolant of (nodes, vals), x in [0, T]."""
    i = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
    dx = x - nodes[i]
    slope = (vals[i + 1] - vals[i]) / (nodes[i + 1] - nodes[i])
    return cumint[i] + vals[i] * dx + 0.5 * slope * dx * dx


def _delta_ir(nodes: np.ndarray, cum: np.ndarray) -> np.ndarray:
    """Matrix of IR(t_m - t_j) - IR(t_m - t_{j+1}) with IR = int_0^x R.

    Entry (m, j) is the exact integral of the piecewise-linear R over the
    reflected cell [t_m - t_{j+1}, t_m - t_j]; rows vanish for j >= m.
    """
    t = nodes
    cumint = _pl_cumulative(t, cum)
    X = np.maximum(t[:, None] - t[None, :], 0.0)
    IRX = _eval_primitive(t, cum, cumint, X)
    return IRX[:, :-1] - IRX[:, 1:]


def convolve_r(table: RelaxationTable, g) -> np.ndarray:
    """(r * g)(t_m) at every mesh node, by Stieltjes integration on R.

    With g piecewise linear and R the primitive of r, integration by
    parts per cell telescopes to

        (r * g)(t_m) = g(0) R(t_m) + sum_j g'_j [IR(t_m - t_j) - IR(t_m - t_{j+1})],

    which never touches pointwise values of the unbounded r.  A constant
    g = c therefore reproduces c (1 - s(t_m))/mu exactly.
    """
    if table.kind is not RelaxationKind.R:
        raise UsageError("convolve_r needs a table of kind R")
    nodes = table.mesh.nodes
    if callable(g):
        gv = np.asarray(g(nodes), dtype=float)
        if gv.shape != nodes.shape:
            raise UsageError("g callable must map nodes to values elementwise")
    else:
        gv = np.asarray(g, dtype=float)
        if gv.shape != nodes.shape:
            raise UsageError("g must have one value per mesh node")
    if not np.all(np.isfinite(gv)):
        raise UsageError("g values must be finite")
    slopes = np.diff(gv) / np.diff(nodes)
    D = _delta_ir(nodes, table.cum)
    return gv[0] * table.cum + D @ slopes


# -- structural verification ----------------------------------------------------


@dataclass(frozen=True)
class SRRelationsReport:
    res_integral: float
    res_kconv: float
    passed: bool


def _cumulative_l_weighted(pair: KernelPair, nodes: np.ndarray, q: np.ndarray) -> np.ndarray:
    """int_0^{t_m} l(s) q(s) ds, integrated in the variable xi = int_0^s l.

    Substituting dxi = l ds turns the weighted integral into the plain
    int q dxi, where q = r / l is smooth in xi all the way to 0 (both r
    and l inherit the same degeneracy there).  The trapezoid rule in xi
    is then uniformly second order despite the kink of q in s.
    """
    L, _ = l_moments(pair, nodes)
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(L) * (q[:-1] + q[1:]))])


def verify_sr_relations(
    s_table: RelaxationTable, r_table: RelaxationTable, tol: float = 5e-3
) -> SRRelationsReport:
    """Cross-check the (s, r) pair through two independent identities.

    res_integral: max over nodes of |s(t_m) - 1 + mu int_0^{t_m} r|, the
    integral evaluated from the pointwise r values via the smooth ratio
    q = r / l (q -> 1 at 0) and product integration against l, never from
    the primitive the solver itself used.

    res_kconv: max over positive nodes of |(k * r)(t_m) - s(t_m)|, the
    convolution split at t/2 and each half product-integrated against
    the singular factor's exact moments, as in the k * l = 1 check.
    """
    if not (isinstance(tol, (int, float)) and tol > 0.0):
        raise UsageError("tol must be positive")
    if s_table.kind is not RelaxationKind.S or r_table.kind is not RelaxationKind.R:
        raise UsageError("verify_sr_relations needs one S table and one R table")
    if s_table.pair != r_table.pair or s_table.mu != r_table.mu:
        raise UsageError("tables disagree on kernel pair or rate")
    if not np.array_equal(s_table.mesh.nodes, r_table.mesh.nodes):
        raise UsageError("tables disagree on the mesh")
    pair = s_table.pair
    mu = s_table.mu
    t = s_table.mesh.nodes
    s = s_table.values
    q_vals = np.concatenate([[1.0], r_table.values / eval_l(pair, t[1:])])
    L_nodes, _ = l_moments(pair, t)

    cum_lq = _cumulative_l_weighted(pair, t, q_vals)
    res_integral = float(np.max(np.abs(s - 1.0 + mu * cum_lq)))

    # k-route, mirroring the product-integration split of the k * l = 1
    # check with q riding along as part of the smooth factor.
    t_pos = t[1:]
    steps = t_pos.size
    p_sub = int(np.clip(steps // 64, 4, 32))
    j_levels = 16
    fracs = [0.0, 2.0**-j_levels]
    for i in range(j_levels - 1, -1, -1):
        lo, hi = 2.0 ** -(i + 1), 2.0**-i
        fracs.extend(lo + (hi - lo) * (m + 1) / p_sub for m in range(p_sub))
    frac = np.array(fracs)
    edges = (0.5 * t_pos)[:, None] * frac[None, :]
    far = t_pos[:, None] - edges

    # q is interpolated in xi = int_0^s l rather than in s itself, for the
    # same kink-absorption reason as in _cumulative_l_weighted
    def q_at(xi: np.ndarray) -> np.ndarray:
        return np.interp(xi, L_nodes, q_vals)

    L_far, _ = l_moments(pair, far)
    K_e, Xi_e = k_moments(pair, edges)
    half_a = _pl_convolution_half(K_e, Xi_e, edges, eval_l(pair, far) * q_at(L_far))
    L_e, Lam_e = l_moments(pair, edges)
    half_b = _pl_convolution_half(L_e, Lam_e, edges, eval_k(pair, far) * q_at(L_e))
    res_kconv = float(np.max(np.abs(half_a + half_b - s[1:])))

    passed = res_integral <= tol and res_kconv <= tol
    return SRRelationsReport(res_integral=res_integral, res_kconv=res_kconv, passed=passed)
