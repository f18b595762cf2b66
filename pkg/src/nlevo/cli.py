"""Configuration-driven command line front end.

Three subcommands:

``run <config>``
    Parse an INI scenario file, wire up the kernel pair, operator,
    nonlinearity, initial data and mesh, integrate the problem, and
    write trajectory.csv, relaxation_mode1.csv, envelope.csv (when the
    envelope check is enabled), PNG renderings of the same curves, and
    a JSON manifest into the output directory.  Exit 0 iff every
    enabled check passed.

``verify <family> [--full]``
    Batch-run the structural suites for one kernel family on a preset
    uniform mesh over [0, 1] (quick: 256 steps, full: 1024) and print
    a residual table.  Exit 0 iff all rows pass.

``tables <family> --mu <v> --steps <n>``
    Dump the scalar relaxation tables s and r on a uniform mesh over
    [0, 1] as CSV plus a PNG rendering.

Config parsing is strict: unknown sections or keys abort with exit
code 2 before any computation starts, so a typo in a parameter name
cannot silently fall back to a default.  The run manifest is written
even on failure, carrying the failure reason; a run directory is
never silent about what happened in it.  The output directory is the
NONLOCAL_OUT environment variable when set, else the config's
[output] directory, else ./nlevo_out.

Exit codes: 0 success, 1 solver or check failure, 2 configuration or
usage problems.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import pathlib
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    EnvelopeSpec,
    check_decay,
    estimate_holder_exponent,
    gronwall_envelope,
    run_gronwall_suite,
)
from .errors import NlevoError, SolverError
from .evolution import (
    EvolutionProblem,
    residual_check,
    solve_linear,
    solve_semilinear,
    write_trajectory_csv,
)
from .kernels import (
    KernelPair,
    check_2_regular,
    distributed_order,
    fractional,
    l_moments,
    tempered_fractional,
    two_term,
    verify_pc_identity,
)
from .nonlinear import (
    EnergyNonlinearitySpec,
    Nonlinearity,
    make_energy_nonlinearity,
    make_global_lipschitz,
)
from .spectral import (
    SpectralOperator,
    StateVector,
    diagonal_operator,
    dirichlet_laplacian_1d,
    midpoint_grid,
)
from .volterra import Grading, TimeMesh, UNIFORM, make_mesh, solve_r, solve_s, verify_sr_relations

__all__ = ["main"]


class ConfigError(Exception):
    """A scenario file or command line argument is unusable."""


# Canonical parameter choices for `verify` and `tables`, one instance
# per family.  The values sit inside every family's documented domain
# and away from endpoint degeneracies.
_FAMILY_INSTANCES = {
    "fractional": lambda: fractional(0.5),
    "distributed": distributed_order,
    "tempered": lambda: tempered_fractional(0.6, 1.5),
    "two_term": lambda: two_term(0.4, 0.7, 1.0),
}

_SCHEMA = {
    "kernel": {"family", "alpha", "beta", "gamma", "weight"},
    "operator": {"theta", "gamma_pow", "modes", "eigenvalues"},
    "nonlinearity": {"kind", "kappa", "offset", "a", "b", "nu", "h_sup", "grid_points"},
    "initial_data": {"coefficients", "first_mode"},
    "time": {"horizon", "t", "steps", "grading"},
    "analysis": {
        "envelope",
        "envelope_tol",
        "theta_margin",
        "holder_delta",
        "seed",
        "residual_tol",
        "smallness_eta",
    },
    "output": {"directory", "precision"},
}
_REQUIRED_SECTIONS = ("kernel", "operator", "initial_data", "time")

# Keys that only make sense for one nonlinearity kind; checked after
# the kind is known so the diagnostic can name both.
_KIND_KEYS = {
    "none": set(),
    "global_lipschitz": {"kappa", "offset"},
    "energy": {"a", "b", "nu", "h_sup", "grid_points"},
}

_TRUE_WORDS = {"on", "true", "yes", "1"}
_FALSE_WORDS = {"off", "false", "no", "0"}


# ---------------------------------------------------------------------------
# config file parsing


def _read_config(path: pathlib.Path) -> configparser.ConfigParser:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc))
    if cp.defaults():
        raise ConfigError("[DEFAULT] section is not supported; put keys in a named section")
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; expected one of "
                + ", ".join(sorted(_SCHEMA))
            )
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"[{section}] unknown key '{key}'; allowed keys: "
                    + ", ".join(sorted(_SCHEMA[section]))
                )
    missing = [s for s in _REQUIRED_SECTIONS if s not in cp]
    if missing:
        raise ConfigError("missing required section(s): " + ", ".join(f"[{s}]" for s in missing))
    return cp


def _get_raw(cp, section, key) -> Optional[str]:
    if section in cp and key in cp[section]:
        raw = cp[section][key].strip()
        if not raw:
            raise ConfigError(f"[{section}] {key}: value is empty")
        return raw
    return None


def _get_float(cp, section, key, default=None, required=False) -> Optional[float]:
    raw = _get_raw(cp, section, key)
    if raw is None:
        if required:
            raise ConfigError(f"[{section}] {key}: required key is missing")
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a real number, got '{raw}'")
    if not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: value must be finite")
    return val


def _get_int(cp, section, key, default=None, required=False) -> Optional[int]:
    raw = _get_raw(cp, section, key)
    if raw is None:
        if required:
            raise ConfigError(f"[{section}] {key}: required key is missing")
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got '{raw}'")


def _get_bool(cp, section, key, default=False) -> bool:
    raw = _get_raw(cp, section, key)
    if raw is None:
        return default
    word = raw.lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise ConfigError(f"[{section}] {key}: expected on/off, got '{raw}'")


def _get_floats(cp, section, key) -> Optional[list]:
    raw = _get_raw(cp, section, key)
    if raw is None:
        return None
    parts = [p.strip() for p in raw.split(",")]
    if any(not p for p in parts):
        raise ConfigError(f"[{section}] {key}: empty entry in comma separated list")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected comma separated reals, got '{raw}'")


def _forbid(cp, section, keys, reason) -> None:
    for key in keys:
        if _get_raw(cp, section, key) is not None:
            raise ConfigError(f"[{section}] {key}: not allowed {reason}")


# ---------------------------------------------------------------------------
# scenario assembly


@dataclass
class _Scenario:
    family: str
    pair: KernelPair
    op: SpectralOperator
    kind: str
    nonlin: Optional[Nonlinearity]
    u0: StateVector
    mesh: TimeMesh
    envelope_on: bool
    envelope_tol: float
    mu_env: Optional[float]
    beta_env: float
    theta_margin: Optional[float]
    holder_delta: Optional[float]
    seed: int
    residual_tol: Optional[float]
    smallness: Optional[dict]
    directory: Optional[str]
    precision: int
    effective: dict = field(default_factory=dict)


def _wrap(section: str, fn, *args, **kwargs):
    # Library validation errors during construction are configuration
    # problems; re-raise them with the section that caused them.
    try:
        return fn(*args, **kwargs)
    except NlevoError as exc:
        raise ConfigError(f"[{section}] {exc}")


def _build_pair(cp) -> tuple:
    family = _get_raw(cp, "kernel", "family")
    if family is None:
        raise ConfigError("[kernel] family: required key is missing")
    if family not in _FAMILY_INSTANCES:
        raise ConfigError(
            f"[kernel] family: unknown family '{family}'; expected one of "
            + ", ".join(sorted(_FAMILY_INSTANCES))
        )
    allowed = {
        "fractional": {"alpha"},
        "distributed": set(),
        "tempered": {"alpha", "gamma"},
        "two_term": {"alpha", "beta", "weight"},
    }[family]
    _forbid(cp, "kernel", _SCHEMA["kernel"] - allowed - {"family"}, f"for family {family}")
    if family == "fractional":
        pair = _wrap("kernel", fractional, _get_float(cp, "kernel", "alpha", required=True))
    elif family == "distributed":
        pair = distributed_order()
    elif family == "tempered":
        pair = _wrap(
            "kernel",
            tempered_fractional,
            _get_float(cp, "kernel", "alpha", required=True),
            _get_float(cp, "kernel", "gamma", required=True),
        )
    else:
        pair = _wrap(
            "kernel",
            two_term,
            _get_float(cp, "kernel", "alpha", required=True),
            _get_float(cp, "kernel", "beta", required=True),
            _get_float(cp, "kernel", "weight", required=True),
        )
    return family, pair


def _build_operator(cp) -> SpectralOperator:
    eigenvalues = _get_floats(cp, "operator", "eigenvalues")
    if eigenvalues is not None:
        _forbid(cp, "operator", ("theta", "gamma_pow", "modes"), "together with eigenvalues")
        return _wrap("operator", diagonal_operator, eigenvalues)
    return _wrap(
        "operator",
        dirichlet_laplacian_1d,
        _get_float(cp, "operator", "theta", required=True),
        _get_float(cp, "operator", "gamma_pow", required=True),
        _get_int(cp, "operator", "modes", required=True),
    )


def _build_nonlinearity(cp, op: SpectralOperator) -> tuple:
    kind = "none"
    if "nonlinearity" in cp:
        kind = _get_raw(cp, "nonlinearity", "kind") or "none"
    if kind not in _KIND_KEYS:
        raise ConfigError(
            f"[nonlinearity] kind: unknown kind '{kind}'; expected one of "
            + ", ".join(sorted(_KIND_KEYS))
        )
    _forbid(
        cp,
        "nonlinearity",
        _SCHEMA["nonlinearity"] - _KIND_KEYS[kind] - {"kind"},
        f"for kind {kind}",
    )
    if kind == "none":
        return kind, None
    if kind == "global_lipschitz":
        kappa = _get_float(cp, "nonlinearity", "kappa", required=True)
        offset = _get_floats(cp, "nonlinearity", "offset")
        if offset is None:
            offset = [0.0] * op.modes
        elif len(offset) != op.modes:
            raise ConfigError(
                f"[nonlinearity] offset: expected {op.modes} entries, got {len(offset)}"
            )
        nonlin = _wrap("nonlinearity", make_global_lipschitz, kappa, StateVector(offset))
        return kind, nonlin
    if op.eigenfunction_eval is None:
        raise ConfigError(
            "[nonlinearity] kind energy needs the sine eigenbasis; "
            "use theta/gamma_pow/modes in [operator], not an eigenvalue list"
        )
    spec = _wrap(
        "nonlinearity",
        EnergyNonlinearitySpec,
        _get_float(cp, "nonlinearity", "a", required=True),
        _get_float(cp, "nonlinearity", "b", required=True),
        _get_float(cp, "nonlinearity", "nu", required=True),
        _get_float(cp, "nonlinearity", "h_sup", required=True),
    )
    points = _get_int(cp, "nonlinearity", "grid_points", default=4 * op.modes)
    grid = _wrap("nonlinearity", midpoint_grid, points)
    nonlin = _wrap("nonlinearity", make_energy_nonlinearity, spec, op, grid)
    return kind, nonlin


def _build_u0(cp, op: SpectralOperator) -> StateVector:
    coeffs = _get_floats(cp, "initial_data", "coefficients")
    first = _get_float(cp, "initial_data", "first_mode")
    if (coeffs is None) == (first is None):
        raise ConfigError("[initial_data] give exactly one of coefficients or first_mode")
    if coeffs is not None:
        if len(coeffs) != op.modes:
            raise ConfigError(
                f"[initial_data] coefficients: expected {op.modes} entries, got {len(coeffs)}"
            )
        return _wrap("initial_data", StateVector, coeffs)
    vec = [0.0] * op.modes
    vec[0] = first
    return _wrap("initial_data", StateVector, vec)


def _build_mesh(cp) -> TimeMesh:
    horizon = _get_float(cp, "time", "horizon")
    alias = _get_float(cp, "time", "t")
    if horizon is not None and alias is not None:
        raise ConfigError("[time] give horizon or t, not both")
    if horizon is None:
        horizon = alias
    if horizon is None:
        raise ConfigError("[time] horizon: required key is missing")
    steps = _get_int(cp, "time", "steps", required=True)
    grading = _get_float(cp, "time", "grading")
    sched = UNIFORM if grading is None else _wrap("time", Grading, grading)
    return _wrap("time", make_mesh, horizon, steps, sched)


def _small_signal_gain(nonlin: Nonlinearity) -> float:
    # ||f(v)||/||v|| -> h_sup * F(0) as v -> 0; kappa(0) evaluates
    # exactly that limit for both bundled nonlinearity kinds.
    return float(nonlin.kappa(0.0))


def _build_scenario(cp) -> _Scenario:
    family, pair = _build_pair(cp)
    op = _build_operator(cp)
    kind, nonlin = _build_nonlinearity(cp, op)
    u0 = _build_u0(cp, op)
    mesh = _build_mesh(cp)
    lam1 = float(op.eigenvalues.min())

    envelope_on = _get_bool(cp, "analysis", "envelope", default=False)
    envelope_tol = _get_float(cp, "analysis", "envelope_tol", default=5e-2)
    if not envelope_tol > 0.0:
        raise ConfigError("[analysis] envelope_tol: must be positive")

    theta_margin = _get_float(cp, "analysis", "theta_margin")
    if theta_margin is not None:
        if kind != "energy":
            raise ConfigError(
                "[analysis] theta_margin: only meaningful for nonlinearity kind energy"
            )
        if not theta_margin > 0.0:
            raise ConfigError("[analysis] theta_margin: must be positive")

    mu_env = None
    beta_env = 0.0
    if kind == "energy":
        gain = _small_signal_gain(nonlin)
        # Default margin: split the gap between the linear decay rate
        # and the small-signal gain.  No gap, no default; the envelope
        # check then refuses below instead of inventing a rate.
        if theta_margin is None and lam1 > gain:
            theta_margin = (lam1 - gain) / 2.0
        if theta_margin is not None:
            mu_env = lam1 - gain - theta_margin
        if envelope_on and (mu_env is None or not mu_env > 0.0):
            raise ConfigError(
                "[analysis] envelope: lambda_1 - gain - theta_margin is not "
                "positive; no decaying envelope exists"
            )
    elif kind == "global_lipschitz":
        mu_env = lam1 - _small_signal_gain(nonlin)
        beta_env = float(nonlin.f_zero_norm)
        if envelope_on and not mu_env > 0.0:
            raise ConfigError(
                f"[analysis] envelope: lambda_1 - kappa = {mu_env:.6g} is not "
                "positive; no decaying envelope exists"
            )
    else:
        mu_env = lam1

    holder_delta = _get_float(cp, "analysis", "holder_delta")
    if holder_delta is not None and not 0.0 < holder_delta < mesh.horizon:
        raise ConfigError("[analysis] holder_delta: must lie strictly inside (0, horizon)")

    seed = _get_int(cp, "analysis", "seed", default=42)
    residual_tol = _get_float(cp, "analysis", "residual_tol")
    if residual_tol is not None and not residual_tol > 0.0:
        raise ConfigError("[analysis] residual_tol: must be positive")

    smallness_eta = _get_float(cp, "analysis", "smallness_eta")
    if smallness_eta is not None and kind != "energy":
        raise ConfigError("[analysis] smallness_eta: only meaningful for nonlinearity kind energy")
    smallness = None
    if kind == "energy":
        smallness = _smallness_report(cp, _small_signal_gain(nonlin), lam1, smallness_eta)

    directory = _get_raw(cp, "output", "directory") if "output" in cp else None
    precision = _get_int(cp, "output", "precision", default=17)
    if not 1 <= precision <= 17:
        raise ConfigError("[output] precision: must lie in [1, 17]")

    sc = _Scenario(
        family=family,
        pair=pair,
        op=op,
        kind=kind,
        nonlin=nonlin,
        u0=u0,
        mesh=mesh,
        envelope_on=envelope_on,
        envelope_tol=envelope_tol,
        mu_env=mu_env,
        beta_env=beta_env,
        theta_margin=theta_margin,
        holder_delta=holder_delta,
        seed=seed,
        residual_tol=residual_tol,
        smallness=smallness,
        directory=directory,
        precision=precision,
    )
    sc.effective = {
        "family": family,
        "modes": int(op.modes),
        "lambda_1": lam1,
        "nonlinearity_kind": kind,
        "horizon": float(mesh.horizon),
        "steps": int(mesh.steps),
        "envelope": envelope_on,
        "envelope_tol": envelope_tol,
        "envelope_rate": mu_env,
        "envelope_beta": beta_env,
        "theta_margin": theta_margin,
        "holder_delta": holder_delta,
        "seed": seed,
        "residual_tol": residual_tol,
        "precision": precision,
    }
    return sc


def _smallness_report(cp, gain: float, lam1: float, eta: Optional[float]) -> dict:
    """Basin radius delta = gain * eta / lambda_1 for the energy kind.

    The default eta keeps the state-dependent part of the growth factor
    at half the linear part, so the trajectory stays in the regime the
    linearization controls.  When the gain reaches lambda_1 no radius
    certifies decay and delta is reported as null.
    """
    a = _get_float(cp, "nonlinearity", "a", required=True)
    b = _get_float(cp, "nonlinearity", "b", required=True)
    nu = _get_float(cp, "nonlinearity", "nu", required=True)
    if eta is None:
        if b > 0.0 and nu >= 1.0:
            eta = (a / (2.0 * b)) ** (1.0 / (2.0 * nu))
        else:
            eta = 1.0
    elif not eta > 0.0:
        raise ConfigError("[analysis] smallness_eta: must be positive")
    delta = gain * eta / lam1 if gain < lam1 else None
    return {"eta": float(eta), "gain": float(gain), "delta": delta}


# ---------------------------------------------------------------------------
# artifacts


def _resolve_outdir(config_value: Optional[str]) -> pathlib.Path:
    env = os.environ.get("NONLOCAL_OUT")
    if env:
        return pathlib.Path(env)
    return pathlib.Path(config_value) if config_value else pathlib.Path("nlevo_out")


def _peek_outdir(path: pathlib.Path) -> pathlib.Path:
    # Best effort read of [output] directory so the manifest of a run
    # that dies during strict parsing still lands where the user asked.
    try:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
        return _resolve_outdir(cp.get("output", "directory", fallback=None))
    except Exception:
        return _resolve_outdir(None)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, pathlib.Path):
        return str(obj)
    return obj


def _write_manifest(outdir: pathlib.Path, manifest: dict) -> None:
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "manifest.json", "w", encoding="ascii") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"warning: could not write manifest: {exc}", file=sys.stderr)


def _write_envelope_csv(path, nodes, norms, envelope, precision: int) -> None:
    fmt = f"%.{precision}g"
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,norm,envelope\n")
        for t, n, e in zip(nodes, norms, envelope):
            fh.write(",".join(fmt % x for x in (t, n, e)) + "\n")


def _render_figure(path, curves, ylabel: str, title: str, logy: bool = False) -> None:
    """curves: iterable of (x, y, label) triples, first one drawn bold."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=110)
    for i, (x, y, label) in enumerate(curves):
        ax.plot(x, y, label=label, linewidth=2.0 if i == 0 else 1.0)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# run


def _cmd_run(args) -> int:
    config_path = pathlib.Path(args.config)
    outdir = _peek_outdir(config_path)
    manifest = {
        "version": __version__,
        "command": "run",
        "config_path": str(config_path),
        "status": "failed",
        "failure_reason": None,
        "checks": {},
        "outputs": [],
    }
    try:
        code = _run_scenario(config_path, outdir, manifest)
    except ConfigError as exc:
        manifest["failure_reason"] = f"config: {exc}"
        print(f"config error: {exc}", file=sys.stderr)
        code = 2
    except SolverError as exc:
        manifest["failure_reason"] = f"solver: {exc}"
        print(f"solver failure: {exc}", file=sys.stderr)
        code = 1
    except NlevoError as exc:
        manifest["failure_reason"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    _write_manifest(outdir, manifest)
    return code


def _run_scenario(config_path: pathlib.Path, outdir: pathlib.Path, manifest: dict) -> int:
    cp = _read_config(config_path)
    sc = _build_scenario(cp)
    manifest["config"] = {s: dict(cp[s]) for s in cp.sections()}
    manifest["effective"] = sc.effective
    manifest["seed"] = sc.seed
    if sc.smallness is not None:
        manifest["smallness"] = sc.smallness
    outdir.mkdir(parents=True, exist_ok=True)

    prob = EvolutionProblem(op=sc.op, pair=sc.pair, u0=sc.u0, mesh=sc.mesh, forcing=sc.nonlin)
    traj = solve_linear(prob) if sc.kind == "none" else solve_semilinear(prob)
    norms = traj.norms()
    nodes = sc.mesh.nodes

    failures = []

    # Residual of the integrated equation on the run mesh.  Always
    # computed and reported; it only gates the exit code when the
    # config supplies residual_tol.
    gated = sc.residual_tol is not None
    rep = residual_check(traj, prob, tol=sc.residual_tol if gated else 1.0)
    manifest["checks"]["residual"] = {
        "max_residual": rep.max_residual,
        "worst_mode": rep.worst_mode,
        "worst_time": rep.worst_time,
        "tol": sc.residual_tol,
        "gated": gated,
        "passed": rep.passed if gated else None,
    }
    status = "PASS" if rep.passed else "FAIL"
    line = f"residual        max {rep.max_residual:.3e} at mode {rep.worst_mode}, t={rep.worst_time:.4g}"
    if gated:
        line += f"  (tol {sc.residual_tol:.1e})  {status}"
        if not rep.passed:
            failures.append("residual")
    print(line)

    envelope = None
    if sc.envelope_on:
        spec = EnvelopeSpec(mu=sc.mu_env, v0=float(sc.u0.norm), beta_forcing=sc.beta_env)
        envelope = gronwall_envelope(sc.pair, spec, sc.mesh)
        dec = check_decay(traj, envelope, sc.envelope_tol)
        manifest["checks"]["envelope"] = {
            "mu": sc.mu_env,
            "beta": sc.beta_env,
            "tol": sc.envelope_tol,
            "violations": dec.violations,
            "max_excess": dec.max_excess,
            "terminal_ratio": dec.terminal_ratio,
            "passed": dec.passed,
        }
        if not dec.passed:
            failures.append("envelope")
        print(
            f"envelope        rate {sc.mu_env:.4g}, violations {dec.violations}, "
            f"terminal ratio {dec.terminal_ratio:.4g}  (tol {sc.envelope_tol:.1e})  "
            + ("PASS" if dec.passed else "FAIL")
        )

    if sc.holder_delta is not None:
        est = estimate_holder_exponent(traj, sc.holder_delta)
        manifest["holder"] = {
            "delta": sc.holder_delta,
            "gamma_est": est.gamma_est,
            "c_est": est.c_est,
        }
        print(f"holder estimate gamma {est.gamma_est:.4g} on [{sc.holder_delta:.4g}, T]")

    # Artifacts.  The relaxation table of the slowest mode is the
    # scalar building block of everything above; dumping it makes a
    # run directory self-contained for downstream plotting.
    traj_csv = outdir / "trajectory.csv"
    write_trajectory_csv(traj, sc.op, traj_csv, precision=sc.precision)
    manifest["outputs"].append(traj_csv.name)

    lam1 = float(sc.op.eigenvalues.min())
    table = solve_s(sc.pair, sc.mesh, lam1)
    table_csv = outdir / "relaxation_mode1.csv"
    table.write_csv(table_csv)
    manifest["outputs"].append(table_csv.name)

    if envelope is not None:
        env_csv = outdir / "envelope.csv"
        _write_envelope_csv(env_csv, nodes, norms, envelope, sc.precision)
        manifest["outputs"].append(env_csv.name)

    k = min(sc.op.modes, 4)
    curves = [(nodes, norms, "norm")]
    curves += [(nodes, traj.states[:, j], f"u_{j + 1}") for j in range(k)]
    fig_path = outdir / "trajectory.png"
    _render_figure(fig_path, curves, "coefficient", f"trajectory ({sc.family})")
    manifest["outputs"].append(fig_path.name)
    if envelope is not None:
        fig_path = outdir / "envelope.png"
        _render_figure(
            fig_path,
            [(nodes, norms, "norm"), (nodes, envelope, "envelope")],
            "norm",
            f"decay envelope (rate {sc.mu_env:.4g})",
        )
        manifest["outputs"].append(fig_path.name)

    if failures:
        manifest["failure_reason"] = "check failed: " + ", ".join(failures)
        print(f"FAILED ({manifest['failure_reason']}); artifacts in {outdir}")
        return 1
    manifest["status"] = "ok"
    print(f"ok; artifacts in {outdir}")
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_rows(pair: KernelPair, family: str, full: bool):
    steps = 1024 if full else 256
    mesh = make_mesh(1.0, steps)
    rows = []

    pc = verify_pc_identity(pair, mesh, tol=1e-4 if full else 1e-3)
    rows.append(("pc_identity", pc.max_residual, 1e-4 if full else 1e-3, pc.passed))

    sr_tol = 5e-3 if full else 1e-2
    s2 = solve_s(pair, mesh, 2.0)
    r2 = solve_r(pair, mesh, 2.0)
    sr = verify_sr_relations(s2, r2, tol=sr_tol)
    rows.append(("sr_integral", sr.res_integral, sr_tol, sr.res_integral <= sr_tol))
    rows.append(("sr_kconv", sr.res_kconv, sr_tol, sr.res_kconv <= sr_tol))

    # Shape of the relaxation tables across a spread of rates: values
    # in [0, 1], nonincreasing in t and in mu, and the integrated
    # lower bound s(t) * (1 + mu * L(t)) <= 1.
    mus = (0.5, 2.0, 8.0)
    tables = [s2.values if mu == 2.0 else solve_s(pair, mesh, mu).values for mu in mus]
    L, _ = l_moments(pair, mesh.nodes)
    rng = max(max(float((-t).max()), float((t - 1.0).max())) for t in tables)
    mono_t = max(float(np.diff(t).max()) for t in tables)
    mono_mu = max(float((tables[i + 1] - tables[i]).max()) for i in range(len(mus) - 1))
    eq_s1 = max(float((t * (1.0 + mu * L) - 1.0).max()) for t, mu in zip(tables, mus))
    rows.append(("s_range", rng, 1e-12, rng <= 1e-12))
    rows.append(("s_monotone_t", mono_t, 1e-10, mono_t <= 1e-10))
    rows.append(("s_monotone_mu", mono_mu, 1e-10, mono_mu <= 1e-10))
    rows.append(("eq_s1_bound", eq_s1, 1e-8, eq_s1 <= 1e-8))

    if family == "two_term":
        reg = check_2_regular(pair, np.logspace(-3.0, 3.0, 61))
        rows.append(("two_regular_c1", reg.c1, 1.0, reg.c1 <= 1.0 + 1e-12))
        rows.append(("two_regular_c2", reg.c2, 3.0, reg.c2 <= 3.0 + 1e-12))

    suite = run_gronwall_suite(pair, cases=200 if full else 60, seed=42)
    rows.append(("gronwall_excess", suite.max_excess, 1e-8, suite.max_excess <= 1e-8))
    rows.append(
        ("gronwall_positivity", float(suite.positivity_failures), 0.0, suite.positivity_failures == 0)
    )
    return steps, rows


def _cmd_verify(args) -> int:
    family = args.family
    pair = _FAMILY_INSTANCES[family]()
    steps, rows = _verify_rows(pair, family, args.full)
    level = "full" if args.full else "quick"
    print(f"verify {family} ({level}, {steps} steps, T=1)")
    print(f"{'check':<22}{'value':>14}{'bound':>12}  status")
    ok = True
    for name, value, bound, passed in rows:
        ok = ok and passed
        print(f"{name:<22}{value:>14.3e}{bound:>12.1e}  " + ("PASS" if passed else "FAIL"))
    if not ok:
        failed = ", ".join(name for name, _, _, passed in rows if not passed)
        print(f"FAILED: {failed}", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# tables


def _cmd_tables(args) -> int:
    if not (math.isfinite(args.mu) and args.mu > 0.0):
        print("error: --mu must be a positive real", file=sys.stderr)
        return 2
    if args.steps < 1:
        print("error: --steps must be >= 1", file=sys.stderr)
        return 2
    pair = _FAMILY_INSTANCES[args.family]()
    mesh = make_mesh(1.0, args.steps)
    s = solve_s(pair, mesh, args.mu)
    r = solve_r(pair, mesh, args.mu)
    outdir = _resolve_outdir(None)
    outdir.mkdir(parents=True, exist_ok=True)
    s_csv = outdir / f"s_{args.family}.csv"
    r_csv = outdir / f"r_{args.family}.csv"
    s.write_csv(s_csv)
    r.write_csv(r_csv)
    _render_figure(
        outdir / f"relaxation_{args.family}.png",
        [(mesh.nodes, s.values, "s"), (mesh.nodes[1:], r.values, "r")],
        "value",
        f"relaxation tables ({args.family}, mu={args.mu:g})",
    )
    print(f"wrote {s_csv} and {r_csv}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlevo",
        description="nonlocal-in-time evolution scenarios: run, verify, tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config and write artifacts")
    p_run.add_argument("config", help="path to an INI scenario file")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the structural suites for one family")
    p_verify.add_argument("family", choices=sorted(_FAMILY_INSTANCES))
    p_verify.add_argument("--full", action="store_true", help="1024 steps and 200 suite cases")
    p_verify.set_defaults(func=_cmd_verify)

    p_tables = sub.add_parser("tables", help="dump s/r relaxation tables as CSV")
    p_tables.add_argument("family", choices=sorted(_FAMILY_INSTANCES))
    p_tables.add_argument("--mu", type=float, required=True)
    p_tables.add_argument("--steps", type=int, required=True)
    p_tables.set_defaults(func=_cmd_tables)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; surface that as a return
        # value so embedding callers never see an exception.
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
