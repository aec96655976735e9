"""Command-line interface.

Every command reads an optional JSON config (``--config``) whose keys mirror
the JobConfig structure; explicit flags override file values.  Results are
emitted as a JSON envelope {command, config_echo, result, diagnostics, seed}
or as flat RFC-4180 CSV (field,index,value).  Identical configs produce
byte-identical output: nothing time- or host-dependent is emitted and the
single stochastic component (the Lanczos start vector) is seeded and the
seed recorded.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 partial sweep
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import expressions as ex
from . import gelfand_yaglom as gy
from . import semiclassical as sc
from . import spectra, zeta
from .errors import ConfigError, FludetError

__all__ = ["main", "run_command", "JobConfig"]

COMMANDS = (
    "det", "ratio", "zeta-fit", "spectrum", "zeta-det",
    "prefactor", "discrete-check", "trajectory",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class OperatorConfig:
    mass: float = 1.0
    interval: list | None = None          # [a, b], entries may be pi-expressions
    sign: str = "euclidean"
    w: str | None = None                  # coefficient expression in t (or x,y,z on meshes)
    potential: str | None = None          # potential expression; curvature by differentiation
    auto_diff: bool = True
    shift: float = 0.0
    params: dict = field(default_factory=dict)


@dataclass
class NumericsConfig:
    steps: int | None = None
    tol: float = 1e-6
    lam: float | None = None
    lambda_grid: str | list | None = None
    degree: int = 4
    count: int = 10
    k: int = 5
    grid_shape: list | None = None
    domain: list | None = None
    hbar: float = 1.0
    segments: int = 10000
    endpoints: list | None = None         # [y, x]
    time_window: list | None = None       # [t0, t1]
    method: str = "shooting"
    max_iter: int = 10000
    tail: bool = True
    eigenvalues: list | None = None       # explicit finite spectrum for zeta-det
    store_path: bool = False


@dataclass
class OutputConfig:
    format: str = "json"
    path: str | None = None


@dataclass
class JobConfig:
    command: str
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    @staticmethod
    def from_dict(doc: dict) -> "JobConfig":
        if not isinstance(doc, dict):
            raise ConfigError("job config must be a JSON object", field="<root>")
        known = {"command", "operator", "numerics", "output", "seed"}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}", field=key)
        command = doc.get("command")
        if command not in COMMANDS:
            raise ConfigError(
                f"command must be one of {COMMANDS}, got {command!r}",
                field="command", value=command,
            )
        cfg = JobConfig(command=command)
        for section, cls in (
            ("operator", OperatorConfig),
            ("numerics", NumericsConfig),
            ("output", OutputConfig),
        ):
            sub = doc.get(section, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{section} must be an object", field=section)
            names = {f.name for f in fields(cls)}
            for key, value in sub.items():
                if key not in names:
                    raise ConfigError(f"unknown {section} key {key!r}", field=f"{section}.{key}")
                setattr(getattr(cfg, section), key, value)
        if "seed" in doc:
            cfg.seed = int(doc["seed"])
        return cfg


def _real(text, field_name: str) -> float:
    """Parse a real-valued config entry; 'pi' and arithmetic on it allowed."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return ex.evaluate(ex.parse(str(text)), {"pi": math.pi})
    except Exception as exc:
        raise ConfigError(f"cannot parse number {text!r}: {exc}", field=field_name) from None


_GRID_RE = re.compile(r"^\s*(\d+)\s*@\s*\(([^,]+),([^)]+)\)\s*$")


def parse_lambda_grid(spec, field_name: str = "numerics.lambda_grid") -> list[float]:
    """'N@(a,b)' -> N uniform points in the open interval; or explicit list."""
    if isinstance(spec, (list, tuple)):
        return [_real(v, field_name) for v in spec]
    match = _GRID_RE.match(str(spec))
    if match:
        n = int(match.group(1))
        a = _real(match.group(2), field_name)
        b = _real(match.group(3), field_name)
        if n < 1 or not b > a:
            raise ConfigError(f"bad grid spec {spec!r}", field=field_name, value=spec)
        return [a + (b - a) * i / (n + 1) for i in range(1, n + 1)]
    return [_real(v, field_name) for v in str(spec).split(",") if v.strip()]


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or ():
        if isinstance(pair, str) and "=" in pair:
            name, _, value = pair.partition("=")
            params[name.strip()] = _real(value, f"operator.params.{name}")
        else:
            raise ConfigError(f"--param expects NAME=VALUE, got {pair!r}", field="operator.params")
    return params


def _bound_expression(text: str, var_names: tuple[str, ...], params: dict, field_name: str):
    """Compile an expression of ``var_names`` with parameters bound."""
    try:
        tree = ex.parse(text)
    except FludetError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}", field=field_name) from None
    free = ex.symbols(tree) - set(var_names) - set(params)
    if free:
        raise ConfigError(
            f"expression {text!r} has unbound names {sorted(free)}; bind them with --param",
            field=field_name,
        )
    return tree


def _compiled_with_params(tree, var_names: tuple[str, ...], params: dict):
    names = tuple(var_names) + tuple(sorted(set(ex.symbols(tree)) & set(params)))
    fn = ex.compile_expr(tree, names)
    extra = [params[n] for n in names[len(var_names):]]
    if not extra:
        return fn
    return lambda *coords: fn(*coords, *extra)


def build_operator(cfg: JobConfig) -> gy.SLOperator1D:
    op = cfg.operator
    if op.interval is None or len(op.interval) != 2:
        raise ConfigError("operator.interval must be [a, b]", field="operator.interval")
    a = _real(op.interval[0], "operator.interval")
    b = _real(op.interval[1], "operator.interval")
    sign = op.sign.replace("-", "_")
    params = {k: _real(v, f"operator.params.{k}") for k, v in (op.params or {}).items()}

    if (op.w is None) == (op.potential is None):
        raise ConfigError(
            "exactly one of operator.w and operator.potential is required",
            field="operator.w",
        )
    if op.w is not None:
        tree = _bound_expression(str(op.w), ("t",), params, "operator.w")
        coeff = _compiled_with_params(tree, ("t",), params)
    else:
        if not op.auto_diff:
            raise ConfigError(
                "operator.potential requires auto_diff; pass operator.w "
                "for a direct coefficient",
                field="operator.auto_diff",
            )
        tree = _bound_expression(str(op.potential), ("x",), params, "operator.potential")
        curv = ex.differentiate(ex.differentiate(tree, "x"), "x")
        # static curvature profile: w(t) = V''(x) evaluated at x = t; operators
        # along trajectories come from the trajectory/prefactor commands
        coeff = _compiled_with_params(curv, ("x",), params)
    try:
        return gy.SLOperator1D(
            mass=float(op.mass),
            coeff=coeff,
            interval=(a, b),
            sign=sign,
            shift=float(op.shift),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="operator") from None


def _operator_echo(cfg: JobConfig) -> dict:
    doc = asdict(cfg)
    doc["operator"]["params"] = dict(cfg.operator.params or {})
    return doc


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _cmd_det(cfg: JobConfig) -> tuple[dict, dict]:
    op = build_operator(cfg)
    steps = cfg.numerics.steps or 100_000
    res = gy.gy_determinant(op, steps)
    result = {
        "value": res.value,
        "derivative": res.derivative,
        "zero_crossings": res.zero_crossings,
    }
    return result, {"steps": steps, "method": "rk4-endpoint"}


def _cmd_ratio(cfg: JobConfig) -> tuple[dict, dict]:
    if cfg.numerics.lam is None:
        raise ConfigError("ratio requires numerics.lam (--lambda)", field="numerics.lam")
    op = build_operator(cfg)
    steps = cfg.numerics.steps or 100_000
    lam = float(cfg.numerics.lam)
    ratio = gy.determinant_ratio(op, lam, steps)
    return {"lambda": lam, "ratio": ratio}, {"steps": steps}


def _cmd_zeta_fit(cfg: JobConfig) -> tuple[dict, dict]:
    if cfg.numerics.lambda_grid is None:
        raise ConfigError("zeta-fit requires numerics.lambda_grid", field="numerics.lambda_grid")
    op = build_operator(cfg)
    grid = parse_lambda_grid(cfg.numerics.lambda_grid)
    fit = zeta.zeta_fit(op, grid, int(cfg.numerics.degree), steps=cfg.numerics.steps)
    return fit.as_dict(), {"points": len(grid), "degree": int(cfg.numerics.degree)}


def _spectrum_payload(spec: spectra.Spectrum) -> dict:
    return {
        "eigenvalues": list(spec.eigenvalues),
        "method": spec.method,
        "count_requested": spec.count_requested,
        "residual_tolerances": list(spec.residual_tolerances),
        "residuals": list(spec.residuals) if spec.residuals is not None else None,
        "domain_info": spec.domain_info,
        "clusters": [
            {"value": v, "multiplicity": m}
            for v, m in spec.clusters(10.0 * max(spec.residual_tolerances, default=0.0))
        ],
    }


def _build_mesh(cfg: JobConfig) -> spectra.MeshOperator:
    num = cfg.numerics
    if num.grid_shape is None or num.domain is None:
        raise ConfigError(
            "mesh methods need numerics.grid_shape and numerics.domain",
            field="numerics.grid_shape",
        )
    shape = [int(n) for n in num.grid_shape]
    flat = [_real(v, "numerics.domain") for v in num.domain]
    if len(flat) != 2 * len(shape):
        raise ConfigError(
            f"domain needs {2 * len(shape)} bounds for grid shape {shape}",
            field="numerics.domain",
        )
    box = [(flat[2 * i], flat[2 * i + 1]) for i in range(len(shape))]
    op = cfg.operator
    params = {k: _real(v, f"operator.params.{k}") for k, v in (op.params or {}).items()}
    if op.w is None:
        raise ConfigError("mesh methods take the curvature via operator.w", field="operator.w")
    names = ("x", "y", "z")[: len(shape)]
    tree = _bound_expression(str(op.w), names, params, "operator.w")
    curv = _compiled_with_params(tree, names, params)
    try:
        return spectra.discretize(curv, box, tuple(shape), mass=float(op.mass))
    except ValueError as exc:
        raise ConfigError(str(exc), field="numerics") from None


def _cmd_spectrum(cfg: JobConfig) -> tuple[dict, dict]:
    num = cfg.numerics
    method = num.method
    if method == "shooting":
        op = build_operator(cfg)
        spec = spectra.eigenvalues_shooting(
            op, int(num.count), tol=float(num.tol), steps=num.steps
        )
        return _spectrum_payload(spec), {"method": method}
    if method == "lanczos":
        mesh = _build_mesh(cfg)
        spec = spectra.lanczos_smallest(
            mesh, int(num.k), tol=float(num.tol),
            max_iter=int(num.max_iter), seed=cfg.seed,
        )
        return _spectrum_payload(spec), {"method": method, "unknowns": mesh.n_unknowns}
    if method == "dense":
        mesh = _build_mesh(cfg)
        spec = spectra.eigenvalues_dense(mesh, int(num.k))
        return _spectrum_payload(spec), {"method": method, "unknowns": mesh.n_unknowns}
    raise ConfigError(
        f"method must be shooting|lanczos|dense, got {method!r}", field="numerics.method"
    )


def _cmd_zeta_det(cfg: JobConfig) -> tuple[dict, dict]:
    num = cfg.numerics
    if num.eigenvalues is not None:
        eig = sorted(_real(v, "numerics.eigenvalues") for v in num.eigenvalues)
        spec = spectra.Spectrum(
            eigenvalues=eig,
            method="dense",
            count_requested=len(eig),
            residual_tolerances=[0.0] * len(eig),
            domain_info="explicit finite spectrum",
        )
        value = zeta.zeta_det(spec)
        return {"value": value, "head_count": len(eig), "tail": False}, {"mode": "finite-product"}
    op = build_operator(cfg)
    count = int(num.count)
    spec = spectra.eigenvalues_shooting(op, count, tol=min(float(num.tol), 1e-7), steps=num.steps)
    diagnostics = {"mode": "shooting-head", "head_count": count}
    if num.tail:
        a, b = op.interval
        tail = zeta.TailModel(length=b - a, mass=op.mass, cutoff_index=count)
        value = zeta.zeta_det(spec, tail)
        diagnostics["tail"] = {"length": b - a, "mass": op.mass, "cutoff_index": count}
    else:
        value = zeta.zeta_det(spec)
        diagnostics["tail"] = None
    return {"value": value, "head_count": count, "tail": bool(num.tail)}, diagnostics


def _trajectory_inputs(cfg: JobConfig):
    num = cfg.numerics
    op = cfg.operator
    if op.potential is None:
        raise ConfigError("this command requires operator.potential", field="operator.potential")
    if num.endpoints is None or len(num.endpoints) != 2:
        raise ConfigError("numerics.endpoints must be [start, end]", field="numerics.endpoints")
    if num.time_window is None or len(num.time_window) != 2:
        raise ConfigError("numerics.time_window must be [t0, t1]", field="numerics.time_window")
    params = {k: _real(v, f"operator.params.{k}") for k, v in (op.params or {}).items()}
    tree = _bound_expression(str(op.potential), ("x",), params, "operator.potential")
    # bind parameters as literals so downstream differentiation sees them
    bound = _substitute(tree, params)
    y = _real(num.endpoints[0], "numerics.endpoints")
    x = _real(num.endpoints[1], "numerics.endpoints")
    t0 = _real(num.time_window[0], "numerics.time_window")
    t1 = _real(num.time_window[1], "numerics.time_window")
    return bound, float(op.mass), y, x, t0, t1


def _substitute(tree, params: dict):
    if isinstance(tree, ex.Sym) and tree.name in params:
        return ex.Num(float(params[tree.name]))
    if isinstance(tree, ex.Neg):
        return ex.Neg(_substitute(tree.arg, params))
    if isinstance(tree, ex.Bin):
        return ex.Bin(tree.op, _substitute(tree.left, params), _substitute(tree.right, params))
    if isinstance(tree, ex.Pow):
        return ex.Pow(_substitute(tree.base, params), tree.exponent)
    if isinstance(tree, ex.Call):
        return ex.Call(tree.func, _substitute(tree.arg, params))
    return tree


def _cmd_trajectory(cfg: JobConfig) -> tuple[dict, dict]:
    potential, mass, y, x, t0, t1, = _trajectory_inputs(cfg)
    steps = cfg.numerics.steps or 2000
    traj = sc.classical_trajectory(
        potential, mass, y, x, t0, t1, steps=steps, tol=float(cfg.numerics.tol)
    )
    act = sc.action(traj, potential, mass)
    result = {
        "action": act,
        "initial_velocity": float(traj.velocities[0, 0]),
        "endpoint_mismatch": float(abs(traj.positions[-1, 0] - x)),
    }
    if cfg.numerics.store_path:
        result["samples"] = {
            "times": [float(t) for t in traj.times],
            "positions": [float(p) for p in traj.positions[:, 0]],
        }
    return result, {"steps": len(traj.times) - 1, "shooting_tol": float(cfg.numerics.tol)}


def _cmd_prefactor(cfg: JobConfig) -> tuple[dict, dict]:
    num = cfg.numerics
    if cfg.operator.potential is not None and num.endpoints is not None:
        potential, mass, y, x, t0, t1 = _trajectory_inputs(cfg)
        steps = num.steps or 2000
        traj = sc.classical_trajectory(potential, mass, y, x, t0, t1, steps=steps)
        op = sc.fluctuation_operator(potential, traj, mass)
        act = sc.action(traj, potential, mass)
        est = sc.fluctuation_prefactor(op, float(num.hbar), steps=num.steps, action_value=act)
        diag = {"route": "trajectory", "interval": [t0, t1]}
    else:
        op = build_operator(cfg)
        est = sc.fluctuation_prefactor(op, float(num.hbar), steps=num.steps)
        diag = {"route": "operator", "interval": list(op.interval)}
    result = {
        "prefactor_magnitude": est.prefactor_magnitude,
        "morse_index": est.morse_index,
        "action": est.action,
        "hbar": est.hbar,
        "mass": est.mass,
        "convention_note": est.convention_note,
    }
    return result, diag


def _cmd_discrete_check(cfg: JobConfig) -> tuple[dict, dict]:
    op = build_operator(cfg)
    n = int(cfg.numerics.segments)
    discrete = sc.discrete_fluctuation_det(op, n)
    continuum = gy.gy_determinant(op, cfg.numerics.steps or 100_000).value
    return (
        {
            "discrete": discrete,
            "continuum": continuum,
            "abs_error": abs(discrete - continuum),
            "segments": n,
        },
        {"steps": cfg.numerics.steps or 100_000},
    )


_HANDLERS = {
    "det": _cmd_det,
    "ratio": _cmd_ratio,
    "zeta-fit": _cmd_zeta_fit,
    "spectrum": _cmd_spectrum,
    "zeta-det": _cmd_zeta_det,
    "prefactor": _cmd_prefactor,
    "discrete-check": _cmd_discrete_check,
    "trajectory": _cmd_trajectory,
}


def run_command(cfg: JobConfig) -> dict:
    """Execute one job; returns the output envelope (raises on failure)."""
    result, diagnostics = _HANDLERS[cfg.command](cfg)
    return {
        "command": cfg.command,
        "config_echo": _operator_echo(cfg),
        "result": result,
        "diagnostics": diagnostics,
        "seed": cfg.seed if cfg.command == "spectrum" and cfg.numerics.method == "lanczos" else None,
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for key, value in obj.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), value, rows)
    elif isinstance(obj, (list, tuple)):
        scalars = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        if scalars:
            for i, value in enumerate(obj):
                rows.append((prefix, str(i), value))
        else:
            for i, value in enumerate(obj):
                _flatten(f"{prefix}[{i}]", value, rows)
    else:
        rows.append((prefix, "", obj))


def render(envelope: dict, fmt: str) -> str:
    envelope = _jsonable(envelope)
    if fmt == "json":
        return json.dumps(envelope, indent=2) + "\n"
    if fmt == "csv":
        rows: list = []
        _flatten("", envelope, rows)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["field", "index", "value"])
        for name, index, value in rows:
            writer.writerow([name, index, "" if value is None else value])
        return buf.getvalue()
    raise ConfigError(f"format must be json or csv, got {fmt!r}", field="output.format")


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error_envelope(command: str, stage: str, exc: Exception) -> dict:
    record = {"stage": stage, "message": str(exc), "type": type(exc).__name__}
    if isinstance(exc, ConfigError) and exc.field:
        record["field"] = exc.field
        if exc.value is not None:
            record["value"] = exc.value
    return {"command": command, "error": record}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file mirroring the job structure")
    p.add_argument("--format", choices=("json", "csv"), help="output format (default json)")
    p.add_argument("--output", help="write result to this path instead of stdout")
    p.add_argument("--seed", type=int, help="seed for stochastic components (lanczos)")


def _add_operator(p: argparse.ArgumentParser):
    p.add_argument("--m", "--mass", dest="mass", help="mass m > 0")
    p.add_argument("--interval", nargs=2, metavar=("A", "B"),
                   help="Dirichlet interval; 'pi' literals allowed")
    p.add_argument("--sign", choices=("euclidean", "real-time", "real_time"))
    p.add_argument("--w", help="coefficient expression w(t)")
    p.add_argument("--potential", help="potential expression V(x)")
    p.add_argument("--no-auto-diff", action="store_true",
                   help="forbid deriving the coefficient from the potential")
    p.add_argument("--shift", help="constant spectral shift added to the operator")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="bind a named parameter (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fludet",
        description="Regularized functional determinants of fluctuation operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    specs = {
        "det": "endpoint-value determinant of a 1D operator",
        "ratio": "determinant ratio det(J + lambda^2)/det(J)",
        "zeta-fit": "fit log determinant ratios to extract zeta values",
        "spectrum": "explicit eigenvalues (shooting / lanczos / dense)",
        "zeta-det": "zeta-regularized determinant from an explicit spectrum",
        "prefactor": "semiclassical fluctuation prefactor",
        "discrete-check": "discrete fluctuation determinant vs continuum value",
        "trajectory": "classical boundary-value trajectory and action",
    }
    parsers = {}
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_operator(p)
        p.add_argument("--steps", type=int, help="RK4 step count")
        p.add_argument("--tol", type=float, help="tolerance (bisection / shooting / residual)")
        parsers[name] = p

    parsers["ratio"].add_argument("--lambda", dest="lam", help="shift amplitude lambda >= 0")
    parsers["zeta-fit"].add_argument("--lambda-grid", help="N@(a,b) or comma list")
    parsers["zeta-fit"].add_argument("--degree", type=int, help="fit degree in lambda^2")
    parsers["spectrum"].add_argument("--count", type=int, help="eigenvalues for shooting")
    parsers["spectrum"].add_argument("--method", choices=("shooting", "lanczos", "dense"))
    parsers["spectrum"].add_argument("--k", type=int, help="eigenvalues for lanczos/dense")
    parsers["spectrum"].add_argument("--grid-shape", type=int, nargs="+")
    parsers["spectrum"].add_argument("--domain", nargs="+",
                                     help="per-dimension bounds: a1 b1 [a2 b2 ...]")
    parsers["spectrum"].add_argument("--max-iter", type=int, help="lanczos matvec budget")
    parsers["zeta-det"].add_argument("--count", type=int, help="head eigenvalue count")
    parsers["zeta-det"].add_argument("--no-tail", action="store_true",
                                     help="finite product only, no Weyl tail")
    parsers["zeta-det"].add_argument("--eigenvalues",
                                     help="comma list for an explicit finite spectrum")
    parsers["prefactor"].add_argument("--hbar", help="Planck constant scale")
    parsers["prefactor"].add_argument("--endpoints", nargs=2, metavar=("Y", "X"))
    parsers["prefactor"].add_argument("--time-window", nargs=2, metavar=("T0", "T1"))
    parsers["trajectory"].add_argument("--endpoints", nargs=2, metavar=("Y", "X"))
    parsers["trajectory"].add_argument("--time-window", nargs=2, metavar=("T0", "T1"))
    parsers["trajectory"].add_argument("--store-path", action="store_true",
                                       help="include the sampled path in the output")
    parsers["discrete-check"].add_argument("--segments", type=int,
                                           help="time slices N of the discrete form")

    p_sweep = sub.add_parser("sweep", help="run a list of jobs with bounded parallelism")
    p_sweep.add_argument("--jobs", required=True, help="JSON file with an array of job configs")
    p_sweep.add_argument("--parallelism", type=int, default=1)
    p_sweep.add_argument("--format", choices=("json", "csv"))
    p_sweep.add_argument("--output")

    p_report = sub.add_parser("report", help="render figures + CSV data for an operator")
    _add_common(p_report)
    _add_operator(p_report)
    p_report.add_argument("--outdir", required=True, help="directory for figures and CSV files")
    p_report.add_argument("--lambda-grid", help="grid for the ratio-fit panel")
    p_report.add_argument("--degree", type=int)
    p_report.add_argument("--count", type=int, help="eigenvalues in the spectrum panel")
    p_report.add_argument("--steps", type=int)
    p_report.add_argument("--tol", type=float)
    p_report.add_argument("--only", choices=("fit", "spectrum", "convergence"),
                          help="render a single panel instead of all three")
    return parser


def _merge_cli(cfg: JobConfig, args: argparse.Namespace) -> JobConfig:
    op, num, out = cfg.operator, cfg.numerics, cfg.output
    arg = vars(args)

    def take(name):
        return arg.get(name)

    if take("mass") is not None:
        op.mass = _real(take("mass"), "operator.mass")
    if take("interval") is not None:
        op.interval = list(take("interval"))
    if take("sign") is not None:
        op.sign = take("sign")
    if take("w") is not None:
        op.w = take("w")
    if take("potential") is not None:
        op.potential = take("potential")
    if arg.get("no_auto_diff"):
        op.auto_diff = False
    if take("shift") is not None:
        op.shift = _real(take("shift"), "operator.shift")
    if take("param"):
        op.params = {**(op.params or {}), **_parse_params(take("param"))}

    simple = {
        "steps": "steps", "tol": "tol", "lam": "lam", "lambda_grid": "lambda_grid",
        "degree": "degree", "count": "count", "k": "k", "grid_shape": "grid_shape",
        "max_iter": "max_iter", "segments": "segments", "method": "method",
    }
    for arg_name, field_name in simple.items():
        if arg.get(arg_name) is not None:
            setattr(num, field_name, arg[arg_name])
    if take("hbar") is not None:
        num.hbar = _real(take("hbar"), "numerics.hbar")
    if take("domain") is not None:
        num.domain = list(take("domain"))
    if take("endpoints") is not None:
        num.endpoints = list(take("endpoints"))
    if take("time_window") is not None:
        num.time_window = list(take("time_window"))
    if arg.get("store_path"):
        num.store_path = True
    if arg.get("no_tail"):
        num.tail = False
    if take("eigenvalues") is not None:
        num.eigenvalues = [v for v in str(take("eigenvalues")).split(",") if v.strip()]
    if take("format") is not None:
        out.format = take("format")
    if take("output") is not None:
        out.path = take("output")
    if take("seed") is not None:
        cfg.seed = int(take("seed"))
    if num.lam is not None:
        num.lam = _real(num.lam, "numerics.lam")
    return cfg


def _load_config_file(path: str | None, command: str) -> JobConfig:
    if path is None:
        return JobConfig(command=command)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", field="--config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}", field="--config") from None
    doc.setdefault("command", command)
    if doc["command"] != command:
        raise ConfigError(
            f"config file says command {doc['command']!r} but {command!r} was invoked",
            field="command",
        )
    return JobConfig.from_dict(doc)


def _run_sweep(args: argparse.Namespace) -> int:
    try:
        with open(args.jobs) as fh:
            docs = json.load(fh)
        if not isinstance(docs, list):
            raise ConfigError("sweep file must hold a JSON array of job configs", field="--jobs")
        jobs = [JobConfig.from_dict(doc) for doc in docs]
        parallelism = max(1, int(args.parallelism))
    except (OSError, json.JSONDecodeError) as exc:
        envelope = _error_envelope("sweep", "config", exc)
        _emit(render(envelope, args.format or "json"), args.output)
        return EXIT_CONFIG
    except ConfigError as exc:
        envelope = _error_envelope("sweep", "config", exc)
        _emit(render(envelope, args.format or "json"), args.output)
        return EXIT_CONFIG

    def one(job: JobConfig):
        try:
            return run_command(job)
        except (ConfigError, ValueError) as exc:
            return _error_envelope(job.command, "config", exc)
        except FludetError as exc:
            return _error_envelope(job.command, "compute", exc)

    if parallelism == 1 or len(jobs) <= 1:
        results = [one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(one, jobs))  # input order preserved
    n_failed = sum(1 for r in results if "error" in r)
    envelope = {
        "command": "sweep",
        "jobs": len(jobs),
        "failed": n_failed,
        "results": results,
    }
    _emit(render(envelope, args.format or "json"), args.output)
    return EXIT_PARTIAL if n_failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "sweep":
        return _run_sweep(args)
    if args.command == "report":
        from . import report
        return report.run_report(args)

    fmt = args.format or "json"
    try:
        cfg = _load_config_file(args.config, args.command)
        cfg = _merge_cli(cfg, args)
        fmt = cfg.output.format
        envelope = run_command(cfg)
    except (ConfigError, ValueError) as exc:
        _emit(render(_error_envelope(args.command, "config", exc), fmt), getattr(args, "output", None))
        return EXIT_CONFIG
    except FludetError as exc:
        _emit(render(_error_envelope(args.command, "compute", exc), fmt), getattr(args, "output", None))
        return EXIT_NUMERIC
    _emit(render(envelope, fmt), cfg.output.path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
