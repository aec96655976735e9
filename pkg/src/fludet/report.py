"""Figure + delimited-data reports.

The ``report`` CLI command renders up to three panels for a 1D operator into
an output directory, each as a PNG alongside a CSV of exactly the plotted
numbers:

- ``ratio_fit``: tabulated log determinant ratios over the lambda grid with
  the fitted polynomial and the extracted zeta values.
- ``spectrum``: shooting eigenvalues against the Weyl growth law.
- ``convergence``: |discrete - continuum| fluctuation determinant error
  versus the number of time slices, log-log, with the fitted order.

Everything scientific is computed by the library modules; this file only
arranges output.
"""
from __future__ import annotations

import csv
import json
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import cli as _cli
from . import gelfand_yaglom as gy
from . import semiclassical as sc
from . import spectra, zeta
from .errors import ConfigError, FludetError

__all__ = ["run_report", "ratio_fit_report", "spectrum_report", "convergence_report"]


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def ratio_fit_report(op, outdir: str, lambda_grid, degree: int, steps=None) -> dict:
    fit = zeta.zeta_fit(op, lambda_grid, degree, steps=steps)
    grid = np.asarray(fit.lambda_grid)
    ratios = np.asarray(fit.log_ratios)
    dense = np.linspace(grid[0], grid[-1], 200)
    powers = np.arange(1, degree + 1)
    model = ((dense[:, None] ** 2) ** powers[None, :]) @ np.asarray(fit.coefficients)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(grid**2, ratios, "o", label="tabulated log ratio")
    ax.plot(dense**2, model, "-", label=f"degree-{degree} fit")
    ax.set_xlabel(r"$\lambda^2$")
    ax.set_ylabel(r"$\log\,\det(J+\lambda^2)/\det J$")
    ztxt = ", ".join(f"Z({k})={v:.4f}" for k, v in sorted(fit.zeta_values.items())[:2])
    ax.set_title(f"Determinant-ratio fit: {ztxt}")
    ax.legend()
    ax.grid(True, ls=":", alpha=0.5)
    fig.tight_layout()
    png = os.path.join(outdir, "ratio_fit.png")
    fig.savefig(png, dpi=150)
    plt.close(fig)

    csv_path = os.path.join(outdir, "ratio_fit.csv")
    _write_csv(
        csv_path,
        ["lambda", "lambda_sq", "log_ratio", "fit_value"],
        [
            (
                float(l),
                float(l) ** 2,
                float(r),
                float(((l**2) ** powers) @ np.asarray(fit.coefficients)),
            )
            for l, r in zip(grid, ratios)
        ],
    )
    return {"png": png, "csv": csv_path, "zeta_values": fit.zeta_values,
            "condition_estimate": fit.condition_estimate}


def spectrum_report(op, outdir: str, count: int, tol: float = 1e-8, steps=None) -> dict:
    spec = spectra.eigenvalues_shooting(op, count, tol=tol, steps=steps)
    ns = np.arange(1, count + 1)
    weyl = np.array([op.mass * (n * math.pi / op.length) ** 2 for n in ns])

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ns, spec.eigenvalues, "o", label="shooting")
    ax.plot(ns, weyl, "--", label=r"Weyl law $m(n\pi/L)^2$")
    ax.set_xlabel("index n")
    ax.set_ylabel(r"$\lambda_n$")
    ax.set_title("Shooting spectrum vs Weyl growth")
    ax.legend()
    ax.grid(True, ls=":", alpha=0.5)
    fig.tight_layout()
    png = os.path.join(outdir, "spectrum.png")
    fig.savefig(png, dpi=150)
    plt.close(fig)

    csv_path = os.path.join(outdir, "spectrum.csv")
    _write_csv(
        csv_path,
        ["n", "eigenvalue", "weyl_estimate"],
        [(int(n), float(v), float(w)) for n, v, w in zip(ns, spec.eigenvalues, weyl)],
    )
    return {"png": png, "csv": csv_path, "eigenvalues": list(spec.eigenvalues)}


def convergence_report(op, outdir: str, steps=None) -> dict:
    continuum = gy.gy_determinant(op, steps or 200_000).value
    segment_counts = [2**p for p in range(4, 15)]
    errors = []
    for n in segment_counts:
        errors.append(abs(sc.discrete_fluctuation_det(op, n) - continuum))
    log_n = np.log(segment_counts)
    positive = [e if e > 0 else np.nan for e in errors]
    mask = np.isfinite(np.log(positive))
    order = float(-np.polyfit(log_n[mask], np.log(np.asarray(positive)[mask]), 1)[0]) if mask.sum() >= 2 else float("nan")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(segment_counts, errors, "o-", label="|discrete - continuum|")
    ax.set_xlabel("time slices N")
    ax.set_ylabel("absolute error")
    ax.set_title(f"Discrete fluctuation determinant, measured order {order:.2f}")
    ax.legend()
    ax.grid(True, which="both", ls=":", alpha=0.5)
    fig.tight_layout()
    png = os.path.join(outdir, "convergence.png")
    fig.savefig(png, dpi=150)
    plt.close(fig)

    csv_path = os.path.join(outdir, "convergence.csv")
    _write_csv(
        csv_path,
        ["segments", "abs_error"],
        [(int(n), float(e)) for n, e in zip(segment_counts, errors)],
    )
    return {"png": png, "csv": csv_path, "continuum": continuum, "measured_order": order}


def run_report(args) -> int:
    try:
        cfg = _cli._load_config_file(args.config, "det")
        cfg.command = "det"  # operator fields only; command irrelevant here
        cfg = _cli._merge_cli(cfg, args)
        op = _cli.build_operator(cfg)
        outdir = args.outdir
        os.makedirs(outdir, exist_ok=True)
        panels = ("fit", "spectrum", "convergence") if args.only is None else (args.only,)
        result = {}
        if "fit" in panels:
            grid = _cli.parse_lambda_grid(args.lambda_grid or "10@(0,0.9)")
            result["ratio_fit"] = ratio_fit_report(
                op, outdir, grid, args.degree or 4, steps=args.steps
            )
        if "spectrum" in panels:
            result["spectrum"] = spectrum_report(
                op, outdir, args.count or 10, tol=args.tol or 1e-8, steps=args.steps
            )
        if "convergence" in panels:
            result["convergence"] = convergence_report(op, outdir, steps=args.steps)
    except ConfigError as exc:
        _cli._emit(_cli.render(_cli._error_envelope("report", "config", exc), "json"), None)
        return _cli.EXIT_CONFIG
    except FludetError as exc:
        _cli._emit(_cli.render(_cli._error_envelope("report", "compute", exc), "json"), None)
        return _cli.EXIT_NUMERIC
    envelope = {
        "command": "report",
        "outdir": outdir,
        "result": result,
        "diagnostics": {"panels": list(panels)},
        "seed": None,
    }
    _cli._emit(_cli.render(envelope, "json"), getattr(args, "output", None))
    return _cli.EXIT_OK
