"""Fixed-step classical Runge-Kutta (order 4) for y'' = f(t) y.

The linear second-order problem is integrated as the first-order system
(y, y'); global error is O(h^4).  Two entry points: ``integrate_rk4`` keeps
the full solution, ``boundary_value`` keeps O(1) state and only returns the
endpoint values plus the interior zero-crossing count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

__all__ = [
    "IVPSolution", "integrate_rk4", "boundary_value", "default_steps",
    "count_zero_crossings",
]

# state magnitudes above this abort with an overflow report well before inf
_OVERFLOW_LIMIT = 1e280


@dataclass(frozen=True)
class IVPSolution:
    """Uniform-grid solution samples of y'' = f(t) y."""

    grid: np.ndarray
    y: np.ndarray
    yprime: np.ndarray
    step: float

    def __post_init__(self):
        if not (len(self.grid) == len(self.y) == len(self.yprime)):
            raise ValueError("grid, y and yprime must have equal length")


def default_steps(a: float, b: float, tol: float = 1e-8) -> int:
    """Step-count rule 10*(b-a)/tol^(1/4), clamped to [16, 10^6]."""
    raw = 10.0 * (b - a) / tol ** 0.25
    return int(min(1_000_000, max(16, math.ceil(raw))))


def _coefficient_samples(f, ts: np.ndarray) -> list[float]:
    """Evaluate f on the grid, preferring a single vectorized call."""
    vals = None
    try:
        out = f(ts)
    except Exception:
        out = None
    if out is not None:
        arr = np.asarray(out, dtype=float)
        if arr.shape == ts.shape:
            vals = arr
        elif arr.ndim == 0:
            vals = np.full(ts.shape, float(arr))
    if vals is None:
        vals = np.array([float(f(t)) for t in ts], dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrationError(
            f"non-finite coefficient value {vals[i]!r} at t={ts[i]!r}", t=float(ts[i])
        )
    return vals.tolist()


def _validate(a: float, b: float, steps: int):
    if not b > a:
        raise ValueError(f"need b > a, got [{a}, {b}]")
    if steps < 1:
        raise ValueError(f"need steps >= 1, got {steps}")


def integrate_rk4(f, a: float, b: float, y0: float, yp0: float, steps: int) -> IVPSolution:
    """Integrate y'' = f(t) y from (y0, y'0) at a to b in ``steps`` RK4 steps."""
    _validate(a, b, steps)
    h = (b - a) / steps
    ts = a + 0.5 * h * np.arange(2 * steps + 1)
    fs = _coefficient_samples(f, ts)

    ys = np.empty(steps + 1)
    vs = np.empty(steps + 1)
    y, v = float(y0), float(yp0)
    ys[0], vs[0] = y, v
    hh, h6 = 0.5 * h, h / 6.0
    for i in range(steps):
        f0 = fs[2 * i]
        f1 = fs[2 * i + 1]
        f2 = fs[2 * i + 2]
        k1y = v
        k1v = f0 * y
        k2y = v + hh * k1v
        k2v = f1 * (y + hh * k1y)
        k3y = v + hh * k2v
        k3v = f1 * (y + hh * k2y)
        k4y = v + h * k3v
        k4v = f2 * (y + h * k3y)
        y = y + h6 * (k1y + 2.0 * (k2y + k3y) + k4y)
        v = v + h6 * (k1v + 2.0 * (k2v + k3v) + k4v)
        if not (-_OVERFLOW_LIMIT < y < _OVERFLOW_LIMIT) or not (
            -_OVERFLOW_LIMIT < v < _OVERFLOW_LIMIT
        ):
            raise IntegrationError(
                f"state overflow at step {i + 1} of {steps} (t={a + (i + 1) * h!r})",
                t=a + (i + 1) * h,
                step=i + 1,
            )
        ys[i + 1], vs[i + 1] = y, v
    grid = a + h * np.arange(steps + 1)
    grid[-1] = b
    return IVPSolution(grid=grid, y=ys, yprime=vs, step=h)


def boundary_value(f, a: float, b: float, y0: float, yp0: float, steps: int):
    """O(1)-memory variant: returns (y(b), y'(b), interior zero crossings).

    Zero crossings are strict sign changes of the sampled y at the grid
    points interior to (a, b); exact zeros are skipped.
    """
    _validate(a, b, steps)
    h = (b - a) / steps
    ts = a + 0.5 * h * np.arange(2 * steps + 1)
    fs = _coefficient_samples(f, ts)

    y, v = float(y0), float(yp0)
    hh, h6 = 0.5 * h, h / 6.0
    crossings = 0
    prev_sign = 0
    for i in range(steps):
        f0 = fs[2 * i]
        f1 = fs[2 * i + 1]
        f2 = fs[2 * i + 2]
        k1y = v
        k1v = f0 * y
        k2y = v + hh * k1v
        k2v = f1 * (y + hh * k1y)
        k3y = v + hh * k2v
        k3v = f1 * (y + hh * k2y)
        k4y = v + h * k3v
        k4v = f2 * (y + h * k3y)
        y = y + h6 * (k1y + 2.0 * (k2y + k3y) + k4y)
        v = v + h6 * (k1v + 2.0 * (k2v + k3v) + k4v)
        if not (-_OVERFLOW_LIMIT < y < _OVERFLOW_LIMIT) or not (
            -_OVERFLOW_LIMIT < v < _OVERFLOW_LIMIT
        ):
            raise IntegrationError(
                f"state overflow at step {i + 1} of {steps} (t={a + (i + 1) * h!r})",
                t=a + (i + 1) * h,
                step=i + 1,
            )
        if i < steps - 1:  # sample at t_{i+1}, interior to (a, b)
            s = 1 if y > 0.0 else (-1 if y < 0.0 else 0)
            if s != 0:
                if prev_sign != 0 and s != prev_sign:
                    crossings += 1
                prev_sign = s
    return y, v, crossings


def count_zero_crossings(y_samples: np.ndarray) -> int:
    """Strict sign changes among the interior samples (first/last excluded)."""
    interior = np.asarray(y_samples)[1:-1]
    signs = np.sign(interior)
    signs = signs[signs != 0]
    if signs.size < 2:
        return 0
    return int(np.sum(signs[1:] != signs[:-1]))
