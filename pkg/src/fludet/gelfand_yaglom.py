"""Initial-value-problem determinants of 1D Sturm-Liouville operators.

The determinant of J y = -m y'' -/+ w(t) y (Dirichlet conditions on [a, b],
sign chosen by convention) is the endpoint value y(b) of the solution of
J y = 0 with y(a) = 0, y'(a) = 1.  Shifted operators J + shift are covered by
the ``shift`` field, determinant ratios det(J + lambda^2)/det(J) by
:func:`determinant_ratio`, and the number of negative eigenvalues (Morse
index) by the interior zero count of the same solution.

Normalization note: the raw endpoint value is NOT the zeta-regularized
determinant; for the free Dirichlet operator on [0, L] the endpoint value is
L while the zeta convention gives 2L/sqrt(m).  Ratios against the free
operator are convention-free, and every cross-module consistency check in
this package is stated on ratios (see :mod:`fludet.zeta`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from . import ode
from .errors import MissingSolutionError, ZeroModeError
from .expressions import Expr, Num, Sym, Neg, Bin, Pow, Call, compile_expr

__all__ = [
    "REAL_TIME", "EUCLIDEAN", "SLOperator1D", "GYResult",
    "gy_determinant", "determinant_ratio", "gy_ratio", "morse_index",
    "project_along_trajectory", "free_operator", "zero_mode_threshold",
]

REAL_TIME = "real_time"    # J y = -m y'' - w y   (fluctuations about a trajectory)
EUCLIDEAN = "euclidean"    # J y = -m y'' + w y   (imaginary time; positive for w >= 0)

_SIGNS = {REAL_TIME: -1.0, EUCLIDEAN: +1.0}

Coefficient = Union[float, Expr, Callable[[float], float]]


def _as_callable(coeff: Coefficient, var: str = "t"):
    """Normalize a coefficient spec (constant, expression, callable)."""
    if isinstance(coeff, (int, float)):
        c = float(coeff)
        return lambda t: np.full_like(np.asarray(t, dtype=float), c)
    if isinstance(coeff, (Num, Sym, Neg, Bin, Pow, Call)):
        return compile_expr(coeff, (var,))
    if callable(coeff):
        return coeff
    raise TypeError(f"coefficient must be a number, expression or callable, got {coeff!r}")


@dataclass(frozen=True)
class SLOperator1D:
    """J y = -m y'' -/+ w(t) y + shift * y with Dirichlet conditions on [a, b].

    ``coeff`` may be a constant, an expression in ``t``, or a callable; it
    must be finite on the interval.  ``shift`` is the spectral shift added to
    the operator: nonnegative values realize J + lambda^2, negative values
    are used internally for eigenvalue scans (J - lambda).
    """

    mass: float
    coeff: Coefficient
    interval: tuple[float, float]
    sign: str = EUCLIDEAN
    shift: float = 0.0
    label: str = ""

    def __post_init__(self):
        a, b = self.interval
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not b > a:
            raise ValueError(f"interval must satisfy b > a, got [{a}, {b}]")
        if self.sign not in _SIGNS:
            raise ValueError(f"sign must be one of {sorted(_SIGNS)}, got {self.sign!r}")
        if not math.isfinite(self.shift):
            raise ValueError(f"shift must be finite, got {self.shift}")

    @property
    def length(self) -> float:
        a, b = self.interval
        return b - a

    def coefficient(self):
        """Vectorized w(t)."""
        return _as_callable(self.coeff)

    def rhs_coefficient(self):
        """Vectorized q(t)/m with q = sign*w + shift, so that y'' = (q/m) y."""
        s = _SIGNS[self.sign]
        w = self.coefficient()
        m = self.mass
        sh = self.shift

        def q_over_m(t):
            return (s * np.asarray(w(t), dtype=float) + sh) / m

        return q_over_m

    def shifted(self, delta: float) -> "SLOperator1D":
        """The operator J + delta (delta may be negative for spectral scans)."""
        return replace(self, shift=self.shift + delta)


def free_operator(length: float, mass: float = 1.0) -> SLOperator1D:
    """-m y'' on [0, length] with Dirichlet conditions (w = 0)."""
    return SLOperator1D(mass=mass, coeff=0.0, interval=(0.0, length))


def zero_mode_threshold(op: SLOperator1D) -> float:
    """Scale-aware default |det| threshold below which J is declared singular."""
    return 1e-10 * op.length


@dataclass(frozen=True)
class GYResult:
    """Endpoint summary of the determinant initial-value problem."""

    value: float                      # y(b) = det J in the endpoint convention
    derivative: float                 # y'(b)
    zero_crossings: int               # strict sign changes of y on (a, b)
    solution: Optional[ode.IVPSolution] = None


def gy_determinant(
    op: SLOperator1D,
    steps: int | None = None,
    store_solution: bool = False,
) -> GYResult:
    """Solve J y = 0, y(a) = 0, y'(a) = 1 and report y(b).

    ``steps`` defaults to the fixed-step rule in :func:`fludet.ode.default_steps`.
    With ``store_solution`` the full uniform-grid samples are kept (needed by
    Morse-index consumers); otherwise memory stays O(1).
    """
    a, b = op.interval
    if steps is None:
        steps = ode.default_steps(a, b)
    if steps < 10:
        raise ValueError(f"need steps >= 10, got {steps}")
    f = op.rhs_coefficient()
    if store_solution:
        sol = ode.integrate_rk4(f, a, b, 0.0, 1.0, steps)
        crossings = ode.count_zero_crossings(sol.y)
        return GYResult(
            value=float(sol.y[-1]),
            derivative=float(sol.yprime[-1]),
            zero_crossings=crossings,
            solution=sol,
        )
    yb, vb, crossings = ode.boundary_value(f, a, b, 0.0, 1.0, steps)
    return GYResult(value=yb, derivative=vb, zero_crossings=crossings)


def determinant_ratio(
    op: SLOperator1D,
    lam: float,
    steps: int | None = None,
    zero_mode_tol: float | None = None,
) -> float:
    """det(J + lambda^2) / det(J), both endpoints at identical step counts.

    Raises ZeroModeError when |det J| is below the zero-mode threshold
    (default 1e-10 * (b - a)); a positive lambda then regulates the ratio
    only if the caller shifts the base operator explicitly.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    a, b = op.interval
    if steps is None:
        steps = ode.default_steps(a, b)
    den = gy_determinant(op, steps)
    tol = zero_mode_threshold(op) if zero_mode_tol is None else zero_mode_tol
    if abs(den.value) < tol:
        raise ZeroModeError(
            f"|det J| = {abs(den.value):.3e} below zero-mode threshold {tol:.3e}; "
            "shift the operator or adjust the interval",
            value=den.value,
            threshold=tol,
        )
    num = gy_determinant(op.shifted(lam * lam), steps)
    return num.value / den.value


# name used throughout the docs/CLI; keep the short alias for library callers
gy_ratio = determinant_ratio


def morse_index(result: GYResult) -> int:
    """Number of negative eigenvalues = interior zeros of the stored solution."""
    if result.solution is None:
        raise MissingSolutionError(
            "Morse index needs the stored solution; "
            "call gy_determinant(..., store_solution=True)"
        )
    return result.zero_crossings


def project_along_trajectory(
    hessian: Callable[[np.ndarray], np.ndarray],
    traj,
    direction: np.ndarray | None = None,
    mass: float = 1.0,
) -> SLOperator1D:
    """1D projection of a multi-D curvature field along a trajectory.

    ``hessian`` maps a configuration point to the (d x d) symmetric curvature
    matrix; the returned operator has coefficient
    w(t) = d(t)^T hessian(z(t)) d(t), the trajectory's mass/time window, and
    the real-time sign convention.  ``direction`` is a constant unit vector;
    by default the normalized trajectory tangent is used at each time.

    This one-dimensional projection is exploratory: the collection of
    projected determinants is not claimed to reconstruct the multi-D
    determinant, and results carry a label saying so.
    """
    positions = np.asarray(traj.positions, dtype=float)
    velocities = np.asarray(traj.velocities, dtype=float)
    times = np.asarray(traj.times, dtype=float)
    dim = positions.shape[1]

    h0 = np.asarray(hessian(positions[0]), dtype=float)
    if h0.shape != (dim, dim):
        raise ValueError(
            f"hessian returns shape {h0.shape}, expected ({dim}, {dim}) "
            f"for a {dim}-dimensional trajectory"
        )
    if direction is not None:
        direction = np.asarray(direction, dtype=float)
        if direction.shape != (dim,):
            raise ValueError(
                f"direction has shape {direction.shape}, trajectory is {dim}-dimensional"
            )
        norm = float(np.linalg.norm(direction))
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"direction must be a unit vector, |d| = {norm!r}")

    def w(t: float) -> float:
        z = np.array([np.interp(t, times, positions[:, k]) for k in range(dim)])
        if direction is None:
            v = np.array([np.interp(t, times, velocities[:, k]) for k in range(dim)])
            nv = float(np.linalg.norm(v))
            if nv < 1e-12:
                raise ValueError(
                    f"trajectory tangent vanishes at t={t!r}; pass an explicit direction"
                )
            d = v / nv
        else:
            d = direction
        h = np.asarray(hessian(z), dtype=float)
        return float(d @ h @ d)

    return SLOperator1D(
        mass=mass,
        coeff=w,
        interval=(float(times[0]), float(times[-1])),
        sign=REAL_TIME,
        label="trajectory-projected 1D operator (exploratory)",
    )
