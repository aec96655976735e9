"""Classical trajectories, actions, and fluctuation prefactors.

Boundary-value trajectories m z'' = -grad V(z) are found by shooting on the
initial velocity (finite-difference Newton on the endpoint mismatch, RK4
inner integration).  The quadratic-fluctuation prefactor about such a
trajectory is sqrt(m / (2 pi hbar |y(b)|)) with y(b) the endpoint value of
the determinant initial-value problem; the overall constant is fixed by
matching the exact free-particle kernel, the phase is intentionally not
assigned (the Morse index is reported instead).

``discrete_fluctuation_det`` evaluates the same determinant from the other
end: the finite-N Gaussian over path perturbations reduces to a tridiagonal
determinant, evaluated by the three-term recursion and normalized so that
its N -> infinity limit is the endpoint value y(b).  This is the package's
direct check that the discretized path-integral factor and the operator
determinant agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CausticError, ConjugatePointError, FludetError, ShootingError
from .expressions import Expr, Num, Sym, Neg, Bin, Pow, Call, compile_expr, differentiate
from .gelfand_yaglom import (
    REAL_TIME,
    GYResult,
    SLOperator1D,
    gy_determinant,
    zero_mode_threshold,
)

__all__ = [
    "Trajectory", "PropagatorEstimate",
    "classical_trajectory", "free_trajectory", "harmonic_trajectory",
    "action", "harmonic_action",
    "fluctuation_operator", "fluctuation_prefactor", "discrete_fluctuation_det",
]

_EXPR_NODES = (Num, Sym, Neg, Bin, Pow, Call)
_VAR_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class Trajectory:
    """Sampled classical path with endpoint metadata."""

    times: np.ndarray        # (n+1,)
    positions: np.ndarray    # (n+1, d)
    velocities: np.ndarray   # (n+1, d)
    endpoints: tuple[np.ndarray, np.ndarray]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def position_at(self, t: float) -> np.ndarray:
        return np.array(
            [np.interp(t, self.times, self.positions[:, k]) for k in range(self.dim)]
        )


@dataclass(frozen=True)
class PropagatorEstimate:
    """Semiclassical amplitude data; phase is out of contract."""

    action: Optional[float]
    prefactor_magnitude: float
    hbar: float
    mass: float
    morse_index: int
    convention_note: str


def _compile_gradient(potential: Expr, dim: int):
    names = _VAR_NAMES[:dim]
    grads = [compile_expr(differentiate(potential, v), names) for v in names]

    def force(z: np.ndarray) -> np.ndarray:
        return -np.array([float(g(*z)) for g in grads])

    return force


def _integrate_path(force, mass, z0, v0, t0, t1, steps, store):
    """RK4 on z' = v, v' = force(z)/m; optionally store all samples."""
    h = (t1 - t0) / steps
    z = np.array(z0, dtype=float)
    v = np.array(v0, dtype=float)
    if store:
        zs = np.empty((steps + 1, z.size))
        vs = np.empty((steps + 1, z.size))
        zs[0], vs[0] = z, v
    for i in range(steps):
        k1z = v
        k1v = force(z) / mass
        k2z = v + 0.5 * h * k1v
        k2v = force(z + 0.5 * h * k1z) / mass
        k3z = v + 0.5 * h * k2v
        k3v = force(z + 0.5 * h * k2z) / mass
        k4z = v + h * k3v
        k4v = force(z + h * k3z) / mass
        z = z + (h / 6.0) * (k1z + 2.0 * (k2z + k3z) + k4z)
        v = v + (h / 6.0) * (k1v + 2.0 * (k2v + k3v) + k4v)
        if not np.all(np.isfinite(z)):
            raise FludetError(f"trajectory integration overflowed at step {i + 1}")
        if store:
            zs[i + 1], vs[i + 1] = z, v
    if store:
        return zs, vs
    return z, v


def classical_trajectory(
    potential: Expr,
    mass: float,
    start,
    end,
    t0: float,
    t1: float,
    steps: int = 2000,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> Trajectory:
    """Solve m z'' = -grad V with z(t0) = start, z(t1) = end by shooting.

    Newton iterates on the initial velocity with a finite-difference endpoint
    Jacobian until the endpoint error drops below ``tol``.  A singular
    endpoint map (all shots refocusing, e.g. at a conjugate time) raises
    ConjugatePointError; non-convergence raises ShootingError with the best
    mismatch reached.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    y = np.atleast_1d(np.asarray(start, dtype=float))
    x = np.atleast_1d(np.asarray(end, dtype=float))
    if y.shape != x.shape:
        raise ValueError(f"endpoint shapes differ: {y.shape} vs {x.shape}")
    dim = y.size
    if dim > len(_VAR_NAMES):
        raise ValueError(f"at most {len(_VAR_NAMES)} dimensions supported")
    steps = steps + (steps % 2)  # even sample count keeps Simpson exact-order
    force = _compile_gradient(potential, dim)
    T = t1 - t0

    def endpoint(v0: np.ndarray) -> np.ndarray:
        zf, _ = _integrate_path(force, mass, y, v0, t0, t1, steps, store=False)
        return zf

    v0 = (x - y) / T
    best = math.inf
    scale = max(1.0, float(np.max(np.abs(v0))))
    for _ in range(max_iter):
        zf = endpoint(v0)
        mismatch = float(np.linalg.norm(zf - x))
        best = min(best, mismatch)
        if mismatch <= tol:
            break
        jac = np.empty((dim, dim))
        for j in range(dim):
            delta = 1e-6 * max(1.0, abs(v0[j]))
            probe = v0.copy()
            probe[j] += delta
            jac[:, j] = (endpoint(probe) - zf) / delta
        sigma_min = float(np.linalg.svd(jac, compute_uv=False)[-1])
        if sigma_min < 1e-8 * T:
            raise ConjugatePointError(
                f"endpoint map is singular (smallest singular value {sigma_min:.3e}); "
                f"the endpoints sit at a conjugate point for T = {T!r}"
            )
        v0 = v0 - np.linalg.solve(jac, zf - x)
        if not np.all(np.isfinite(v0)) or np.max(np.abs(v0)) > 1e12 * scale:
            raise ShootingError(
                f"shooting diverged; best endpoint mismatch {best:.3e}",
                best_mismatch=best,
            )
    else:
        raise ShootingError(
            f"shooting did not reach tol={tol:g} in {max_iter} iterations; "
            f"best endpoint mismatch {best:.3e}",
            best_mismatch=best,
        )

    zs, vs = _integrate_path(force, mass, y, v0, t0, t1, steps, store=True)
    times = t0 + (t1 - t0) * np.arange(steps + 1) / steps
    return Trajectory(times=times, positions=zs, velocities=vs, endpoints=(y, x))


def free_trajectory(start, end, t0: float, t1: float, steps: int = 2000) -> Trajectory:
    """Closed-form straight-line path (oracle for the shooting route)."""
    y = np.atleast_1d(np.asarray(start, dtype=float))
    x = np.atleast_1d(np.asarray(end, dtype=float))
    steps = steps + (steps % 2)
    times = t0 + (t1 - t0) * np.arange(steps + 1) / steps
    frac = ((times - t0) / (t1 - t0))[:, None]
    positions = y[None, :] * (1 - frac) + x[None, :] * frac
    velocities = np.broadcast_to((x - y) / (t1 - t0), positions.shape).copy()
    return Trajectory(times=times, positions=positions, velocities=velocities, endpoints=(y, x))


def harmonic_trajectory(
    mass: float, omega: float, start: float, end: float,
    t0: float, t1: float, steps: int = 2000,
) -> Trajectory:
    """Closed-form 1D oscillator path (oracle for the shooting route)."""
    T = t1 - t0
    s = math.sin(omega * T)
    if abs(s) < 1e-12:
        raise ConjugatePointError(
            f"omega*T = {omega * T!r} is a multiple of pi: endpoints are conjugate"
        )
    steps = steps + (steps % 2)
    times = t0 + T * np.arange(steps + 1) / steps
    tau = times - t0
    c = (end - start * math.cos(omega * T)) / s
    z = start * np.cos(omega * tau) + c * np.sin(omega * tau)
    v = omega * (-start * np.sin(omega * tau) + c * np.cos(omega * tau))
    return Trajectory(
        times=times,
        positions=z[:, None],
        velocities=v[:, None],
        endpoints=(np.array([start]), np.array([end])),
    )


def _simpson_uniform(values: np.ndarray, h: float) -> float:
    """Composite Simpson on uniform samples; 3/8 rule absorbs an odd tail."""
    n = len(values) - 1
    if n < 2:
        return float(0.5 * h * (values[0] + values[-1])) if n == 1 else 0.0
    total = 0.0
    if n % 2 == 1:
        # Simpson 3/8 on the last three intervals
        total += 3.0 * h / 8.0 * (
            values[n - 3] + 3.0 * values[n - 2] + 3.0 * values[n - 1] + values[n]
        )
        n -= 3
    if n > 0:
        v = values[: n + 1]
        total += h / 3.0 * (v[0] + v[-1] + 4.0 * np.sum(v[1:-1:2]) + 2.0 * np.sum(v[2:-1:2]))
    return float(total)


def action(traj: Trajectory, potential: Expr, mass: float) -> float:
    """Composite-Simpson action integral of m|z'|^2/2 - V(z) along the path."""
    names = _VAR_NAMES[: traj.dim]
    vfun = compile_expr(potential, names)
    coords = [traj.positions[:, k] for k in range(traj.dim)]
    v_vals = np.broadcast_to(
        np.asarray(vfun(*coords), dtype=float), traj.times.shape
    )
    kinetic = 0.5 * mass * np.sum(traj.velocities**2, axis=1)
    lagrangian = kinetic - v_vals
    h = float(traj.times[1] - traj.times[0])
    return _simpson_uniform(lagrangian, h)


def harmonic_action(
    mass: float, omega: float, start: float, end: float, duration: float
) -> float:
    """Closed-form oscillator action (oracle for the quadrature route)."""
    s = math.sin(omega * duration)
    if abs(s) < 1e-12:
        raise ConjugatePointError(f"omega*T = {omega * duration!r} is a multiple of pi")
    return (
        0.5 * mass * omega
        * ((start**2 + end**2) * math.cos(omega * duration) - 2.0 * start * end)
        / s
    )


# ---------------------------------------------------------------------------
# Fluctuation determinant and prefactor
# ---------------------------------------------------------------------------

def fluctuation_operator(potential: Expr, traj: Trajectory, mass: float) -> SLOperator1D:
    """-m d^2/dt^2 - V''(z(t)) along a 1D trajectory (real-time convention)."""
    if traj.dim != 1:
        raise ValueError("fluctuation_operator handles 1D trajectories; "
                         "use project_along_trajectory for multi-D curvature")
    curv = differentiate(differentiate(potential, "x"), "x")
    cfun = compile_expr(curv, ("x",))
    times = traj.times
    zs = traj.positions[:, 0]

    def w(t):
        return cfun(np.interp(t, times, zs))

    return SLOperator1D(
        mass=mass,
        coeff=w,
        interval=(float(times[0]), float(times[-1])),
        sign=REAL_TIME,
    )


def fluctuation_prefactor(
    op: SLOperator1D,
    hbar: float,
    steps: int | None = None,
    action_value: float | None = None,
    zero_mode_tol: float | None = None,
) -> PropagatorEstimate:
    """Gaussian-fluctuation amplitude sqrt(m / (2 pi hbar |y(b)|)).

    ``y(b)`` is the endpoint value of the determinant initial-value problem
    for ``op``; a vanishing endpoint value (conjugate point) raises
    CausticError since the prefactor diverges there.  The Morse index of the
    operator is attached; the phase it implies is left to the caller.
    """
    if hbar <= 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    result: GYResult = gy_determinant(op, steps, store_solution=True)
    tol = zero_mode_threshold(op) if zero_mode_tol is None else zero_mode_tol
    if abs(result.value) < tol:
        raise CausticError(
            f"endpoint value |y(b)| = {abs(result.value):.3e} below {tol:.3e}: "
            "conjugate point / caustic, the prefactor diverges",
            value=result.value,
            threshold=tol,
        )
    magnitude = math.sqrt(op.mass / (2.0 * math.pi * hbar * abs(result.value)))
    return PropagatorEstimate(
        action=action_value,
        prefactor_magnitude=magnitude,
        hbar=hbar,
        mass=op.mass,
        morse_index=result.zero_crossings,
        convention_note=(
            "amplitude normalized by matching the exact free-particle kernel "
            "sqrt(m/(2 pi hbar T)); phase factor not assigned, Morse index reported"
        ),
    )


def discrete_fluctuation_det(op: SLOperator1D, n_segments: int) -> float:
    """Determinant of the discretized quadratic fluctuation form.

    The (N-1) x (N-1) tridiagonal matrix with diagonal 2m/dt + sign*w_j*dt
    (interior samples w_j) and off-diagonal -m/dt is evaluated through the
    three-term recursion, scaled so that the N -> infinity limit equals the
    endpoint value y(b) of the continuum problem.  The free operator is exact
    at every N (the recursion telescopes to dt * N = T).
    """
    if n_segments < 2:
        raise ValueError(f"need at least 2 segments, got {n_segments}")
    a, b = op.interval
    dt = (b - a) / n_segments
    ts = a + dt * np.arange(1, n_segments)
    q_over_m = op.rhs_coefficient()
    try:
        qs = np.asarray(q_over_m(ts), dtype=float)
        if qs.shape != ts.shape:
            raise ValueError
    except Exception:
        qs = np.array([float(q_over_m(t)) for t in ts], dtype=float)
    if not np.isfinite(qs).all():
        raise FludetError("coefficient not finite at an interior grid point")

    # det of C = tridiag(-1, 2 + q_j dt^2 / m, -1); result is dt * det(C)
    diag = (2.0 + qs * dt * dt).tolist()
    d_prev, d = 1.0, 1.0  # d_{k-1}, d_k with d_0 = 1, d_{-1} = 0
    exponent = 0
    first = True
    for c in diag:
        if first:
            d_prev, d = 1.0, c
            first = False
        else:
            d_prev, d = d, c * d - d_prev
        if abs(d) > 1e250:
            d *= 2.0**-512
            d_prev *= 2.0**-512
            exponent += 512
    result_log2 = exponent + (math.log2(abs(d)) if d != 0.0 else -math.inf)
    if result_log2 + math.log2(dt) > 1020.0:
        raise FludetError(
            f"discrete determinant overflows double precision "
            f"(log2 |det| ~ {result_log2:.1f}); reduce the interval or coefficient"
        )
    return dt * d * 2.0**exponent
