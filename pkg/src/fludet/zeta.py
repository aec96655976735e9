"""Operator zeta function, zeta determinants, and the ratio-fit extraction.

For a positive operator with discrete spectrum lam_1 <= lam_2 <= ... the
operator zeta function is Z(tau) = sum lam_n^(-tau) and the regularized
determinant is exp(-Z'(0)).  Head sums use explicitly computed eigenvalues;
1D Dirichlet tails are modeled by the Weyl growth lam_n ~ m (n pi / L)^2 and
summed with Euler-Maclaurin corrections.

The continuation of Z to tau = 0 is implemented only for the free-operator
tail (where it closes to 2L/sqrt(m) via zeta(0) = -1/2 and
zeta'(0) = -log(2 pi)/2); all other absolute determinants are reported as
ratio * free determinant, with the ratio coming from endpoint values of the
initial-value problem.  Ratios cancel the normalization ambiguity between
the endpoint and zeta conventions.

The ratio-fit route recovers Z at integer arguments without any eigenvalue
computation: log det(J + lam^2)/det(J) is a power series in lam^2 whose
k-th coefficient is (-1)^(k+1) Z(k) / k, so a polynomial least-squares fit
of the tabulated log-ratios yields Z(1), Z(2), ... directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError, ZetaError, ZeroModeError
from .gelfand_yaglom import SLOperator1D, gy_determinant, zero_mode_threshold
from .spectra import Spectrum, eigenvalues_shooting

__all__ = [
    "TailModel", "ZetaFitResult",
    "zeta_truncated", "zeta_fit", "zeta_det", "free_zeta_det", "euler_maclaurin_tail",
]

WEYL_1D = "weyl_1d"


@dataclass(frozen=True)
class TailModel:
    """Weyl tail lam_n ~ mass (n pi / length)^2 for n > cutoff_index."""

    length: float
    mass: float
    cutoff_index: int
    form: str = WEYL_1D

    def __post_init__(self):
        if self.length <= 0 or self.mass <= 0:
            raise ValueError("tail parameters must be positive")
        if self.cutoff_index < 1:
            raise ValueError(f"cutoff_index must be >= 1, got {self.cutoff_index}")

    def level(self, n) -> np.ndarray:
        return self.mass * (np.asarray(n, dtype=float) * math.pi / self.length) ** 2


def euler_maclaurin_tail(s: float, n_cut: int) -> tuple[float, float]:
    """(sum_{n > n_cut} n^(-s), bound on the remainder of the correction).

    Euler-Maclaurin through the B6 term; the returned bound is the magnitude
    of the first omitted term.
    """
    if s <= 1.0:
        raise ZetaError(f"tail sum diverges for exponent s = {s} <= 1")
    N = float(n_cut)
    value = (
        N ** (1.0 - s) / (s - 1.0)
        - 0.5 * N ** (-s)
        + s * N ** (-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * N ** (-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * N ** (-s - 5.0) / 30240.0
    )
    bound = abs(
        s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * (s + 5) * (s + 6) * N ** (-s - 7.0)
    ) / 1209600.0
    return value, bound


def _positive_eigenvalues(spectrum: Spectrum, n: int | None = None) -> np.ndarray:
    eig = np.asarray(spectrum.eigenvalues, dtype=float)
    if n is not None:
        if len(eig) < n:
            raise ZetaError(
                f"spectrum holds {len(eig)} eigenvalues but the tail model "
                f"cuts off at index {n}"
            )
        eig = eig[:n]
    if eig.size and eig.min() <= 0.0:
        raise ZetaError(
            f"nonpositive eigenvalue {eig.min()!r}: zeta of an indefinite "
            "operator is not defined here"
        )
    return eig


def zeta_truncated(
    spectrum: Spectrum,
    tau: float,
    tail: TailModel | None = None,
) -> tuple[float, float]:
    """(sum lam_n^(-tau), error estimate), optionally Weyl-tail corrected.

    Without a tail the spectrum is treated as exact and finite (error 0).
    With a tail, the head runs over the first ``cutoff_index`` eigenvalues
    and the remainder is summed in the Weyl model via Euler-Maclaurin; the
    error estimate bounds that correction's truncation.  Requires
    tau > 1/2 for tail convergence and a positive spectrum.
    """
    if tail is not None and tail.form != WEYL_1D:
        raise ZetaError(f"unsupported tail model {tail.form!r}")
    if tail is not None and tau <= 0.5:
        raise ZetaError(f"tau = {tau} is in the divergence region (need tau > 1/2)")
    eig = _positive_eigenvalues(spectrum, tail.cutoff_index if tail else None)
    head = float(np.sum(eig ** (-tau)))
    if tail is None:
        return head, 0.0
    prefactor = (tail.mass * math.pi**2 / tail.length**2) ** (-tau)
    tail_sum, bound = euler_maclaurin_tail(2.0 * tau, tail.cutoff_index)
    return head + prefactor * tail_sum, prefactor * bound


# ---------------------------------------------------------------------------
# Determinants
# ---------------------------------------------------------------------------

def free_zeta_det(length: float, mass: float = 1.0) -> float:
    """Zeta determinant 2L/sqrt(m) of the free Dirichlet operator on [0, L].

    From Z(tau) = zeta(2 tau) (pi sqrt(m)/L)^(-2 tau) and the constants
    zeta(0) = -1/2, zeta'(0) = -log(2 pi)/2.
    """
    zeta0 = -0.5
    zeta_prime0 = -0.5 * math.log(2.0 * math.pi)
    log_scale = math.log(math.pi * math.sqrt(mass) / length)
    z_prime = 2.0 * zeta_prime0 - 2.0 * log_scale * zeta0
    return math.exp(-z_prime)


def zeta_det(spectrum: Spectrum, tail: TailModel | None = None) -> float:
    """Regularized determinant from an explicit spectrum.

    Without a tail: the plain product of the (nonzero) eigenvalues, i.e. the
    finite-dimensional determinant.  With a Weyl tail: the head eigenvalues
    are compared level-by-level against the free Dirichlet levels
    mu_n = m (n pi / L)^2, the asymptotic offset c = lam_n - mu_n is
    estimated from the top of the head (exact for constant-coefficient
    operators), and

        det = (2L/sqrt(m)) * prod_{n<=N} (lam_n/mu_n) * exp(T)

    where T sums log(1 + c/mu_n) over n > N through the Euler-Maclaurin
    machinery.  Tail models other than the free 1D Weyl form are not
    implemented and raise ZetaError.
    """
    if tail is None:
        det = 1.0
        for lam in spectrum.eigenvalues:
            if lam != 0.0:
                det *= lam
        return det
    if tail.form != WEYL_1D:
        raise ZetaError(f"unsupported tail model {tail.form!r}; only {WEYL_1D!r} is implemented")
    n_cut = tail.cutoff_index
    eig = _positive_eigenvalues(spectrum, n_cut)
    mu = tail.level(np.arange(1, n_cut + 1))
    head = float(np.sum(np.log(eig / mu)))

    top = max(3, n_cut // 4)
    c = float(np.median((eig - mu)[-top:]))
    mu_next = float(tail.level(n_cut + 1))
    if abs(c) >= mu_next:
        raise ZetaError(
            f"estimated spectral offset {c:.6g} is not below the first "
            f"truncated level {mu_next:.6g}; extend the computed spectrum"
        )
    # T = sum_{n>N} log(1 + c/mu_n) expanded in powers of c/mu_n
    x = c * tail.length**2 / (tail.mass * math.pi**2)  # so c/mu_n = x/n^2
    tail_log = 0.0
    for j in range(1, 60):
        coeff = ((-1.0) ** (j + 1) / j) * x**j
        term = coeff * euler_maclaurin_tail(2.0 * j, n_cut)[0]
        tail_log += term
        if abs(term) < 1e-17 * max(1.0, abs(tail_log)):
            break
    return free_zeta_det(tail.length, tail.mass) * math.exp(head + tail_log)


# ---------------------------------------------------------------------------
# Ratio-fit extraction of Z at integer points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZetaFitResult:
    """Polynomial fit of log det(J + lam^2)/det(J) over a lam grid.

    ``coefficients``[k-1] multiplies (lam^2)^k; ``zeta_values`` maps
    k -> Z(k) = (-1)^(k+1) k c_k.  ``condition_estimate`` is the condition
    number of the column-scaled design matrix.
    """

    lambda_grid: list[float]
    log_ratios: list[float]
    degree: int
    coefficients: list[float]
    zeta_values: dict[int, float]
    condition_estimate: float

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid)
        if len(grid) != len(self.log_ratios):
            raise ValueError("lambda grid and log ratios differ in length")
        if len(grid) < self.degree + 1:
            raise ValueError(
                f"{len(grid)} samples cannot determine a degree-{self.degree} fit"
            )
        if grid.size and (grid.min() <= 0.0 or np.any(np.diff(grid) <= 0.0)):
            raise ValueError("lambda grid must be strictly positive and increasing")

    def as_dict(self) -> dict:
        return {
            "lambda_grid": list(self.lambda_grid),
            "log_ratios": list(self.log_ratios),
            "degree": self.degree,
            "coefficients": list(self.coefficients),
            "zeta_values": {str(k): v for k, v in self.zeta_values.items()},
            "condition_estimate": self.condition_estimate,
        }


def zeta_fit(
    op: SLOperator1D,
    lambda_grid,
    degree: int,
    steps: int | None = None,
    lowest_eigenvalue: float | None = None,
    radius_guard: bool = True,
) -> ZetaFitResult:
    """Fit log det(J + lam^2)/det(J) by sum_k c_k (lam^2)^k, k = 1..degree.

    The series converges only for lam^2 below the smallest eigenvalue of J,
    so by default the grid is checked against a shooting estimate of that
    eigenvalue with a 10% safety margin (pass ``lowest_eigenvalue`` to skip
    the shooting, or ``radius_guard=False`` to disable the check).  The fit
    is ordinary least squares on the column-scaled Vandermonde matrix in
    lam^2 with zero constant term.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size < degree + 1:
        raise ValueError(
            f"need a 1D grid with at least degree+1 = {degree + 1} points, "
            f"got {grid.size}"
        )
    if grid.min() <= 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("lambda grid must be strictly positive and increasing")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")

    if radius_guard:
        if lowest_eigenvalue is None:
            lowest_eigenvalue = eigenvalues_shooting(op, count=1, tol=1e-9).eigenvalues[0]
        if lowest_eigenvalue <= 0.0:
            raise ZetaError(
                f"smallest eigenvalue {lowest_eigenvalue:.6g} is not positive; "
                "the log-ratio series has no convergence disk"
            )
        if grid.max() ** 2 > 0.9 * lowest_eigenvalue:
            raise ZetaError(
                f"lambda grid reaches lam^2 = {grid.max() ** 2:.6g}, beyond 90% of "
                f"the smallest eigenvalue {lowest_eigenvalue:.6g}; the series "
                "diverges there and the fit would be corrupted"
            )

    den = gy_determinant(op, steps)
    if abs(den.value) < zero_mode_threshold(op):
        raise ZeroModeError(
            "det J is numerically zero; the log ratio is undefined",
            value=den.value,
            threshold=zero_mode_threshold(op),
        )
    log_ratios = np.empty(grid.size)
    for i, lam in enumerate(grid):
        num = gy_determinant(op.shifted(float(lam) ** 2), steps)
        ratio = num.value / den.value
        if ratio <= 0.0:
            raise ZetaError(f"nonpositive determinant ratio {ratio!r} at lambda={lam!r}")
        log_ratios[i] = math.log(ratio)

    powers = np.arange(1, degree + 1)
    design = (grid[:, None] ** 2) ** powers[None, :]
    col_scale = np.max(np.abs(design), axis=0)
    scaled = design / col_scale
    coeffs_scaled, _, rank, svals = np.linalg.lstsq(scaled, log_ratios, rcond=None)
    if rank < degree:
        raise FitError(
            f"design matrix rank {rank} < degree {degree}; "
            "the lambda grid does not resolve the requested polynomial"
        )
    condition = float(svals[0] / svals[-1])
    coeffs = coeffs_scaled / col_scale
    zeta_values = {
        int(k): float((-1.0) ** (k + 1) * k * coeffs[k - 1]) for k in powers
    }
    return ZetaFitResult(
        lambda_grid=[float(v) for v in grid],
        log_ratios=[float(v) for v in log_ratios],
        degree=degree,
        coefficients=[float(v) for v in coeffs],
        zeta_values=zeta_values,
        condition_estimate=condition,
    )
