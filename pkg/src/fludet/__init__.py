"""Regularized functional determinants of fluctuation operators.

Library layout:

- :mod:`fludet.expressions` -- arithmetic expression trees for potentials and
  coefficient functions (parse / evaluate / differentiate).
- :mod:`fludet.ode` -- fixed-step RK4 for the linear problem y'' = f(t) y.
- :mod:`fludet.gelfand_yaglom` -- endpoint-value determinants, determinant
  ratios, Morse index, trajectory projections.
- :mod:`fludet.spectra` -- shooting spectra, mesh discretization, Lanczos.
- :mod:`fludet.zeta` -- zeta sums with Weyl tails, zeta determinants, and the
  determinant-ratio polynomial fit.
- :mod:`fludet.semiclassical` -- classical trajectories, actions, prefactors,
  and the exact discrete fluctuation determinant.
- :mod:`fludet.cli` / :mod:`fludet.report` -- command line and figure output.
"""
from . import errors
from .expressions import Expr, parse, evaluate, differentiate, format_expr
from .gelfand_yaglom import (
    EUCLIDEAN,
    REAL_TIME,
    GYResult,
    SLOperator1D,
    determinant_ratio,
    free_operator,
    gy_determinant,
    gy_ratio,
    morse_index,
    project_along_trajectory,
)
from .ode import IVPSolution, integrate_rk4
from .semiclassical import (
    PropagatorEstimate,
    Trajectory,
    action,
    classical_trajectory,
    discrete_fluctuation_det,
    fluctuation_operator,
    fluctuation_prefactor,
)
from .spectra import (
    MeshOperator,
    Spectrum,
    count_below,
    discretize,
    eigenvalues_dense,
    eigenvalues_shooting,
    lanczos_smallest,
)
from .zeta import TailModel, ZetaFitResult, free_zeta_det, zeta_det, zeta_fit, zeta_truncated

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Expr", "parse", "evaluate", "differentiate", "format_expr",
    "EUCLIDEAN", "REAL_TIME", "GYResult", "SLOperator1D",
    "determinant_ratio", "gy_ratio", "free_operator", "gy_determinant",
    "morse_index", "project_along_trajectory",
    "IVPSolution", "integrate_rk4",
    "PropagatorEstimate", "Trajectory", "action", "classical_trajectory",
    "discrete_fluctuation_det", "fluctuation_operator", "fluctuation_prefactor",
    "MeshOperator", "Spectrum", "count_below", "discretize",
    "eigenvalues_dense", "eigenvalues_shooting", "lanczos_smallest",
    "TailModel", "ZetaFitResult", "free_zeta_det", "zeta_det", "zeta_fit",
    "zeta_truncated",
    "__version__",
]
