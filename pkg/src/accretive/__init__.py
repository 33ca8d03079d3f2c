"""Sampled verification and solvers for accretive operators on linear 2-normed spaces."""

__version__ = "0.1.0"

from .errors import AccretiveError
from .space import SamplePlan, TwoNorm, WitnessSet, check_axioms, semi_norm, sup_seminorm
from .operators import (
    Affine,
    Composite,
    DiagonalNonlinear,
    Linear,
    Operator,
    Scalar,
    check_accretive,
    check_contraction,
    check_expansive,
    check_m_accretive,
    check_nonexpansive,
    check_strong_accretive,
    estimate_strong_accretive_k,
)
from .solvers import (
    ResolventConfig,
    picard_solve,
    resolvent,
    solve_range,
    solve_zero,
    verify_resolvent_convergence,
    verify_resolvent_nonexpansive,
    verify_yosida_bounded,
    verify_yosida_lipschitz,
    yosida,
)

__all__ = [name for name in dir() if not name.startswith("_")]
