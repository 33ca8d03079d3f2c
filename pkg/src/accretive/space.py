"""Finite-dimensional linear 2-normed spaces.

Points of the ambient space are plain ``numpy`` arrays of shape ``(d,)`` with
``d >= 2``.  Every operation that the theory quantifies "for every z in X" is
evaluated over a finite :class:`WitnessSet` that spans the space, which is
enough in finite dimension: a vector whose 2-norm against every member of a
spanning set vanishes is the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyWitnessSet,
    NonFiniteInput,
    NumericalBreakdown,
)

ABS_TOL = 1e-10
ZERO_TOL = 1e-8
# radicands below this are treated as a logic error, not roundoff
RADICAND_FLOOR = -1e-12

DET2D = "det2d"
GRAM = "gram"
NORM_KINDS = (DET2D, GRAM)


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a point of R^d and return it as a float array."""
    v = np.array(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d vector, got shape {v.shape}")
    if v.shape[0] < 2:
        raise DimensionMismatch("a linear 2-normed space needs dimension >= 2")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"non-finite coordinates in {v!r}")
    return v


def _as_batch(x, dim: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape[-1:] != (dim,):
        raise DimensionMismatch(f"expected trailing dimension {dim}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("non-finite coordinates in input")
    return a


def box_bounds(box, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Expand a ``(lo, hi)`` box (scalars or per-coordinate) to arrays."""
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
    if np.any(lo > hi):
        raise ValueError(f"empty box: lo={lo}, hi={hi}")
    return lo, hi


def _area_sq_minors(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Lagrange identity: <x,x><y,y> - <x,y>^2 = sum_{i<j} (x_i y_j - x_j y_i)^2.
    # The minor form is nonnegative term by term and exactly antisymmetric
    # under x <-> y, so dependent pairs come out at roundoff level.
    x, y = np.broadcast_arrays(x, y)
    d = x.shape[-1]
    acc = np.zeros(x.shape[:-1])
    for i in range(d - 1):
        m = x[..., i, None] * y[..., i + 1:] - x[..., i + 1:] * y[..., i, None]
        acc = acc + np.sum(m * m, axis=-1)
    return acc


@dataclass(frozen=True)
class TwoNorm:
    """A 2-norm on R^d.

    ``det2d`` is the absolute 2x2 determinant (``dim`` must be 2); ``gram``
    is the area of the parallelogram spanned by the two arguments, defined
    for any ``dim >= 2``.  Instances are callable on single vectors or on
    broadcastable stacks of shape ``(..., d)``.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown 2-norm kind {self.kind!r}; expected one of {NORM_KINDS}")
        if self.dim < 2:
            raise DimensionMismatch("a linear 2-normed space needs dimension >= 2")
        if self.kind == DET2D and self.dim != 2:
            raise DimensionMismatch("the determinant 2-norm is only defined on R^2")

    @classmethod
    def det2d(cls) -> "TwoNorm":
        return cls(DET2D, 2)

    @classmethod
    def gram(cls, dim: int) -> "TwoNorm":
        return cls(GRAM, dim)

    def __call__(self, x, y):
        out = self.evaluate(_as_batch(x, self.dim), _as_batch(y, self.dim))
        return float(out) if np.ndim(out) == 0 else out

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Unchecked batched evaluation; inputs must already be validated."""
        if self.kind == DET2D:
            return np.abs(x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])
        radicand = _area_sq_minors(x, y)
        if np.any(radicand < RADICAND_FLOOR):
            raise NumericalBreakdown(f"negative Gram radicand {radicand.min():.3e}")
        return np.sqrt(np.maximum(radicand, 0.0))


def eval_two_norm(norm: TwoNorm, x, y) -> float:
    """Return ``||x, y||`` under ``norm``."""
    return norm(as_vector(x, norm.dim), as_vector(y, norm.dim))


def semi_norm(norm: TwoNorm, x, b) -> float:
    """The semi-norm ``P_b(x) = ||x, b||`` for a fixed direction ``b``."""
    return eval_two_norm(norm, x, b)


# -- witness sets ------------------------------------------------------------

STANDARD_BASIS = "standard_basis"
SEEDED_RANDOM = "seeded_random"
USER_SUPPLIED = "user_supplied"
DEFAULT = "default"


@dataclass(frozen=True, eq=False)
class WitnessSet:
    """Finite spanning set of unit directions standing in for "all z in X"."""

    directions: np.ndarray
    provenance: str = USER_SUPPLIED
    seed: int | None = None
    count: int | None = None

    def __post_init__(self):
        dirs = np.array(self.directions, dtype=float)
        if dirs.ndim != 2 or dirs.shape[0] == 0:
            raise EmptyWitnessSet("a witness set needs at least one direction")
        if dirs.shape[1] < 2:
            raise DimensionMismatch("witness directions need dimension >= 2")
        if not np.all(np.isfinite(dirs)):
            raise NonFiniteInput("non-finite witness direction")
        lengths = np.linalg.norm(dirs, axis=1)
        if np.any(lengths == 0.0):
            raise ValueError("zero vector in witness set")
        dirs = dirs / lengths[:, None]
        if np.linalg.matrix_rank(dirs) < dirs.shape[1]:
            raise ValueError("witness directions do not span R^d")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def standard_basis(cls, dim: int) -> "WitnessSet":
        return cls(np.eye(dim), STANDARD_BASIS)

    @classmethod
    def seeded_random(cls, dim: int, seed: int, count: int | None = None) -> "WitnessSet":
        count = 2 * dim if count is None else count
        rng = np.random.default_rng([seed, 1])
        dirs = rng.standard_normal((count, dim))
        return cls(dirs, SEEDED_RANDOM, seed, count)

    @classmethod
    def default(cls, dim: int, seed: int = 0) -> "WitnessSet":
        """Standard basis together with ``2 * dim`` seeded random directions."""
        rand = cls.seeded_random(dim, seed).directions
        return cls(np.vstack([np.eye(dim), rand]), DEFAULT, seed, 2 * dim)

    def describe(self) -> dict:
        return {"provenance": self.provenance, "seed": self.seed, "count": len(self)}


def sup_seminorm(norm: TwoNorm, v, W: WitnessSet):
    """Largest semi-norm ``max_{z in W} ||v, z||``.

    ``v`` may be a single vector or a stack ``(..., d)``; the maximum is taken
    over the witnesses for each row.
    """
    if W is None or len(W) == 0:
        raise EmptyWitnessSet("sup_seminorm needs a non-empty witness set")
    if W.dim != norm.dim:
        raise DimensionMismatch(f"witness dimension {W.dim} != norm dimension {norm.dim}")
    v = _as_batch(v, norm.dim)
    vals = norm.evaluate(v[..., None, :], W.directions)
    out = vals.max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def has_converged(norm: TwoNorm, tail: Sequence, limit, W: WitnessSet, tol: float) -> bool:
    """True when every element of ``tail`` is within ``tol`` of ``limit``
    in every witness semi-norm."""
    if len(tail) == 0:
        raise EmptyInput("has_converged needs a non-empty tail")
    limit = as_vector(limit, norm.dim)
    seq = _as_batch(np.asarray(tail, dtype=float), norm.dim)
    gaps = np.atleast_1d(sup_seminorm(norm, seq - limit, W))
    return bool(np.all(gaps <= tol))


@dataclass(frozen=True, eq=False)
class BoundReport:
    bound_M: float
    attained_at: tuple[np.ndarray, np.ndarray]
    sample_count: int


def bound_constant(norm: TwoNorm, E_samples: Sequence, W: WitnessSet) -> BoundReport:
    """Sampled bound ``M = max ||x, z||`` over ``x`` in the sample and ``z`` in ``W``."""
    if len(E_samples) == 0:
        raise EmptyInput("bound_constant needs at least one sample")
    X = _as_batch(np.asarray(E_samples, dtype=float).reshape(len(E_samples), -1), norm.dim)
    vals = norm.evaluate(X[:, None, :], W.directions)
    flat = int(np.argmax(vals))
    i, j = divmod(flat, vals.shape[1])
    return BoundReport(float(vals[i, j]), (X[i].copy(), W.directions[j].copy()), X.shape[0])


# -- sampling ----------------------------------------------------------------

DEFAULT_LAMBDAS = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass(frozen=True, eq=False)
class SamplePlan:
    """Deterministic sampling scheme for the quantified checks.

    ``witness=None`` means :meth:`WitnessSet.default` for the dimension in
    use, seeded from ``seed``.  With ``dependent_tuples`` set, every sampled
    pair ``(x, y)`` is also checked against ``z`` parallel to ``x - y``.
    """

    seed: int = 0
    pair_count: int = 1000
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDAS
    box: tuple = (-1.0, 1.0)
    witness: WitnessSet | None = None
    dependent_tuples: bool = True
    tol: float = ABS_TOL

    def __post_init__(self):
        if self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")
        grid = tuple(float(l) for l in self.lambda_grid)
        if not grid or any(not l > 0 for l in grid):
            raise ValueError("lambda grid must be non-empty and strictly positive")
        object.__setattr__(self, "lambda_grid", grid)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def witness_for(self, dim: int) -> WitnessSet:
        W = self.witness if self.witness is not None else WitnessSet.default(dim, self.seed)
        if W.dim != dim:
            raise DimensionMismatch(f"witness dimension {W.dim} != {dim}")
        return W

    def points(self, dim: int, stream: int = 2, count: int | None = None) -> np.ndarray:
        lo, hi = box_bounds(self.box, dim)
        n = self.pair_count if count is None else count
        return lo + (hi - lo) * self.rng(stream).random((n, dim))

    def pairs(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        P = self.points(dim, stream=3, count=2 * self.pair_count)
        return P[: self.pair_count], P[self.pair_count:]

    def replace(self, **changes) -> "SamplePlan":
        return replace(self, **changes)


# -- axiom certifier ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AxiomResult:
    name: str
    worst_margin: float
    passed: bool
    witness: tuple


@dataclass(frozen=True, eq=False)
class AxiomReport:
    """Per-axiom worst margins; margins are normalized by operand scale and a
    negative margin is a violation."""

    results: dict
    seed: int
    sample_count: int
    tol: float

    def axiom_passed(self, name: str) -> bool:
        return all(r.passed for key, r in self.results.items() if key.split("/")[0] == name)

    @property
    def axioms(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(key.split("/")[0] for key in self.results))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def summary(self) -> str:
        ok = sum(self.axiom_passed(a) for a in self.axioms)
        return f"{ok}/{len(self.axioms)} axioms pass"


def _worst(name, margins, witnesses, tol, strict_positive=False):
    i = int(np.argmin(margins))
    m = float(margins[i])
    passed = m > tol if strict_positive else m >= -tol
    return AxiomResult(name, m, passed, tuple(np.array(w[i]) for w in witnesses))


def check_axioms(norm: Callable, plan: SamplePlan, dim: int | None = None) -> AxiomReport:
    """Falsification test of the 2-norm axioms on seeded samples.

    ``norm`` is a :class:`TwoNorm` or any callable ``f(x, y)`` that accepts
    stacks of shape ``(n, d)`` and returns ``(n,)`` (pass ``dim`` then).

    A1 is split in two: ``A1/dependent`` evaluates constructed pairs
    ``(x, beta x)`` which must vanish, ``A1/independent`` evaluates random
    pairs which must stay strictly above ``tol``.
    """
    if dim is None:
        dim = norm.dim
    f = norm.evaluate if isinstance(norm, TwoNorm) else norm
    tol = plan.tol
    n = plan.pair_count
    rng = plan.rng(10)
    lo, hi = box_bounds(plan.box, dim)
    X, Y, Z = (lo + (hi - lo) * rng.random((n, dim)) for _ in range(3))
    alpha = rng.uniform(-1e3, 1e3, size=n)
    beta = rng.uniform(-10.0, 10.0, size=n)
    nx, ny, nz = (np.linalg.norm(V, axis=1) for V in (X, Y, Z))

    fxy = np.asarray(f(X, Y), dtype=float)
    results = {}

    bY = beta[:, None] * X
    dep = np.asarray(f(X, bY), dtype=float) / (1.0 + np.abs(beta) * nx * nx)
    results["A1/dependent"] = _worst("A1/dependent", -dep, (X, bY), tol)
    results["A1/independent"] = _worst(
        "A1/independent", fxy / (1.0 + nx * ny), (X, Y), tol, strict_positive=True
    )

    sym = np.abs(fxy - np.asarray(f(Y, X), dtype=float)) / (1.0 + nx * ny)
    results["A2"] = _worst("A2", -sym, (X, Y), tol)

    aX = alpha[:, None] * X
    hom = np.abs(np.asarray(f(aX, Y), dtype=float) - np.abs(alpha) * fxy)
    hom = hom / ((1.0 + np.abs(alpha)) * (1.0 + nx * ny))
    results["A3"] = _worst("A3", -hom, (X, Y, alpha), tol)

    slack = np.asarray(f(X, Z), dtype=float) + np.asarray(f(Y, Z), dtype=float)
    slack = (slack - np.asarray(f(X + Y, Z), dtype=float)) / (1.0 + (nx + ny) * nz)
    results["A4"] = _worst("A4", slack, (X, Y, Z), tol)

    return AxiomReport(results, plan.seed, n, tol)
