"""Operator families on R^d and sampled certifiers for their 2-norm properties.

Every certifier is a falsifier with evidence: it evaluates the defining
inequality on the tuples ``(x, y, z, lambda)`` generated by a
:class:`~accretive.space.SamplePlan` and reports the worst case.  A pass means
no violation was found on the samples, nothing more.

Margins are signed, negative meaning violation.  ``worst_margin`` is
normalized by ``1 + s`` where ``s`` is the larger side of the inequality at
that tuple; ``worst_raw_margin`` is the unnormalized value at the same tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainViolation,
    InvalidK,
    NoValidSamples,
    NonFiniteInput,
    NonFiniteOutput,
)
from .space import SamplePlan, TwoNorm, WitnessSet, box_bounds, sup_seminorm

STRICT_TOL = 1e-12
_BOX_SLACK = 1e-12


# -- operator families -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Operator:
    """Base class for evaluable maps ``T: R^d -> R^d``.

    ``box`` optionally declares the domain as a coordinate box ``(lo, hi)``;
    ``lipschitz_hint`` overrides the computed Euclidean Lipschitz bound.
    Subclasses implement :meth:`apply` on stacks of shape ``(..., d)``.
    """

    box: tuple | None = field(default=None, kw_only=True)
    lipschitz_hint: float | None = field(default=None, kw_only=True)

    family = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def apply(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def delta(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """``T(X) - T(Y)`` computed so that constant shifts cancel exactly."""
        return self.apply(X) - self.apply(Y)

    def affine_parts(self):
        """``(A, c)`` with ``T(x) = A x + c`` when the operator is affine, else None."""
        return None

    def _lipschitz(self) -> float | None:
        return None

    def lipschitz(self) -> float | None:
        if self.lipschitz_hint is not None:
            return float(self.lipschitz_hint)
        return self._lipschitz()

    def domain(self):
        """The declared box as ``(lo, hi)`` arrays, or None for all of R^d."""
        # operators are immutable, so the box is computed once
        if "_domain_cache" not in self.__dict__:
            dom = self._domain()
            if dom is not None:
                dom = tuple(_frozen(b) for b in dom)
            self.__dict__["_domain_cache"] = dom
        return self.__dict__["_domain_cache"]

    def _domain(self):
        if self.box is None:
            return None
        return box_bounds(self.box, self.dim)

    def validate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (self.dim,):
            raise DimensionMismatch(f"operator acts on R^{self.dim}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("non-finite operator input")
        dom = self.domain()
        if dom is not None:
            lo, hi = dom
            slack = _BOX_SLACK * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
            bad = np.any((X < lo - slack) | (X > hi + slack), axis=-1)
            if np.any(bad):
                idx = np.argwhere(np.atleast_1d(bad))[0]
                point = X.reshape(-1, self.dim)[idx[0]] if X.ndim > 1 else X
                raise DomainViolation(f"point {point} outside the declared box", point)
        return X

    def __call__(self, X) -> np.ndarray:
        out = self.apply(self.validate(X))
        if not np.all(np.isfinite(out)):
            raise NonFiniteOutput("operator produced a non-finite value")
        return out

    def to_dict(self) -> dict:
        d = {"family": self.family}
        d.update(self._params())
        if self.box is not None:
            d["box"] = [np.asarray(b, dtype=float).tolist() for b in self.box]
        if self.lipschitz_hint is not None:
            d["lipschitz"] = float(self.lipschitz_hint)
        return d

    def _params(self) -> dict:
        return {}

    # arithmetic builds Composite operators
    def __add__(self, other):
        if isinstance(other, Operator):
            return Composite(((1.0, self), (1.0, other)))
        return Composite(((1.0, self),), shift=np.asarray(other, dtype=float))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, Operator):
            return Composite(((1.0, self), (-1.0, other)))
        return Composite(((1.0, self),), shift=-np.asarray(other, dtype=float))

    def __rmul__(self, alpha):
        return Composite(((float(alpha), self),))

    def __mul__(self, alpha):
        return self.__rmul__(alpha)

    def __neg__(self):
        return Composite(((-1.0, self),))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Linear(Operator):
    matrix: np.ndarray = None
    family = "linear"

    def __post_init__(self):
        A = _frozen(self.matrix)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise DimensionMismatch(f"expected a square d x d matrix (d >= 2), got {A.shape}")
        object.__setattr__(self, "matrix", A)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, X):
        return X @ self.matrix.T

    def delta(self, X, Y):
        return X @ self.matrix.T - Y @ self.matrix.T

    def affine_parts(self):
        return self.matrix, np.zeros(self.dim)

    def _lipschitz(self):
        return float(np.linalg.norm(self.matrix, 2))

    def _params(self):
        return {"matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class Affine(Linear):
    shift: np.ndarray = None
    family = "affine"

    def __post_init__(self):
        super().__post_init__()
        c = _frozen(np.zeros(self.dim) if self.shift is None else self.shift)
        if c.shape != (self.dim,):
            raise DimensionMismatch(f"shift must have length {self.dim}")
        object.__setattr__(self, "shift", c)

    def apply(self, X):
        return X @ self.matrix.T + self.shift

    def affine_parts(self):
        return self.matrix, self.shift.copy()

    def _params(self):
        return {"matrix": self.matrix.tolist(), "shift": self.shift.tolist()}


@dataclass(frozen=True, eq=False)
class Scalar(Operator):
    """``T(x) = c x + shift``."""

    size: int = 2
    coefficient: float = 1.0
    shift: np.ndarray = None
    family = "scalar"

    def __post_init__(self):
        if self.size < 2:
            raise DimensionMismatch("dimension must be >= 2")
        c = _frozen(np.zeros(self.size) if self.shift is None else self.shift)
        if c.shape != (self.size,):
            raise DimensionMismatch(f"shift must have length {self.size}")
        object.__setattr__(self, "shift", c)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def dim(self):
        return self.size

    def apply(self, X):
        return self.coefficient * X + self.shift

    def delta(self, X, Y):
        return self.coefficient * X - self.coefficient * Y

    def affine_parts(self):
        return self.coefficient * np.eye(self.size), self.shift.copy()

    def _lipschitz(self):
        return abs(self.coefficient)

    def _params(self):
        return {"dim": self.size, "coefficient": self.coefficient, "shift": self.shift.tolist()}


def identity(dim: int) -> Scalar:
    return Scalar(dim, 1.0)


def zero(dim: int) -> Scalar:
    return Scalar(dim, 0.0)


# Registered coordinatewise maps u -> f(u) with closed-form derivatives.
# Derivatives are even polynomials, so |f'| on [lo, hi] peaks at an endpoint or 0.
DIAGONAL_FAMILIES: dict[str, tuple[Callable, Callable]] = {
    "cubic": (
        lambda u, a, b, p: a * u**3 + b * u,
        lambda u, a, b, p: 3.0 * a * u**2 + b,
    ),
    "odd_power": (
        lambda u, a, b, p: a * u**p + b * u,
        lambda u, a, b, p: p * a * u ** (p - 1) + b,
    ),
    "linear": (
        lambda u, a, b, p: b * u,
        lambda u, a, b, p: b + 0.0 * u,
    ),
}


@dataclass(frozen=True, eq=False)
class DiagonalNonlinear(Operator):
    """Coordinatewise map ``T(x)_i = f(x_i)`` from :data:`DIAGONAL_FAMILIES`.

    ``cubic`` is ``a u^3 + b u``, ``odd_power`` is ``a u^p + b u`` with odd
    ``p``, ``linear`` is ``b u``.  The Lipschitz bound needs a declared box.
    """

    size: int = 2
    tag: str = "cubic"
    a: float = 1.0
    b: float = 1.0
    power: int = 3
    family = "diagonal"

    def __post_init__(self):
        if self.size < 2:
            raise DimensionMismatch("dimension must be >= 2")
        if self.tag not in DIAGONAL_FAMILIES:
            raise ValueError(f"unknown diagonal family {self.tag!r}; registered: {sorted(DIAGONAL_FAMILIES)}")
        if self.tag == "odd_power" and (int(self.power) != self.power or self.power < 1 or self.power % 2 == 0):
            raise ValueError("odd_power needs a positive odd integer power")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "power", int(self.power))

    @property
    def dim(self):
        return self.size

    def scalar_map(self, u):
        return DIAGONAL_FAMILIES[self.tag][0](u, self.a, self.b, self.power)

    def scalar_derivative(self, u):
        return DIAGONAL_FAMILIES[self.tag][1](u, self.a, self.b, self.power)

    def apply(self, X):
        # overflow surfaces as NonFiniteOutput in __call__
        with np.errstate(over="ignore", invalid="ignore"):
            return self.scalar_map(X)

    def affine_parts(self):
        if self.tag == "linear":
            return self.b * np.eye(self.size), np.zeros(self.size)
        return None

    def _lipschitz(self):
        if self.tag == "linear":
            return abs(self.b)
        dom = self.domain()
        if dom is None:
            return None
        lo, hi = dom
        cands = [lo, hi, np.where((lo < 0) & (hi > 0), 0.0, lo)]
        return float(max(np.max(np.abs(self.scalar_derivative(c))) for c in cands))

    def _params(self):
        d = {"dim": self.size, "tag": self.tag, "a": self.a, "b": self.b}
        if self.tag == "odd_power":
            d["power"] = self.power
        return d


@dataclass(frozen=True, eq=False)
class Composite(Operator):
    """Weighted sum of operators plus a constant: ``sum_i w_i T_i(x) + shift``."""

    terms: tuple = ()
    shift: np.ndarray = None
    family = "composite"

    def __post_init__(self):
        terms = tuple((float(w), op) for w, op in self.terms)
        if not terms:
            raise ValueError("a composite needs at least one term")
        dims = {op.dim for _, op in terms}
        if len(dims) != 1:
            raise DimensionMismatch(f"composite terms act on different dimensions {sorted(dims)}")
        dim = dims.pop()
        c = _frozen(np.zeros(dim) if self.shift is None else self.shift)
        if c.shape != (dim,):
            raise DimensionMismatch(f"shift must have length {dim}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "shift", c)

    @property
    def dim(self):
        return self.terms[0][1].dim

    def _domain(self):
        boxes = [op.domain() for _, op in self.terms] + [super()._domain()]
        boxes = [b for b in boxes if b is not None]
        if not boxes:
            return None
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, hi

    def apply(self, X):
        out = self.terms[0][0] * self.terms[0][1].apply(X)
        for w, op in self.terms[1:]:
            out = out + w * op.apply(X)
        return out + self.shift

    def delta(self, X, Y):
        out = self.terms[0][0] * self.terms[0][1].delta(X, Y)
        for w, op in self.terms[1:]:
            out = out + w * op.delta(X, Y)
        return out

    def affine_parts(self):
        A = np.zeros((self.dim, self.dim))
        c = self.shift.copy()
        for w, op in self.terms:
            parts = op.affine_parts()
            if parts is None:
                return None
            A = A + w * parts[0]
            c = c + w * parts[1]
        return A, c

    def _lipschitz(self):
        total = 0.0
        for w, op in self.terms:
            lip = op.lipschitz()
            if lip is None:
                return None
            total += abs(w) * lip
        return total

    def _params(self):
        return {
            "terms": [{"weight": w, "operator": op.to_dict()} for w, op in self.terms],
            "shift": self.shift.tolist(),
        }


_FAMILIES = {
    "linear": lambda d, kw: Linear(d["matrix"], **kw),
    "affine": lambda d, kw: Affine(d["matrix"], d.get("shift"), **kw),
    "scalar": lambda d, kw: Scalar(int(d["dim"]), float(d.get("coefficient", 1.0)), d.get("shift"), **kw),
    "diagonal": lambda d, kw: DiagonalNonlinear(
        int(d["dim"]), d.get("tag", "cubic"), float(d.get("a", 1.0)), float(d.get("b", 1.0)),
        int(d.get("power", 3)), **kw,
    ),
    "composite": lambda d, kw: Composite(
        tuple((float(t.get("weight", 1.0)), operator_from_dict(t["operator"])) for t in d["terms"]),
        d.get("shift"), **kw,
    ),
}


def operator_from_dict(d: dict) -> Operator:
    """Inverse of :meth:`Operator.to_dict`."""
    family = d.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown operator family {family!r}; expected one of {sorted(_FAMILIES)}")
    kw = {}
    if d.get("box") is not None:
        kw["box"] = tuple(d["box"])
    if d.get("lipschitz") is not None:
        kw["lipschitz_hint"] = float(d["lipschitz"])
    op = _FAMILIES[family](d, kw)
    if op.box is not None:
        box_bounds(op.box, op.dim)
    return op


# -- sampled tuples ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleTuples:
    """Pairs ``X, Y`` (p, d) and per-pair witnesses ``Z`` (p, q, d).

    When dependent tuples are enabled the last witness of each pair is
    ``(x - y) / |x - y|``; ``dependent`` flags those columns.
    """

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    dependent: np.ndarray


def sample_tuples(plan: SamplePlan, dim: int) -> SampleTuples:
    X, Y = plan.pairs(dim)
    W = plan.witness_for(dim).directions
    p = X.shape[0]
    Z = np.broadcast_to(W, (p,) + W.shape)
    dep = np.zeros((p, W.shape[0]), dtype=bool)
    if plan.dependent_tuples:
        D = X - Y
        n = np.linalg.norm(D, axis=1, keepdims=True)
        D = np.where(n > 0, D / np.where(n > 0, n, 1.0), W[0])
        Z = np.concatenate([Z, D[:, None, :]], axis=1)
        dep = np.concatenate([dep, np.ones((p, 1), dtype=bool)], axis=1)
    return SampleTuples(X, Y, Z, dep)


HOLDS = "holds"
VIOLATED = "violated"
TIE = "tie"


@dataclass(frozen=True, eq=False)
class PropertyReport:
    property: str
    holds_on_samples: bool
    worst_margin: float
    worst_raw_margin: float
    witness_tuple: tuple
    samples_checked: int
    seed: int
    status: str = HOLDS
    note: str = ""
    min_raw_margin: float = float("nan")

    def summary(self) -> str:
        x, y, z, lam = self.witness_tuple
        lam_s = "" if lam is None else f", lambda={lam:g}"
        return (
            f"{self.property}: {self.status} on {self.samples_checked} samples "
            f"(worst margin {self.worst_margin:.3e}{lam_s}, seed {self.seed})"
        )

    def to_dict(self) -> dict:
        x, y, z, lam = self.witness_tuple
        return {
            "property": self.property,
            "status": self.status,
            "holds_on_samples": self.holds_on_samples,
            "worst_margin": self.worst_margin,
            "worst_raw_margin": self.worst_raw_margin,
            "witness": {
                "x": np.asarray(x).tolist(),
                "y": np.asarray(y).tolist(),
                "z": np.asarray(z).tolist(),
                "lambda": lam,
            },
            "min_raw_margin": self.min_raw_margin,
            "samples_checked": self.samples_checked,
            "seed": self.seed,
            "note": self.note,
        }


@dataclass(frozen=True, eq=False)
class TupleMargins:
    """Raw margins (p, L, q) and the scale of each comparison."""

    raw: np.ndarray
    scale: np.ndarray
    lambdas: tuple
    tuples: SampleTuples

    @property
    def normalized(self) -> np.ndarray:
        return self.raw / (1.0 + self.scale)


def _check_dims(T: Operator, norm: TwoNorm):
    if T.dim != norm.dim:
        raise DimensionMismatch(f"operator dimension {T.dim} != norm dimension {norm.dim}")


def _differences(T: Operator, tup: SampleTuples):
    X = T.validate(tup.X)
    Y = T.validate(tup.Y)
    dT = T.delta(X, Y)
    if not np.all(np.isfinite(dT)):
        raise NonFiniteOutput("operator produced a non-finite value")
    return X - Y, dT


def _pair_norm(norm, V, Z):
    # V (p, L, d) against Z (p, q, d) -> (p, L, q)
    return norm.evaluate(V[:, :, None, :], Z[:, None, :, :])


def _accretive_margins(T, norm, plan, tup, lambdas):
    D, dT = _differences(T, tup)
    lam = np.asarray(lambdas)[None, :, None]
    V = D[:, None, :] + lam * dT[:, None, :]
    rhs = _pair_norm(norm, V, tup.Z)
    lhs = _pair_norm(norm, D[:, None, :], tup.Z)
    return rhs - lhs, np.maximum(lhs, rhs)


def _strong_margins(T, norm, plan, tup, lambdas, k):
    D, dT = _differences(T, tup)
    lam = np.asarray(lambdas)[None, :, None]
    V = (lam - 1.0) * D[:, None, :] + dT[:, None, :]
    rhs = _pair_norm(norm, V, tup.Z)
    lhs = (lam - k) * _pair_norm(norm, D[:, None, :], tup.Z)
    return rhs - lhs, np.maximum(lhs, rhs)


def _nonexpansive_margins(T, norm, plan, tup):
    D, dT = _differences(T, tup)
    a = _pair_norm(norm, D[:, None, :], tup.Z)
    b = _pair_norm(norm, dT[:, None, :], tup.Z)
    return a - b, np.maximum(a, b)


def sample_margins(kind: str, T: Operator, norm: TwoNorm, plan: SamplePlan,
                   k: float | None = None, lambdas: Sequence[float] | None = None) -> TupleMargins:
    """Per-tuple margins of one property on the plan's samples.

    ``kind`` is one of ``accretive``, ``strong_accretive``, ``nonexpansive``,
    ``expansive``.  Identical plans always produce identical tuples, so
    margins of different properties can be compared tuple by tuple.
    """
    _check_dims(T, norm)
    tup = sample_tuples(plan, T.dim)
    if kind == "accretive":
        lambdas = plan.lambda_grid if lambdas is None else tuple(lambdas)
        raw, scale = _accretive_margins(T, norm, plan, tup, lambdas)
    elif kind == "strong_accretive":
        _validate_k(k)
        lambdas = strong_lambda_grid(k) if lambdas is None else tuple(lambdas)
        if any(not l > k for l in lambdas):
            raise ValueError("strong accretivity needs every lambda > k")
        raw, scale = _strong_margins(T, norm, plan, tup, lambdas, k)
    elif kind in ("nonexpansive", "expansive"):
        lambdas = (None,)
        raw, scale = _nonexpansive_margins(T, norm, plan, tup)
        if kind == "expansive":
            raw = -raw
    else:
        raise ValueError(f"unknown property {kind!r}")
    return TupleMargins(raw, scale, tuple(lambdas), tup)


def property_report(name, tm: TupleMargins, plan: SamplePlan, strict=False, note="") -> PropertyReport:
    """Fold tuple margins into a report; the first worst tuple in sample order wins."""
    norm_m = tm.normalized
    flat = int(np.argmin(norm_m))
    i, l, j = np.unravel_index(flat, norm_m.shape)
    tup = tm.tuples
    witness = (tup.X[i].copy(), tup.Y[i].copy(), np.array(tup.Z[i, j]), tm.lambdas[l])
    worst = float(norm_m[i, l, j])
    if strict:
        margins = tm.raw - STRICT_TOL * (1.0 + tm.scale)
        if np.all(margins > 0):
            status = HOLDS
        elif worst < -plan.tol:
            status = VIOLATED
        else:
            status = TIE
            if not note:
                note = "strict inequality fails with equality (dependent tuples give 0 = 0)"
    else:
        status = HOLDS if worst >= -plan.tol else VIOLATED
    return PropertyReport(
        property=name,
        holds_on_samples=status == HOLDS,
        worst_margin=worst,
        worst_raw_margin=float(tm.raw[i, l, j]),
        witness_tuple=witness,
        samples_checked=int(norm_m.size),
        seed=plan.seed,
        status=status,
        note=note,
        min_raw_margin=float(tm.raw.min()),
    )


def _validate_k(k):
    if k is None or not 0.0 < k < 1.0:
        raise InvalidK(f"k must lie in (0,1), got {k}")


def strong_lambda_grid(k: float) -> tuple[float, ...]:
    """Default lambda grid for strong accretivity, all entries above ``k``."""
    _validate_k(k)
    grid = (k + 1e-3, k + 1e-1, 1.0, 2.0, 10.0)
    return tuple(sorted({l for l in grid if l > k}))


def check_accretive(T: Operator, norm: TwoNorm, plan: SamplePlan) -> PropertyReport:
    """Check ``||x-y, z|| <= ||(x-y) + lambda (Tx-Ty), z||`` on samples."""
    return property_report("accretive", sample_margins("accretive", T, norm, plan), plan)


def check_strong_accretive(T: Operator, norm: TwoNorm, k: float, plan: SamplePlan,
                           lambdas: Sequence[float] | None = None) -> PropertyReport:
    """Check ``||(lambda-k)(x-y), z|| <= ||(lambda-1)(x-y) + (Tx-Ty), z||``
    for ``lambda > k`` (default grid from :func:`strong_lambda_grid`)."""
    tm = sample_margins("strong_accretive", T, norm, plan, k=k, lambdas=lambdas)
    return property_report("strong_accretive", tm, plan)


def check_nonexpansive(T: Operator, norm: TwoNorm, plan: SamplePlan) -> PropertyReport:
    return property_report("nonexpansive", sample_margins("nonexpansive", T, norm, plan), plan)


def check_expansive(T: Operator, norm: TwoNorm, plan: SamplePlan) -> PropertyReport:
    """Strict check of ``||Tx-Ty, z|| > ||x-y, z||``.

    Ties (both sides equal, as on tuples with ``z`` parallel to ``x - y``
    for scalar maps) are reported with status ``"tie"``.
    """
    return property_report("expansive", sample_margins("expansive", T, norm, plan), plan, strict=True)


def check_contraction(T: Operator, norm: TwoNorm, plan: SamplePlan):
    """Estimate the contraction factor ``k_hat = max ||Tx-Ty, z|| / ||x-y, z||``.

    Tuples with ``||x-y, z|| <= tol`` are excluded since the ratio is
    undefined there.  Returns ``(report, k_hat)``; the report holds when
    ``k_hat < 1 - tol``.
    """
    _check_dims(T, norm)
    tup = sample_tuples(plan, T.dim)
    D, dT = _differences(T, tup)
    den = _pair_norm(norm, D[:, None, :], tup.Z)
    num = _pair_norm(norm, dT[:, None, :], tup.Z)
    valid = den > plan.tol
    if not np.any(valid):
        raise NoValidSamples("every sampled tuple has ||x-y, z|| <= tol")
    ratio = np.where(valid, num / np.where(valid, den, 1.0), -np.inf)
    flat = int(np.argmax(ratio))
    i, _, j = np.unravel_index(flat, ratio.shape)
    k_hat = float(ratio[i, 0, j])
    margin = 1.0 - k_hat
    holds = k_hat < 1.0 - plan.tol
    report = PropertyReport(
        property="contraction",
        holds_on_samples=holds,
        worst_margin=margin,
        worst_raw_margin=margin,
        witness_tuple=(tup.X[i].copy(), tup.Y[i].copy(), np.array(tup.Z[i, j]), None),
        samples_checked=int(valid.sum()),
        seed=plan.seed,
        status=HOLDS if holds else VIOLATED,
        note=f"k_hat={k_hat!r}",
        min_raw_margin=margin,
    )
    return report, k_hat


K_SAFETY = 1.05
K_FLOOR = 1e-3
_K_PROBE_LAMBDAS = (1.0, 1.5, 2.0, 5.0, 10.0)


def estimate_strong_accretive_k(T: Operator, norm: TwoNorm, plan: SamplePlan) -> float:
    """Smallest strong-accretivity constant consistent with the samples, inflated by 5%.

    For each tuple and ``lambda >= 1`` the inequality holds iff
    ``k >= lambda - ||(lambda-1)(x-y) + (Tx-Ty), z|| / ||x-y, z||``.  The
    estimate is the sampled maximum of that bound, times 1.05, floored at
    ``1e-3``.  Raises :class:`InvalidK` when no ``k < 1`` is consistent.
    """
    _check_dims(T, norm)
    tup = sample_tuples(plan, T.dim)
    D, dT = _differences(T, tup)
    den = _pair_norm(norm, D[:, None, :], tup.Z)
    valid = den > plan.tol
    if not np.any(valid):
        raise NoValidSamples("every sampled tuple has ||x-y, z|| <= tol")
    lam = np.asarray(_K_PROBE_LAMBDAS)[None, :, None]
    num = _pair_norm(norm, (lam - 1.0) * D[:, None, :] + dT[:, None, :], tup.Z)
    needed = np.where(valid, lam - num / np.where(valid, den, 1.0), -np.inf)
    k_raw = float(needed.max())
    k = max(k_raw * K_SAFETY, K_FLOOR) if k_raw > 0 else K_FLOOR
    if k >= 1.0:
        raise InvalidK(f"samples need k >= {k_raw:.6g}; operator is not strong accretive on this plan")
    return k


# -- m-accretivity -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RangeReport:
    """Outcome of solving ``(I + lambda T) u = w`` for each target ``w``."""

    lam: float
    solutions: list
    residuals: list
    failures: dict
    inner_tol: float

    @property
    def supported(self) -> bool:
        return not self.failures and all(r <= self.inner_tol for r in self.residuals)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "supported": self.supported,
            "residuals": [None if r is None else float(r) for r in self.residuals],
            "failures": {str(k): v for k, v in self.failures.items()},
            "inner_tol": self.inner_tol,
        }


def check_m_accretive(T: Operator, norm: TwoNorm, lam: float, targets: Sequence, inner_tol: float = 1e-12,
                      witness: WitnessSet | None = None, max_inner_iters: int = 1000,
                      strategy: str = "auto") -> RangeReport:
    """Attempt ``(I + lam T) u = w`` for each target; failures are recorded, not raised."""
    from .solvers import solve_shifted  # solvers builds on this module
    from .errors import AccretiveError

    if not lam > 0:
        raise ValueError("lambda must be > 0")
    _check_dims(T, norm)
    W = witness if witness is not None else WitnessSet.default(T.dim)
    solutions, residuals, failures = [], [], {}
    for idx, w in enumerate(targets):
        w = np.asarray(w, dtype=float)
        try:
            u = solve_shifted(T, lam, w, norm, W, inner_tol=inner_tol,
                              max_iters=max_inner_iters, strategy=strategy)
        except AccretiveError as exc:
            failures[idx] = f"{type(exc).__name__}: {exc}"
            solutions.append(None)
            residuals.append(None)
            continue
        res = sup_seminorm(norm, u + lam * T(u) - w, W)
        solutions.append(u)
        residuals.append(res)
    return RangeReport(float(lam), solutions, residuals, failures, inner_tol)
