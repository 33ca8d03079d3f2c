"""Experiment configuration: a flat ``key = value`` document with dotted keys.

Example::

    seed = 1
    norm.kind = gram
    norm.dim = 3
    operator.family = diagonal
    operator.tag = cubic
    operator.box = -2,2
    witness.kind = standard_basis
    task.name = solve_zero
    task.k = auto
    task.x0 = 0.5,0.5,0.5

Lists are comma separated; matrices separate rows with ``;``.  Blank lines
and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..operators import Operator, operator_from_dict
from ..space import DEFAULT_LAMBDAS, NORM_KINDS, SamplePlan, TwoNorm, WitnessSet, box_bounds

TASKS = (
    "check_axioms",
    "check_property",
    "resolve",
    "yosida",
    "resolvent_rate",
    "fixed_point",
    "solve_zero",
    "solve_range",
)
PROPERTIES = ("accretive", "strong_accretive", "nonexpansive", "expansive", "contraction", "m_accretive")
WITNESS_KINDS = ("default", "standard_basis", "seeded_random", "user")

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*")
_KEY_CHAR = re.compile(r"[A-Za-z0-9_.]")


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class ValidationError(ConfigError):
    """All validation problems found in a document, as ``(field, reason)`` pairs."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(f"{f}: {r}" for f, r in self.issues))


def parse_document(text: str) -> dict[str, str]:
    """Split a document into an ordered ``{key: raw value}`` mapping."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(line) - len(line.lstrip())
        if "=" not in line:
            raise ParseError(lineno, indent + 1, "expected 'key = value'")
        key_part, value = line.split("=", 1)
        key = key_part.strip()
        if not key:
            raise ParseError(lineno, indent + 1, "missing key before '='")
        if not _KEY_RE.fullmatch(key):
            bad = next((i for i, ch in enumerate(key) if not _KEY_CHAR.match(ch)), 0)
            raise ParseError(lineno, indent + bad + 1, f"invalid key {key!r}")
        if key in out:
            raise ParseError(lineno, indent + 1, f"duplicate key {key!r}")
        out[key] = value.strip()
    return out


# -- value converters --------------------------------------------------------

def _float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _vector(s: str) -> list[float]:
    parts = [p.strip() for p in s.split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValueError("expected a comma-separated list of numbers")
    return [_float(p) for p in parts]


def _int_list(s: str) -> list[int]:
    return [int(p) for p in s.split(",")]


def _matrix(s: str) -> list[list[float]]:
    rows = [_vector(r) for r in s.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows have different lengths")
    return rows


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true/false")


def _box(s: str):
    if ";" in s:
        lo, hi = _matrix(s)
        return (lo, hi)
    v = _vector(s)
    if len(v) != 2:
        raise ValueError("expected 'lo,hi' or 'lo1,...;hi1,...'")
    return (v[0], v[1])


def _name(s: str) -> str:
    return s.strip().lower().replace("-", "_")


def fmt_number(v) -> str:
    return repr(float(v))


def fmt_vector(v) -> str:
    return ",".join(fmt_number(x) for x in np.asarray(v, dtype=float).ravel())


def fmt_matrix(m) -> str:
    return ";".join(fmt_vector(r) for r in np.asarray(m, dtype=float))


# -- field collection --------------------------------------------------------

_MISSING = object()


class _Fields:
    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.issues: list[tuple[str, str]] = []
        self.used: set[str] = set()

    def has(self, key):
        return key in self.raw

    def get(self, key, conv, default=_MISSING):
        if key not in self.raw:
            if default is _MISSING:
                self.issues.append((key, "required field is missing"))
            return None if default is _MISSING else default
        self.used.add(key)
        try:
            return conv(self.raw[key])
        except (ValueError, TypeError) as exc:
            self.issues.append((key, f"invalid value {self.raw[key]!r} ({exc})"))
            return None

    def issue(self, key, reason):
        self.issues.append((key, reason))


# -- operator sections -------------------------------------------------------

def operator_to_config(op: Operator, prefix: str = "operator") -> list[str]:
    """Serialize an operator as config lines under ``prefix``."""
    d = op.to_dict()
    lines = [f"{prefix}.family = {d['family']}"]
    fam = d["family"]
    if fam in ("linear", "affine"):
        lines.append(f"{prefix}.matrix = {fmt_matrix(d['matrix'])}")
    if fam in ("affine", "scalar", "composite"):
        lines.append(f"{prefix}.shift = {fmt_vector(d['shift'])}")
    if fam in ("scalar", "diagonal"):
        lines.append(f"{prefix}.dim = {d['dim']}")
    if fam == "scalar":
        lines.append(f"{prefix}.coefficient = {fmt_number(d['coefficient'])}")
    if fam == "diagonal":
        lines.append(f"{prefix}.tag = {d['tag']}")
        lines.append(f"{prefix}.a = {fmt_number(d['a'])}")
        lines.append(f"{prefix}.b = {fmt_number(d['b'])}")
        if "power" in d:
            lines.append(f"{prefix}.power = {d['power']}")
    if fam == "composite":
        names = [f"t{i}" for i in range(len(d["terms"]))]
        lines.append(f"{prefix}.terms = {','.join(names)}")
        lines.append(f"{prefix}.weights = {fmt_vector([t['weight'] for t in d['terms']])}")
        for name, (_, sub) in zip(names, op.terms):
            lines.extend(operator_to_config(sub, f"{prefix}.{name}"))
    if "box" in d:
        lo, hi = (np.asarray(b, dtype=float) for b in d["box"])
        if lo.ndim == 0:
            lines.append(f"{prefix}.box = {fmt_number(lo)},{fmt_number(hi)}")
        else:
            lines.append(f"{prefix}.box = {fmt_vector(lo)};{fmt_vector(hi)}")
    if "lipschitz" in d:
        lines.append(f"{prefix}.lipschitz = {fmt_number(d['lipschitz'])}")
    return lines


def _operator_dict(f: _Fields, prefix: str, dim: int | None) -> dict | None:
    fam = f.get(f"{prefix}.family", _name)
    if fam is None:
        return None
    d: dict = {"family": fam}
    if fam in ("linear", "affine"):
        d["matrix"] = f.get(f"{prefix}.matrix", _matrix)
        if fam == "affine":
            d["shift"] = f.get(f"{prefix}.shift", _vector, None)
    elif fam == "scalar":
        d["dim"] = f.get(f"{prefix}.dim", _int, dim)
        d["coefficient"] = f.get(f"{prefix}.coefficient", _float, 1.0)
        d["shift"] = f.get(f"{prefix}.shift", _vector, None)
    elif fam == "diagonal":
        d["dim"] = f.get(f"{prefix}.dim", _int, dim)
        d["tag"] = f.get(f"{prefix}.tag", _name, "cubic")
        d["a"] = f.get(f"{prefix}.a", _float, 1.0)
        d["b"] = f.get(f"{prefix}.b", _float, 1.0)
        d["power"] = f.get(f"{prefix}.power", _int, 3)
    elif fam == "composite":
        names = f.get(f"{prefix}.terms", lambda s: [n.strip() for n in s.split(",")])
        if names is None:
            return None
        weights = f.get(f"{prefix}.weights", _vector, [1.0] * len(names))
        if weights is not None and len(weights) != len(names):
            f.issue(f"{prefix}.weights", f"{len(weights)} weights for {len(names)} terms")
            return None
        terms = []
        for name, w in zip(names, weights or []):
            sub = _operator_dict(f, f"{prefix}.{name}", dim)
            if sub is None:
                return None
            terms.append({"weight": w, "operator": sub})
        d["terms"] = terms
        d["shift"] = f.get(f"{prefix}.shift", _vector, None)
    else:
        f.issue(f"{prefix}.family", f"unknown family {fam!r}")
        return None
    if f.has(f"{prefix}.box"):
        d["box"] = f.get(f"{prefix}.box", _box)
    if f.has(f"{prefix}.lipschitz"):
        d["lipschitz"] = f.get(f"{prefix}.lipschitz", _float)
    if any(v is None for k, v in d.items() if k not in ("shift",)):
        return None
    return d


# -- the config object -------------------------------------------------------

@dataclass(eq=False)
class ExperimentConfig:
    norm: TwoNorm
    operator: Operator
    witness: WitnessSet
    task: str
    params: dict
    seed: int
    plan: SamplePlan
    tol: float = 1e-10
    inner_tol: float = 1e-12
    max_iter: int = 10_000
    max_inner_iters: int = 1000
    strategy: str = "auto"
    trace_path: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.norm.dim

    def echo(self) -> dict:
        """Canonical copy of the document (sorted keys, raw values)."""
        return {k: self.raw[k] for k in sorted(self.raw)}


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse and validate a document; ``overrides`` replace raw values by key.

    Raises :class:`ParseError` on malformed lines and :class:`ValidationError`
    listing every invalid field otherwise.
    """
    raw = parse_document(text)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = str(v)
    return validate(raw)


def validate(raw: dict[str, str]) -> ExperimentConfig:
    f = _Fields(raw)
    seed = f.get("seed", _int, 0)
    if seed is not None and not 0 <= seed < 2**64:
        f.issue("seed", "must be a 64-bit unsigned integer")
        seed = None

    kind = f.get("norm.kind", _name)
    dim = f.get("norm.dim", _int, 2 if kind == "det2d" else _MISSING)
    norm = None
    if kind is not None and kind not in NORM_KINDS:
        f.issue("norm.kind", f"must be one of {NORM_KINDS}")
    elif kind is not None and dim is not None:
        try:
            norm = TwoNorm(kind, dim)
        except ValueError as exc:
            f.issue("norm.dim", str(exc))

    op = None
    op_dict = _operator_dict(f, "operator", dim)
    if op_dict is not None:
        try:
            op = operator_from_dict(op_dict)
        except (ValueError, KeyError, TypeError) as exc:
            f.issue("operator", str(exc))
    if op is not None and dim is not None and op.dim != dim:
        f.issue("operator", f"operator acts on R^{op.dim} but norm.dim = {dim}")

    def vec(key, default=_MISSING):
        v = f.get(key, _vector, default)
        if v is not None and v is not default and dim is not None and len(v) != dim:
            f.issue(key, f"length {len(v)} does not match norm.dim = {dim}")
            return None
        return v

    W = None
    wkind = f.get("witness.kind", _name, "default")
    wseed = f.get("witness.seed", _int, seed if seed is not None else 0)
    if wkind not in WITNESS_KINDS:
        f.issue("witness.kind", f"must be one of {WITNESS_KINDS}")
    elif dim is not None and dim >= 2:
        try:
            if wkind == "default":
                W = WitnessSet.default(dim, wseed)
            elif wkind == "standard_basis":
                W = WitnessSet.standard_basis(dim)
            elif wkind == "seeded_random":
                W = WitnessSet.seeded_random(dim, wseed, f.get("witness.count", _int, 2 * dim))
            else:
                dirs = f.get("witness.directions", _matrix)
                if dirs is not None:
                    W = WitnessSet(np.array(dirs))
        except ValueError as exc:
            f.issue("witness", str(exc))

    tol = f.get("tol", _float, 1e-10)
    inner_tol = f.get("inner_tol", _float, 1e-12)
    max_iter = f.get("max_iter", _int, 10_000)
    max_inner = f.get("max_inner_iters", _int, 1000)
    strategy = f.get("strategy", _name, "auto")
    for key, val in (("tol", tol), ("inner_tol", inner_tol)):
        if val is not None and not val > 0:
            f.issue(key, "must be > 0")
    for key, val in (("max_iter", max_iter), ("max_inner_iters", max_inner)):
        if val is not None and val < 0:
            f.issue(key, "must be >= 0")
    if strategy not in ("auto", "direct", "picard", "relaxed"):
        f.issue("strategy", "must be one of auto, direct, picard, relaxed")

    plan = None
    pairs = f.get("plan.pairs", _int, 1000)
    lambdas = f.get("plan.lambdas", _vector, list(DEFAULT_LAMBDAS))
    pbox = f.get("plan.box", _box, (-1.0, 1.0))
    dependent = f.get("plan.dependent", _bool, True)
    if seed is not None and None not in (pairs, lambdas, pbox, dependent) and dim is not None:
        try:
            box_bounds(pbox, dim)
            plan = SamplePlan(seed=seed, pair_count=pairs, lambda_grid=tuple(lambdas), box=pbox,
                              witness=W, dependent_tuples=dependent, tol=tol or 1e-10)
        except ValueError as exc:
            f.issue("plan", str(exc))

    task = f.get("task.name", _name)
    params: dict = {}
    if task is not None and task not in TASKS:
        f.issue("task.name", f"must be one of {TASKS}")
    elif task is not None:
        params = _task_params(f, task, vec)

    f.get("output.trace", str, None)
    trace_path = raw.get("output.trace")

    for key in raw:
        if key not in f.used:
            f.issue(key, "unknown key")
    if f.issues:
        raise ValidationError(f.issues)
    return ExperimentConfig(
        norm=norm, operator=op, witness=W, task=task, params=params, seed=seed, plan=plan,
        tol=tol, inner_tol=inner_tol, max_iter=max_iter, max_inner_iters=max_inner,
        strategy=strategy, trace_path=trace_path, raw=dict(raw),
    )


def _k_value(s: str):
    if s.strip().lower() == "auto":
        return "auto"
    k = _float(s)
    if not 0.0 < k < 1.0:
        raise ValueError("k must lie in (0,1)")
    return k


def _task_params(f: _Fields, task: str, vec) -> dict:
    p: dict = {}
    if task == "check_property":
        prop = f.get("task.property", _name)
        if prop is not None and prop not in PROPERTIES:
            f.issue("task.property", f"must be one of {PROPERTIES}")
        p["property"] = prop
        if prop == "strong_accretive":
            p["k"] = f.get("task.k", _k_value)
            p["lambdas"] = f.get("task.lambdas", _vector, None)
        if prop == "m_accretive":
            p["lambda"] = f.get("task.lambda", _float)
            if p["lambda"] is not None and not p["lambda"] > 0:
                f.issue("task.lambda", "must be > 0")
            targets = f.get("task.targets", _matrix)
            dim = f.raw.get("norm.dim")
            if targets is not None and dim is not None and any(len(t) != int(dim) for t in targets):
                f.issue("task.targets", f"target length does not match norm.dim = {dim}")
            p["targets"] = targets
    elif task in ("resolve", "yosida"):
        p["n"] = f.get("task.n", _int)
        if p["n"] is not None and p["n"] < 1:
            f.issue("task.n", "must be a positive integer")
        p["x"] = vec("task.x")
    elif task == "resolvent_rate":
        sched = f.get("task.schedule", _int_list, [2**i for i in range(1, 11)])
        if sched is not None and (any(n < 1 for n in sched) or any(b <= a for a, b in zip(sched, sched[1:]))):
            f.issue("task.schedule", "must be strictly ascending positive integers")
        p["schedule"] = sched
        p["x"] = vec("task.x")
    elif task == "fixed_point":
        p["x0"] = vec("task.x0")
        p["k"] = f.get("task.k", _k_value, "auto")
    elif task in ("solve_zero", "solve_range"):
        p["x0"] = vec("task.x0")
        p["k"] = f.get("task.k", _k_value, "auto")
        if task == "solve_range":
            p["p"] = vec("task.p")
    return p
