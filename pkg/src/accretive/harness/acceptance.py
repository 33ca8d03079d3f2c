"""Acceptance criteria as runnable checks.

Each ``criterion_N`` returns a :class:`CriterionResult`; :func:`run_all`
runs a selection and ``accretive acceptance`` prints one line per result.
Suites are seeded, so every run reproduces the same numbers.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from ..operators import (
    DiagonalNonlinear,
    Scalar,
    estimate_strong_accretive_k,
    identity,
    sample_margins,
    zero,
)
from ..solvers import (
    ResolventConfig,
    check_cauchy_estimate,
    picard_solve,
    solve_range,
    solve_zero,
    verify_resolvent_convergence,
    verify_resolvent_nonexpansive,
    verify_yosida_lipschitz,
)
from ..space import SamplePlan, TwoNorm, WitnessSet, check_axioms, sup_seminorm
from .config import parse_config
from .runner import run

SEED = 20240611
INNER_TOL = 1e-12
AXIOM_TOL = 1e-10
# the cubic family stays accretive only against coordinate directions
CUBIC_BOX = (-2.0, 2.0)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} ({self.name}): {self.detail}"


def cubic(dim: int) -> DiagonalNonlinear:
    """``x -> x^3 + x`` coordinatewise on the box ``[-2, 2]^dim``."""
    return DiagonalNonlinear(dim, "cubic", 1.0, 1.0, box=CUBIC_BOX)


def bisect(g, target: float, lo: float, hi: float, iters: int = 200) -> float:
    """Root of the nondecreasing scalar map ``g(u) = target`` on ``[lo, hi]``."""
    glo = g(lo) - target
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        gm = g(mid) - target
        if gm == 0.0:
            return mid
        if (gm < 0.0) == (glo < 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scalar_map(T):
    if isinstance(T, DiagonalNonlinear):
        return lambda i, u: float(T.scalar_map(np.float64(u)))
    shift = np.broadcast_to(np.asarray(T.shift, dtype=float), (T.dim,))
    return lambda i, u: T.coefficient * u + shift[i]


def inner_oracle(T, x, lo=-10.0, hi=10.0) -> np.ndarray:
    """Per-coordinate bisection solution of ``u + T(u) = x`` for diagonal ``T``."""
    f = _scalar_map(T)
    return np.array([bisect(lambda u, i=i: u + f(i, u), xi, lo, hi) for i, xi in enumerate(x)])


# -- criteria ------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    plan = SamplePlan(seed=SEED, pair_count=10_000, tol=AXIOM_TOL)
    norms = [TwoNorm.det2d()] + [TwoNorm.gram(d) for d in (2, 3, 8, 16)]
    parts, ok = [], True
    for norm in norms:
        rep = check_axioms(norm, plan)
        worst = min(r.worst_margin for k, r in rep.results.items() if k != "A1/independent")
        ok &= rep.passed and worst >= -AXIOM_TOL
        parts.append(f"{norm.kind}{norm.dim} {rep.summary()} worst={worst:.1e}")

    def broken(X, Y):
        return np.linalg.norm(X, axis=-1) * np.linalg.norm(Y, axis=-1)

    brep = check_axioms(broken, plan, dim=3)
    broken_fails = not brep.axiom_passed("A1")
    ok &= broken_fails
    parts.append(f"broken product norm fails A1: {broken_fails}")
    return CriterionResult(1, "axiom suite", ok, "; ".join(parts))


def criterion_2() -> CriterionResult:
    dim = 3
    cases = [
        ("2I", Scalar(dim, 2.0), SamplePlan(seed=SEED, pair_count=1000)),
        ("cubic", cubic(dim), SamplePlan(seed=SEED, pair_count=1000,
                                         witness=WitnessSet.standard_basis(dim), dependent_tuples=False)),
    ]
    norm = TwoNorm.gram(dim)
    parts, ok = [], True
    for label, T, plan in cases:
        acc = sample_margins("accretive", T, norm, plan)
        counter = premises = 0
        for li, lam in enumerate(plan.lambda_grid):
            S = identity(dim) + lam * T
            exp = sample_margins("expansive", S, norm, plan)
            strict = exp.raw[:, 0, :] - 1e-12 * (1.0 + exp.scale[:, 0, :]) > 0
            acc_ok = acc.normalized[:, li, :] >= -plan.tol
            premises += int(strict.sum())
            counter += int(np.sum(strict & ~acc_ok))
        ok &= counter == 0
        parts.append(f"{label}: {premises} strict premises, {counter} counterexamples")
    return CriterionResult(2, "expansive resolvent implies accretive", ok, "; ".join(parts))


def criterion_3() -> CriterionResult:
    dim = 3
    norm = TwoNorm.gram(dim)
    thr = 2 * INNER_TOL + 1e-10
    base = SamplePlan(seed=SEED, pair_count=1000)
    cases = [
        ("0", zero(dim), base),
        ("2I", Scalar(dim, 2.0), base),
        ("cubic", cubic(dim), base.replace(witness=WitnessSet.standard_basis(dim), dependent_tuples=False)),
    ]
    worst, ok = np.inf, True
    for label, T, plan in cases:
        for n in (2, 8, 64):
            cfg = ResolventConfig(n, INNER_TOL)
            for rep in (verify_resolvent_nonexpansive(T, cfg, norm, plan),
                        verify_yosida_lipschitz(T, cfg, norm, plan)):
                worst = min(worst, rep.min_raw_margin)
                ok &= rep.holds_on_samples and rep.min_raw_margin >= -thr
    return CriterionResult(3, "resolvent nonexpansive and Yosida 2n bound", ok,
                           f"18 suites, worst raw margin {worst:.3e} (threshold {-thr:.1e})")


def criterion_4() -> CriterionResult:
    dim = 3
    norm = TwoNorm.gram(dim)
    schedule = [2**i for i in range(1, 11)]
    xs = np.random.default_rng([SEED, 4]).uniform(-1.0, 1.0, size=(5, dim))
    cases = [("2I", Scalar(dim, 2.0), WitnessSet.default(dim, SEED)),
             ("cubic", cubic(dim), WitnessSet.standard_basis(dim))]
    ok, worst_gap = True, -np.inf
    for _, T, W in cases:
        for x in xs:
            rep = verify_resolvent_convergence(T, x, schedule, ResolventConfig(1, INNER_TOL), norm, W)
            gap = max(s - rep.M for s in rep.scaled)
            worst_gap = max(worst_gap, gap)
            ok &= gap <= 1e-8 and rep.monotone_ok
    return CriterionResult(4, "resolvent rate", ok, f"10 runs, max n*e_n - M = {worst_gap:.3e} (allowed 1e-8)")


def criterion_5() -> CriterionResult:
    dim = 3
    norm = TwoNorm.gram(dim)
    W = WitnessSet.default(dim, SEED)
    rng = np.random.default_rng([SEED, 5])
    ok, parts = True, []
    for k in (0.3, 0.9, 0.99):
        T = Scalar(dim, k)
        x0 = rng.uniform(-1.0, 1.0, dim)
        trace = picard_solve(T, x0, norm, W, k, tol=1e-10, max_iter=100_000)
        cauchy, _ = check_cauchy_estimate(trace, norm, W)
        X = np.asarray(trace.iterates)
        closed = (k ** np.arange(len(X)))[:, None] * x0
        closed_ok = np.allclose(X, closed, rtol=1e-12, atol=0.0)
        errs = np.array([sup_seminorm(norm, x, W) for x in X[:-1]])
        bounds = np.asarray(trace.apriori_bound)
        bound_ok = bool(np.all(errs <= bounds * (1 + 1e-12) + 1e-10))
        tight = float(np.max(bounds / errs))
        tight_ok = tight <= 10.0 / (1.0 - k)
        # the a-posteriori gap k/(1-k) * tol must stay under 1e-10 per start
        utol = 1e-10 * (1.0 - k) / k
        x1 = rng.uniform(-1.0, 1.0, dim)
        s0 = picard_solve(T, x0, norm, W, k, tol=utol, max_iter=100_000).solution
        s1 = picard_solve(T, x1, norm, W, k, tol=utol, max_iter=100_000).solution
        gap = sup_seminorm(norm, s0 - s1, W)
        good = trace.converged and cauchy >= -1e-10 and closed_ok and bound_ok and tight_ok and gap <= 2e-10
        ok &= good
        parts.append(f"k={k}: {len(trace.residual_sup)} steps, cauchy slack {cauchy:.1e}, "
                     f"bound/err <= {tight:.6f}, closed form {closed_ok}, uniqueness gap {gap:.1e}")
    return CriterionResult(5, "Picard bound tightness", ok, "; ".join(parts))


def _zero_case(T, k, x0, norm, W):
    res = solve_zero(T, k, x0, norm, W, tol=1e-8, inner_tol=INNER_TOL)
    ratios = res.trace.ratios()[1:]
    ratio = float(np.max(ratios)) if ratios.size else 0.0
    X = np.asarray(res.trace.iterates)
    oracle_gap = max(
        float(np.max(np.abs(X[m + 1] - inner_oracle(T, X[m])))) for m in range(len(X) - 1)
    )
    good = (res.converged and res.residual <= 1e-8 and ratio <= res.contraction_factor + 1e-6
            and oracle_gap <= 1e-9)
    return good, res, ratio, oracle_gap


def criterion_6() -> CriterionResult:
    dim = 3
    norm = TwoNorm.gram(dim)
    rng = np.random.default_rng([SEED, 6])
    c = rng.uniform(-1.0, 1.0, dim)
    x0 = rng.uniform(-1.0, 1.0, dim)
    parts, ok = [], True

    T1 = Scalar(dim, 1.0, -c)
    W1 = WitnessSet.default(dim, SEED)
    good, res, ratio, gap = _zero_case(T1, 0.5, x0, norm, W1)
    sol_ok = float(np.max(np.abs(res.solution - c))) <= 1e-8
    ok &= good and sol_ok
    parts.append(f"x-c: residual {res.residual:.1e}, max ratio {ratio:.6f}, oracle gap {gap:.1e}, "
                 f"solution matches c {sol_ok}")

    T2 = cubic(dim)
    basis = WitnessSet.standard_basis(dim)
    plan = SamplePlan(seed=SEED, pair_count=1000, witness=basis, dependent_tuples=False)
    k = estimate_strong_accretive_k(T2, norm, plan)
    good, res, ratio, gap = _zero_case(T2, k, x0, norm, basis)
    ok &= good
    parts.append(f"cubic (k={k:.3g} estimated): residual {res.residual:.1e}, max ratio {ratio:.6f} "
                 f"vs {res.contraction_factor:.6f}, oracle gap {gap:.1e}")
    return CriterionResult(6, "zero solver", ok, "; ".join(parts))


def criterion_7() -> CriterionResult:
    dim = 3
    norm = TwoNorm.gram(dim)
    targets = np.random.default_rng([SEED, 7]).uniform(-1.0, 1.0, size=(20, dim))
    cases = [("2I", Scalar(dim, 2.0), WitnessSet.default(dim, SEED)),
             ("cubic", cubic(dim), WitnessSet.standard_basis(dim))]
    parts, ok = [], True
    for label, T, W in cases:
        plan = SamplePlan(seed=SEED, pair_count=1000, witness=W, dependent_tuples=False)
        k = estimate_strong_accretive_k(T, norm, plan)
        worst = 0.0
        for p in targets:
            res = solve_range(T, p, k, np.zeros(dim), norm, W, tol=1e-8, inner_tol=INNER_TOL)
            worst = max(worst, res.residual)
            ok &= res.converged and res.residual <= 1e-8
        parts.append(f"{label}: 20 targets, worst residual {worst:.1e}")
    return CriterionResult(7, "range is everything", ok, "; ".join(parts))


ACCEPTANCE_CONFIGS = {
    "check_axioms": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = 1
task.name = check_axioms
""",
    "check_property": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = -1
task.name = check_property
task.property = accretive
""",
    "fixed_point": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = 0.6
operator.shift = 1,-1,0.5
task.name = fixed_point
task.x0 = 0,0,0
""",
    "resolvent_rate": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = diagonal
operator.tag = cubic
operator.box = -2,2
witness.kind = standard_basis
task.name = resolvent_rate
task.x = 0.5,-0.25,1
""",
    "solve_zero": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = diagonal
operator.tag = cubic
operator.box = -2,2
witness.kind = standard_basis
plan.dependent = false
tol = 1e-8
task.name = solve_zero
task.x0 = 0.9,-0.6,0.3
""",
    "solve_range": """\
seed = 7
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = 2
tol = 1e-8
task.name = solve_range
task.x0 = 0,0,0
task.p = 0.3,-0.7,0.1
""",
}


def criterion_8() -> CriterionResult:
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, text in ACCEPTANCE_CONFIGS.items():
            path = os.path.join(tmp, f"{name}.csv")
            outputs = []
            for _ in range(2):
                rep = run(parse_config(text), out=path)
                trace = open(path, "rb").read() if rep.trace_path else b""
                outputs.append((rep.to_json().encode(), trace))
                if rep.trace_path:
                    os.remove(path)
            if outputs[0] != outputs[1]:
                mismatched.append(name)
    ok = not mismatched
    detail = f"{len(ACCEPTANCE_CONFIGS)} configs run twice, " + (
        "traces and reports byte-identical" if ok else f"differences in {', '.join(mismatched)}")
    return CriterionResult(8, "determinism", ok, detail)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
}


def run_criterion(number: int) -> CriterionResult:
    start = time.perf_counter()
    res = CRITERIA[number]()
    return CriterionResult(res.number, res.name, bool(res.passed), res.detail, time.perf_counter() - start)


def run_all(only=None) -> list[CriterionResult]:
    return [run_criterion(n) for n in (only or sorted(CRITERIA))]
