"""Fixed-point iteration, resolvents, Yosida approximations and operator
equation solvers.

The central pieces are

* :func:`picard_solve`: ``x_{n+1} = T(x_n)`` with the a-priori bound
  ``k^n / (1-k) * r_0`` recorded alongside each residual;
* :func:`solve_shifted`: solves ``u + lam T(u) = x``, i.e. evaluates
  ``(I + lam T)^{-1}``; the resolvent ``J_n`` is the case ``lam = 1/n``;
* :func:`solve_zero` / :func:`solve_range`: Picard iteration of
  ``(I + T)^{-1}``, which contracts with factor ``1/(2-k)`` when ``T`` is
  strong accretive with constant ``k``, so its fixed point solves
  ``T(x) = 0`` (resp. ``T(x) = p`` after shifting).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InnerDiverged,
    InvalidK,
    LipschitzUnavailable,
    NonFiniteIterate,
    NotContractive,
    SingularLinearSystem,
    StrategyUnavailable,
)
from .operators import (
    Operator,
    PropertyReport,
    SampleTuples,
    TupleMargins,
    property_report,
    sample_tuples,
)
from .space import SamplePlan, TwoNorm, WitnessSet, as_vector, bound_constant, sup_seminorm

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
DIVERGED = "diverged"
STALLED = "stalled"

DIVERGENCE_WINDOW = 10
DIVERGENCE_FACTOR = 10.0
PICARD_MARGIN = 1.01

DIRECT = "direct"
PICARD = "picard"
RELAXED = "relaxed"
AUTO = "auto"
STRATEGIES = (AUTO, DIRECT, PICARD, RELAXED)


def _validate_k(k):
    if not 0.0 < k < 1.0:
        raise InvalidK(f"k must lie in (0,1), got {k}")


# -- Picard engine -----------------------------------------------------------

@dataclass(eq=False)
class PicardTrace:
    """Iterates ``x_0..x_N`` of a Picard run.

    ``residual_sup[n]`` is the witness sup-seminorm of ``x_{n+1} - x_n`` and
    ``apriori_bound[n] = k^n / (1-k) * residual_sup[0]``; both have length
    ``N``.
    """

    iterates: list
    residual_sup: list
    apriori_bound: list
    k_used: float
    status: str
    tol: float
    meta: dict = field(default_factory=dict)

    @property
    def solution(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def r0(self) -> float | None:
        return self.residual_sup[0] if self.residual_sup else None

    @property
    def error_bound(self) -> float | None:
        """A-posteriori bound ``k/(1-k) * residual_sup[-1]`` on the distance to the fixed point."""
        if not self.residual_sup:
            return None
        return self.k_used / (1.0 - self.k_used) * self.residual_sup[-1]

    def ratios(self) -> np.ndarray:
        r = np.asarray(self.residual_sup, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return r[1:] / r[:-1]


def picard_solve(T: Callable, x0, norm: TwoNorm, W: WitnessSet, k: float,
                 tol: float = 1e-10, max_iter: int = 10_000,
                 stall_tol: float | None = None) -> PicardTrace:
    """Iterate ``x_{n+1} = T(x_n)`` from ``x0``.

    Stops with status ``converged`` once the sup-residual drops to ``tol``,
    ``diverged`` when the residual grows by more than 10x over a 10-step
    window, ``stalled`` (only with ``stall_tol``) when 10 consecutive
    residual ratios are ``>= 1 - stall_tol``, and ``max_iterations``
    otherwise.  ``k`` is the contraction constant used for the a-priori
    bound; it is not verified here.
    """
    _validate_k(k)
    x = as_vector(x0, norm.dim)
    iterates = [x]
    residuals: list[float] = []
    bounds: list[float] = []
    status = MAX_ITERATIONS
    r0 = None
    for n in range(max_iter):
        x_new = np.asarray(T(x), dtype=float)
        if x_new.shape != x.shape or not np.all(np.isfinite(x_new)):
            raise NonFiniteIterate(f"iterate {n + 1} is not a finite vector: {x_new!r}")
        r = sup_seminorm(norm, x_new - x, W)
        if r0 is None:
            r0 = r
        iterates.append(x_new)
        residuals.append(r)
        bounds.append(k**n / (1.0 - k) * r0)
        x = x_new
        if r <= tol:
            status = CONVERGED
            break
        if n >= DIVERGENCE_WINDOW and r > DIVERGENCE_FACTOR * residuals[n - DIVERGENCE_WINDOW]:
            status = DIVERGED
            break
        if stall_tol is not None and n >= DIVERGENCE_WINDOW:
            window = np.asarray(residuals[n - DIVERGENCE_WINDOW:], dtype=float)
            if np.all(window[1:] >= (1.0 - stall_tol) * window[:-1]):
                status = STALLED
                break
    return PicardTrace(iterates, residuals, bounds, float(k), status, float(tol))


def check_cauchy_estimate(trace: PicardTrace, norm: TwoNorm, W: WitnessSet):
    """Worst slack of ``||x_n - x_m, z|| <= k^n/(1-k) ||x_0 - x_1, z||`` over
    all stored pairs ``m > n`` and witnesses ``z``.

    Returns ``(worst_margin, (n, m, witness_index))``; ``worst_margin`` is
    ``inf`` when fewer than two iterates exist.
    """
    X = np.asarray(trace.iterates, dtype=float)
    Z = W.directions
    if X.shape[0] < 2:
        return float("inf"), None
    k = trace.k_used
    base = norm.evaluate(X[0] - X[1], Z)
    worst, where = float("inf"), None
    for n in range(X.shape[0] - 1):
        gaps = norm.evaluate((X[n + 1:] - X[n])[:, None, :], Z)
        margin = (k**n / (1.0 - k)) * base - gaps
        idx = int(np.argmin(margin))
        i, j = divmod(idx, Z.shape[0])
        if margin[i, j] < worst:
            worst, where = float(margin[i, j]), (n, n + 1 + i, j)
    return worst, where


# -- inverting I + lam T -----------------------------------------------------

def _affine_solve(T: Operator, lam: float, X: np.ndarray) -> np.ndarray:
    parts = T.affine_parts()
    if parts is None:
        raise StrategyUnavailable(f"direct solve needs an affine operator, got {T.family}")
    A, c = parts
    M = np.eye(T.dim) + lam * A
    if np.linalg.cond(M) > 1.0 / np.finfo(float).eps:
        raise SingularLinearSystem(f"I + {lam:g} T is numerically singular")
    B = np.atleast_2d(X - lam * c)
    try:
        U = np.linalg.solve(M, B.T).T
        # iterative refinement against the unfactored system
        for _ in range(3):
            R = B - U @ M.T
            if np.max(np.abs(R)) <= 1e-12 * (1.0 + np.max(np.abs(B))):
                break
            U = U + np.linalg.solve(M, R.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularLinearSystem(str(exc)) from exc
    return U.reshape(X.shape)


def _iterative_solve(T, lam, X, norm, W, inner_tol, max_iters, step):
    # step(u, residual) -> next u; rows freeze once their residual meets tol
    # so a point's result does not depend on what it is batched with
    X2 = np.atleast_2d(X)
    U = X2.copy()
    done = np.zeros(X2.shape[0], dtype=bool)
    final_res = np.full(X2.shape[0], np.inf)
    for _ in range(max_iters + 1):
        act = ~done
        Ua = U[act]
        R = Ua + lam * T(Ua) - X2[act]
        if not np.all(np.isfinite(R)):
            raise InnerDiverged("non-finite inner iterate", point=Ua)
        res = np.atleast_1d(sup_seminorm(norm, R, W))
        ok = res <= inner_tol
        idx = np.flatnonzero(act)
        final_res[idx] = res
        done[idx[ok]] = True
        if done.all():
            return U.reshape(X.shape)
        keep = ~ok
        U[idx[keep]] = step(Ua[keep], R[keep])
    worst = int(np.argmax(np.where(done, -np.inf, final_res)))
    raise InnerDiverged(
        f"inner solve did not reach {inner_tol:g} in {max_iters} iterations "
        f"(residual {final_res[worst]:.3e})",
        residual=float(final_res[worst]),
        point=X2[worst],
    )


def choose_strategy(T: Operator, lam: float, strategy: str = AUTO) -> str:
    """Resolve ``auto``: direct for affine maps, plain Picard when
    ``1.01 * lam * Lip(T) <= 1``, relaxed Picard otherwise."""
    if strategy not in STRATEGIES:
        raise StrategyUnavailable(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy != AUTO:
        return strategy
    if T.affine_parts() is not None:
        return DIRECT
    lip = T.lipschitz()
    if lip is None:
        raise LipschitzUnavailable(f"{T.family} operator has no Lipschitz bound; declare a box or a hint")
    return PICARD if PICARD_MARGIN * lam * lip <= 1.0 else RELAXED


def solve_shifted(T: Operator, lam: float, x, norm: TwoNorm, W: WitnessSet,
                  inner_tol: float = 1e-12, max_iters: int = 1000,
                  strategy: str = AUTO) -> np.ndarray:
    """Solve ``u + lam T(u) = x`` for ``u`` (``x`` may be a stack ``(m, d)``).

    ``direct``
        LU solve of ``(I + lam A) u = x - lam c`` for affine ``T``, with
        iterative refinement.
    ``picard``
        ``u <- x - lam T(u)`` from ``u = x``; contracts with factor
        ``lam Lip(T)``, required to be at most ``1/1.01``.
    ``relaxed``
        ``u <- u - (u + lam T(u) - x) / (1 + lam Lip(T))``.  For
        coordinatewise nondecreasing ``T`` each coordinate moves
        monotonically toward the root with factor at most
        ``lam L / (1 + lam L)``, so iterates stay between ``x`` and the
        solution.

    Iterative strategies stop when the witness sup-seminorm of the
    residual ``u + lam T(u) - x`` is at most ``inner_tol``.
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    X = np.asarray(x, dtype=float)
    if X.shape[-1:] != (T.dim,) or T.dim != norm.dim:
        raise DimensionMismatch(f"dimensions disagree: x {X.shape}, T on R^{T.dim}, norm on R^{norm.dim}")
    strategy = choose_strategy(T, lam, strategy)
    if strategy == DIRECT:
        return _affine_solve(T, lam, X)
    lip = T.lipschitz()
    if lip is None:
        raise LipschitzUnavailable(f"{T.family} operator has no Lipschitz bound; declare a box or a hint")
    if strategy == PICARD:
        if PICARD_MARGIN * lam * lip > 1.0:
            raise StrategyUnavailable(
                f"Picard inner solve needs 1/lam >= 1.01 Lip(T) = {PICARD_MARGIN * lip:.6g}, got {1.0 / lam:.6g}"
            )
        return _iterative_solve(T, lam, X, norm, W, inner_tol, max_iters, lambda U, R: U - R)
    omega = 1.0 / (1.0 + lam * lip)
    return _iterative_solve(T, lam, X, norm, W, inner_tol, max_iters, lambda U, R: U - omega * R)


@dataclass(frozen=True)
class ResolventConfig:
    """Settings for ``J_n = (I + T/n)^{-1}``."""

    n: int
    inner_tol: float = 1e-12
    max_inner_iters: int = 1000
    strategy: str = AUTO

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"resolvent index must be a positive integer, got {self.n}")
        if self.strategy not in STRATEGIES:
            raise StrategyUnavailable(f"unknown strategy {self.strategy!r}")

    def with_n(self, n: int) -> "ResolventConfig":
        return ResolventConfig(n, self.inner_tol, self.max_inner_iters, self.strategy)


def resolvent(T: Operator, cfg: ResolventConfig, x, norm: TwoNorm, W: WitnessSet) -> np.ndarray:
    """``J_n(x)``: the ``u`` with ``u + T(u)/n = x``."""
    return solve_shifted(T, 1.0 / cfg.n, x, norm, W, cfg.inner_tol, cfg.max_inner_iters, cfg.strategy)


def yosida(T: Operator, cfg: ResolventConfig, x, norm: TwoNorm, W: WitnessSet) -> np.ndarray:
    """Yosida approximation ``T_n(x) = n (x - J_n x)``; equals ``T(J_n x)``
    up to ``n * inner_tol``."""
    X = np.asarray(x, dtype=float)
    return cfg.n * (X - resolvent(T, cfg, X, norm, W))


# -- verification suites -----------------------------------------------------

def _suite_report(name, raw, scale, tup, plan, tol, note=""):
    tm = TupleMargins(raw, scale, (None,), tup)
    return property_report(name, tm, plan.replace(tol=tol), note=note)


def _pair_norm(norm, D, Z):
    return norm.evaluate(D[:, None, None, :], Z[:, None, :, :])


def verify_resolvent_nonexpansive(T: Operator, cfg: ResolventConfig, norm: TwoNorm,
                                  plan: SamplePlan) -> PropertyReport:
    """``||J_n x - J_n y, z|| <= ||x - y, z||`` on the plan's tuples, up to
    ``2 inner_tol + plan.tol``."""
    tup = sample_tuples(plan, T.dim)
    W = plan.witness_for(T.dim)
    JX = resolvent(T, cfg, tup.X, norm, W)
    JY = resolvent(T, cfg, tup.Y, norm, W)
    a = _pair_norm(norm, tup.X - tup.Y, tup.Z)
    b = _pair_norm(norm, JX - JY, tup.Z)
    return _suite_report("resolvent_nonexpansive", a - b, np.maximum(a, b), tup, plan,
                         2 * cfg.inner_tol + plan.tol, note=f"n={cfg.n}")


def verify_yosida_lipschitz(T: Operator, cfg: ResolventConfig, norm: TwoNorm,
                            plan: SamplePlan) -> PropertyReport:
    """``||T_n x - T_n y, z|| <= 2n ||x - y, z||`` on the plan's tuples, up to
    ``2n inner_tol + plan.tol``."""
    tup = sample_tuples(plan, T.dim)
    W = plan.witness_for(T.dim)
    TX = yosida(T, cfg, tup.X, norm, W)
    TY = yosida(T, cfg, tup.Y, norm, W)
    a = 2 * cfg.n * _pair_norm(norm, tup.X - tup.Y, tup.Z)
    b = _pair_norm(norm, TX - TY, tup.Z)
    return _suite_report("yosida_lipschitz", a - b, np.maximum(a, b), tup, plan,
                         2 * cfg.n * cfg.inner_tol + plan.tol, note=f"n={cfg.n}")


def verify_yosida_bounded(T: Operator, cfg: ResolventConfig, E_samples, norm: TwoNorm,
                          W: WitnessSet, tol: float = 1e-10, seed: int = 0) -> PropertyReport:
    """``||T_n x, z|| <= M`` with ``M`` the sampled bound of ``||T x, z||``.

    When ``T`` declares a box, samples whose image ``T(x)`` leaves it are
    dropped (the bound is stated for maps of a bounded set into itself).
    """
    E = np.atleast_2d(np.asarray(E_samples, dtype=float))
    TE = T(E)
    dom = T.domain()
    if dom is not None:
        inside = np.all((TE >= dom[0]) & (TE <= dom[1]), axis=1)
        E, TE = E[inside], TE[inside]
    M = bound_constant(norm, TE, W).bound_M
    TnE = yosida(T, cfg, E, norm, W)
    vals = norm.evaluate(TnE[:, None, :], W.directions)[:, None, :]
    raw = M - vals
    Z = np.broadcast_to(W.directions, (E.shape[0],) + W.directions.shape)
    tup_like = SampleTuples(E, TnE, Z, np.zeros(Z.shape[:2], dtype=bool))
    plan = SamplePlan(seed=seed, pair_count=max(1, E.shape[0]), tol=tol)
    return _suite_report("yosida_bounded", raw, np.maximum(vals, M), tup_like, plan,
                         cfg.n * cfg.inner_tol + tol, note=f"n={cfg.n}, M={M!r}")


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Errors ``e_n = sup_z ||x - J_n x, z||`` along an ``n`` schedule."""

    x: np.ndarray
    ns: tuple
    errors: tuple
    M: float
    inner_tol: float
    mono_tol: float

    @property
    def scaled(self) -> tuple:
        return tuple(n * e for n, e in zip(self.ns, self.errors))

    @property
    def bounds(self) -> tuple:
        return tuple(self.M / n + self.inner_tol for n in self.ns)

    @property
    def rate_ok(self) -> bool:
        return all(e <= b for e, b in zip(self.errors, self.bounds))

    @property
    def monotone_ok(self) -> bool:
        e = self.errors
        return all(e[i + 1] <= e[i] + self.mono_tol for i in range(len(e) - 1))

    @property
    def passed(self) -> bool:
        return self.rate_ok and self.monotone_ok


def verify_resolvent_convergence(T: Operator, x, n_schedule: Sequence[int], cfg_template: ResolventConfig,
                                 norm: TwoNorm, W: WitnessSet, mono_tol: float = 1e-10) -> ConvergenceReport:
    """Check ``e_n <= M/n + inner_tol`` and that ``e_n`` is nonincreasing,
    with ``M = sup_z ||T x, z||``."""
    ns = tuple(int(n) for n in n_schedule)
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n schedule must be non-empty and strictly ascending")
    x = as_vector(x, norm.dim)
    M = sup_seminorm(norm, T(x), W)
    errors = tuple(
        sup_seminorm(norm, x - resolvent(T, cfg_template.with_n(n), x, norm, W), W) for n in ns
    )
    return ConvergenceReport(x, ns, errors, M, cfg_template.inner_tol, mono_tol)


# -- operator equations ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZeroSolveResult:
    solution: np.ndarray
    residual: float
    outer_iterations: int
    contraction_factor: float
    trace: PicardTrace
    k_used: float
    tol: float

    @property
    def converged(self) -> bool:
        return self.residual <= self.tol and self.trace.status == CONVERGED


def solve_zero(T: Operator, k: float, x0, norm: TwoNorm, W: WitnessSet,
               tol: float = 1e-8, max_iter: int = 10_000, inner_tol: float = 1e-12,
               max_inner_iters: int = 1000, strategy: str = AUTO) -> ZeroSolveResult:
    """Solve ``T(x) = 0`` by Picard iteration of ``x -> (I + T)^{-1} x``.

    For ``T`` strong accretive with constant ``k`` the inverse contracts
    with factor ``1/(2-k)`` and its fixed point satisfies
    ``x + T(x) = x``.  Each inner solve must land inside ``T``'s declared
    box (else :class:`~accretive.errors.DomainViolation`).  Raises
    :class:`~accretive.errors.NotContractive` when the outer residual stalls
    or grows.
    """
    _validate_k(k)
    factor = 1.0 / (2.0 - k)

    def inverse(x):
        u = solve_shifted(T, 1.0, x, norm, W, inner_tol, max_inner_iters, strategy)
        T.validate(u)
        return u

    # residual_sup[m] tracks sup ||T(x_{m+1})|| up to inner_tol
    trace = picard_solve(inverse, x0, norm, W, factor, tol=0.5 * tol, max_iter=max_iter, stall_tol=tol)
    trace.meta.update({"k": k, "contraction_factor": factor, "inner_tol": inner_tol})
    if trace.status in (DIVERGED, STALLED):
        raise NotContractive(
            f"outer iteration {trace.status} after {len(trace.residual_sup)} steps "
            f"(last residual {trace.residual_sup[-1]:.3e}); strong accretivity with k={k:g} fails on this trajectory",
            trace=trace,
        )
    x_star = trace.solution
    residual = sup_seminorm(norm, T(x_star), W)
    return ZeroSolveResult(x_star, residual, len(trace.residual_sup), factor, trace, float(k), float(tol))


def solve_range(T: Operator, p, k: float, x0, norm: TwoNorm, W: WitnessSet,
                tol: float = 1e-8, max_iter: int = 10_000, inner_tol: float = 1e-12,
                max_inner_iters: int = 1000, strategy: str = AUTO) -> ZeroSolveResult:
    """Solve ``T(x) = p`` as the zero of the shifted operator ``T - p``.

    The shift cancels in every difference, so ``T - p`` is strong
    accretive with the same ``k``.
    """
    p = as_vector(p, T.dim)
    shifted = T - p
    res = solve_zero(shifted, k, x0, norm, W, tol, max_iter, inner_tol, max_inner_iters, strategy)
    residual = sup_seminorm(norm, T(res.solution) - p, W)
    return ZeroSolveResult(res.solution, residual, res.outer_iterations, res.contraction_factor,
                           res.trace, res.k_used, res.tol)
