"""Dispatch an :class:`ExperimentConfig` to the library and collect a report.

Exit codes: 0 success, 1 usage or config error, 2 property violation or
solver non-convergence.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..errors import AccretiveError
from ..operators import (
    check_accretive,
    check_contraction,
    check_expansive,
    check_m_accretive,
    check_nonexpansive,
    check_strong_accretive,
    estimate_strong_accretive_k,
    K_SAFETY,
)
from ..solvers import (
    ResolventConfig,
    picard_solve,
    resolvent,
    solve_range,
    solve_zero,
    verify_resolvent_convergence,
    yosida,
)
from ..space import check_axioms, sup_seminorm
from .config import ExperimentConfig
from .trace import emit_trace

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "ACCRETIVE_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


@dataclass(eq=False)
class RunReport:
    config: dict
    task: str
    status: str
    exit_code: int
    outcome: dict
    trace_path: str | None
    seed: int
    version: str = __version__
    duration: float = 0.0
    witness: dict | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "config": self.config,
            "task": self.task,
            "status": self.status,
            "exit_code": self.exit_code,
            "outcome": _jsonable(self.outcome),
            "trace_path": self.trace_path,
            "seed": self.seed,
            "version": self.version,
            "witness": _jsonable(self.witness),
        }
        if include_timing:
            d["duration_seconds"] = self.duration
        return d

    def to_json(self, include_timing: bool = False) -> str:
        # wall-clock time is excluded by default so reports are byte-identical
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2) + "\n"


def _trace_destination(cfg: ExperimentConfig, out: str | None) -> str:
    if out:
        return out
    if cfg.trace_path:
        return cfg.trace_path
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), f"{cfg.task}.csv")


def _resolve_k_contraction(cfg, k):
    """``(k, source, report)``; ``k`` is None when the samples rule out a
    contraction constant below 1."""
    if k != "auto":
        return k, "supplied", None
    rep, k_hat = check_contraction(cfg.operator, cfg.norm, cfg.plan)
    k = k_hat * K_SAFETY
    return (k if k < 1.0 else None), "estimated", rep


def _resolve_k_strong(cfg, k, op=None):
    if k != "auto":
        return k, "supplied"
    return estimate_strong_accretive_k(op or cfg.operator, cfg.norm, cfg.plan), "estimated"


def _property_task(cfg: ExperimentConfig):
    p = cfg.params
    prop = p["property"]
    T, norm, plan = cfg.operator, cfg.norm, cfg.plan
    if prop == "m_accretive":
        rr = check_m_accretive(T, norm, p["lambda"], [np.array(t) for t in p["targets"]],
                               inner_tol=cfg.inner_tol, witness=cfg.witness,
                               max_inner_iters=cfg.max_inner_iters, strategy=cfg.strategy)
        outcome = rr.to_dict()
        if rr.supported:
            return outcome, None, True
        bad = next((i for i, r in enumerate(rr.residuals) if r is None or r > rr.inner_tol), 0)
        witness = {"target_index": bad, "target": p["targets"][bad], "residual": rr.residuals[bad],
                   "failure": rr.failures.get(bad)}
        return outcome, witness, False
    extra = {}
    if prop == "accretive":
        rep = check_accretive(T, norm, plan)
    elif prop == "strong_accretive":
        k, source = _resolve_k_strong(cfg, p["k"])
        rep = check_strong_accretive(T, norm, k, plan, lambdas=p.get("lambdas"))
        extra = {"k": k, "k_source": source}
    elif prop == "nonexpansive":
        rep = check_nonexpansive(T, norm, plan)
    elif prop == "expansive":
        rep = check_expansive(T, norm, plan)
    else:
        rep, k_hat = check_contraction(T, norm, plan)
        extra = {"k_hat": k_hat, "k_source": "estimated"}
    outcome = rep.to_dict()
    outcome.update(extra)
    outcome["summary"] = rep.summary()
    return outcome, (None if rep.holds_on_samples else outcome["witness"]), rep.holds_on_samples


def _trace_outcome(trace):
    return {
        "status": trace.status,
        "iterations": len(trace.residual_sup),
        "solution": trace.solution,
        "final_residual": trace.residual_sup[-1] if trace.residual_sup else None,
        "k_used": trace.k_used,
        "r0": trace.r0,
        "error_bound": trace.error_bound,
    }


def execute(cfg: ExperimentConfig, out: str | None = None):
    """Run the task; returns ``(status, outcome, witness, trace)``."""
    T, norm, W, p = cfg.operator, cfg.norm, cfg.witness, cfg.params
    task = cfg.task
    if task == "check_axioms":
        rep = check_axioms(norm, cfg.plan)
        outcome = {
            "summary": rep.summary(),
            "passed": rep.passed,
            "axioms": {
                name: {"worst_margin": r.worst_margin, "passed": r.passed}
                for name, r in rep.results.items()
            },
            "samples": rep.sample_count,
        }
        witness = None
        if not rep.passed:
            name, r = next((n, r) for n, r in rep.results.items() if not r.passed)
            witness = {"axiom": name, "tuple": list(r.witness), "margin": r.worst_margin}
        return ("ok" if rep.passed else "violation"), outcome, witness, None

    if task == "check_property":
        outcome, witness, ok = _property_task(cfg)
        return ("ok" if ok else "violation"), outcome, witness, None

    if task in ("resolve", "yosida"):
        rc = ResolventConfig(p["n"], cfg.inner_tol, cfg.max_inner_iters, cfg.strategy)
        x = np.array(p["x"])
        u = resolvent(T, rc, x, norm, W)
        outcome = {
            "n": p["n"],
            "resolvent": u,
            "residual": sup_seminorm(norm, u + T(u) / p["n"] - x, W),
        }
        if task == "yosida":
            tn = yosida(T, rc, x, norm, W)
            outcome["yosida"] = tn
            outcome["identity_gap"] = sup_seminorm(norm, tn - T(u), W)
        return "ok", outcome, None, None

    if task == "resolvent_rate":
        rc = ResolventConfig(1, cfg.inner_tol, cfg.max_inner_iters, cfg.strategy)
        rep = verify_resolvent_convergence(T, np.array(p["x"]), p["schedule"], rc, norm, W)
        outcome = {
            "M": rep.M,
            "ns": list(rep.ns),
            "errors": list(rep.errors),
            "scaled": list(rep.scaled),
            "rate_ok": rep.rate_ok,
            "monotone_ok": rep.monotone_ok,
        }
        witness = None
        if not rep.passed:
            i = next(i for i, (e, b) in enumerate(zip(rep.errors, rep.bounds)) if e > b) \
                if not rep.rate_ok else 0
            witness = {"n": rep.ns[i], "error": rep.errors[i], "bound": rep.bounds[i]}
        return ("ok" if rep.passed else "violation"), outcome, witness, rep

    if task == "fixed_point":
        k, source, crep = _resolve_k_contraction(cfg, p["k"])
        if k is None:
            outcome = crep.to_dict()
            outcome["summary"] = f"estimated k = {crep.note[6:]} x {K_SAFETY} is not below 1"
            outcome["k_source"] = source
            return "violation", outcome, outcome["witness"], None
        trace = picard_solve(T, np.array(p["x0"]), norm, W, k, tol=cfg.tol, max_iter=cfg.max_iter)
        trace.meta.update({"seed": cfg.seed, "k_source": source})
        outcome = _trace_outcome(trace)
        outcome["k_source"] = source
        ok = trace.converged
        witness = None if ok else {"final_residual": outcome["final_residual"], "status": trace.status}
        return ("ok" if ok else "not_converged"), outcome, witness, trace

    if task in ("solve_zero", "solve_range"):
        target = np.array(p["p"]) if task == "solve_range" else None
        k_op = T - target if task == "solve_range" else T
        k, source = _resolve_k_strong(cfg, p["k"], k_op)
        kwargs = dict(tol=cfg.tol, max_iter=cfg.max_iter, inner_tol=cfg.inner_tol,
                      max_inner_iters=cfg.max_inner_iters, strategy=cfg.strategy)
        if task == "solve_zero":
            res = solve_zero(T, k, np.array(p["x0"]), norm, W, **kwargs)
        else:
            res = solve_range(T, target, k, np.array(p["x0"]), norm, W, **kwargs)
        res.trace.meta.update({"seed": cfg.seed, "k_source": source})
        outcome = _trace_outcome(res.trace)
        outcome.update({
            "residual": res.residual,
            "contraction_factor": res.contraction_factor,
            "k": k,
            "k_source": source,
            "max_ratio": float(np.nanmax(res.trace.ratios())) if len(res.trace.residual_sup) > 1 else None,
        })
        ok = res.converged
        witness = None if ok else {"final_residual": res.residual, "status": res.trace.status}
        return ("ok" if ok else "not_converged"), outcome, witness, res.trace

    raise ValueError(f"unknown task {task!r}")


def run(cfg: ExperimentConfig, out: str | None = None) -> RunReport:
    """Execute ``cfg``, write its trace file (if the task produces one) and
    return the report."""
    start = time.perf_counter()
    trace_path = None
    try:
        status, outcome, witness, trace = execute(cfg, out)
    except AccretiveError as exc:
        status = "failed"
        outcome = {"error": type(exc).__name__, "message": str(exc)}
        witness = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("point", "residual"):
            if getattr(exc, attr, None) is not None:
                witness[attr] = _jsonable(getattr(exc, attr))
        trace = getattr(exc, "trace", None)
        if trace is not None and trace.residual_sup:
            witness["final_residual"] = trace.residual_sup[-1]
    if trace is not None:
        trace_path = emit_trace(trace, _trace_destination(cfg, out))
    code = EXIT_OK if status == "ok" else EXIT_FAILED
    duration = time.perf_counter() - start
    logger.info("%s finished with status %s in %.3fs", cfg.task, status, duration)
    return RunReport(
        config=cfg.echo(),
        task=cfg.task,
        status=status,
        exit_code=code,
        outcome=outcome,
        trace_path=trace_path,
        seed=cfg.seed,
        duration=duration,
        witness=witness,
    )
