"""CSV trace files with ``#``-prefixed metadata comments.

Numbers are written with 17 significant digits, which round-trips every
float64 exactly, so :func:`read_trace` recovers the values that were written.
"""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from ..solvers import ConvergenceReport, PicardTrace

PICARD_KIND = "picard"
RATE_KIND = "resolvent_rate"


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(fmt(x) for x in np.asarray(v).ravel().tolist())
    return str(v)


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}: {fmt(v)}" for k, v in meta.items()]


def render_trace(trace) -> str:
    """Render a :class:`PicardTrace` or :class:`ConvergenceReport` as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(trace, PicardTrace):
        dim = len(trace.iterates[0]) if trace.iterates else 0
        meta = {
            "kind": PICARD_KIND,
            "status": trace.status,
            "k": trace.k_used,
            "r0": trace.r0,
            "tol": trace.tol,
            "dim": dim,
        }
        meta.update({k: trace.meta[k] for k in sorted(trace.meta)})
        buf.write("\n".join(_meta_lines(meta)) + "\n")
        w.writerow(["iter"] + [f"x{i}" for i in range(dim)] + ["residual_sup", "apriori_bound"])
        n_steps = len(trace.residual_sup)
        for n, x in enumerate(trace.iterates):
            res = trace.residual_sup[n] if n < n_steps else None
            bound = trace.apriori_bound[n] if n < n_steps else None
            w.writerow([n] + [fmt(v) for v in np.asarray(x).tolist()] + [fmt(res), fmt(bound)])
    elif isinstance(trace, ConvergenceReport):
        meta = {
            "kind": RATE_KIND,
            "x": trace.x,
            "M": trace.M,
            "inner_tol": trace.inner_tol,
            "mono_tol": trace.mono_tol,
            "rate_ok": trace.rate_ok,
            "monotone_ok": trace.monotone_ok,
        }
        buf.write("\n".join(_meta_lines(meta)) + "\n")
        w.writerow(["n", "error", "scaled_error", "bound"])
        for n, e, s, b in zip(trace.ns, trace.errors, trace.scaled, trace.bounds):
            w.writerow([n, fmt(e), fmt(s), fmt(b)])
    else:
        raise TypeError(f"cannot emit a trace for {type(trace).__name__}")
    return buf.getvalue()


def emit_trace(trace, path) -> str:
    """Write ``trace`` to ``path`` (parent directories are created)."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(render_trace(trace))
    return path


def _meta_value(s: str):
    try:
        return float(s)
    except ValueError:
        return s


def read_trace(path):
    """Parse a file written by :func:`emit_trace` back into its structure."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta: dict[str, str] = {}
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    kind = meta.get("kind")
    if kind == PICARD_KIND:
        dim = int(meta["dim"])
        iterates = [np.array([float(v) for v in r[1:1 + dim]]) for r in data]
        residuals = [float(r[1 + dim]) for r in data if r[1 + dim] != ""]
        bounds = [float(r[2 + dim]) for r in data if r[2 + dim] != ""]
        extra = {k: _meta_value(v) for k, v in meta.items()
                 if k not in ("kind", "status", "k", "r0", "tol", "dim")}
        return PicardTrace(iterates, residuals, bounds, float(meta["k"]), meta["status"],
                           float(meta["tol"]), extra)
    if kind == RATE_KIND:
        x = np.array([float(v) for v in meta["x"].split(",")])
        return ConvergenceReport(
            x=x,
            ns=tuple(int(r[0]) for r in data),
            errors=tuple(float(r[1]) for r in data),
            M=float(meta["M"]),
            inner_tol=float(meta["inner_tol"]),
            mono_tol=float(meta["mono_tol"]),
        )
    raise ValueError(f"{path}: unknown trace kind {kind!r}")
