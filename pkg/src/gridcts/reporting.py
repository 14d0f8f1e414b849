"""Report dictionaries and canonical JSON.

Reports must be byte-identical for identical inputs, so serialization uses
sorted keys and a fixed layout, refuses NaN/inf (diverged aggregates become
nulls plus a flag), and keeps the run-dependent timing in its own section
that comparisons strip.
"""

from __future__ import annotations

import json
import math

from .runner import RunTiming
from .scan import CtsEntry, CtsReport


def _finite(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _candidate_dict(evaluation) -> dict:
    return {
        "branch": evaluation.candidate.branch,
        "reduction_pct": _finite(evaluation.reduction_pct),
        "pareto": evaluation.pareto,
        "status": evaluation.status,
        "depth": evaluation.candidate.source_rank + 1,
    }


def _entry_dict(entry: CtsEntry) -> dict:
    report = entry.critical.report
    c = entry.critical.contingency
    return {
        "contingency": {"id": c.id, "kind": c.kind, "element": c.element},
        "delta_c0": {
            "flow_mva": _finite(report.agg_flow),
            "volt_pu": _finite(report.agg_volt),
        },
        "diverged": not report.converged,
        "violations": [
            {
                "element": r.element,
                "kind": r.kind,
                "magnitude": r.magnitude,
                "limit": r.limit,
            }
            for r in report.records
        ],
        "candidates": [_candidate_dict(e) for e in entry.top],
        "no_cts_found": entry.no_cts_found,
    }


def timing_dict(timing: RunTiming | None) -> dict | None:
    if timing is None:
        return None
    efficiency = None
    if timing.t_1 is not None and timing.t_n > 0:
        efficiency = timing.t_1 / (timing.n * timing.t_n)
    return {
        "n": timing.n,
        "t1_s": timing.t_1,
        "tn_s": timing.t_n,
        "efficiency": efficiency,
    }


def report_dict(report: CtsReport) -> dict:
    return {
        "base": {
            "converged": report.base_converged,
            "losses_mw": _finite(report.base_losses_mw),
        },
        "method": report.method,
        "critical": [_entry_dict(e) for e in report.entries],
        "metrics": {
            "p_cts_pct": _finite(report.p_cts_pct),
            "d_cts": _finite(report.d_cts),
            "n_c": report.n_c,
            "m_c": report.m_c,
        },
        "timing": timing_dict(report.timing),
    }


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def strip_timing(payload: dict) -> dict:
    """Copy of a report dict with the run-dependent section removed."""
    out = dict(payload)
    out.pop("timing", None)
    return out


def summary_lines(report: CtsReport) -> list[str]:
    """Human-readable scan summary: one line per critical contingency."""
    lines = []
    lines.append(
        f"base case: converged={report.base_converged}"
        + (f" losses={report.base_losses_mw:.2f} MW" if report.base_losses_mw is not None else "")
    )
    lines.append(
        f"critical contingencies: {report.n_c} (beneficial CTS for {report.m_c}), method={report.method}"
    )
    if report.entries:
        header = f"{'contingency':<14} {'kind':<10} {'d_flow MVA':>10} {'d_volt pu':>10}  best action"
        lines.append(header)
        lines.append("-" * len(header))
    for entry in report.entries:
        c = entry.critical.contingency
        r = entry.critical.report
        if not r.converged:
            state = "DIVERGED"
            flow = volt = "-"
        else:
            flow = f"{r.agg_flow:.1f}"
            volt = f"{r.agg_volt:.4f}"
            if entry.top:
                best = entry.top[0]
                state = (
                    f"open {best.candidate.branch}: -{best.reduction_pct:.1f}%"
                    f"{' [pareto]' if best.pareto else ''}"
                )
            else:
                state = "no CTS found"
        lines.append(f"{c.id:<14} {c.kind:<10} {flow:>10} {volt:>10}  {state}")
    if report.p_cts_pct is not None:
        lines.append(f"average violation reduction: {report.p_cts_pct:.2f}%")
    if report.d_cts is not None:
        lines.append(f"average depth of chosen action: {report.d_cts:.2f}")
    return lines
