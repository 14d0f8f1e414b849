"""Full pipeline: base solve, screening, switching evaluation, metrics.

One run_scan call produces everything the CLI report and the HTTP service
expose. Candidate evaluations for all critical contingencies are flattened
into a single parallel batch; results are re-grouped and ranked
sequentially, so the report is identical for any worker count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .cts import (
    CandidateEvaluation,
    CBCE,
    CBVE,
    CE,
    DM_METHODS,
    DmModel,
    EvalOptions,
    K_CLOSEST,
    METHODS,
    TOP_N,
    VOLT_WEIGHT,
    candidates_cbce,
    candidates_cbve,
    candidates_ce,
    dm_candidates,
    evaluate_candidate,
    metric_depth,
    metric_violation_reduction,
    rank_and_select,
    scalarize,
)
from .fdlf import PowerFlowOptions, _Numeric, solve_power_flow
from .model import GridError, Network
from .rtca import (
    Contingency,
    CriticalContingency,
    ScreeningOptions,
    default_contingency_set,
    screen_contingencies,
)
from .runner import RunTiming, execute_parallel
from .topology import build_topology_index

import functools


@dataclass
class ScanConfig:
    method: str = CBCE
    top_n: int = TOP_N
    v_threshold: float = 0.005  # pu
    f_threshold: float = 5.0  # MVA
    k: int = K_CLOSEST
    volt_weight: float = VOLT_WEIGHT
    workers: int = 1
    backend: str = "thread"
    pf: PowerFlowOptions = field(default_factory=PowerFlowOptions)
    dm_model: DmModel | None = None
    contingencies: list[Contingency] | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise GridError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in DM_METHODS and self.dm_model is None:
            raise GridError(f"method {self.method} requires a trained DM model")
        if self.top_n < 1 or self.workers < 1:
            raise GridError("top_n and workers must be >= 1")
        if self.v_threshold <= 0 or self.f_threshold <= 0:
            raise GridError("screening thresholds must be positive")


@dataclass
class CtsEntry:
    critical: CriticalContingency
    evaluations: list[CandidateEvaluation]
    top: list[CandidateEvaluation]

    @property
    def no_cts_found(self) -> bool:
        return not self.top

    @property
    def depth(self) -> int | None:
        """1-based position of the selected action in its generating list."""
        if not self.top:
            return None
        return self.top[0].candidate.source_rank + 1


@dataclass
class CtsReport:
    method: str
    base_converged: bool
    base_losses_mw: float | None
    entries: list[CtsEntry]
    n_c: int
    m_c: int
    p_cts_pct: float | None
    d_cts: float | None
    timing: RunTiming | None


def method_candidates(cfg: ScanConfig, net_post: Network, crit: CriticalContingency, topo_post):
    if cfg.method == CE:
        return candidates_ce(net_post, crit.contingency, topo_post)
    if cfg.method == CBCE:
        return candidates_cbce(net_post, crit.contingency, cfg.k, topo_post)
    if cfg.method == CBVE:
        return candidates_cbve(net_post, crit.report, crit.contingency, cfg.k, topo_post)
    if cfg.method in DM_METHODS:
        return dm_candidates(cfg.dm_model, net_post, crit.contingency, cfg.method, topo_post)
    raise GridError(f"unknown method {cfg.method!r}")


def run_scan(net: Network, cfg: ScanConfig | None = None) -> CtsReport:
    """Screen all contingencies, then rank switching actions for the criticals."""
    cfg = cfg or ScanConfig()
    cfg.validate()
    start = time.perf_counter()

    base = solve_power_flow(net, cfg.pf)
    if not base.converged:
        return CtsReport(
            method=cfg.method,
            base_converged=False,
            base_losses_mw=None,
            entries=[],
            n_c=0,
            m_c=0,
            p_cts_pct=None,
            d_cts=None,
            timing=None,
        )

    contingencies = cfg.contingencies if cfg.contingencies is not None else default_contingency_set(net)
    screening = ScreeningOptions(
        v_threshold=cfg.v_threshold, f_threshold=cfg.f_threshold, pf=cfg.pf
    )
    criticals = screen_contingencies(
        net, contingencies, screening, base_solution=base,
        workers=cfg.workers, backend=cfg.backend,
    )

    eval_opts = EvalOptions(volt_weight=cfg.volt_weight, pf=cfg.pf)
    tasks = []
    slots: list[tuple[CriticalContingency, int, int]] = []  # (critical, first_task, count)
    for crit in criticals:
        if not crit.report.converged:
            slots.append((crit, len(tasks), 0))
            continue
        net_post = apply_post(net, crit.contingency)
        topo_post = build_topology_index(net_post)
        numeric_post = _Numeric(net_post)
        cands = method_candidates(cfg, net_post, crit, topo_post)
        first = len(tasks)
        tasks.extend(
            functools.partial(
                evaluate_candidate,
                net_post,
                crit.report,
                cand,
                crit.post_contingency_solution,
                eval_opts,
                topo_post,
                numeric_post,
            )
            for cand in cands
        )
        slots.append((crit, first, len(cands)))

    results, _ = execute_parallel(tasks, workers=cfg.workers, backend=cfg.backend)
    for res in results:
        if isinstance(res, Exception):
            raise res

    entries: list[CtsEntry] = []
    pairs: list[tuple[float, float]] = []
    depths: list[int] = []
    for crit, first, count in slots:
        evals = list(results[first : first + count])
        top = rank_and_select(evals, cfg.top_n)
        entries.append(CtsEntry(critical=crit, evaluations=evals, top=top))
        if not crit.report.converged:
            pairs.append((1.0, 1.0))  # diverged: no quantifiable reduction
            continue
        d0 = scalarize(crit.report.agg_flow, crit.report.agg_volt, cfg.volt_weight)
        if top:
            best = top[0]
            d1 = scalarize(best.delta_c1_flow, best.delta_c1_volt, cfg.volt_weight)
            depths.append(best.candidate.source_rank + 1)
        else:
            d1 = d0
        pairs.append((d0, d1))

    elapsed = time.perf_counter() - start
    timing = RunTiming(
        n=cfg.workers,
        t_1=elapsed if cfg.workers == 1 else None,
        t_n=elapsed,
        task_count=len(contingencies) + len(tasks),
    )
    return CtsReport(
        method=cfg.method,
        base_converged=True,
        base_losses_mw=base.losses_mw,
        entries=entries,
        n_c=len(criticals),
        m_c=len(depths),
        p_cts_pct=metric_violation_reduction(pairs) if pairs else None,
        d_cts=metric_depth(depths) if depths else None,
        timing=timing,
    )


def apply_post(net: Network, contingency: Contingency) -> Network:
    from .rtca import apply_contingency

    return apply_contingency(net, contingency)
