"""Corrective transmission switching: candidate generation, evaluation, ranking.

Candidate lists come from four generators over the post-contingency network:

- ce    complete enumeration of every eligible branch (quality yardstick)
- cbce  the k branches topologically closest to the contingency element
- cbve  the k branches closest to the violated elements
- dm*   branches mined from training scenarios where they proved beneficial
        (dm1 harvests any improvement, dm2 > 5 percent, dm3 > 10 percent)

A candidate is eligible when it is in service, switchable, not a bridge of
the post-contingency network, and not the contingency element itself. Each
evaluation opens exactly one branch on a private copy, re-solves, and
compares violations element by element for the Pareto flag. Aggregate
ranking uses a scalarized violation total (MVA plus a configurable weight
times pu volts) because flow and voltage reductions must combine into one
figure; both raw aggregates are always carried alongside.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field

from .fdlf import PowerFlowOptions, PowerFlowSolution, _Numeric, solve_power_flow
from .model import GridError, Network, id_sort_key
from .rtca import (
    Contingency,
    GENERATOR,
    ScreeningOptions,
    ViolationReport,
    apply_contingency,
    assess_violations,
    default_contingency_set,
    screen_contingencies,
)
from .runner import execute_parallel
from .topology import (
    TopologyIndex,
    branch_distance,
    branch_distance_multi,
    build_topology_index,
)

CE = "ce"
CBCE = "cbce"
CBVE = "cbve"
DM_METHODS = {"dm1": 0.0, "dm2": 5.0, "dm3": 10.0}
METHODS = (CE, CBCE, CBVE, *DM_METHODS)

STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_ISLANDED = "islanded"

K_CLOSEST = 100  # list length for the closest-branches heuristics
TOP_N = 5  # switching proposals per contingency
VOLT_WEIGHT = 100.0  # MVA per pu when scalarizing mixed violations

PARETO_SLOP_MVA = 1e-6
PARETO_SLOP_PU = 1e-9


@dataclass(frozen=True)
class SwitchingCandidate:
    branch: str
    source_rank: int  # 0-based position in the generating list
    method: str


@dataclass(frozen=True)
class CandidateEvaluation:
    candidate: SwitchingCandidate
    delta_c1_flow: float  # MVA
    delta_c1_volt: float  # pu
    reduction_pct: float  # of the scalarized aggregate; -inf when disqualified
    pareto: bool
    status: str  # converged | diverged | islanded


@dataclass(frozen=True)
class EvalOptions:
    volt_weight: float = VOLT_WEIGHT
    pf: PowerFlowOptions = field(default_factory=PowerFlowOptions)


def scalarize(agg_flow: float, agg_volt: float, volt_weight: float = VOLT_WEIGHT) -> float:
    return agg_flow + volt_weight * agg_volt


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------

def eligible_branches(
    net_post: Network, contingency: Contingency, topo_post: TopologyIndex | None = None
) -> list[str]:
    """Branches that may be opened after this contingency, in id order."""
    topo_post = topo_post or build_topology_index(net_post)
    out = [
        br.id
        for br in net_post.branches.values()
        if br.in_service
        and br.switchable
        and br.id not in topo_post.bridges
        and br.id != contingency.element
    ]
    out.sort(key=id_sort_key)
    return out


def candidates_ce(
    net_post: Network, contingency: Contingency, topo_post: TopologyIndex | None = None
) -> list[SwitchingCandidate]:
    return [
        SwitchingCandidate(branch=bid, source_rank=i, method=CE)
        for i, bid in enumerate(eligible_branches(net_post, contingency, topo_post))
    ]


def candidates_cbce(
    net_post: Network,
    contingency: Contingency,
    k: int = K_CLOSEST,
    topo_post: TopologyIndex | None = None,
) -> list[SwitchingCandidate]:
    """The k eligible branches closest to the contingency element."""
    source_kind = "generator" if contingency.kind == GENERATOR else "branch"
    dist = branch_distance(net_post, source_kind, contingency.element)
    pool = eligible_branches(net_post, contingency, topo_post)
    ranked = sorted(
        (bid for bid in pool if bid in dist),
        key=lambda bid: (dist[bid], id_sort_key(bid)),
    )[: max(k, 0)]
    return [
        SwitchingCandidate(branch=bid, source_rank=i, method=CBCE)
        for i, bid in enumerate(ranked)
    ]


def candidates_cbve(
    net_post: Network,
    violation_report: ViolationReport,
    contingency: Contingency,
    k: int = K_CLOSEST,
    topo_post: TopologyIndex | None = None,
) -> list[SwitchingCandidate]:
    """The k eligible branches closest to any violated element.

    A violated branch anchors at both of its buses, a violated bus at
    itself; one multi-source sweep yields the element-wise minimum distance.
    """
    if not violation_report.records:
        raise GridError("empty violation report: nothing to anchor CBVE on")
    sources = []
    for rec in violation_report.records:
        if rec.kind == "thermal":
            sources.append(("branch", rec.element))
        else:
            sources.append(("bus", rec.element))
    dist = branch_distance_multi(net_post, sources)
    pool = eligible_branches(net_post, contingency, topo_post)
    ranked = sorted(
        (bid for bid in pool if bid in dist),
        key=lambda bid: (dist[bid], id_sort_key(bid)),
    )[: max(k, 0)]
    return [
        SwitchingCandidate(branch=bid, source_rank=i, method=CBVE)
        for i, bid in enumerate(ranked)
    ]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _pareto_improvement(
    base: ViolationReport, after: ViolationReport
) -> bool:
    """Element-wise check: nothing worsens, nothing new, something improves."""

    def slop(kind: str) -> float:
        return PARETO_SLOP_MVA if kind == "thermal" else PARETO_SLOP_PU

    before = {(r.element, r.kind): r.magnitude for r in base.records}
    now = {(r.element, r.kind): r.magnitude for r in after.records}
    for key, mag in now.items():
        if key not in before:
            if mag > slop(key[1]):
                return False
        elif mag > before[key] + slop(key[1]):
            return False
    return any(
        now.get(key, 0.0) < mag - slop(key[1]) for key, mag in before.items()
    )


def evaluate_candidate(
    net_post: Network,
    base_report: ViolationReport,
    candidate: SwitchingCandidate,
    warm: PowerFlowSolution | None = None,
    opts: EvalOptions | None = None,
    topo_post: TopologyIndex | None = None,
    numeric_post=None,
) -> CandidateEvaluation:
    """Open one branch on a private copy of the post-contingency network.

    Islanding (defensive re-check against the post-contingency bridge set)
    and divergence both disqualify: an unsolvable post-switching state is
    not an implementable action, so the ranking sees reduction -inf.
    numeric_post, when supplied, is the prebuilt solver model of net_post
    shared across the contingency's whole candidate batch.
    """
    if not base_report.converged:
        raise GridError("cannot evaluate switching against a diverged base report")
    opts = opts or EvalOptions()
    topo_post = topo_post or build_topology_index(net_post)
    if candidate.branch in topo_post.bridges:
        return CandidateEvaluation(
            candidate, float("inf"), float("inf"), float("-inf"), False, STATUS_ISLANDED
        )
    if numeric_post is None:
        numeric_post = _Numeric(net_post)
    numeric = numeric_post.with_branch_out(candidate.branch)
    switched = numeric.net
    sol = solve_power_flow(switched, opts.pf, warm_start=warm, _numeric=numeric)
    if not sol.converged:
        return CandidateEvaluation(
            candidate, float("inf"), float("inf"), float("-inf"), False, STATUS_DIVERGED
        )
    after = assess_violations(switched, sol)
    return score_switching(candidate, base_report, after, opts.volt_weight)


def score_switching(
    candidate: SwitchingCandidate,
    base_report: ViolationReport,
    after: ViolationReport,
    volt_weight: float = VOLT_WEIGHT,
) -> CandidateEvaluation:
    """Reduction and Pareto flags for a solved post-switching violation state."""
    d0 = scalarize(base_report.agg_flow, base_report.agg_volt, volt_weight)
    d1 = scalarize(after.agg_flow, after.agg_volt, volt_weight)
    reduction = (d0 - d1) / d0 * 100.0 if d0 > 0 else 0.0
    return CandidateEvaluation(
        candidate=candidate,
        delta_c1_flow=after.agg_flow,
        delta_c1_volt=after.agg_volt,
        reduction_pct=reduction,
        pareto=_pareto_improvement(base_report, after),
        status=STATUS_CONVERGED,
    )


def rank_and_select(
    evals: list[CandidateEvaluation], top_n: int = TOP_N
) -> list[CandidateEvaluation]:
    """Beneficial candidates, best first, at most top_n of them.

    Order: reduction desc, Pareto improvements first among ties, branch id.
    Disqualified or non-improving candidates never make the list.
    """
    keep = [
        e
        for e in evals
        if e.status == STATUS_CONVERGED and e.reduction_pct > 0.0
    ]
    keep.sort(
        key=lambda e: (-e.reduction_pct, not e.pareto, id_sort_key(e.candidate.branch))
    )
    return keep[:top_n]


# ---------------------------------------------------------------------------
# data-mining candidate lists
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DmModel:
    threshold_pct: float
    branches: tuple[str, ...]  # ranked by how often they proved beneficial
    training_meta: dict = field(default_factory=dict, hash=False, compare=False)


def beneficial_branches(
    evaluations: list[CandidateEvaluation], threshold_pct: float
) -> list[str]:
    """Branches whose reduction beat the harvest threshold, in id order."""
    kept = {
        e.candidate.branch
        for e in evaluations
        if e.status == STATUS_CONVERGED and e.reduction_pct > threshold_pct
    }
    return sorted(kept, key=id_sort_key)


def dm_train(
    training_scenarios: list[tuple[Network, list[Contingency] | None]],
    threshold_pct: float,
    screening: ScreeningOptions | None = None,
    eval_opts: EvalOptions | None = None,
    workers: int = 1,
    backend: str = "thread",
) -> DmModel:
    """Harvest beneficial switching actions from complete enumeration.

    For every critical contingency of every training scenario, all eligible
    branches are evaluated; those with reduction above threshold_pct are
    pooled. The combined list is ordered by descending frequency of
    appearance (ties by branch id) and becomes the candidate list offered
    for unseen cases.
    """
    if not training_scenarios:
        raise GridError("dm_train requires at least one training scenario")
    screening = screening or ScreeningOptions()
    eval_opts = eval_opts or EvalOptions()
    frequency: dict[str, int] = {}
    criticals_seen = 0
    for net, contingencies in training_scenarios:
        conts = contingencies if contingencies is not None else default_contingency_set(net)
        criticals = screen_contingencies(net, conts, screening, workers=workers, backend=backend)
        for crit in criticals:
            if not crit.report.converged:
                continue
            criticals_seen += 1
            net_post = apply_contingency(net, crit.contingency)
            topo_post = build_topology_index(net_post)
            numeric_post = _Numeric(net_post)
            cands = candidates_ce(net_post, crit.contingency, topo_post)
            tasks = [
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
            ]
            results, _ = execute_parallel(tasks, workers=workers, backend=backend)
            for res in results:
                if isinstance(res, Exception):
                    raise res
            for bid in beneficial_branches(results, threshold_pct):
                frequency[bid] = frequency.get(bid, 0) + 1
    ranked = sorted(frequency, key=lambda bid: (-frequency[bid], id_sort_key(bid)))
    return DmModel(
        threshold_pct=threshold_pct,
        branches=tuple(ranked),
        training_meta={
            "scenarios": len(training_scenarios),
            "critical_contingencies": criticals_seen,
            "harvested": len(ranked),
        },
    )


def dm_candidates(
    model: DmModel,
    net_post: Network,
    contingency: Contingency,
    method: str = "dm1",
    topo_post: TopologyIndex | None = None,
) -> list[SwitchingCandidate]:
    """Model branches filtered to current eligibility, training order kept."""
    pool = set(eligible_branches(net_post, contingency, topo_post))
    out = []
    for bid in model.branches:
        if bid in pool:
            out.append(SwitchingCandidate(branch=bid, source_rank=len(out), method=method))
    return out


def save_dm_model(model: DmModel, path: str) -> None:
    payload = {
        "threshold_pct": model.threshold_pct,
        "branches": list(model.branches),
        "training_meta": model.training_meta,
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_dm_model(path: str) -> DmModel:
    with open(path) as f:
        payload = json.load(f)
    return DmModel(
        threshold_pct=payload["threshold_pct"],
        branches=tuple(payload["branches"]),
        training_meta=payload.get("training_meta", {}),
    )


# ---------------------------------------------------------------------------
# scan-level metrics
# ---------------------------------------------------------------------------

def metric_violation_reduction(pairs: list[tuple[float, float]]) -> float:
    """Average percent reduction over critical contingencies.

    pairs holds (delta_c0, delta_c1) per critical contingency, with
    delta_c1 = delta_c0 for contingencies where nothing helped.
    """
    if not pairs:
        raise GridError("no critical contingencies: reduction metric undefined")
    total = 0.0
    for d0, d1 in pairs:
        if d0 <= 0:
            raise GridError("delta_c0 must be positive")
        total += (d0 - d1) / d0 * 100.0
    return total / len(pairs)


def metric_depth(positions: list[int]) -> float:
    """Average 1-based list position of the chosen beneficial action."""
    if not positions:
        raise GridError("no beneficial solutions: depth metric undefined")
    return sum(positions) / len(positions)
