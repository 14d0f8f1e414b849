"""N-1 contingency application, violation assessment, and screening.

Branch contingencies keep every generator at its pre-contingency dispatch;
the slack absorbs the loss change during the solve. Generator contingencies
spread the lost output over the remaining online units in proportion to
their available capacity (p_max - p). Contingencies on bridge branches are
excluded: their loss is an unavoidable island, not a solvable case.

A contingency is critical when its aggregate violations reach 0.005 pu
(voltage) or 5 MVA (flow), or when the post-contingency solve diverges.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .fdlf import PowerFlowOptions, PowerFlowSolution, solve_power_flow
from .model import (
    BridgeContingencyError,
    Generator,
    GridError,
    InsufficientCapacityError,
    Network,
    PQ,
    SLACK,
    UnknownElementError,
    id_sort_key,
)
from .runner import execute_parallel
from .topology import TopologyIndex, build_topology_index

BRANCH = "branch"
GENERATOR = "generator"

V_THRESHOLD_PU = 0.005
F_THRESHOLD_MVA = 5.0

V_LOW = "v_low"
V_HIGH = "v_high"
THERMAL = "thermal"

# aggregate used for diverged solves: worse than anything measurable
DIVERGED_AGGREGATE = float("inf")


@dataclass(frozen=True)
class Contingency:
    id: str
    kind: str  # branch | generator
    element: str


@dataclass(frozen=True)
class ViolationRecord:
    element: str  # bus id for voltage kinds, branch id for thermal
    kind: str  # v_low | v_high | thermal
    magnitude: float  # pu for voltage, MVA for thermal; always > 0
    limit: float


@dataclass(frozen=True)
class ViolationReport:
    records: tuple[ViolationRecord, ...]
    agg_flow: float  # MVA, sum of thermal magnitudes
    agg_volt: float  # pu, sum of voltage magnitudes
    converged: bool

    @property
    def is_clean(self) -> bool:
        return self.converged and not self.records


DIVERGED_REPORT = ViolationReport(
    records=(), agg_flow=DIVERGED_AGGREGATE, agg_volt=DIVERGED_AGGREGATE, converged=False
)


@dataclass(frozen=True)
class CriticalContingency:
    contingency: Contingency
    report: ViolationReport  # the Delta_c0 side of the switching metrics
    post_contingency_solution: PowerFlowSolution | None


@dataclass(frozen=True)
class ScreeningOptions:
    v_threshold: float = V_THRESHOLD_PU
    f_threshold: float = F_THRESHOLD_MVA
    pf: PowerFlowOptions = field(default_factory=PowerFlowOptions)


def apply_branch_contingency(
    net: Network, branch_id: str, topo: TopologyIndex | None = None
) -> Network:
    """Private network copy with the branch out of service.

    Dispatch is untouched; the slack picks up the loss change when the case
    is solved. Bridge branches are rejected: contingency lists must already
    have filtered them.
    """
    br = net.branch(branch_id)
    if not br.in_service:
        raise UnknownElementError(f"branch {branch_id} is not in service")
    topo = topo or build_topology_index(net)
    if branch_id in topo.bridges:
        raise BridgeContingencyError(
            f"branch {branch_id} is radial/bridge: contingency excluded"
        )
    return net.with_branch(branch_id, in_service=False)


def apply_generator_contingency(net: Network, gen_id: str) -> Network:
    """Private network copy with the generator out and its MW redispatched.

    Every remaining online unit g gains lost_p * headroom_g / total_headroom
    where headroom is p_max - p. Raises InsufficientCapacityError when the
    fleet cannot absorb the loss. If the outage strips the slack bus of its
    last unit, the slack role moves to the online-generator bus with the
    largest headroom (ties by bus id) so the case stays solvable.
    """
    gen = net.generator(gen_id)
    if not gen.in_service:
        raise UnknownElementError(f"generator {gen_id} is not in service")
    remaining = [g for g in net.in_service_generators() if g.id != gen_id]
    lost = gen.p
    updates: dict[str, Generator] = {gen_id: replace(gen, in_service=False)}

    if lost != 0.0:
        headroom = {g.id: g.p_max - g.p for g in remaining}
        total = sum(headroom.values())
        if lost > total + 1e-9:
            raise InsufficientCapacityError(
                f"lost {lost:.3f} MW exceeds remaining available capacity {total:.3f} MW"
            )
        for g in remaining:
            updates[g.id] = replace(g, p=g.p + lost * headroom[g.id] / total)

    out = net.with_generators(updates)

    slack_ids = {b.id for b in net.slack_buses()}
    if gen.bus in slack_ids and not any(g.bus == gen.bus for g in out.in_service_generators()):
        by_bus: dict[str, float] = {}
        for g in out.in_service_generators():
            by_bus[g.bus] = by_bus.get(g.bus, 0.0) + (g.p_max - g.p)
        if not by_bus:
            raise InsufficientCapacityError("no online generators left to provide a slack")
        best = max(by_bus.values())
        new_slack = sorted((b for b, h in by_bus.items() if h == best), key=id_sort_key)[0]
        out = out.with_buses({
            gen.bus: replace(out.bus(gen.bus), kind=PQ),
            new_slack: replace(out.bus(new_slack), kind=SLACK),
        })
    return out


def apply_contingency(net: Network, c: Contingency, topo: TopologyIndex | None = None) -> Network:
    if c.kind == BRANCH:
        return apply_branch_contingency(net, c.element, topo)
    if c.kind == GENERATOR:
        return apply_generator_contingency(net, c.element)
    raise UnknownElementError(f"unknown contingency kind {c.kind!r}")


def assess_violations(net: Network, sol: PowerFlowSolution) -> ViolationReport:
    """Per-element limit checks and their two system-wide aggregates.

    Thermal checks use the larger end flow of each monitored branch
    (rating > 0). A non-converged solution yields the diverged sentinel
    report, which every ranking treats as worst possible.
    """
    if not sol.converged:
        return DIVERGED_REPORT
    records: list[ViolationRecord] = []
    agg_volt = 0.0
    agg_flow = 0.0

    n = len(sol.bus_ids)
    vmin = np.fromiter((net.buses[b].v_min for b in sol.bus_ids), float, n)
    vmax = np.fromiter((net.buses[b].v_max for b in sol.bus_ids), float, n)
    vm = sol.vm
    live = ~np.isnan(vm)  # de-energized island buses have no meaningful voltage
    for i in np.flatnonzero(live & (vm < vmin)):
        records.append(ViolationRecord(sol.bus_ids[i], V_LOW, float(vmin[i] - vm[i]), float(vmin[i])))
        agg_volt += vmin[i] - vm[i]
    for i in np.flatnonzero(live & (vm > vmax)):
        records.append(ViolationRecord(sol.bus_ids[i], V_HIGH, float(vm[i] - vmax[i]), float(vmax[i])))
        agg_volt += vm[i] - vmax[i]

    nb = len(sol.branch_ids)
    rating = np.fromiter((net.branches[b].rating for b in sol.branch_ids), float, nb)
    loading = np.maximum(np.abs(sol.s_from), np.abs(sol.s_to))
    for i in np.flatnonzero((rating > 0.0) & (loading > rating)):
        records.append(
            ViolationRecord(sol.branch_ids[i], THERMAL, float(loading[i] - rating[i]), float(rating[i]))
        )
        agg_flow += loading[i] - rating[i]
    return ViolationReport(
        records=tuple(records), agg_flow=float(agg_flow), agg_volt=float(agg_volt), converged=True
    )


def default_contingency_set(net: Network, topo: TopologyIndex | None = None) -> list[Contingency]:
    """All N-1 events: every non-bridge in-service branch, every online unit."""
    topo = topo or build_topology_index(net)
    out = [
        Contingency(id=br.id, kind=BRANCH, element=br.id)
        for br in net.in_service_branches()
        if br.id not in topo.bridges
    ]
    out.extend(
        Contingency(id=g.id, kind=GENERATOR, element=g.id)
        for g in net.in_service_generators()
    )
    return out


def exceeds_thresholds(report: ViolationReport, opts: ScreeningOptions) -> bool:
    """Screening rule: keep a contingency when either aggregate reaches its
    threshold, or when the solve diverged (always worth the operator's eye)."""
    if not report.converged:
        return True
    return report.agg_volt >= opts.v_threshold or report.agg_flow >= opts.f_threshold


@dataclass(frozen=True)
class ContingencyOutcome:
    contingency: Contingency
    report: ViolationReport
    solution: PowerFlowSolution | None


def _scan_one(
    net: Network,
    base_sol: PowerFlowSolution,
    opts: ScreeningOptions,
    topo: TopologyIndex,
    c: Contingency,
) -> ContingencyOutcome:
    try:
        post = apply_contingency(net, c, topo)
    except InsufficientCapacityError:
        return ContingencyOutcome(c, DIVERGED_REPORT, None)
    warm = base_sol if list(post.buses) == list(net.buses) else None
    sol = solve_power_flow(post, opts.pf, warm_start=warm)
    return ContingencyOutcome(c, assess_violations(post, sol), sol)


def _severity_order(report: ViolationReport, contingency: Contingency) -> tuple:
    return (-report.agg_flow, -report.agg_volt, id_sort_key(contingency.id))


def scan_contingencies(
    net: Network,
    contingencies: list[Contingency],
    opts: ScreeningOptions | None = None,
    base_solution: PowerFlowSolution | None = None,
    workers: int = 1,
    backend: str = "thread",
) -> list[ContingencyOutcome]:
    """Solve and assess every contingency; outcomes ordered by severity.

    Ordering is (agg_flow desc, agg_volt desc, id), identical for any
    worker count. Raises GridError if the base case itself does not
    converge.
    """
    opts = opts or ScreeningOptions()
    base = base_solution or solve_power_flow(net, opts.pf)
    if not base.converged:
        raise GridError("base case power flow diverged; cannot screen contingencies")
    topo = build_topology_index(net)
    tasks = [functools.partial(_scan_one, net, base, opts, topo, c) for c in contingencies]
    outcomes, _ = execute_parallel(tasks, workers=workers, backend=backend)
    checked: list[ContingencyOutcome] = []
    for out in outcomes:
        if isinstance(out, Exception):
            raise out
        checked.append(out)
    checked.sort(key=lambda o: _severity_order(o.report, o.contingency))
    return checked


def screen_contingencies(
    net: Network,
    contingencies: list[Contingency],
    opts: ScreeningOptions | None = None,
    base_solution: PowerFlowSolution | None = None,
    workers: int = 1,
    backend: str = "thread",
) -> list[CriticalContingency]:
    """The critical subset of scan_contingencies, same severity ordering."""
    opts = opts or ScreeningOptions()
    outcomes = scan_contingencies(
        net, contingencies, opts, base_solution, workers=workers, backend=backend
    )
    return [
        CriticalContingency(o.contingency, o.report, o.solution)
        for o in outcomes
        if exceeds_thresholds(o.report, opts)
    ]
