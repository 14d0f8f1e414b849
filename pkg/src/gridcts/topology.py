"""Topology queries over the in-service network graph.

Buses are vertices, in-service branches are edges (parallel circuits are
distinct edges). Bridges — branches whose removal disconnects the graph —
stand in for "radial" elements: both contingency scans and switching
candidate lists exclude them because opening one always islands the system.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .model import Network, UnknownElementError, id_sort_key

BRANCH = "branch"
BUS = "bus"
GENERATOR = "generator"


@dataclass(frozen=True)
class TopologyIndex:
    """Immutable adjacency + bridge set for one network state."""

    adjacency: dict[str, tuple[tuple[str, str], ...]]  # bus -> ((branch_id, other_bus), ...)
    bridges: frozenset[str]


def _adjacency(net: Network) -> dict[str, list[tuple[str, str]]]:
    adj: dict[str, list[tuple[str, str]]] = {bus_id: [] for bus_id in net.buses}
    for br in net.branches.values():
        if not br.in_service:
            continue
        adj[br.from_bus].append((br.id, br.to_bus))
        adj[br.to_bus].append((br.id, br.from_bus))
    return adj


def build_topology_index(net: Network) -> TopologyIndex:
    adj = _adjacency(net)
    return TopologyIndex(
        adjacency={b: tuple(entries) for b, entries in adj.items()},
        bridges=frozenset(find_bridges(net)),
    )


def find_islands(net: Network) -> list[set[str]]:
    """Partition buses into connected components over in-service branches.

    Returned islands are ordered by their smallest bus id so the result is
    deterministic regardless of dict insertion order.
    """
    adj = _adjacency(net)
    seen: set[str] = set()
    islands: list[set[str]] = []
    for start in net.buses:
        if start in seen:
            continue
        component = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for _, v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    component.add(v)
                    queue.append(v)
        islands.append(component)
    islands.sort(key=lambda c: id_sort_key(min(c, key=id_sort_key)))
    return islands


def find_bridges(net: Network) -> set[str]:
    """Bridge branches of the in-service network (iterative Tarjan DFS).

    A branch is a bridge when removing it alone increases the island count.
    Parallel circuits between the same bus pair are never bridges: the DFS
    skips only the exact edge it entered through, so the twin circuit acts
    as a back edge.
    """
    adj = _adjacency(net)
    disc: dict[str, int] = {}
    low: dict[str, int] = {}
    bridges: set[str] = set()
    counter = 0

    for root in net.buses:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack: list[tuple[str, str | None, int]] = [(root, None, 0)]
        while stack:
            u, in_edge, ptr = stack[-1]
            advanced = False
            entries = adj[u]
            while ptr < len(entries):
                edge_id, v = entries[ptr]
                ptr += 1
                if edge_id == in_edge:
                    continue
                if v in disc:
                    if disc[v] < low[u]:
                        low[u] = disc[v]
                else:
                    stack[-1] = (u, in_edge, ptr)
                    disc[v] = low[v] = counter
                    counter += 1
                    stack.append((v, edge_id, 0))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                if low[u] < low[parent]:
                    low[parent] = low[u]
                if low[u] > disc[parent]:
                    bridges.add(in_edge)
    return bridges


def _seed_buses(net: Network, source_kind: str, source_id: str) -> set[str]:
    if source_kind == BRANCH:
        br = net.branch(source_id)
        return {br.from_bus, br.to_bus}
    if source_kind == BUS:
        return {net.bus(source_id).id}
    if source_kind == GENERATOR:
        return {net.generator(source_id).bus}
    raise UnknownElementError(f"unknown source kind {source_kind!r}")


def branch_distance(net: Network, source_kind: str, source_id: str) -> dict[str, int]:
    """Topological distance from a source element to every in-service branch.

    The distance is the number of branches in the shortest in-service path
    between the elements: branches sharing a bus with the source get 0,
    branches one hop beyond get 1, and so on. For a branch source, the
    source itself is excluded; unreachable branches are omitted (infinite
    distance, never candidates).
    """
    return branch_distance_multi(net, [(source_kind, source_id)], exclude={source_id} if source_kind == BRANCH else set())


def branch_distance_multi(
    net: Network,
    sources: list[tuple[str, str]],
    exclude: set[str] | None = None,
) -> dict[str, int]:
    """Minimum branch_distance over several source elements (one BFS pass)."""
    seeds: set[str] = set()
    for kind, element_id in sources:
        seeds |= _seed_buses(net, kind, element_id)
    adj = _adjacency(net)
    bus_dist: dict[str, int] = {b: 0 for b in seeds}
    queue = deque(sorted(seeds, key=id_sort_key))
    while queue:
        u = queue.popleft()
        for _, v in adj[u]:
            if v not in bus_dist:
                bus_dist[v] = bus_dist[u] + 1
                queue.append(v)

    exclude = exclude or set()
    dist: dict[str, int] = {}
    for br in net.branches.values():
        if not br.in_service or br.id in exclude:
            continue
        df = bus_dist.get(br.from_bus)
        dt = bus_dist.get(br.to_bus)
        if df is None and dt is None:
            continue
        dist[br.id] = min(d for d in (df, dt) if d is not None)
    return dist
