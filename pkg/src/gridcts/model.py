"""Network data model: buses, branches, generators in per-unit on a common MVA base.

All element records are frozen; a loaded Network is never mutated in place.
Contingency and switching studies derive private copies that share the
unchanged element objects, so networks are safe to hand to parallel workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable


class GridError(Exception):
    """Base class for all engine errors."""


class CaseError(GridError):
    """Raised for malformed or inconsistent case input.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownElementError(GridError):
    """An element id was not found in the network."""


class BridgeContingencyError(GridError):
    """A branch contingency was requested on a bridge (radial) branch."""


class InsufficientCapacityError(GridError):
    """Remaining online generators cannot absorb a lost generator's output."""


class SolveError(GridError):
    """Power-flow setup failure: singular matrix or degenerate island."""


SLACK = "slack"
PV = "pv"
PQ = "pq"


@dataclass(frozen=True)
class Bus:
    """Network node. Loads in MW/MVAr, shunt admittance in pu, limits in pu."""

    id: str
    kind: str  # slack | pv | pq
    v_setpoint: float = 1.0
    v_min: float = 0.94
    v_max: float = 1.06
    p_load: float = 0.0
    q_load: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0


@dataclass(frozen=True)
class Branch:
    """Transmission line or transformer (pi model, pu impedances on system base).

    rating is MVA; a rating of 0 marks the branch unmonitored for thermal
    violations. tap_ratio is 1.0 for plain lines, phase_shift in radians.
    """

    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    b_charging: float = 0.0
    tap_ratio: float = 1.0
    phase_shift: float = 0.0
    rating: float = 0.0
    in_service: bool = True
    switchable: bool = True


@dataclass(frozen=True)
class Generator:
    """Generating unit. p is the dispatched MW output; limits in MW/MVAr."""

    id: str
    bus: str
    p: float
    p_max: float
    p_min: float = 0.0
    q_max: float = 0.0
    q_min: float = 0.0
    q: float = 0.0
    in_service: bool = True


@dataclass(frozen=True)
class Network:
    """Immutable container for one system case.

    Element dicts are keyed by id and preserve load order; that order is the
    canonical iteration order everywhere in the engine, which keeps results
    deterministic across runs and worker counts.
    """

    buses: dict[str, Bus]
    branches: dict[str, Branch]
    generators: dict[str, Generator]
    base_mva: float = 100.0

    def bus(self, bus_id: str) -> Bus:
        try:
            return self.buses[bus_id]
        except KeyError:
            raise UnknownElementError(f"unknown bus {bus_id}") from None

    def branch(self, branch_id: str) -> Branch:
        try:
            return self.branches[branch_id]
        except KeyError:
            raise UnknownElementError(f"unknown branch {branch_id}") from None

    def generator(self, gen_id: str) -> Generator:
        try:
            return self.generators[gen_id]
        except KeyError:
            raise UnknownElementError(f"unknown generator {gen_id}") from None

    def in_service_branches(self) -> list[Branch]:
        return [b for b in self.branches.values() if b.in_service]

    def in_service_generators(self) -> list[Generator]:
        return [g for g in self.generators.values() if g.in_service]

    def generators_at(self, bus_id: str) -> list[Generator]:
        return [g for g in self.generators.values() if g.bus == bus_id]

    def slack_buses(self) -> list[Bus]:
        return [b for b in self.buses.values() if b.kind == SLACK]

    def with_branch(self, branch_id: str, **changes) -> "Network":
        """New network with one branch replaced; all other elements shared."""
        br = self.branch(branch_id)
        branches = dict(self.branches)
        branches[branch_id] = replace(br, **changes)
        return Network(self.buses, branches, self.generators, self.base_mva)

    def with_generators(self, updates: dict[str, Generator]) -> "Network":
        """New network with the given generator records swapped in."""
        gens = dict(self.generators)
        gens.update(updates)
        return Network(self.buses, self.branches, gens, self.base_mva)

    def with_buses(self, updates: dict[str, Bus]) -> "Network":
        buses = dict(self.buses)
        buses.update(updates)
        return Network(buses, self.branches, self.generators, self.base_mva)


_ID_RUNS = re.compile(r"(\d+)")


def id_sort_key(element_id: str) -> tuple:
    """Natural sort key for element ids: digit runs compare numerically.

    Gives B2 < B10 and plain numeric bus ids their numeric order, while any
    id remains totally ordered (ids are otherwise opaque).
    """
    parts = _ID_RUNS.split(element_id)
    return tuple((1, int(p)) if p.isdigit() else (0, p) for p in parts if p != "")


def validate_network(net: Network) -> None:
    """Check structural invariants; raise CaseError on the first failure.

    Covers: endpoint references, nonzero reactance, voltage band ordering,
    generator bus references and dispatch limits, and exactly one slack bus
    per electrical island (islands taken over in-service branches).
    """
    for br in net.branches.values():
        if br.from_bus not in net.buses:
            raise CaseError(f"branch {br.id}: unknown bus {br.from_bus}")
        if br.to_bus not in net.buses:
            raise CaseError(f"branch {br.id}: unknown bus {br.to_bus}")
        if br.x == 0.0:
            raise CaseError(f"branch {br.id}: zero reactance")
    for bus in net.buses.values():
        if not (0.0 < bus.v_min < bus.v_max):
            raise CaseError(f"bus {bus.id}: voltage limits must satisfy 0 < v_min < v_max")
    for gen in net.generators.values():
        if gen.bus not in net.buses:
            raise CaseError(f"generator {gen.id}: unknown bus {gen.bus}")
        if gen.in_service and not (gen.p_min - 1e-9 <= gen.p <= gen.p_max + 1e-9):
            raise CaseError(f"generator {gen.id}: p={gen.p} outside [{gen.p_min}, {gen.p_max}]")
    if not net.slack_buses():
        raise CaseError("no slack bus")

    # One slack per island, checked over in-service topology.
    from .topology import find_islands

    for island in find_islands(net):
        n_slack = sum(1 for b in island if net.buses[b].kind == SLACK)
        has_injection = any(
            net.buses[b].p_load != 0 or net.buses[b].q_load != 0 for b in island
        ) or any(g.in_service and g.bus in island for g in net.generators.values())
        if n_slack > 1:
            raise CaseError(f"island containing bus {min(island, key=id_sort_key)} has {n_slack} slack buses")
        if n_slack == 0 and has_injection:
            raise CaseError(f"island containing bus {min(island, key=id_sort_key)} has no slack bus")


def sorted_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=id_sort_key)
