from __future__ import annotations

import random
from pathlib import Path

import pytest

from gridcts.model import Branch, Bus, Generator, Network, PQ, SLACK

CASES = Path(__file__).parent / "cases"


def make_net(
    buses: list[tuple],
    branches: list[tuple],
    gens: list[tuple] = (),
    base: float = 100.0,
) -> Network:
    """Compact test-network builder.

    buses: (id, kind, p_load, q_load) or (id, kind) — limits default 0.94/1.06
    branches: (id, from, to, x) or (id, from, to, x, rating) or (..., in_service)
    gens: (id, bus, p, p_max) or (id, bus, p, p_max, q_min, q_max)
    """
    bus_map = {}
    for spec in buses:
        bid, kind = spec[0], spec[1]
        p = spec[2] if len(spec) > 2 else 0.0
        q = spec[3] if len(spec) > 3 else 0.0
        bus_map[bid] = Bus(id=bid, kind=kind, p_load=p, q_load=q)
    br_map = {}
    for spec in branches:
        bid, f, t, x = spec[:4]
        rating = spec[4] if len(spec) > 4 else 0.0
        in_service = spec[5] if len(spec) > 5 else True
        br_map[bid] = Branch(id=bid, from_bus=f, to_bus=t, r=0.0, x=x, rating=rating, in_service=in_service)
    gen_map = {}
    for spec in gens:
        gid, bus, p, pmax = spec[:4]
        qmin = spec[4] if len(spec) > 4 else -9999.0
        qmax = spec[5] if len(spec) > 5 else 9999.0
        gen_map[gid] = Generator(id=gid, bus=bus, p=p, p_max=pmax, q_min=qmin, q_max=qmax)
    return Network(buses=bus_map, branches=br_map, generators=gen_map, base_mva=base)


def triangle_net() -> Network:
    return make_net(
        buses=[("1", SLACK), ("2", PQ, 20.0, 5.0), ("3", PQ, 30.0, 10.0)],
        branches=[("a", "1", "2", 0.1), ("b", "2", "3", 0.1), ("c", "1", "3", 0.1)],
        gens=[("G1", "1", 0.0, 200.0)],
    )


def random_net(rng: random.Random, n_buses: int, n_branches: int) -> Network:
    """Connected random multigraph network (spanning tree + extra circuits)."""
    buses = [(str(i), SLACK if i == 1 else PQ) for i in range(1, n_buses + 1)]
    branches = []
    for i in range(2, n_buses + 1):
        other = rng.randint(1, i - 1)
        branches.append((f"L{len(branches)+1}", str(i), str(other), rng.uniform(0.05, 0.3)))
    while len(branches) < n_branches:
        a = rng.randint(1, n_buses)
        b = rng.randint(1, n_buses)
        if a == b:
            continue
        branches.append((f"L{len(branches)+1}", str(a), str(b), rng.uniform(0.05, 0.3)))
    return make_net(buses, branches, gens=[("G1", "1", 0.0, 100.0)])


@pytest.fixture(scope="session")
def case14_text() -> str:
    return (CASES / "case14.m").read_text()


@pytest.fixture(scope="session")
def case118_text() -> str:
    return (CASES / "case118.m").read_text()


@pytest.fixture(scope="session")
def case14_net(case14_text):
    from gridcts import parse_case

    return parse_case(case14_text)


@pytest.fixture(scope="session")
def case118_net(case118_text):
    from gridcts import parse_case

    return parse_case(case118_text)


@pytest.fixture(scope="session")
def case118_sol(case118_net):
    from gridcts import solve_power_flow

    sol = solve_power_flow(case118_net)
    assert sol.converged
    return sol


def stress_network(
    net: Network,
    load_factor: float,
    rating_margin: float = 2.0,
    rating_floor: float = 120.0,
    v_band: tuple[float, float] = (0.90, 1.10),
) -> Network:
    """Scaled-load copy of a case with thermal ratings tied to its base flows.

    Loads and generator dispatch scale together (dispatch capped at p_max,
    the slack absorbs the shortfall); each branch gets a rating at
    rating_margin times its scaled-case base flow so that outage
    redistributions on heavy corridors create genuine overloads while the
    base state stays clean. The bus voltage band is widened so that only
    severe post-contingency sags register as violations.
    """
    from dataclasses import replace

    from gridcts import solve_power_flow

    buses = {
        b.id: replace(
            b,
            p_load=b.p_load * load_factor,
            q_load=b.q_load * load_factor,
            v_min=v_band[0],
            v_max=v_band[1],
        )
        for b in net.buses.values()
    }
    gens = {
        g.id: replace(g, p=min(g.p * load_factor, g.p_max)) if g.in_service else g
        for g in net.generators.values()
    }
    scaled = Network(buses=buses, branches=net.branches, generators=gens, base_mva=net.base_mva)
    sol = solve_power_flow(scaled)
    assert sol.converged, "stressed base case must converge"
    branches = {
        br.id: replace(br, rating=round(max(sol.flow_mva(br.id) * rating_margin, rating_floor)))
        for br in scaled.branches.values()
    }
    return Network(buses=buses, branches=branches, generators=gens, base_mva=net.base_mva)


@pytest.fixture(scope="session")
def stressed118(case118_net):
    net = stress_network(case118_net, load_factor=1.2)
    from gridcts.rtca import assess_violations
    from gridcts import solve_power_flow

    base = solve_power_flow(net)
    assert assess_violations(net, base).is_clean
    return net


def load_pocket_net(rating_c: float = 35.0) -> Network:
    """Seven-bus load-pocket system: two supply corridors into bus 7 plus a
    longer external circuit. Losing corridor branch "e" (1-5) overloads the
    middle-path branch "c" (3-4); opening "b" (2-3) pushes the pocket supply
    onto the external circuit 2-6-7 and clears the overload completely.
    """
    return make_net(
        buses=[
            ("1", SLACK),
            ("2", PQ),
            ("3", PQ),
            ("4", PQ),
            ("5", PQ),
            ("6", PQ),
            ("7", PQ, 80.0, 15.0),
        ],
        branches=[
            ("a", "1", "2", 0.02, 300.0),
            ("b", "2", "3", 0.05, 200.0),
            ("c", "3", "4", 0.05, rating_c),
            ("d", "4", "7", 0.05, 200.0),
            ("e", "1", "5", 0.02, 300.0),
            ("f", "5", "7", 0.04, 300.0),
            ("g", "2", "6", 0.08, 200.0),
            ("h", "6", "7", 0.08, 200.0),
        ],
        gens=[("G1", "1", 80.0, 500.0)],
    )
