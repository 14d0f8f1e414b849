"""Fast-decoupled AC load flow (XB scheme) with sparse factorization.

B' is assembled from branch series reactance only (resistance, taps and
shunts neglected); B'' is the negated imaginary part of the full bus
admittance matrix restricted to PQ buses. Both are factorized once and the
P-theta / Q-V half iterations alternate until both mismatch infinity norms
drop under tolerance. PV buses that exhaust their reactive range are pinned
to the violated limit and freed again (once) if the setpoint becomes
feasible.

Non-convergence is reported in the solution, never raised: contingency and
switching scans must rank a diverged state, not die on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csc_matrix, csr_matrix
from scipy.sparse.linalg import splu

from .model import Network, PQ, PV, SLACK, SolveError

# effective bus type codes used by the numeric core
_PQ, _PV, _SLACK = 0, 1, 2


@dataclass
class PowerFlowOptions:
    tolerance: float = 1e-6  # pu mismatch, infinity norm
    max_half_iterations: int = 60
    scheme: str = "XB"
    flat_start: bool = True
    enforce_q_limits: bool = True

    def validate(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_half_iterations < 2:
            raise ValueError("max_half_iterations must be >= 2")
        if self.scheme != "XB":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


@dataclass(eq=False)
class PowerFlowSolution:
    """State and flows of one solved (or failed) case.

    Flows are complex MVA at each branch end; vm/va are aligned with
    bus_ids, s_from/s_to with branch_ids.
    """

    bus_ids: tuple[str, ...]
    vm: np.ndarray
    va: np.ndarray
    branch_ids: tuple[str, ...]
    s_from: np.ndarray
    s_to: np.ndarray
    converged: bool
    half_iterations_used: int
    max_p_mismatch: float
    max_q_mismatch: float
    slack_p: float  # MW picked up by slack buses relative to scheduled dispatch
    pinned_q: tuple[tuple[str, str], ...] = ()  # (bus id, "high"|"low") at the limit
    _bus_index: dict[str, int] = field(default_factory=dict, repr=False)
    _branch_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._bus_index:
            self._bus_index = {b: i for i, b in enumerate(self.bus_ids)}
        if not self._branch_index:
            self._branch_index = {b: i for i, b in enumerate(self.branch_ids)}

    def v(self, bus_id: str) -> float:
        return float(self.vm[self._bus_index[bus_id]])

    def theta(self, bus_id: str) -> float:
        return float(self.va[self._bus_index[bus_id]])

    def flow_from(self, branch_id: str) -> complex:
        return complex(self.s_from[self._branch_index[branch_id]])

    def flow_to(self, branch_id: str) -> complex:
        return complex(self.s_to[self._branch_index[branch_id]])

    def flow_mva(self, branch_id: str) -> float:
        """Larger apparent-power magnitude of the two branch ends."""
        i = self._branch_index[branch_id]
        return max(abs(self.s_from[i]), abs(self.s_to[i]))

    def loss_mw(self, branch_id: str) -> float:
        i = self._branch_index[branch_id]
        return float((self.s_from[i] + self.s_to[i]).real)

    @property
    def losses_mw(self) -> float:
        return float((self.s_from + self.s_to).real.sum())


class _Numeric:
    """Per-network numeric arrays; built fresh for every solve."""

    def __init__(self, net: Network):
        self.net = net
        self.base = net.base_mva
        self.bus_ids = list(net.buses)
        self.index = {b: i for i, b in enumerate(self.bus_ids)}
        n = len(self.bus_ids)
        self.n = n

        buses = list(net.buses.values())
        self.vset = np.array([b.v_setpoint for b in buses])
        self.pload = np.array([b.p_load for b in buses])
        self.qload = np.array([b.q_load for b in buses])
        self.gsh = np.array([b.shunt_g for b in buses])
        self.bsh = np.array([b.shunt_b for b in buses])

        # aggregate generation per bus
        self.pgen = np.zeros(n)
        self.qgen_fixed = np.zeros(n)  # fixed Q of generators at non-PV buses
        self.qmin = np.zeros(n)
        self.qmax = np.zeros(n)
        has_gen = np.zeros(n, dtype=bool)
        for g in net.generators.values():
            if not g.in_service:
                continue
            i = self.index[g.bus]
            self.pgen[i] += g.p
            self.qmin[i] += g.q_min
            self.qmax[i] += g.q_max
            has_gen[i] = True

        kind = np.array([{PQ: _PQ, PV: _PV, SLACK: _SLACK}[b.kind] for b in buses])
        # a PV bus without an in-service generator cannot hold voltage
        self.itype = np.where((kind == _PV) & ~has_gen, _PQ, kind)
        for g in net.generators.values():
            if g.in_service and self.itype[self.index[g.bus]] == _PQ:
                self.qgen_fixed[self.index[g.bus]] += g.q

        branches = list(net.branches.values())
        self.branch_ids = [br.id for br in branches]
        self.branch_pos = {br.id: k for k, br in enumerate(branches)}
        self.f = np.array([self.index[br.from_bus] for br in branches], dtype=np.int64)
        self.t = np.array([self.index[br.to_bus] for br in branches], dtype=np.int64)
        self.status = np.array([br.in_service for br in branches])
        self.x = np.array([br.x for br in branches])
        r = np.array([br.r for br in branches])
        bc = np.array([br.b_charging for br in branches])
        tap = np.array([br.tap_ratio for br in branches]) * np.exp(
            1j * np.array([br.phase_shift for br in branches])
        )
        ys = np.where(self.status, 1.0 / (r + 1j * self.x), 0.0)
        ysh_half = np.where(self.status, 1j * bc / 2.0, 0.0)
        self.ytt = ys + ysh_half
        self.yff = self.ytt / (tap * np.conj(tap))
        self.yft = -ys / np.conj(tap)
        self.ytf = -ys / tap

        self._rows = np.concatenate([self.f, self.f, self.t, self.t, np.arange(n)])
        self._cols = np.concatenate([self.f, self.t, self.f, self.t, np.arange(n)])
        self._rebuild()

    def _rebuild(self) -> None:
        """Refresh ybus and the dead-bus set from the current branch arrays."""
        n = self.n
        data = np.concatenate([self.yff, self.yft, self.ytf, self.ytt, self.gsh + 1j * self.bsh])
        self.ybus = csr_matrix((data, (self._rows, self._cols)), shape=(n, n))

        # dead buses carry no in-service branch: solvable only if silent
        alive = np.zeros(n, dtype=bool)
        alive[self.f[self.status]] = True
        alive[self.t[self.status]] = True
        self.dead = ~alive
        for i in np.flatnonzero(self.dead):
            if self.itype[i] != _SLACK and (
                self.pload[i] != 0 or self.qload[i] != 0 or self.pgen[i] != 0
            ):
                raise SolveError(f"bus {self.bus_ids[i]} is isolated but carries injection")

        self.pspec = (self.pgen - self.pload) / self.base

    def with_branch_out(self, branch_id: str) -> "_Numeric":
        """Copy of this model with one more branch switched out.

        Bus and generator arrays are shared; only the branch admittance
        stamps and the assembled ybus are redone, which keeps repeated
        switching evaluations cheap.
        """
        k = self.branch_pos[branch_id]
        m = object.__new__(_Numeric)
        m.__dict__.update(self.__dict__)
        m.net = self.net.with_branch(branch_id, in_service=False)
        m.status = self.status.copy()
        m.status[k] = False
        for name in ("ytt", "yff", "yft", "ytf"):
            arr = getattr(self, name).copy()
            arr[k] = 0.0
            setattr(m, name, arr)
        m._rebuild()
        return m

    def injections(self, v: np.ndarray) -> np.ndarray:
        """Complex pu power injected into the network at each bus."""
        return v * np.conj(self.ybus @ v)

    def bprime(self) -> csc_matrix:
        """P-theta matrix over non-slack, non-dead buses (1/x stamps only)."""
        sel = np.flatnonzero((self.itype != _SLACK) & ~self.dead)
        pos = -np.ones(self.n, dtype=np.int64)
        pos[sel] = np.arange(len(sel))
        return _stamp(pos, self.f[self.status], self.t[self.status],
                      1.0 / self.x[self.status], len(sel)), sel

    def bdoublep(self, pq_sel: np.ndarray) -> csc_matrix:
        """Q-V matrix: -Im(Ybus) restricted to the given PQ bus rows."""
        pos = -np.ones(self.n, dtype=np.int64)
        pos[pq_sel] = np.arange(len(pq_sel))
        bim = -self.ybus.imag.tocoo()
        keep = (pos[bim.row] >= 0) & (pos[bim.col] >= 0)
        return csc_matrix(
            (bim.data[keep], (pos[bim.row[keep]], pos[bim.col[keep]])),
            shape=(len(pq_sel), len(pq_sel)),
        )

    def branch_flows(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        sf = v[self.f] * np.conj(self.yff * v[self.f] + self.yft * v[self.t]) * self.base
        st = v[self.t] * np.conj(self.ytf * v[self.f] + self.ytt * v[self.t]) * self.base
        return sf, st


def _stamp(pos: np.ndarray, f: np.ndarray, t: np.ndarray, b: np.ndarray, size: int) -> csc_matrix:
    rows, cols, data = [], [], []
    pf, pt = pos[f], pos[t]
    for pa, pb in ((pf, pf), (pt, pt)):
        keep = pa >= 0
        rows.append(pa[keep]); cols.append(pb[keep]); data.append(b[keep])
    for pa, pb in ((pf, pt), (pt, pf)):
        keep = (pa >= 0) & (pb >= 0)
        rows.append(pa[keep]); cols.append(pb[keep]); data.append(-b[keep])
    return csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )


def _factorize(matrix: csc_matrix, what: str):
    if matrix.shape[0] == 0:
        return None
    try:
        return splu(matrix)
    except RuntimeError as exc:
        raise SolveError(f"singular {what} matrix: {exc}") from None


def build_decoupled_matrices(net: Network):
    """Assemble and factorize (B', B'') for the network's base bus typing.

    Returns an object carrying the sparse matrices (for inspection) and
    their LU factorizations. Raises SolveError when a matrix is singular,
    which signals a disconnected constraint bus or an island without slack.
    """
    m = _Numeric(net)
    bp, pvpq = m.bprime()
    pq = np.flatnonzero((m.itype == _PQ) & ~m.dead)
    bpp = m.bdoublep(pq)
    lu_p = _factorize(bp, "B'")
    lu_q = _factorize(bpp, "B''")

    class Matrices:
        bprime = bp
        bdoubleprime = bpp
        pvpq_ids = tuple(m.bus_ids[i] for i in pvpq)
        pq_ids = tuple(m.bus_ids[i] for i in pq)

        @staticmethod
        def solve_p(rhs):
            return lu_p.solve(rhs)

        @staticmethod
        def solve_q(rhs):
            return lu_q.solve(rhs)

    return Matrices


def solve_power_flow(
    net: Network,
    opts: PowerFlowOptions | None = None,
    warm_start: PowerFlowSolution | None = None,
    _numeric: _Numeric | None = None,
) -> PowerFlowSolution:
    """Run the alternating half-iteration scheme to tolerance or cap.

    A warm start must carry the same bus set (same ids, same order). The
    returned solution has converged=False when the cap is hit; callers
    treat that as data.
    """
    opts = opts or PowerFlowOptions()
    opts.validate()
    m = _numeric if _numeric is not None else _Numeric(net)
    n = m.n

    if warm_start is not None:
        if tuple(warm_start.bus_ids) != tuple(m.bus_ids):
            raise SolveError("warm start bus set does not match network")
        vm = warm_start.vm.copy()
        va = warm_start.va.copy()
    else:
        vm = np.where(m.itype == _PQ, 1.0, m.vset).astype(float)
        va = np.zeros(n)
    vm[m.dead] = np.where(m.itype[m.dead] == _SLACK, m.vset[m.dead], 1.0)
    va[m.dead] = 0.0

    acting = m.itype.copy()  # PV buses may be demoted to PQ while pinned
    pinned: dict[int, str] = {}
    freed: set[int] = set()
    qspec = (m.qgen_fixed - m.qload) / m.base

    if warm_start is not None and opts.enforce_q_limits:
        # seed the binding set from the warm state: on nearby topologies the
        # same units sit at their limits, which avoids refactorization churn
        for bus_id, side in warm_start.pinned_q:
            i = m.index.get(bus_id)
            if i is not None and m.itype[i] == _PV:
                acting[i] = _PQ
                pinned[i] = side
                lim = m.qmax[i] if side == "high" else m.qmin[i]
                qspec[i] = (lim - m.qload[i]) / m.base

    bp, pvpq = m.bprime()
    lu_p = _factorize(bp, "B'")

    def pq_rows():
        return np.flatnonzero((acting == _PQ) & ~m.dead)

    pq = pq_rows()
    lu_q = _factorize(m.bdoublep(pq), "B''")

    tol = opts.tolerance
    halves = 0
    converged = False

    def mismatches():
        s = m.injections(vm * np.exp(1j * va))
        dp = m.pspec - s.real
        dq = qspec - s.imag
        return s, dp, dq

    def q_limit_step(s: np.ndarray) -> bool:
        """Pin violating PV buses at the limit; free pinned buses once."""
        changed = False
        qgen = s.imag * m.base + m.qload  # MVAr produced at each bus
        is_pv = (acting == _PV) & ~m.dead
        for i in np.flatnonzero(is_pv & (qgen > m.qmax + 1e-7)):
            acting[i] = _PQ
            pinned[i] = "high"
            qspec[i] = (m.qmax[i] - m.qload[i]) / m.base
            changed = True
        for i in np.flatnonzero(is_pv & (qgen < m.qmin - 1e-7)):
            acting[i] = _PQ
            pinned[i] = "low"
            qspec[i] = (m.qmin[i] - m.qload[i]) / m.base
            changed = True
        for i, side in list(pinned.items()):
            if i in freed:
                continue
            if (side == "high" and vm[i] > m.vset[i] + 1e-7) or (
                side == "low" and vm[i] < m.vset[i] - 1e-7
            ):
                acting[i] = _PV
                del pinned[i]
                freed.add(i)
                vm[i] = m.vset[i]
                changed = True
        return changed

    max_p = max_q = float("inf")
    while True:
        s, dp, dq = mismatches()
        max_p = float(np.abs(dp[pvpq]).max()) if len(pvpq) else 0.0
        max_q = float(np.abs(dq[pq]).max()) if len(pq) else 0.0
        if max_p <= tol and max_q <= tol:
            if opts.enforce_q_limits and q_limit_step(s):
                pq = pq_rows()
                lu_q = _factorize(m.bdoublep(pq), "B''")
                continue
            converged = True
            break
        if halves >= opts.max_half_iterations:
            break

        if max_p > tol and lu_p is not None:
            va[pvpq] += lu_p.solve(dp[pvpq] / vm[pvpq])
            halves += 1
            if halves >= opts.max_half_iterations:
                continue
            s = m.injections(vm * np.exp(1j * va))
            dq = qspec - s.imag
        if len(pq) and float(np.abs(dq[pq]).max()) > tol and lu_q is not None:
            vm[pq] += lu_q.solve(dq[pq] / vm[pq])
            halves += 1
        # limit check once per full iteration, after the state has settled a bit
        if opts.enforce_q_limits and halves >= 4:
            s = m.injections(vm * np.exp(1j * va))
            if q_limit_step(s):
                pq = pq_rows()
                lu_q = _factorize(m.bdoublep(pq), "B''")

    v = vm * np.exp(1j * va)
    sf, st = m.branch_flows(v)
    s_final = m.injections(v)
    slack_sel = np.flatnonzero(m.itype == _SLACK)
    slack_sched = sum(
        g.p for g in net.generators.values()
        if g.in_service and m.itype[m.index[g.bus]] == _SLACK
    )
    slack_p = float((s_final.real[slack_sel] * m.base + m.pload[slack_sel]).sum() - slack_sched)

    return PowerFlowSolution(
        bus_ids=tuple(m.bus_ids),
        vm=vm,
        va=va,
        branch_ids=tuple(m.branch_ids),
        s_from=sf,
        s_to=st,
        converged=converged,
        half_iterations_used=halves,
        max_p_mismatch=max_p,
        max_q_mismatch=max_q,
        slack_p=slack_p,
        pinned_q=tuple(sorted((m.bus_ids[i], side) for i, side in pinned.items())),
    )


def compute_branch_flows(net: Network, sol: PowerFlowSolution) -> dict[str, tuple[complex, complex, float]]:
    """Recompute per-branch (s_from MVA, s_to MVA, loss MW) from a solved state.

    Out-of-service branches report zero at both ends.
    """
    m = _Numeric(net)
    if tuple(sol.bus_ids) != tuple(m.bus_ids):
        raise SolveError("solution bus set does not match network")
    v = sol.vm * np.exp(1j * sol.va)
    sf, st = m.branch_flows(v)
    return {
        bid: (complex(sf[i]), complex(st[i]), float((sf[i] + st[i]).real))
        for i, bid in enumerate(m.branch_ids)
    }
