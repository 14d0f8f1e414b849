"""HTTP facade for the operator console.

Single-case session: the network is loaded at startup (or via /api/reload),
screening is computed lazily on first request, candidate evaluations are
cached per (contingency, method, k, top). All JSON bodies are produced by
the canonical writer, so identical queries return byte-identical responses
within a session. Evaluations that exceed the slow threshold return 202
with a poll token instead of blocking the console.
"""

from __future__ import annotations

import math
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles

from .cts import (
    DM_METHODS,
    METHODS,
    EvalOptions,
    SwitchingCandidate,
    evaluate_candidate,
    rank_and_select,
)
from .fdlf import solve_power_flow
from .matpower import parse_case
from .model import CaseError, Network
from .reporting import canonical_json
from .rtca import (
    ContingencyOutcome,
    ScreeningOptions,
    apply_contingency,
    exceeds_thresholds,
    default_contingency_set,
    scan_contingencies,
)
from .scan import ScanConfig, method_candidates
from .topology import build_topology_index


def _num(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class Session:
    """Loaded case plus lazily computed, immutable analysis results."""

    def __init__(self, net: Network, cfg: ScanConfig):
        self.cfg = cfg
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}
        self._load(net)

    def _load(self, net: Network) -> None:
        self.net = net
        self.base = solve_power_flow(net, self.cfg.pf)
        self.outcomes: list[ContingencyOutcome] | None = None
        self.candidate_cache: dict[tuple, str] = {}
        self.whatif_cache: dict[tuple, str] = {}

    def reload(self, net: Network) -> None:
        with self.lock:
            self._load(net)

    def screening(self) -> list[ContingencyOutcome]:
        with self.lock:
            if self.outcomes is None:
                self.outcomes = scan_contingencies(
                    self.net,
                    default_contingency_set(self.net),
                    ScreeningOptions(
                        v_threshold=self.cfg.v_threshold,
                        f_threshold=self.cfg.f_threshold,
                        pf=self.cfg.pf,
                    ),
                    base_solution=self.base,
                    workers=self.cfg.workers,
                    backend=self.cfg.backend,
                )
            return self.outcomes

    def screening_opts(self) -> ScreeningOptions:
        return ScreeningOptions(
            v_threshold=self.cfg.v_threshold,
            f_threshold=self.cfg.f_threshold,
            pf=self.cfg.pf,
        )

    def outcome(self, contingency_id: str) -> ContingencyOutcome | None:
        for o in self.screening():
            if o.contingency.id == contingency_id:
                return o
        return None


def _violations_json(report) -> list[dict]:
    return [
        {"element": r.element, "kind": r.kind, "magnitude": r.magnitude, "limit": r.limit}
        for r in report.records
    ]


def _eval_json(e) -> dict:
    return {
        "branch": e.candidate.branch,
        "reduction_pct": _num(e.reduction_pct),
        "pareto": e.pareto,
        "status": e.status,
        "depth": e.candidate.source_rank + 1,
        "delta_c1": {"flow_mva": _num(e.delta_c1_flow), "volt_pu": _num(e.delta_c1_volt)},
    }


def create_app(
    net: Network | None = None,
    cfg: ScanConfig | None = None,
    console_dir: str | None = None,
    slow_threshold_s: float = 5.0,
) -> FastAPI:
    """Application factory. net=None starts an empty session (503 until reload)."""
    cfg = cfg or ScanConfig()
    app = FastAPI(title="gridcts operator service")
    app.state.session = Session(net, cfg) if net is not None else None
    app.state.slow_threshold_s = slow_threshold_s

    def session() -> Session:
        s = app.state.session
        if s is None:
            raise HTTPException(status_code=503, detail="no case loaded")
        return s

    def json_response(payload: dict | list, status_code: int = 200) -> Response:
        return Response(
            content=canonical_json({"data": payload} if isinstance(payload, list) else payload),
            status_code=status_code,
            media_type="application/json",
        )

    @app.get("/api/case")
    def get_case() -> Response:
        s = session()
        if not s.base.converged:
            raise HTTPException(status_code=503, detail="base case power flow diverged")
        return json_response(
            {
                "buses": len(s.net.buses),
                "branches": len(s.net.branches),
                "generators": len(s.net.generators),
                "base_mva": s.net.base_mva,
                "converged": True,
                "losses_mw": _num(s.base.losses_mw),
            }
        )

    @app.post("/api/reload")
    def reload_case(payload: dict = Body(...)) -> Response:
        path = payload.get("case_path")
        if not path or not Path(path).exists():
            raise HTTPException(status_code=404, detail=f"case file not found: {path}")
        try:
            new_net = parse_case(Path(path).read_text())
        except CaseError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if app.state.session is None:
            app.state.session = Session(new_net, cfg)
        else:
            app.state.session.reload(new_net)
        return get_case()

    @app.get("/api/contingencies")
    def get_contingencies(criticalOnly: bool = Query(True)) -> Response:
        s = session()
        if not s.base.converged:
            raise HTTPException(status_code=503, detail="base case power flow diverged")
        opts = s.screening_opts()
        rows = []
        for o in s.screening():
            critical = exceeds_thresholds(o.report, opts)
            if criticalOnly and not critical:
                continue
            rows.append(
                {
                    "id": o.contingency.id,
                    "kind": o.contingency.kind,
                    "element": o.contingency.element,
                    "critical": critical,
                    "diverged": not o.report.converged,
                    "delta": {
                        "flow_mva": _num(o.report.agg_flow),
                        "volt_pu": _num(o.report.agg_volt),
                    },
                    "violations": _violations_json(o.report),
                }
            )
        return json_response(rows)

    def _compute_candidates(s: Session, outcome: ContingencyOutcome, method: str, k: int, top: int) -> dict:
        run_cfg = replace_config(s.cfg, method=method, k=k, top_n=top)
        net_post = apply_contingency(s.net, outcome.contingency)
        topo_post = build_topology_index(net_post)
        from .rtca import CriticalContingency

        crit = CriticalContingency(outcome.contingency, outcome.report, outcome.solution)
        cands = method_candidates(run_cfg, net_post, crit, topo_post)
        eval_opts = EvalOptions(volt_weight=s.cfg.volt_weight, pf=s.cfg.pf)
        evals = [
            evaluate_candidate(net_post, outcome.report, c, outcome.solution, eval_opts, topo_post)
            for c in cands
        ]
        ranked = rank_and_select(evals, top)
        return {
            "contingency": outcome.contingency.id,
            "method": method,
            "evaluated": len(evals),
            "candidates": [_eval_json(e) for e in ranked],
            "no_cts_found": not ranked,
        }

    @app.post("/api/contingencies/{contingency_id}/candidates")
    def post_candidates(contingency_id: str, payload: dict = Body(default={})) -> Response:
        s = session()
        method = payload.get("method", s.cfg.method)
        k = int(payload.get("k", s.cfg.k))
        top = int(payload.get("top", s.cfg.top_n))
        if method not in METHODS:
            raise HTTPException(status_code=422, detail=f"unknown method {method!r}")
        if method in DM_METHODS and s.cfg.dm_model is None:
            raise HTTPException(status_code=422, detail=f"method {method} requires a DM model loaded at startup")
        outcome = s.outcome(contingency_id)
        if outcome is None:
            raise HTTPException(status_code=404, detail=f"unknown contingency {contingency_id}")
        if not exceeds_thresholds(outcome.report, s.screening_opts()):
            raise HTTPException(status_code=404, detail=f"{contingency_id} is not a critical contingency")
        if not outcome.report.converged:
            raise HTTPException(status_code=409, detail=f"{contingency_id} diverged; no switching study available")

        key = (contingency_id, method, k, top)
        cached = s.candidate_cache.get(key)
        if cached is not None:
            return Response(content=cached, media_type="application/json")

        done = threading.Event()
        result: dict = {}

        def work():
            try:
                result["payload"] = _compute_candidates(s, outcome, method, k, top)
            except Exception as exc:  # surfaced via the job or the sync path
                result["error"] = exc
            done.set()

        thread = threading.Thread(target=work, daemon=True)
        thread.start()
        if done.wait(timeout=app.state.slow_threshold_s):
            if "error" in result:
                raise HTTPException(status_code=500, detail=str(result["error"]))
            body = canonical_json(result["payload"])
            s.candidate_cache.setdefault(key, body)
            return Response(content=s.candidate_cache[key], media_type="application/json")
        token = uuid.uuid4().hex
        s.jobs[token] = {"done": done, "result": result, "key": key}
        return json_response({"job_token": token, "status": "pending"}, status_code=202)

    @app.get("/api/jobs/{token}")
    def get_job(token: str) -> Response:
        s = session()
        job = s.jobs.get(token)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job token")
        if not job["done"].is_set():
            return json_response({"job_token": token, "status": "pending"}, status_code=202)
        if "error" in job["result"]:
            raise HTTPException(status_code=500, detail=str(job["result"]["error"]))
        body = canonical_json(job["result"]["payload"])
        s.candidate_cache.setdefault(job["key"], body)
        return Response(content=s.candidate_cache[job["key"]], media_type="application/json")

    @app.post("/api/whatif")
    def post_whatif(payload: dict = Body(...)) -> Response:
        s = session()
        contingency_id = payload.get("contingency_id")
        branch_id = payload.get("open_branch_id")
        outcome = s.outcome(contingency_id) if contingency_id else None
        if outcome is None:
            raise HTTPException(status_code=404, detail=f"unknown contingency {contingency_id}")
        if not outcome.report.converged:
            raise HTTPException(status_code=409, detail=f"{contingency_id} diverged; no post-contingency state")
        if branch_id not in s.net.branches:
            raise HTTPException(status_code=404, detail=f"unknown branch {branch_id}")

        key = (contingency_id, branch_id)
        cached = s.whatif_cache.get(key)
        if cached is not None:
            return Response(content=cached, media_type="application/json")

        net_post = apply_contingency(s.net, outcome.contingency)
        if not net_post.branch(branch_id).in_service:
            raise HTTPException(
                status_code=409,
                detail=f"branch {branch_id} is not in service in the post-contingency network",
            )
        topo_post = build_topology_index(net_post)
        if branch_id in topo_post.bridges:
            raise HTTPException(
                status_code=409,
                detail=f"opening branch {branch_id} would island the network",
            )
        # same computation as a candidate evaluation of this branch
        from .cts import score_switching
        from .fdlf import _Numeric
        from .rtca import assess_violations

        numeric = _Numeric(net_post).with_branch_out(branch_id)
        switched = numeric.net
        sol = solve_power_flow(switched, s.cfg.pf, warm_start=outcome.solution, _numeric=numeric)
        sc = SwitchingCandidate(branch=branch_id, source_rank=0, method="whatif")
        after_records: dict[tuple, object] = {}
        if sol.converged:
            after = assess_violations(switched, sol)
            ev = score_switching(sc, outcome.report, after, s.cfg.volt_weight)
            after_records = {(r.element, r.kind): r for r in after.records}
        else:
            from .cts import CandidateEvaluation

            ev = CandidateEvaluation(
                sc, float("inf"), float("inf"), float("-inf"), False, "diverged"
            )

        before = {(r.element, r.kind): r for r in outcome.report.records}
        diff = []
        for elem_kind in sorted(set(before) | set(after_records)):
            b = before.get(elem_kind)
            a = after_records.get(elem_kind)
            diff.append(
                {
                    "element": elem_kind[0],
                    "kind": elem_kind[1],
                    "before": b.magnitude if b else 0.0,
                    "after": a.magnitude if a else 0.0,
                }
            )
        body = canonical_json(
            {
                "contingency": contingency_id,
                "opened_branch": branch_id,
                "status": ev.status,
                "reduction_pct": _num(ev.reduction_pct),
                "pareto": ev.pareto,
                "delta_c0": {
                    "flow_mva": _num(outcome.report.agg_flow),
                    "volt_pu": _num(outcome.report.agg_volt),
                },
                "delta_c1": {"flow_mva": _num(ev.delta_c1_flow), "volt_pu": _num(ev.delta_c1_volt)},
                "diff": diff,
            }
        )
        s.whatif_cache.setdefault(key, body)
        return Response(content=s.whatif_cache[key], media_type="application/json")

    if console_dir and Path(console_dir).is_dir():
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def replace_config(cfg: ScanConfig, **changes) -> ScanConfig:
    return ScanConfig(**{**cfg.__dict__, **changes})
