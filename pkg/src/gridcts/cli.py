"""Command-line driver: scan, dm-train, bench, serve.

Exit codes: 0 success, 2 base-case divergence, 3 input errors (unreadable
case, malformed file, bad flags). Reports are canonical JSON so identical
runs produce byte-identical files apart from the timing section.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cts import DM_METHODS, METHODS, dm_train, load_dm_model, save_dm_model
from .matpower import parse_case
from .model import CaseError, GridError, Network
from .reporting import canonical_json, report_dict, strip_timing, summary_lines
from .rtca import Contingency
from .runner import RunTiming, parallel_efficiency
from .scan import CtsReport, ScanConfig, run_scan

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_INPUT = 3


def _load_case(path: str) -> Network:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"case file not found: {path}")
    return parse_case(p.read_text())


def _load_contingencies(path: str) -> list[Contingency]:
    with open(path) as f:
        rows = json.load(f)
    return [Contingency(id=r["id"], kind=r["kind"], element=r["element"]) for r in rows]


def _scan_config(args: argparse.Namespace) -> ScanConfig:
    cfg = ScanConfig(
        method=args.method,
        top_n=args.top,
        v_threshold=args.vtol,
        f_threshold=args.ftol,
        k=args.k,
        volt_weight=args.volt_weight,
        workers=args.workers,
    )
    if args.contingencies:
        cfg.contingencies = _load_contingencies(args.contingencies)
    if args.method in DM_METHODS:
        if not args.dm_model:
            raise GridError(f"--dm-model is required for method {args.method}")
        cfg.dm_model = load_dm_model(args.dm_model)
    return cfg


def _write_report(report: CtsReport, out: str | None) -> dict:
    payload = report_dict(report)
    text = canonical_json(payload)
    if out:
        Path(out).write_text(text)
    return payload


def cmd_scan(args: argparse.Namespace) -> int:
    try:
        net = _load_case(args.case)
        cfg = _scan_config(args)
    except (FileNotFoundError, CaseError, GridError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = run_scan(net, cfg)
    _write_report(report, args.out)
    for line in summary_lines(report):
        print(line)
    if not report.base_converged:
        print("error: base case power flow diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_dm_train(args: argparse.Namespace) -> int:
    method = args.method if args.method in DM_METHODS else None
    if method is None:
        print("error: dm-train needs --method dm1|dm2|dm3", file=sys.stderr)
        return EXIT_INPUT
    try:
        scenarios = []
        for path in args.case:
            net = _load_case(path)
            conts = _load_contingencies(args.contingencies) if args.contingencies else None
            scenarios.append((net, conts))
    except (FileNotFoundError, CaseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    model = dm_train(scenarios, DM_METHODS[method], workers=args.workers)
    out = args.out or f"{method}-model.json"
    save_dm_model(model, out)
    print(
        f"trained {method} (threshold {DM_METHODS[method]}%) on {len(scenarios)} scenario(s): "
        f"{model.training_meta['critical_contingencies']} critical contingencies, "
        f"{len(model.branches)} beneficial branches -> {out}"
    )
    if not model.branches:
        print("warning: training data produced no beneficial switching actions", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        net = _load_case(args.case)
        cfg = _scan_config(args)
        counts = [int(c) for c in args.workers_list.split(",")]
        if not counts or any(c < 1 for c in counts):
            raise GridError("worker counts must be positive integers")
    except (FileNotFoundError, CaseError, GridError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    reference: dict | None = None
    t_1: float | None = None
    rows = []
    for n in counts:
        cfg.workers = n
        report = run_scan(net, cfg)
        if not report.base_converged:
            print("error: base case power flow diverged", file=sys.stderr)
            return EXIT_DIVERGED
        payload = strip_timing(report_dict(report))
        if reference is None:
            reference = payload
        elif payload != reference:
            print(f"error: report at workers={n} differs from workers={counts[0]}", file=sys.stderr)
            return 4
        t_n = report.timing.t_n
        if n == 1:
            t_1 = t_n
        eta = None
        if t_1 is not None:
            eta = parallel_efficiency(RunTiming(n=n, t_1=t_1, t_n=t_n, task_count=report.timing.task_count))
        rows.append({"n": n, "t1_s": t_1, "tn_s": t_n, "efficiency": eta})
        print(f"workers={n}: {t_n:.3f}s" + (f" efficiency={eta:.3f}" if eta is not None else ""))
    prev = None
    for row in rows:
        if prev is not None and row["tn_s"] > prev * 1.05:
            print(f"warning: t_n increased from {prev:.3f}s to {row['tn_s']:.3f}s at n={row['n']}", file=sys.stderr)
        prev = row["tn_s"]
    if args.out:
        Path(args.out).write_text(canonical_json({"runs": rows, "report": reference}))
    print("reports identical across worker counts")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        net = _load_case(args.case)
    except (FileNotFoundError, CaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    import uvicorn

    from .service import create_app

    cfg = ScanConfig(workers=args.workers)
    if args.dm_model:
        cfg.dm_model = load_dm_model(args.dm_model)
    app = create_app(net, cfg, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--contingencies", help="JSON file [{id, kind, element}] overriding the auto-generated N-1 set")
    p.add_argument("--method", default="cbce", choices=sorted(METHODS), help="candidate generation method")
    p.add_argument("--top", type=int, default=5, help="switching proposals per contingency")
    p.add_argument("--vtol", type=float, default=0.005, help="voltage screening threshold, pu")
    p.add_argument("--ftol", type=float, default=5.0, help="flow screening threshold, MVA")
    p.add_argument("--k", type=int, default=100, help="list length for cbce/cbve")
    p.add_argument("--volt-weight", type=float, default=100.0, dest="volt_weight",
                   help="MVA equivalent of 1 pu voltage violation in the scalarized total")
    p.add_argument("--workers", type=int, default=1, help="worker pool size")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--dm-model", dest="dm_model", help="trained DM model file (for dm1/dm2/dm3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcts", description="AC contingency analysis with corrective transmission switching")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run the full contingency + switching pipeline")
    scan.add_argument("--case", required=True, help="MATPOWER-format case file")
    _add_engine_flags(scan)
    scan.set_defaults(func=cmd_scan)

    train = sub.add_parser("dm-train", help="harvest beneficial switching actions from training cases")
    train.add_argument("--case", required=True, action="append", help="training case file (repeatable)")
    _add_engine_flags(train)
    train.set_defaults(func=cmd_dm_train)

    bench = sub.add_parser("bench", help="run the same scan at several worker counts")
    bench.add_argument("--case", required=True, help="MATPOWER-format case file")
    bench.add_argument("--workers-list", default="1,2,4", dest="workers_list",
                       help="comma-separated worker counts, e.g. 1,2,4")
    _add_engine_flags(bench)
    bench.set_defaults(func=cmd_bench)

    serve = sub.add_parser("serve", help="HTTP service + operator console")
    serve.add_argument("--case", required=True, help="MATPOWER-format case file")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--console", help="directory with the built console bundle")
    _add_engine_flags(serve)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
