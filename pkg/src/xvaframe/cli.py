"""Command-line entry point: ``xvaframe {run,verify,transition,ftp}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from xvaframe.collateral import load_hierarchy
from xvaframe.exposure import load_portfolio
from xvaframe.funding_ledger import ftp_accounting, ftp_management, load_ledger
from xvaframe.termstructures import TermCurve, curve_combine, dump_curve, load_curves
from xvaframe.verification import (
    analytic_oracles,
    check_discount_relation,
    check_invariance,
    reports_to_json,
    ResidualReport,
)
from xvaframe.xva import PerspectiveConfig, XVAReport, run_engine, transition_report

DEFAULTS = {"n_paths": 10000, "seed": 1, "grid_step": 1.0 / 52.0, "format": "json"}


@dataclass
class RunSpec:
    portfolio: Path
    curves: Path
    hierarchy: Path
    ledger: Path | None
    perspective: PerspectiveConfig
    n_paths: int
    seed: int
    grid_step: float
    out: Path | None = None
    format: str = "json"
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not self.grid_step > 0.0:
            raise ValueError("grid_step must be positive")
        for name in ("portfolio", "curves", "hierarchy", "ledger"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{name} file not found: {p}")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def build_runspec(args: argparse.Namespace) -> RunSpec:
    """Merge flags over the config file over defaults."""
    cfg = _load_config(args.config)
    run_cfg = cfg.get("run", {})

    def pick(flag, key):
        val = getattr(args, flag, None)
        if val is not None:
            return val
        if key in run_cfg:
            return run_cfg[key]
        return DEFAULTS.get(key)

    persp_doc = dict(cfg.get("perspective", {}))
    name = args.perspective or persp_doc.pop("preset", None) or "accounting"
    persp_doc.pop("preset", None)
    if name == "custom":
        if not persp_doc:
            raise ValueError("custom perspective needs a 'perspective' block in --config")
        perspective = PerspectiveConfig.from_dict(persp_doc)
    else:
        perspective = PerspectiveConfig.from_dict({"preset": name, **persp_doc})
    paths = {k: getattr(args, k, None) or run_cfg.get(k) for k in ("portfolio", "curves", "hierarchy", "ledger")}
    for k in ("portfolio", "curves", "hierarchy"):
        if not paths[k]:
            raise ValueError(f"--{k} is required")
    out = pick("out", "out")
    spec = RunSpec(
        Path(paths["portfolio"]), Path(paths["curves"]), Path(paths["hierarchy"]),
        Path(paths["ledger"]) if paths["ledger"] else None, perspective,
        int(pick("paths", "n_paths")), int(pick("seed", "seed")), float(pick("grid_step", "grid_step")),
        Path(out) if out else None, pick("format", "format"), getattr(args, "threads", None),
    )
    spec.validate()
    return spec


def _load_inputs(spec: RunSpec):
    curves = load_curves(spec.curves)
    portfolio = load_portfolio(spec.portfolio, curves)
    hierarchy = load_hierarchy(spec.hierarchy, curves)
    ledger = load_ledger(spec.ledger) if spec.ledger else None
    return curves, portfolio, hierarchy, ledger


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summary(report: XVAReport) -> str:
    rows = [("set", "V", "CVA", "DVA", "FVA", "ColVA", "V_hat")]
    for nid, b in report.netting_sets.items():
        rows.append((nid, b.v, b.cva, b.dva, b.fva, b.colva, b.v_hat))
    le = report.legal_entity
    rows.append(("legal_entity", le.v, le.cva, le.dva, le.fva, le.colva, le.v_hat))
    lines = []
    for r in rows:
        cells = [f"{r[0]:<16}"] + [f"{c:>12}" if isinstance(c, str) else f"{c:>12.4f}" for c in r[1:]]
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    spec = build_runspec(args)
    curves, portfolio, hierarchy, ledger = _load_inputs(spec)
    report = run_engine(portfolio, hierarchy, curves, ledger, spec.perspective, spec.n_paths, spec.seed,
                        spec.grid_step, threads=spec.threads)
    text = report.to_csv() if spec.format == "csv" else report.to_json()
    _write(text, spec.out)
    if spec.out is not None:
        sys.stdout.write(_summary(report))
    return 0


def cmd_verify(args) -> int:
    spec = build_runspec(args)
    curves, portfolio, hierarchy, ledger = _load_inputs(spec)
    from xvaframe.xva import resolve_curves

    rc = resolve_curves(spec.perspective, curves, ledger)
    reports: list[ResidualReport] = []
    shifted = curve_combine(rc.r_sys, TermCurve.flat(args.shift), "add", id=f"{rc.r_sys.id}_shifted",
                            kind="discount")
    reports.append(check_invariance(portfolio, hierarchy, curves, ledger, spec.perspective, rc.r_sys, rc.r_sys,
                                    spec.n_paths, spec.seed, spec.grid_step, test_id="invariance_identical_curves"))
    reports.append(check_invariance(portfolio, hierarchy, curves, ledger, spec.perspective, rc.r_sys, shifted,
                                    spec.n_paths, spec.seed, spec.grid_step, test_id="invariance_shifted_curve"))
    det = [d for d in portfolio.deals if d.kind in ("deterministic_exposure", "interest_flow_strip")]
    if det:
        reports.append(check_discount_relation(det, rc.r_sys, rc.r_f, None, test_id="discount_relation_no_default"))
        for ns in hierarchy.netting_sets:
            reports.append(check_discount_relation(det, rc.r_sys, rc.r_f, ns.hazard,
                                                   test_id=f"discount_relation_default_{ns.id}"))
    cva = analytic_oracles("constant_exposure_cva", exposure=100.0, recovery=0.4, lambda_c=0.02,
                           r_f=0.03, maturity=5.0)
    reports.append(ResidualReport("oracle_constant_exposure_cva", cva - 5.30878, 1e-4, {"value": cva}))
    _write(reports_to_json(reports), spec.out)
    return 0 if all(r.passed for r in reports) else 1


def cmd_transition(args) -> int:
    a = XVAReport.from_json(Path(args.report_a).read_text())
    b = XVAReport.from_json(Path(args.report_b).read_text())
    _write(transition_report(a, b).to_json(), Path(args.out) if args.out else None)
    return 0


def cmd_ftp(args) -> int:
    ledger = load_ledger(args.ledger)
    if args.mode == "accounting":
        curve = ftp_accounting(ledger, args.t, approximate=args.approximate)
    else:
        curve = ftp_management(ledger, args.t)
    if args.out:
        dump_curve(curve, args.out)
    else:
        sys.stdout.write(json.dumps(curve.to_dict(), indent=2) + "\n")
    return 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--portfolio")
    p.add_argument("--curves", help="curve JSON file (one document or a list) or a directory of them")
    p.add_argument("--ledger")
    p.add_argument("--hierarchy")
    p.add_argument("--perspective", choices=("accounting", "management", "custom"))
    p.add_argument("--config", help="JSON with optional 'run' and 'perspective' blocks")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--threads", type=int, help="worker cap (overrides XVA_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xvaframe", description="XVA engine with accounting and management perspectives")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="compute an XVA report")
    _add_run_flags(run)
    run.set_defaults(func=cmd_run)
    ver = sub.add_parser("verify", help="run residual checks on the inputs")
    _add_run_flags(ver)
    ver.add_argument("--shift", type=float, default=0.02, help="parallel shift of the marking curve")
    ver.set_defaults(func=cmd_verify)
    tr = sub.add_parser("transition", help="compare two reports")
    tr.add_argument("report_a")
    tr.add_argument("report_b")
    tr.add_argument("--out")
    tr.set_defaults(func=cmd_transition)
    ftp = sub.add_parser("ftp", help="estimate an FTP curve from an issuance ledger")
    ftp.add_argument("--ledger", required=True)
    ftp.add_argument("--mode", choices=("accounting", "management"), required=True)
    ftp.add_argument("--approximate", action="store_true", help="accounting: drop the CDS drift term")
    ftp.add_argument("--t", type=float, default=0.0)
    ftp.add_argument("--out")
    ftp.set_defaults(func=cmd_ftp)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
