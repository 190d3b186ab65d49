"""Command-line front end: ``rru simulate | mc | power | check``.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import reports
from ._jit import worker_count
from .acceptance import Battery, default_manifest_path, list_criteria, load_manifest
from .errors import ConfigError, UsageError
from .model import load_config
from .montecarlo import StudyPlan, h0_suite, h1_suite, power_curve, run_study
from .urn_engine import run_trial

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


def _parse_effects(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--effects must be a comma-separated list of numbers, got {text!r}") from None


def _write_manifest(out: Path, command: str, config_path, plan: dict, files: dict, version=None):
    doc = {
        "command": command,
        "config_path": None if config_path is None else str(config_path),
        "plan": plan,
        "tolerance_version": version if version is not None else load_manifest()["tolerance_version"],
        "output_dir": str(out),
        "files": dict(sorted(files.items())),
    }
    reports.write_text(out / "run_manifest.json", reports.dumps_json(doc))


def _load(path, alpha=None):
    cfg = load_config(path)
    if alpha is not None:
        cfg = cfg.replace(alpha=alpha)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args.config, args.alpha)
    path = run_trial(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "trajectory.csv": reports.write_text(out / "trajectory.csv", reports.trajectory_csv(path)),
        "summary.json": reports.write_text(out / "summary.json", reports.dumps_json(reports.trajectory_summary(path))),
    }
    _write_manifest(out, "simulate", args.config, {"config": cfg.to_dict(), "seed": args.seed}, files)
    print(f"simulated {len(path)} allocations -> {out}")
    return EXIT_OK


def _study(plan: StudyPlan):
    t = plan.truth
    if t.m_B > t.m_W > 0 and len(plan.cfg.checkpoints) >= 2:
        result = h1_suite(plan)
        return result.report, result.checks
    if math.isclose(t.m_B, t.m_W, rel_tol=0.0, abs_tol=1e-12) and t.m_W > 0:
        result = h0_suite(plan)
        return result.report, result.checks
    return run_study(plan), None


def cmd_mc(args) -> int:
    cfg = _load(args.config, args.alpha)
    plan = StudyPlan(cfg, args.replicates, args.seed)
    report, checks = _study(plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "study.csv": reports.write_text(out / "study.csv", reports.study_csv(report)),
        "aggregate.json": reports.write_text(
            out / "aggregate.json", reports.dumps_json(reports.study_aggregate(report, checks))
        ),
    }
    plan_doc = {"config": cfg.to_dict(), "replicates": plan.replicates, "base_seed": plan.base_seed, "alpha": plan.alpha}
    _write_manifest(out, "mc", args.config, plan_doc, files)
    print(f"ran {plan.replicates} replicates -> {out}")
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = _load(args.config, args.alpha)
    effects = _parse_effects(args.effects)
    plan = StudyPlan(cfg, args.replicates, args.seed)
    rows = power_curve(plan, effects)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"power.csv": reports.write_text(out / "power.csv", reports.power_csv(rows))}
    plan_doc = {
        "config": cfg.to_dict(), "replicates": plan.replicates, "base_seed": plan.base_seed,
        "alpha": plan.alpha, "effects": sorted(effects),
    }
    _write_manifest(out, "power", args.config, plan_doc, files)
    for row in rows:
        print(f"effect={row['effect']:g} power={row['empirical_power']:.4f} NW_share={row['mean_NW_share']:.4f}")
    return EXIT_OK


def cmd_check(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.list:
        for line in list_criteria(manifest):
            print(line)
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    battery = Battery(manifest, out, workers=worker_count())
    results = battery.run(echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    verdict = {
        "tolerance_version": manifest["tolerance_version"],
        "criteria": [
            {
                "id": r.id, "title": r.title, "passed": r.passed, "error": r.error,
                "checks": [
                    {"metric": c.metric, "op": c.op, "bound": c.bound, "value": c.value, "passed": c.passed}
                    for c in r.checks
                ],
            }
            for r in results
        ],
    }
    files = dict(battery.checksums)
    files["verdict.json"] = reports.write_text(out / "verdict.json", reports.dumps_json(verdict))
    manifest_path = args.manifest or default_manifest_path()
    _write_manifest(
        out, "check", None, {"manifest": str(manifest_path), "workers": battery.workers}, files,
        version=manifest["tolerance_version"],
    )
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rru", description="Randomly reinforced urn trial simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trial and write its trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="replicated study with per-replicate CSV and aggregate JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0, help="base seed of the study")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("power", help="empirical power against a grid of effect sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--effects", required=True, help="comma-separated mean shifts of arm B over arm W")
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("check", help="run the acceptance battery")
    p.add_argument("--out", default="acceptance_out")
    p.add_argument("--manifest", help="tolerance manifest (defaults to the packaged one)")
    p.add_argument("--list", action="store_true", help="list the criteria without running them")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for msg in exc.violations:
            print(f"  - {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
