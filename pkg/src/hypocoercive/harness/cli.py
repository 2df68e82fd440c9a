"""Command line entry point: ``hypocoercive <subcommand> --scenario NAME``."""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from ..curvature import EpsilonScanFailed, epsilon_scan
from ..reports import rows_to_csv
from ..semigroup import SimulationBlowUp
from .config import load_scenario, shipped_scenarios
from .runners import run_certify, run_decay, run_identities, run_simulate

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _common(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--scenario", default=d(None), help="shipped scenario name or path to a .toml file")
    p.add_argument("--out", default=d(None), help="write the CSV here instead of stdout")
    p.add_argument("--seed", type=int, default=d(None), help="override the scenario seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for particle blocks")
    p.add_argument("--no-runtime", action="store_true", default=d(False),
                   help="leave the runtime_ms column empty (byte-stable output)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypocoercive", parents=[_common(False)],
                                     description="Curvature certificates and decay checks for kinetic diffusions.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)
    sub.add_parser("identities", parents=[common], help="exact symbolic identity checks")
    p = sub.add_parser("certify", parents=[common], help="curvature certificate and rates")
    p.add_argument("--eta", type=float, default=None, help="fixed eta instead of the scenario setting")
    sub.add_parser("scan-epsilon", parents=[common], help="(epsilon, rho) table for the auto-built Z")
    p = sub.add_parser("simulate", parents=[common], help="Euler-Maruyama ensemble moments")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--particles", type=int, default=None)
    p = sub.add_parser("decay", parents=[common], help="exact gradient, H1 and entropy decay checks")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--lambda-scale", type=float, default=1.0,
                   help="multiply every rate by this factor (values > 1 are a negative control)")
    p = sub.add_parser("report", parents=[common], help="identities + certify + decay in one CSV")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--lambda-scale", type=float, default=1.0)
    sub.add_parser("list", help="list shipped scenarios")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


def _certify_csv(result, scenario: str) -> str:
    row = result.summary_row(scenario)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(row))
    w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(shipped_scenarios()))
        return EXIT_OK
    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return EXIT_ERROR
    runtime = not args.no_runtime
    try:
        cfg = load_scenario(args.scenario)
        seed = args.seed
        if args.command == "identities":
            report, rows = run_identities(cfg, seed)
            print(report.to_text(), file=sys.stderr)
            _emit(rows_to_csv(rows, runtime), args.out)
        elif args.command == "certify":
            result = run_certify(cfg, args.eta)
            print(result.to_text(), file=sys.stderr)
            rows = result.rows
            _emit(_certify_csv(result, cfg.name), args.out)
        elif args.command == "scan-epsilon":
            spec = cfg.build_spec()
            try:
                scan = epsilon_scan(spec, cfg.epsilon_candidates, cfg.region, cfg.grid)
            except EpsilonScanFailed as exc:
                print("epsilon,rho")
                for e, r in exc.table:
                    print(f"{e:.12g},{r:.12g}")
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_FAIL
            print(f"best epsilon {scan.epsilon:g}, rho {scan.rho:.12g}", file=sys.stderr)
            _emit(scan.to_text() + "\n", args.out)
            return EXIT_OK
        elif args.command == "simulate":
            res = run_simulate(cfg, seed, args.threads, args.dt, args.T, args.particles)
            rows = res.rows
            text = "".join(f"# {h}\n" for h in res.header) + rows_to_csv(rows, runtime)
            _emit(text, args.out)
        elif args.command == "decay":
            cert = run_certify(cfg, args.eta)
            rows = run_decay(cfg, cert, args.lambda_scale, seed)
            _emit(rows_to_csv(rows, runtime), args.out)
        elif args.command == "report":
            report, rows = run_identities(cfg, seed)
            cert = run_certify(cfg, args.eta)
            rows = rows + cert.rows
            if cfg.mode == "kinetic" and cfg.Z == []:
                rows = rows + run_decay(cfg, cert, args.lambda_scale, seed)
            _emit(rows_to_csv(rows, runtime), args.out)
    except (ValueError, SimulationBlowUp) as exc:  # config, structure and certificate errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    failed = [r for r in rows if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(rows)} checks failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
