"""Command-line entry point: ``mcpgate <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from typing import Sequence

from .encodings import EncodedQubitSpec
from .harness import (
    ConfigError,
    SweepPointError,
    emit_results,
    load_config,
    run_encodings_report,
    run_fig6_sweep,
    run_fig7_sweep,
    run_ideal_verification,
    run_table1_check,
)
from .harness.io import render_results

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser, default_config: str):
    p.add_argument("--config", default=default_config,
                   help=f"YAML config file or preset name (default: {default_config})")
    p.add_argument("--output", help="result file; printed to stdout when omitted")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: from config)")
    p.add_argument("--workers", type=int, help="worker processes for sweep points")
    p.add_argument("--fast", action="store_true", help="use the reduced fast-mode truncation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpgate", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-table1", help="recompute the derived parameter set")
    _common(p, "table1")

    for name, preset, text in (("fig6", "fig6", "full-model fidelity vs cavity lifetime"),
                               ("fig7", "fig7", "fidelity vs Delta_1/g_1")):
        p = sub.add_parser(name, help=text)
        _common(p, preset)
        p.add_argument("--no-convergence", action="store_true", help="skip the N+2 truncation rerun")

    p = sub.add_parser("verify-ideal", help="check the effective model against the ideal gate")
    _common(p, "verify_ideal")
    p.add_argument("-n", type=int, default=3, choices=(2, 3), help="number of qubits")
    p.add_argument("--encoding", help="encoding kind (default: from config)")
    p.add_argument("--alpha", type=float, help="cat/coherent amplitude")
    p.add_argument("--m", type=int, help="Fock level")
    p.add_argument("-k", type=int, help="schedule integer k")
    p.add_argument("-s", type=int, help="schedule odd integer s")

    p = sub.add_parser("encodings-report", help="vacuum overlap of every encoding")
    _common(p, "table1")
    p.add_argument("--truncation", type=int, default=40, help="Fock truncation N (default 40)")
    return parser


def _write(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _records_text(records: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=2, default=str) + "\n"
    cols = list(records[0]) if records else []
    lines = [",".join(cols)]
    for r in records:
        lines.append(",".join(f"{r[c]:.12g}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _cmd_table1(args) -> int:
    cfg = load_config(args.config)
    report = run_table1_check(cfg)
    for line in report.lines:
        mark = "PASS" if line.passed else "FAIL"
        print(f"{mark} {line.name:<20} computed={line.computed:.6g} quoted={line.quoted:g} "
              f"rel_err={line.rel_error:.2e}", file=sys.stderr if args.output else sys.stdout)
    if args.output:
        _write(_records_text([asdict(l) for l in report.lines], args.format or "json"), args.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    runner = run_fig6_sweep if args.command == "fig6" else run_fig7_sweep
    rows = runner(cfg, fast=args.fast, workers=args.workers,
                  convergence=False if args.no_convergence else None)
    fmt = args.format or cfg.format
    output = args.output or cfg.output
    if output:
        emit_results(rows, output, fmt)
    else:
        sys.stdout.write(render_results(rows, fmt))
    flagged = [r for r in rows if r.flagged]
    for r in flagged:
        print(f"FLAGGED {r.scenario} {r.axis}={r.value:g}: convergence delta {r.convergence_delta:.2e}",
              file=sys.stderr)
    return EXIT_FAIL if flagged else EXIT_OK


def _cmd_verify(args) -> int:
    cfg = load_config(args.config)
    enc = cfg.encoding
    if args.encoding:
        enc = EncodedQubitSpec(args.encoding, n_trunc=enc.n_trunc)
    changes = {k: v for k, v in (("alpha", args.alpha), ("m", args.m)) if v is not None}
    if changes:
        enc = replace(enc, **changes)
    if args.fast:
        enc = enc.with_truncation(cfg.fast_truncation)
    report = run_ideal_verification(args.n, enc, k=args.k, s=args.s, cfg=cfg)
    records = [{"state": lab, "fidelity": f, "norm_drift": float(d),
                "passed": int(f > 1 - report.threshold)} for lab, f, d in report.states]
    _write(_records_text(records, args.format or "csv"), args.output)
    if not report.passed:
        lab, f, _ = report.worst
        print(f"verification failed: state {lab} has fidelity {f:.10f} < 1 - {report.threshold:g}",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_encodings(args) -> int:
    rows = run_encodings_report(n_trunc=args.truncation)
    _write(_records_text([asdict(r) for r in rows], args.format or "csv"), args.output)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


COMMANDS = {
    "check-table1": _cmd_table1,
    "fig6": _cmd_sweep,
    "fig7": _cmd_sweep,
    "verify-ideal": _cmd_verify,
    "encodings-report": _cmd_encodings,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SweepPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
