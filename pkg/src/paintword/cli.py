"""Command-line entry point: `paintword serve` and `paintword study ...`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="paintword")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the HTTP edit service")
    serve_p.add_argument("--config", type=Path, default=None,
                         help="YAML or JSON config file")

    study_p = sub.add_parser("study", help="batch studies and reports")
    study_sub = study_p.add_subparsers(dest="study_command", required=True)

    run_p = study_sub.add_parser("run", help="run a word-category edit study")
    run_p.add_argument("--spec", type=Path, required=True)
    run_p.add_argument("--out", type=Path, required=True)

    cmp_p = study_sub.add_parser("compare-optimizers",
                                 help="grad-only vs cma-then-grad at matched budgets")
    cmp_p.add_argument("--spec", type=Path, required=True)
    cmp_p.add_argument("--out", type=Path, required=True)

    render_p = study_sub.add_parser("render", help="render a stored report")
    render_p.add_argument("--report", type=Path, required=True)
    render_p.add_argument("--format", choices=("json", "csv", "markdown"),
                          default="markdown")
    render_p.add_argument("--out", type=Path, default=None,
                          help="output file (stdout when omitted)")

    args = parser.parse_args(argv)

    if args.command == "serve":
        from .service import load_config, serve
        serve(load_config(args.config))
        return 0

    from .harness import StudySpec, emit_tables, run_optimizer_comparison, \
        run_study, write_report

    if args.study_command == "run":
        report = run_study(StudySpec.load(args.spec))
        write_report(report, args.out)
        print(f"wrote report to {args.out}")
        return 0

    if args.study_command == "compare-optimizers":
        report = run_optimizer_comparison(StudySpec.load(args.spec))
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "comparison.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n")
        print(f"wrote comparison to {args.out}")
        return 0

    if args.study_command == "render":
        data = json.loads(args.report.read_text())
        text = emit_tables(data, args.format)
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
