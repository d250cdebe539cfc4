"""Command-line front end.

``timedmc check`` loads a CTMC and a DTA from JSON files, dispatches to a
verification engine, and prints one report to stdout (JSON by default).
``timedmc serve`` runs the HTTP service exposing the same engines.

Exit codes: 0 success, 1 usage error, 2 model validation error, 3 the
iterative solver failed to converge within its budget.
"""
from __future__ import annotations

import argparse
import json
import sys

from .formats import FormatError, load_ctmc, load_dta
from .grid import ConvergenceError
from .product import build_product
from .regions import build_region_graph, export_dot, simplify_region_graph
from .report import VerificationReport
from .timed import validate_dta
from .verify import OptionsError, verify

__all__ = ["build_parser", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="timedmc",
        description="Probability that a CTMC's timed paths are accepted by a "
        "deterministic timed automaton.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    check = sub.add_parser("check", help="verify a CTMC against a DTA specification")
    check.add_argument("--ctmc", required=True, metavar="FILE", help="CTMC model (JSON)")
    check.add_argument("--dta", required=True, metavar="FILE", help="DTA specification (JSON)")
    check.add_argument(
        "--method",
        choices=("auto", "single-clock", "grid", "simulate", "qualitative"),
        default="auto",
        help="verification engine (default: auto)",
    )
    check.add_argument(
        "--qualitative",
        choices=("positive", "almost-sure"),
        default=None,
        help="ask a qualitative question instead of computing the probability",
    )
    check.add_argument(
        "--acceptance",
        choices=("finite", "muller"),
        default=None,
        help="assert the acceptance kind the DTA file is expected to declare",
    )
    check.add_argument(
        "--time-bound",
        type=float,
        default=None,
        metavar="T",
        help="restrict acceptance to paths accepting within time T (finite acceptance)",
    )
    check.add_argument("--grid-step", type=float, default=0.01, metavar="H",
                       help="grid discretization step (default: 0.01)")
    check.add_argument("--epsilon", type=float, default=None, metavar="EPS",
                       help="solver tolerance (defaults to the engine's own)")
    check.add_argument("--max-sweeps", type=int, default=None, metavar="M",
                       help="grid value-iteration sweep budget")
    check.add_argument("--samples", type=int, default=100_000, metavar="N",
                       help="simulation sample count (default: 100000)")
    check.add_argument("--seed", type=int, default=0, help="simulation seed (default: 0)")
    check.add_argument("--max-steps", type=int, default=10_000, metavar="K",
                       help="simulation per-path jump budget (default: 10000)")
    check.add_argument("--confidence", type=float, default=0.99,
                       help="simulation confidence level (default: 0.99)")
    check.add_argument("--format", choices=("json", "text"), default="json",
                       help="report rendering (default: json)")
    check.add_argument("--dump-region-graph", metavar="FILE", default=None,
                       help="also write the product region graph in Graphviz dot format")

    serve = sub.add_parser("serve", help="run the HTTP verification service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _render_text(report: VerificationReport) -> str:
    lines = []
    if report.probability is not None:
        lines.append(f"probability     {report.probability:.12g}")
    if report.holds is not None:
        lines.append(f"holds           {'yes' if report.holds else 'no'}")
    lines.append(f"method          {report.method}")
    lines.append(f"acceptance      {report.acceptance}")
    if report.error_bound is not None:
        lines.append(f"error bound     {report.error_bound:g}")
    if report.confidence_interval is not None:
        lo, hi = report.confidence_interval
        level = f" at {report.confidence_level:.0%}" if report.confidence_level else ""
        lines.append(f"confidence      [{lo:.6g}, {hi:.6g}]{level}")
    if report.witness is not None:
        witness = report.witness
        text = " -> ".join(witness) if isinstance(witness, tuple) else witness
        lines.append(f"witness         {text}")
    if report.statistics:
        pairs = ", ".join(f"{k}={v:g}" for k, v in report.statistics.items())
        lines.append(f"statistics      {pairs}")
    if report.timings_ms:
        pairs = ", ".join(f"{k}={v:.1f}" for k, v in report.timings_ms.items())
        lines.append(f"timings (ms)    {pairs}")
    for warning in report.warnings:
        lines.append(f"warning         {warning}")
    return "\n".join(lines)


def _cmd_check(args: argparse.Namespace) -> int:
    c = load_ctmc(args.ctmc)
    a = load_dta(args.dta)
    if args.dump_region_graph is not None:
        validated = validate_dta(a)
        graph = simplify_region_graph(build_region_graph(build_product(c, validated.dta)))
        with open(args.dump_region_graph, "w", encoding="utf-8") as handle:
            handle.write(export_dot(graph))
    report = verify(
        c,
        a,
        method=args.method,
        qualitative=args.qualitative,
        acceptance=args.acceptance,
        time_bound=args.time_bound,
        grid_step=args.grid_step,
        epsilon=args.epsilon,
        max_sweeps=args.max_sweeps,
        samples=args.samples,
        seed=args.seed,
        max_steps=args.max_steps,
        confidence=args.confidence,
    )
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(_render_text(report))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        return _cmd_check(args)
    except OptionsError as exc:
        print(f"timedmc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"timedmc: did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (FormatError, ValueError) as exc:
        print(f"timedmc: invalid model: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"timedmc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
