"""Command-line front end: ``dircount analyze | psi | count | verify``.

All numbers come from the library; this module only parses arguments and
formats reports. Exit codes: 0 success, 1 usage, 2 graph validation,
3 solver or property failure, 4 exact-count budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .counting import BudgetExceeded, CountQuery, build_context, convergence_report, count_report
from .fixtures import fixture_names, load_fixture
from .graph import DirectedGraph, GraphError, LabelledGraph, base_graph, is_cyclic, load_graph
from .growth import delta_g, psi, psi_sofic, x_g
from .transfer import ConvergenceError
from .verify import run_verify

EXIT_OK, EXIT_USAGE, EXIT_GRAPH, EXIT_SOLVER, EXIT_BUDGET = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- output --------------------------------------------------------------------

def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, floats with 17 significant digits."""
    obj = _plain(obj)
    if isinstance(obj, dict):
        items = (f"{json.dumps(k)}: {dumps(v)}" for k, v in sorted(obj.items()))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"infinity"' if obj > 0 else '"-infinity"'
        return format(obj, ".17g")
    return json.dumps(obj)


def _text(obj: Any, indent: str = "") -> str:
    obj = _plain(obj)
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, dict) or (isinstance(v, list) and v and isinstance(v[0], dict)):
                lines.append(f"{indent}{k}:")
                lines.append(_text(v, indent + "  "))
            else:
                lines.append(f"{indent}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for v in obj:
            lines.append(_text(v, indent + "  ") if isinstance(v, dict) else f"{indent}- {_scalar(v)}")
            if isinstance(v, dict):
                lines.append(f"{indent}  --")
    else:
        lines.append(f"{indent}{_scalar(obj)}")
    return "\n".join(lines)


def _scalar(v: Any) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "infinity" if v > 0 else "-infinity"
        return format(v, ".10g")
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    return str(v)


def _csv(rows: list[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v: Any) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return dumps(v).strip('"')
    if isinstance(v, list):
        return ";".join(_csv_cell(x) for x in v)
    return str(v)


def emit(report: dict[str, Any], fmt: str, rows: list[dict[str, Any]] | None = None,
         columns: Sequence[str] | None = None) -> str:
    if fmt == "json":
        return dumps(report)
    if fmt == "csv":
        if rows is None:
            rows = [{"key": k, "value": v} for k, v in sorted(_plain(report).items())]
            columns = ["key", "value"]
        return _csv(rows, columns).rstrip("\n")
    return _text(report)


# --- argument helpers ----------------------------------------------------------

def _vector(text: str, length: int, what: str, integer: bool = False) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from exc
    if len(parts) != length:
        raise UsageError(f"{what} has {len(parts)} entries, expected {length}")
    vec = np.array(parts)
    if integer and not np.all(vec == np.round(vec)):
        raise UsageError(f"{what} must have integer entries")
    return vec


def _lengths(text: str) -> list[int]:
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError as exc:
        raise UsageError("--lengths must look like A:B:STEP") from exc
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or parts[2] <= 0 or parts[0] > parts[1]:
        raise UsageError("--lengths must look like A:B:STEP with A <= B and STEP > 0")
    return list(range(parts[0], parts[1] + 1, parts[2]))


def _graph(path: str) -> DirectedGraph | LabelledGraph:
    if not Path(path).exists() and path in fixture_names():
        return load_fixture(path)
    return load_graph(path)


def _mode(args, g, length: int | None = None) -> str:
    if args.mode != "auto":
        if args.mode == "sofic" and not isinstance(g, LabelledGraph):
            raise UsageError("sofic mode needs a labelled graph")
        return args.mode
    if isinstance(g, LabelledGraph) and length == g.num_labels and length != g.base.num_edges:
        return "sofic"
    return "finite"


def _vertex(g: DirectedGraph, key: str | None, flag: str) -> int:
    if key is None:
        raise UsageError(f"{flag} is required")
    try:
        return g.vertex_id(key)
    except GraphError as exc:
        raise UsageError(str(exc)) from exc


def _vector_arg(args, g, flag: str, integer: bool = False) -> tuple[np.ndarray, str]:
    text = getattr(args, flag.lstrip("-"))
    if text is None:
        raise UsageError(f"--{flag} is required")
    n_items = len([p for p in text.split(",") if p.strip()])
    mode = _mode(args, g, n_items)
    length = g.num_labels if mode == "sofic" else base_graph(g).num_edges
    return _vector(text, length, f"--{flag}", integer), mode


# --- commands --------------------------------------------------------------------

def cmd_analyze(args) -> tuple[dict, list | None, list | None]:
    g = _graph(args.graph)
    base = base_graph(g)
    ctx = build_context(g)
    cyclic = is_cyclic(base)
    report: dict[str, Any] = {
        "vertices": list(base.vertex_names),
        "edges": list(base.edge_names),
        "connected": True,
        "p": ctx.period,
        "phase": {base.vertex_names[q]: ph for q, ph in enumerate(ctx.frame.period.phase)},
        "cyclic": cyclic,
        "delta": delta_g(base),
        "x_g": None if cyclic else x_g(base),
        "r": ctx.frame.r,
        "lattice_E0": [list(v) for v in ctx.frame.lattice_E0],
        "circulations": [list(v) for v in ctx.frame.circulations],
        "normalizer": {base.vertex_names[q]: list(v) for q, v in enumerate(ctx.normalizer.R)},
    }
    if isinstance(g, LabelledGraph):
        report["labels"] = list(g.labels)
        report["s"] = ctx.sofic.s
        report["label_lattice"] = [list(v) for v in ctx.sofic.basis]
    return report, None, None


def cmd_psi(args) -> tuple[dict, list | None, list | None]:
    g = _graph(args.graph)
    vec, mode = _vector_arg(args, g, "direction")
    if not np.any(vec):
        raise UsageError("--direction must be nonzero")
    if mode == "sofic":
        prof = psi_sofic(g, vec, gtol=args.tol)
    else:
        prof = psi(base_graph(g), vec, gtol=args.tol)
    report = {
        "mode": mode,
        "direction": vec,
        "psi": prof.psi,
        "theta_star": prof.theta_star,
        "residual": prof.residual if prof.theta_star is not None else None,
        "converged": prof.converged,
        "iterations": prof.iterations,
        "boundary": prof.boundary,
        "certificate": prof.certificate,
        "notes": list(prof.notes),
    }
    if prof.label_weights is not None:
        report["label_weights"] = prof.label_weights
    return report, None, None


def cmd_count(args) -> tuple[dict, list | None, list | None]:
    g = _graph(args.graph)
    base = base_graph(g)
    q = _vertex(base, args.source, "--from")
    qq = _vertex(base, args.dest, "--to")
    columns = ["n", "exact", "predicted", "ratio", "psi", "r", "sigma"]
    if args.ray:
        vec, mode = _vector_arg(args, g, "direction")
        if args.lengths is None:
            raise UsageError("--ray needs --lengths A:B:STEP")
        rep = convergence_report(g, vec, q, qq, _lengths(args.lengths), mode=mode)
        rows = [{"n": r.n, "target": list(r.target), "exact": r.exact, "predicted": r.predicted,
                 "ratio": r.ratio, "psi": r.psi, "r": rep.dim, "sigma": r.sigma} for r in rep.rows]
        report = {
            "mode": mode, "from": base.vertex_names[q], "to": base.vertex_names[qq],
            "direction": list(rep.direction), "rows": rows, "growth_rate": rep.growth_rate,
            "growth_rate_expected": rep.growth_rate_expected, "exponent": rep.exponent,
            "exponent_expected": rep.exponent_expected,
        }
        return report, rows, columns
    vec, mode = _vector_arg(args, g, "target", integer=True)
    target = tuple(int(v) for v in vec)
    ctx = build_context(g)
    if args.lengths is not None:
        raise UsageError("--lengths goes with --ray; a fixed target determines its length")
    if args.length is not None:
        n = args.length
    elif mode == "sofic":
        n = sum(target) + int(np.sum(ctx.normalizer.offset(q, qq)))
    else:
        n = ctx.normalizer.length(target, q, qq)
    if n < 0:
        raise UsageError("target implies a negative length")
    rep = count_report(CountQuery(n=n, q=q, q_prime=qq, target=target, mode=mode), g, force=args.force)
    row = {"n": rep.n, "target": list(rep.target), "exact": rep.exact, "predicted": rep.predicted,
           "ratio": rep.ratio, "psi": rep.psi_value, "r": rep.r_or_s, "sigma": rep.sigma}
    report = {**row, "mode": mode, "from": base.vertex_names[q], "to": base.vertex_names[qq],
              "theta_star": rep.theta_star, "reasons": list(rep.reasons),
              "screened_out": bool(rep.reasons) and not args.force}
    return report, [row], columns


def cmd_verify(args) -> tuple[dict, list | None, list | None]:
    g = _graph(args.graph)
    rep = run_verify(g, seed=args.seed, cases=args.cases, lam_scale=args.perturb_lambda,
                     threads=args.threads)
    suites = [{"suite": s.name, "cases": s.cases, "failures": s.failures, "passed": s.passed,
               "reproducer": s.reproducer, "detail": s.detail} for s in rep.suites]
    report = {"seed": rep.seed, "passed": rep.passed, "suites": suites,
              "total_cases": sum(s.cases for s in rep.suites),
              "total_failures": sum(s.failures for s in rep.suites)}
    return report, suites, ["suite", "cases", "failures", "passed", "reproducer", "detail"]


COMMANDS = {"analyze": cmd_analyze, "psi": cmd_psi, "count": cmd_count, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", required=True, help="graph JSON file, or the name of a bundled fixture")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--tol", type=float, default=1e-10, help="gradient tolerance for psi solves")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--mode", choices=("auto", "finite", "sofic"), default="auto",
                        help="finite: edge-count vectors; sofic: label-count vectors")
    parser = _Parser(prog="dircount", description="Directional growth and word counts for directed graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="period, growth rate, lattices, normalizer")
    p = sub.add_parser("psi", parents=[common], help="growth indicator in one direction")
    p.add_argument("--direction", required=True, help="comma-separated vector in edge (or label) order")
    p = sub.add_parser("count", parents=[common], help="exact and predicted directional counts")
    p.add_argument("--from", dest="source")
    p.add_argument("--to", dest="dest")
    p.add_argument("--target", help="normalized occurrence (or label-count) vector")
    p.add_argument("--direction", help="direction for --ray")
    p.add_argument("--length", type=int)
    p.add_argument("--lengths", help="A:B:STEP")
    p.add_argument("--ray", action="store_true", help="convergence report along --direction")
    p.add_argument("--force", action="store_true", help="count even when the pre-screen fails")
    p = sub.add_parser("verify", parents=[common], help="randomized property sweeps")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--perturb-lambda", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tol <= 0:
            raise UsageError("--tol must be positive")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        report, rows, columns = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dircount: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphError as exc:
        print(f"dircount: invalid graph: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except BudgetExceeded as exc:
        print(f"dircount: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"dircount: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"dircount: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(emit(report, args.format, rows, columns))
    if args.command == "verify" and not report["passed"]:
        for s in report["suites"]:
            if not s["passed"]:
                print(f"FAILED {s['suite']}: {s['detail']}; reproducer: {s['reproducer']}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
