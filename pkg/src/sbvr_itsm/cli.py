"""Command-line entry point: ``sbvr-itsm <command> ...``.

Exit codes: 0 success, 1 domain diagnostics or unreadable input, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from decimal import Decimal
from typing import List, Optional, Sequence, TextIO

from . import __version__
from .compiler import compile_source
from .diagnostics import Diagnostic, DiagnosticError
from .fines import AvailabilityForecast, expected_cost, optimal_sla
from .harness import EngineError, check_expectations, load_scenario, run_scenario
from .ontology import to_dot, triples_text
from .tree import (
    SERVICE_KINDS,
    Period,
    PriorityTieError,
    accumulated_mtc,
    effective_sla,
    find_redundant_mtcs,
    load_tree,
    occurrences,
    priority_ties,
    sla_candidates,
    validate_tree,
)
from .vocab import parse_vocabulary


class _InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise _InputError(f"cannot read '{path}': {exc}") from exc


def _report(diagnostics: Sequence[Diagnostic], err: TextIO) -> None:
    for d in diagnostics:
        print(d, file=err)


def _cmd_compile(args, out: TextIO) -> int:
    vocab = parse_vocabulary(_read(args.input))
    sql = compile_source(vocab, args.emit)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(sql)
    else:
        out.write(sql)
    return 0


def _cmd_tree_validate(args, out: TextIO, err: TextIO) -> int:
    tree = load_tree(_read(args.tree))
    diagnostics = validate_tree(tree)
    if diagnostics:
        _report(diagnostics, err)
        return 1 if any(d.is_error for d in diagnostics) else 0
    out.write(f"ok: {len(tree.items)} items, {len(tree.edges)} edges, {len(tree.roots())} roots\n")
    return 0


def _cmd_tree_resolve(args, out: TextIO) -> int:
    tree = load_tree(_read(args.tree))
    if args.item not in tree.items:
        raise _InputError(f"unknown item '{args.item}'")
    for occ in occurrences(tree, args.item):
        if tree.kind(occ.target) in SERVICE_KINDS:
            try:
                sla = effective_sla(tree, occ) or "none"
            except PriorityTieError as exc:
                sla = "PRIORITY-TIE(" + ",".join(exc.tied) + ")"
            mtcs, liability = accumulated_mtc(tree, occ)
            mtc_text = ",".join(sorted(mtcs)) or "none"
            out.write(f"{occ}\tsla={sla}\tmtc={mtc_text}\tliability={liability}\n")
        else:
            out.write(f"{occ}\n")
    return 0


def _forecast(doc: dict) -> AvailabilityForecast:
    percents = {Period.parse(k): float(v) for k, v in doc.get("expected_availability_percent", {}).items()}
    return AvailabilityForecast(float(doc.get("expected_failures_per_year", 0.0)), percents)


def _cmd_tree_analyze(args, out: TextIO) -> int:
    tree = load_tree(_read(args.tree))
    lines: List[str] = []
    for occ, tied in priority_ties(tree):
        lines.append(f"priority-tie\t{occ}\t{','.join(tied)}")
    for mtc, reason in find_redundant_mtcs(tree):
        lines.append(f"redundant-mtc\t{mtc}\t{reason}")

    if args.forecast:
        try:
            doc = json.loads(_read(args.forecast))
            default = _forecast(doc)
            horizon = float(doc.get("horizon_years", 1.0))
            per_item = {k: _forecast({**doc, **v}) for k, v in doc.get("items", {}).items()}
        except (ValueError, TypeError, AttributeError) as exc:
            raise _InputError(f"invalid forecast '{args.forecast}': {exc}") from exc
        for item_id in sorted(tree.items):
            if tree.kind(item_id) not in SERVICE_KINDS:
                continue
            ids = sorted({s for occ in occurrences(tree, item_id) for s in sla_candidates(tree, occ)})
            if not ids:
                continue
            forecast = per_item.get(item_id, default)
            candidates = [(s, tree.items[s].sla) for s in ids]
            try:
                best = optimal_sla(candidates, forecast, horizon)
                cost = expected_cost(tree.items[best].sla, forecast, horizon)
            except KeyError as exc:
                raise _InputError(f"forecast for '{item_id}': {exc.args[0]}") from exc
            cost_text = Decimal(repr(cost)).quantize(Decimal("0.01"))
            lines.append(f"optimal-sla\t{item_id}\t{best}\texpected-cost={cost_text}")

    out.write("".join(line + "\n" for line in lines) if lines else "no findings\n")
    return 0


def _cmd_tree_export(args, out: TextIO) -> int:
    tree = load_tree(_read(args.tree))
    out.write(to_dot(tree) if args.format == "dot" else triples_text(tree))
    return 0


def _cmd_run(args, out: TextIO, err: TextIO) -> int:
    source = _read(args.vocab)
    vocab = parse_vocabulary(source)
    scenario = load_scenario(_read(args.scenario), source)
    outcomes = run_scenario(scenario, vocabulary=vocab)
    for outcome in outcomes:
        out.write(f"{outcome}\n")
    problems = check_expectations(scenario, outcomes)
    for p in problems:
        print(f"error {p}", file=err)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbvr-itsm",
        description="Compile structured-English rules to SQL triggers and analyze ITSM service trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a .sbvr vocabulary to DDL and triggers")
    p.add_argument("input")
    p.add_argument("--emit", choices=("ddl", "triggers", "all"), default="all")
    p.add_argument("-o", "--output")

    tree = sub.add_parser("tree", help="service tree commands")
    tsub = tree.add_subparsers(dest="tree_command", required=True)
    p = tsub.add_parser("validate", help="structural checks and priority ties")
    p.add_argument("tree")
    p = tsub.add_parser("resolve", help="effective SLA and MTCs for every occurrence of an item")
    p.add_argument("tree")
    p.add_argument("--item", required=True)
    p = tsub.add_parser("analyze", help="redundant MTCs, priority ties, optimal SLAs")
    p.add_argument("tree")
    p.add_argument("--forecast")
    p = tsub.add_parser("export", help="instance-expanded ontology view")
    p.add_argument("tree")
    p.add_argument("--format", choices=("dot", "triples"), required=True)

    p = sub.add_parser("run", help="execute a scenario against the compiled triggers")
    p.add_argument("vocab")
    p.add_argument("scenario")
    return parser


def main(argv: Optional[Sequence[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "compile":
            return _cmd_compile(args, out)
        if args.command == "run":
            return _cmd_run(args, out, err)
        if args.tree_command == "validate":
            return _cmd_tree_validate(args, out, err)
        if args.tree_command == "resolve":
            return _cmd_tree_resolve(args, out)
        if args.tree_command == "analyze":
            return _cmd_tree_analyze(args, out)
        return _cmd_tree_export(args, out)
    except DiagnosticError as exc:
        _report(exc.diagnostics, err)
        return 1
    except (_InputError, EngineError) as exc:
        print(f"error {exc}", file=err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
