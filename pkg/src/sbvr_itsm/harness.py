"""Run compiled DDL and triggers on a live embedded engine.

The harness only talks to an :class:`Engine`; :class:`SqliteEngine` is the
bundled adapter. Each scenario gets a fresh in-memory database.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

from .compiler import compile_all
from .diagnostics import Diagnostic, DiagnosticError
from .schema import SchemaModel, derive_schema, quote
from .vocab import Vocabulary, parse_vocabulary


class EngineError(Exception):
    def __init__(self, message: str, statement_index: Optional[int] = None, statement: str = ""):
        self.message = message
        self.statement_index = statement_index
        self.statement = statement
        if statement_index is None:
            super().__init__(message)
        else:
            head = statement.strip().splitlines()[0] if statement.strip() else ""
            super().__init__(f"statement {statement_index + 1} ({head}): {message}")


class ScenarioError(DiagnosticError):
    pass


Snapshot = Dict[str, List[Tuple[Any, ...]]]


class Engine(Protocol):
    def execute(self, sql: str, params: Sequence[Any] = ()) -> List[Tuple[Any, ...]]: ...

    def snapshot(self) -> Snapshot: ...

    def close(self) -> None: ...


class SqliteEngine:
    """In-memory sqlite session with foreign keys enforced."""

    def __init__(self, path: str = ":memory:"):
        self.conn = sqlite3.connect(path, isolation_level=None)
        self.conn.execute("PRAGMA foreign_keys = ON")

    def execute(self, sql, params=()):
        try:
            return self.conn.execute(sql, tuple(params)).fetchall()
        except sqlite3.Error as exc:
            raise EngineError(str(exc)) from exc

    def snapshot(self) -> Snapshot:
        names = [r[0] for r in self.conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' ORDER BY name")]
        return {
            name: [tuple(row) for row in self.conn.execute(f"SELECT * FROM {quote(name)} ORDER BY rowid")]
            for name in names
        }

    def close(self) -> None:
        self.conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def split_statements(sql_text: str) -> List[str]:
    """Split a script on statement boundaries, keeping trigger bodies whole."""
    statements, buf = [], []
    for ch in sql_text:
        buf.append(ch)
        if ch == ";":
            candidate = "".join(buf)
            if sqlite3.complete_statement(candidate):
                statements.append(candidate.strip())
                buf = []
    tail = "".join(buf).strip()
    if tail:
        statements.append(tail)
    return statements


def apply_script(engine: Engine, sql_text: str) -> None:
    """Execute every statement in order; raise :class:`EngineError` on the first failure."""
    for index, statement in enumerate(split_statements(sql_text)):
        try:
            engine.execute(statement)
        except EngineError as exc:
            raise EngineError(exc.message, index, statement) from exc


# ---------------------------------------------------------------------------
# scenarios

@dataclass(frozen=True)
class SeedRow:
    table: str
    values: Mapping[str, Any]


@dataclass(frozen=True)
class UpdateAction:
    table: str
    set: Mapping[str, Any]
    where: Mapping[str, Any]

    def sql(self) -> Tuple[str, List[Any]]:
        assignments = ", ".join(f"{quote(c)}=?" for c in self.set)
        conditions = " AND ".join(f"{quote(c)}=?" for c in self.where)
        sql = f"UPDATE {quote(self.table)} SET {assignments}"
        if conditions:
            sql += f" WHERE {conditions}"
        return sql, [*self.set.values(), *self.where.values()]


@dataclass(frozen=True)
class Expectation:
    action_index: int
    succeeds: bool
    message: Optional[str] = None


@dataclass(frozen=True)
class Scenario:
    vocabulary_source: str
    seed_rows: Tuple[SeedRow, ...] = ()
    actions: Tuple[UpdateAction, ...] = ()
    expectations: Tuple[Expectation, ...] = ()


@dataclass(frozen=True)
class Outcome:
    index: int
    succeeded: bool
    message: str = ""
    # False only if an aborted action left visible changes behind
    state_preserved: bool = True

    def __str__(self) -> str:
        if self.succeeded:
            return f"{self.index} SUCCEEDED"
        return f"{self.index} ABORTED {self.message}"


def _check_references(scenario: Scenario, schema: SchemaModel) -> List[Diagnostic]:
    out = []

    def check(kind: str, i: int, table: str, columns) -> None:
        t = schema.table(table)
        if t is None:
            out.append(Diagnostic.error(f"{kind} {i}: unknown table '{table}'"))
            return
        for col in columns:
            if t.column(col) is None:
                out.append(Diagnostic.error(f"{kind} {i}: unknown column '{col}' in table '{table}'"))

    for i, row in enumerate(scenario.seed_rows):
        check("seed row", i, row.table, row.values)
    for i, action in enumerate(scenario.actions):
        check("action", i, action.table, [*action.set, *action.where])
        if not action.set:
            out.append(Diagnostic.error(f"action {i}: nothing to set"))
    for exp in scenario.expectations:
        if not 0 <= exp.action_index < len(scenario.actions):
            out.append(Diagnostic.error(f"expectation refers to missing action {exp.action_index}"))
    return out


def run_scenario(
    scenario: Scenario,
    engine_factory: Callable[[], Engine] = SqliteEngine,
    vocabulary: Optional[Vocabulary] = None,
) -> List[Outcome]:
    vocabulary = vocabulary or parse_vocabulary(scenario.vocabulary_source)
    problems = _check_references(scenario, derive_schema(vocabulary))
    if problems:
        raise ScenarioError(problems)

    engine = engine_factory()
    try:
        try:
            apply_script(engine, compile_all(vocabulary))
        except EngineError as exc:
            raise ScenarioError([Diagnostic.error(f"setup failed: {exc}")]) from exc
        for i, row in enumerate(scenario.seed_rows):
            columns = ", ".join(quote(c) for c in row.values)
            marks = ", ".join("?" for _ in row.values)
            try:
                engine.execute(f"INSERT INTO {quote(row.table)} ({columns}) VALUES ({marks})",
                               list(row.values.values()))
            except EngineError as exc:
                raise ScenarioError([Diagnostic.error(f"seed row {i} failed: {exc.message}")]) from exc

        outcomes = []
        for i, action in enumerate(scenario.actions):
            before = engine.snapshot()
            sql, params = action.sql()
            try:
                engine.execute(sql, params)
            except EngineError as exc:
                after = engine.snapshot()
                outcomes.append(Outcome(i, False, exc.message, before == after))
            else:
                outcomes.append(Outcome(i, True))
        return outcomes
    finally:
        engine.close()


def check_expectations(scenario: Scenario, outcomes: Sequence[Outcome]) -> List[str]:
    """Human-readable mismatches between expected and observed outcomes."""
    problems = []
    for exp in scenario.expectations:
        got = outcomes[exp.action_index]
        if exp.succeeds and not got.succeeded:
            problems.append(f"action {exp.action_index}: expected success, aborted with '{got.message}'")
        elif not exp.succeeds:
            if got.succeeded:
                problems.append(f"action {exp.action_index}: expected abort, succeeded")
            elif exp.message and exp.message not in got.message:
                problems.append(
                    f"action {exp.action_index}: expected message containing '{exp.message}', got '{got.message}'")
    for got in outcomes:
        if not got.state_preserved:
            problems.append(f"action {got.index}: aborted but the database changed")
    return problems


def load_scenario(text: str, vocabulary_source: str) -> Scenario:
    """Read a scenario document (JSON object with ``seed_rows``, ``actions``, ``expectations``)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([Diagnostic.error(f"invalid scenario document: {exc.msg}", exc.lineno)]) from exc
    if not isinstance(doc, dict):
        raise ScenarioError([Diagnostic.error("scenario document must be an object")])
    try:
        seeds = tuple(SeedRow(r["table"], dict(r["values"])) for r in doc.get("seed_rows", []))
        actions = tuple(
            UpdateAction(a["table"], dict(a["set"]), dict(a.get("where", {}))) for a in doc.get("actions", []))
        expectations = []
        for e in doc.get("expectations", []):
            outcome = str(e["outcome"]).lower()
            if outcome not in ("succeeds", "aborts"):
                raise ValueError(f"unknown outcome {e['outcome']!r}")
            expectations.append(Expectation(int(e["action"]), outcome == "succeeds", e.get("message")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError([Diagnostic.error(f"malformed scenario: {exc}")]) from exc
    return Scenario(vocabulary_source, seeds, actions, tuple(expectations))
