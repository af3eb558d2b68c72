"""Compile normative rules into BEFORE UPDATE guard triggers.

The emitted layout is frozen: lowercase ``from``/``where``, no space around
the operator between the two subqueries, and ``WHEN NOT`` so the trigger
aborts exactly when the obligation does not hold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple

from .diagnostics import VocabularyError
from .schema import SchemaModel, derive_schema, emit_ddl, id_column, link_table_name, quote
from .vocab import LinkScope, NormativeRule, NumericLiteral, Vocabulary, validate_vocabulary

_PLAIN_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class TriggerDef:
    name: str
    update_column: str
    on_table: str
    # the positive obligation, one entry per emitted line
    condition_lines: Tuple[str, ...]
    timing: str = "BEFORE UPDATE"

    @property
    def condition_sql(self) -> str:
        return "".join(self.condition_lines)

    @property
    def abort_message(self) -> str:
        return f"Requirement of {self.name} not met"


def _row_ref(row: str, column: str) -> str:
    if _PLAIN_IDENTIFIER.match(column):
        return f"{row}.{column}"
    return f"{row}.{quote(column)}"


def _subquery(attribute: str, table: str, row: str) -> str:
    return f"(SELECT {quote(attribute)} from {quote(table)} where id={_row_ref(row, id_column(table))})"


def _literal(rule: NormativeRule) -> str:
    assert isinstance(rule.rhs, NumericLiteral)
    return str(rule.rhs.value)


def compile_rule(rule: NormativeRule, schema: SchemaModel) -> TriggerDef:
    subject = rule.scope.subject
    entity = schema.table(subject)
    if entity is None or entity.column(rule.attribute) is None:
        raise CompileError(f"{rule.name}: attribute '{rule.attribute}' of '{subject}' is not in the schema")
    op = rule.comparison.sql

    if isinstance(rule.scope, LinkScope):
        a, b = rule.scope.subject, rule.scope.object
        on_table = None
        for name in (link_table_name(a, b), link_table_name(b, a)):
            if schema.table(name) is not None:
                on_table = name
                break
        if on_table is None:
            raise CompileError(f"{rule.name}: no link table between '{a}' and '{b}'")
        new_side = _subquery(rule.attribute, subject, "new")
        if isinstance(rule.rhs, NumericLiteral):
            lines: Tuple[str, ...] = (f"{new_side}{op}{_literal(rule)}",)
        else:
            lines = (f"{new_side}{op}", _subquery(rule.attribute, subject, "old"))
        return TriggerDef(rule.name, id_column(subject), on_table, lines)

    new_side = f"new.{quote(rule.attribute)}"
    if isinstance(rule.rhs, NumericLiteral):
        rhs = _literal(rule)
    else:
        rhs = f"old.{quote(rule.attribute)}"
    return TriggerDef(rule.name, rule.attribute, subject, (f"{new_side}{op}{rhs}",))


def emit_trigger(t: TriggerDef) -> str:
    lines = [
        f"CREATE TRIGGER {quote(t.name)} {t.timing} OF {quote(t.update_column)}",
        f"ON {quote(t.on_table)}",
        "WHEN NOT",
        *t.condition_lines,
        "BEGIN",
        f"SELECT RAISE(ABORT, '{t.abort_message}');",
        "END;",
    ]
    return "\n".join(lines)


def compile_triggers(v: Vocabulary, schema: SchemaModel = None) -> str:
    schema = schema or derive_schema(v)
    return "".join(emit_trigger(compile_rule(r, schema)) + "\n" for r in v.rules)


def _check(v: Vocabulary) -> None:
    errors = [d for d in validate_vocabulary(v) if d.is_error]
    if errors:
        raise VocabularyError(errors)


def compile_all(v: Vocabulary) -> str:
    """DDL for the derived schema followed by one trigger per rule."""
    return compile_source(v, "all")


def compile_source(v: Vocabulary, emit: str = "all") -> str:
    """Entry point used by the CLI; ``emit`` is ``ddl``, ``triggers`` or ``all``."""
    _check(v)
    schema = derive_schema(v)
    if emit == "ddl":
        return emit_ddl(schema)
    if emit == "triggers":
        return compile_triggers(v, schema)
    if emit == "all":
        return emit_ddl(schema) + compile_triggers(v, schema)
    raise ValueError(f"unknown emit target {emit!r}")
