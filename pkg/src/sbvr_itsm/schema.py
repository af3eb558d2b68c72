"""Relational schema derived from a vocabulary by naming convention.

Terms that are objects of ``has`` become columns of their subject's table;
every other term becomes a table with an ``id`` column; every ``is linked to``
fact becomes a ``<A>-is_linked_to-<B>`` table of two foreign keys.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .vocab import FactKind, Vocabulary


class SqlType(enum.Enum):
    INTEGER = "INTEGER"
    NUMERIC = "NUMERIC"
    TEXT = "TEXT"


@dataclass(frozen=True)
class IdColumn:
    pass


@dataclass(frozen=True)
class AttributeColumn:
    pass


@dataclass(frozen=True)
class ForeignKey:
    target_table: str


ColumnRole = Union[IdColumn, AttributeColumn, ForeignKey]


@dataclass(frozen=True)
class ColumnDef:
    name: str
    sql_type: SqlType
    role: ColumnRole


@dataclass(frozen=True)
class EntityTable:
    term: str


@dataclass(frozen=True)
class LinkTable:
    subject: str
    object: str


@dataclass(frozen=True)
class TableDef:
    name: str
    kind: Union[EntityTable, LinkTable]
    columns: Tuple[ColumnDef, ...]

    def column(self, name: str) -> Optional[ColumnDef]:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass(frozen=True)
class SchemaModel:
    tables: Tuple[TableDef, ...]
    vocabulary: Optional[Vocabulary] = None

    def table(self, name: str) -> Optional[TableDef]:
        for t in self.tables:
            if t.name == name:
                return t
        return None


def id_column(term: str) -> str:
    return f"{term}_id"


def link_table_name(subject: str, obj: str) -> str:
    return f"{subject}-is_linked_to-{obj}"


def derive_schema(v: Vocabulary) -> SchemaModel:
    attribute_terms = v.attribute_terms()
    tables = []
    for term in v.terms:
        if term.name in attribute_terms:
            continue
        columns = [ColumnDef("id", SqlType.INTEGER, IdColumn())]
        columns += [
            ColumnDef(attr, SqlType.NUMERIC, AttributeColumn()) for attr in v.attributes_of(term.name)
        ]
        tables.append(TableDef(term.name, EntityTable(term.name), tuple(columns)))
    for fact in v.fact_types:
        if fact.kind is not FactKind.LINK:
            continue
        columns = (
            ColumnDef(id_column(fact.subject), SqlType.INTEGER, ForeignKey(fact.subject)),
            ColumnDef(id_column(fact.object), SqlType.INTEGER, ForeignKey(fact.object)),
        )
        tables.append(TableDef(link_table_name(fact.subject, fact.object),
                               LinkTable(fact.subject, fact.object), columns))
    return SchemaModel(tuple(tables), v)


def quote(identifier: str) -> str:
    return '"' + identifier.replace('"', '""') + '"'


def _column_sql(col: ColumnDef) -> str:
    sql = f"    {quote(col.name)} {col.sql_type.value}"
    if isinstance(col.role, IdColumn):
        sql += " PRIMARY KEY"
    elif isinstance(col.role, ForeignKey):
        sql += f" REFERENCES {quote(col.role.target_table)}({quote('id')})"
    return sql


def _table_sql(table: TableDef) -> str:
    parts = [_column_sql(c) for c in table.columns]
    if isinstance(table.kind, LinkTable):
        parts.append("    UNIQUE (" + ", ".join(quote(c.name) for c in table.columns) + ")")
    return f"CREATE TABLE {quote(table.name)} (\n" + ",\n".join(parts) + "\n);"


def emit_ddl(s: SchemaModel) -> str:
    """One ``CREATE TABLE`` per table, each followed by a newline."""
    return "".join(_table_sql(t) + "\n" for t in s.tables)
