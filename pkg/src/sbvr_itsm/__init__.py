"""Structured-English business rules to SQL triggers, and ITSM service-tree analysis."""

__version__ = "0.1.0"

from .compiler import TriggerDef, compile_all, compile_rule, emit_trigger
from .diagnostics import Diagnostic, DiagnosticError, Severity, TreeError, VocabularyError
from .fines import AvailabilityForecast, FineReport, OutageEvent, compute_fines, expected_cost, optimal_sla
from .harness import Scenario, SqliteEngine, apply_script, run_scenario
from .ontology import expand_instances, to_dot, to_triples
from .schema import derive_schema, emit_ddl
from .tree import (
    CiKind,
    ConfigItem,
    MtcTerms,
    Occurrence,
    ReplaceSla,
    ServiceTree,
    SlaTerms,
    accumulated_mtc,
    effective_sla,
    find_redundant_mtcs,
    gate_change,
    load_tree,
    occurrences,
    validate_tree,
)
from .vocab import Vocabulary, canonical_render, parse_vocabulary, validate_vocabulary

__all__ = [
    "AvailabilityForecast",
    "CiKind",
    "ConfigItem",
    "Diagnostic",
    "DiagnosticError",
    "FineReport",
    "MtcTerms",
    "Occurrence",
    "OutageEvent",
    "ReplaceSla",
    "Scenario",
    "ServiceTree",
    "Severity",
    "SlaTerms",
    "SqliteEngine",
    "TreeError",
    "TriggerDef",
    "Vocabulary",
    "VocabularyError",
    "accumulated_mtc",
    "apply_script",
    "canonical_render",
    "compile_all",
    "compile_rule",
    "compute_fines",
    "derive_schema",
    "effective_sla",
    "emit_ddl",
    "emit_trigger",
    "expand_instances",
    "expected_cost",
    "find_redundant_mtcs",
    "gate_change",
    "load_tree",
    "occurrences",
    "optimal_sla",
    "parse_vocabulary",
    "run_scenario",
    "to_dot",
    "to_triples",
    "validate_tree",
    "validate_vocabulary",
]
