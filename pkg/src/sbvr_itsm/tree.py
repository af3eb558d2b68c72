"""ITSM service trees: configuration items, inheritance and consistency checks.

A service tree is a multi-rooted DAG. RFCs are the roots; services and hosts
may be shared between several parents, so one item can be reached along
several root paths (*occurrences*). SLAs and MTCs are leaves attached to the
node they apply to and are inherited by everything below it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .diagnostics import Diagnostic, TreeError, has_errors

CENT = Decimal("0.01")


class CiKind(str, enum.Enum):
    RFC = "RFC"
    SVC = "SVC"
    HOS = "HOS"
    SLA = "SLA"
    MTC = "MTC"


ALLOWED_CHILDREN: Mapping[CiKind, FrozenSet[CiKind]] = {
    CiKind.RFC: frozenset({CiKind.SVC, CiKind.HOS, CiKind.SLA, CiKind.MTC}),
    CiKind.SVC: frozenset({CiKind.SVC, CiKind.HOS, CiKind.SLA, CiKind.MTC}),
    # a host can depend on a service, e.g. virtualization hardware or storage
    CiKind.HOS: frozenset({CiKind.SVC, CiKind.SLA, CiKind.MTC}),
    CiKind.SLA: frozenset(),
    CiKind.MTC: frozenset(),
}

SERVICE_KINDS = frozenset({CiKind.SVC, CiKind.HOS})


class Period(enum.Enum):
    DAY = ("Day", 24 * 3600)
    MONTH = ("Month", 30 * 24 * 3600)
    YEAR = ("Year", 360 * 24 * 3600)

    def __init__(self, label: str, seconds: int):
        self.label = label
        self.seconds = seconds

    @property
    def per_year(self) -> int:
        return Period.YEAR.seconds // self.seconds

    @classmethod
    def parse(cls, value) -> "Period":
        if isinstance(value, Period):
            return value
        for p in cls:
            if p.label.lower() == str(value).lower():
                return p
        raise ValueError(f"unknown period {value!r} (expected Day, Month or Year)")


@dataclass(frozen=True)
class AvailabilityClause:
    period: Period
    min_percent: Decimal
    fine: Decimal

    def __post_init__(self):
        if not Decimal(0) <= self.min_percent <= Decimal(100):
            raise ValueError(f"min_percent {self.min_percent} outside 0..100")
        if self.fine < 0:
            raise ValueError("availability fine must be >= 0")


@dataclass(frozen=True)
class SlaTerms:
    priority: int
    first_failure_fine: Decimal = Decimal(0)
    concurrent_failure_fine: Decimal = Decimal(0)
    availability_clauses: Tuple[AvailabilityClause, ...] = ()

    def __post_init__(self):
        if self.first_failure_fine < 0 or self.concurrent_failure_fine < 0:
            raise ValueError("fines must be >= 0")
        periods = [c.period for c in self.availability_clauses]
        if len(periods) != len(set(periods)):
            raise ValueError("at most one availability clause per period kind")

    @property
    def total_fines(self) -> Decimal:
        return (self.first_failure_fine + self.concurrent_failure_fine
                + sum((c.fine for c in self.availability_clauses), Decimal(0)))


@dataclass(frozen=True)
class MtcTerms:
    liability: Decimal

    def __post_init__(self):
        if self.liability < 0:
            raise ValueError("liability must be >= 0")


@dataclass(frozen=True)
class ConfigItem:
    id: str
    kind: CiKind
    label: str = ""
    sla: Optional[SlaTerms] = None
    mtc: Optional[MtcTerms] = None


@dataclass(frozen=True)
class Occurrence:
    """One root-to-item walk; ``path[0]`` is an RFC."""

    path: Tuple[str, ...]

    @property
    def target(self) -> str:
        return self.path[-1]

    def __str__(self) -> str:
        return " > ".join(self.path)


class PriorityTieError(ValueError):
    def __init__(self, occurrence: Occurrence, tied: Sequence[str]):
        self.occurrence = occurrence
        self.tied = tuple(tied)
        super().__init__(f"priority tie between {', '.join(self.tied)} on {occurrence}")


@dataclass(frozen=True, eq=False)
class ServiceTree:
    items: Mapping[str, ConfigItem] = field(default_factory=dict)
    edges: FrozenSet[Tuple[str, str]] = frozenset()

    @classmethod
    def build(cls, items: Iterable[ConfigItem], edges: Iterable[Tuple[str, str]]) -> "ServiceTree":
        return cls({i.id: i for i in items}, frozenset(edges))

    def __eq__(self, other):
        if not isinstance(other, ServiceTree):
            return NotImplemented
        return dict(self.items) == dict(other.items) and self.edges == other.edges

    @cached_property
    def _children(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {i: [] for i in self.items}
        for p, c in sorted(self.edges):
            out.setdefault(p, []).append(c)
        return out

    @cached_property
    def _parents(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {i: [] for i in self.items}
        for p, c in sorted(self.edges):
            out.setdefault(c, []).append(p)
        return out

    @cached_property
    def _paths(self) -> Dict[str, List[Tuple[str, ...]]]:
        return {}

    def children(self, item_id: str) -> List[str]:
        return self._children.get(item_id, [])

    def parents(self, item_id: str) -> List[str]:
        return self._parents.get(item_id, [])

    def kind(self, item_id: str) -> CiKind:
        return self.items[item_id].kind

    def roots(self) -> List[str]:
        return sorted(i for i, item in self.items.items() if item.kind is CiKind.RFC)

    def attached(self, node_id: str, kind: CiKind) -> List[str]:
        return [c for c in self.children(node_id) if self.items[c].kind is kind]

    def root_paths(self, item_id: str) -> List[Tuple[str, ...]]:
        """Every walk from an RFC down to ``item_id``; requires an acyclic tree."""
        cache = self._paths
        if item_id in cache:
            return cache[item_id]
        if self.items[item_id].kind is CiKind.RFC:
            result = [(item_id,)]
        else:
            result = [p + (item_id,) for parent in self.parents(item_id) for p in self.root_paths(parent)]
        result.sort()
        cache[item_id] = result
        return result


# ---------------------------------------------------------------------------
# structural validation

def _find_cycle(tree: ServiceTree) -> Optional[List[str]]:
    white, grey, black = 0, 1, 2
    colour = {i: white for i in tree.items}
    for start in sorted(tree.items):
        if colour[start] != white:
            continue
        stack = [(start, iter(tree.children(start)))]
        trail = [start]
        colour[start] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = black
                stack.pop()
                trail.pop()
            elif nxt not in colour:
                continue
            elif colour[nxt] == grey:
                return trail[trail.index(nxt):] + [nxt]
            elif colour[nxt] == white:
                colour[nxt] = grey
                stack.append((nxt, iter(tree.children(nxt))))
                trail.append(nxt)
    return None


def structural_diagnostics(tree: ServiceTree) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    for item_id, item in sorted(tree.items.items()):
        if item.id != item_id:
            out.append(Diagnostic.error(f"item key '{item_id}' does not match its id '{item.id}'"))
        if item.kind is CiKind.SLA and item.sla is None:
            out.append(Diagnostic.error(f"SLA '{item_id}' has no sla terms"))
        if item.kind is not CiKind.SLA and item.sla is not None:
            out.append(Diagnostic.error(f"{item.kind.value} '{item_id}' may not carry sla terms"))
        if item.kind is CiKind.MTC and item.mtc is None:
            out.append(Diagnostic.error(f"MTC '{item_id}' has no mtc terms"))
        if item.kind is not CiKind.MTC and item.mtc is not None:
            out.append(Diagnostic.error(f"{item.kind.value} '{item_id}' may not carry mtc terms"))

    for p, c in sorted(tree.edges):
        if p not in tree.items or c not in tree.items:
            missing = p if p not in tree.items else c
            out.append(Diagnostic.error(f"edge '{p}' -> '{c}' refers to unknown item '{missing}'"))
            continue
        pk, ck = tree.kind(p), tree.kind(c)
        if not ALLOWED_CHILDREN[pk]:
            out.append(Diagnostic.error(f"{pk.value} may not have children ('{p}' -> '{c}')"))
        elif ck not in ALLOWED_CHILDREN[pk]:
            out.append(Diagnostic.error(f"illegal edge {pk.value} -> {ck.value} ('{p}' -> '{c}')"))

    cycle = _find_cycle(tree)
    if cycle:
        out.append(Diagnostic.error("cycle detected: " + " -> ".join(cycle)))

    for item_id, item in sorted(tree.items.items()):
        if item.kind is not CiKind.RFC and not tree.parents(item_id):
            out.append(Diagnostic.error(f"{item.kind.value} '{item_id}' has no parent; only RFCs may be roots"))
    return out


def priority_ties(tree: ServiceTree) -> List[Tuple[Occurrence, Tuple[str, ...]]]:
    """Occurrences of services/hosts whose top-priority SLA is not unique."""
    ties = []
    for item_id in sorted(tree.items):
        if tree.kind(item_id) not in SERVICE_KINDS:
            continue
        for path in tree.root_paths(item_id):
            occ = Occurrence(path)
            tied = _top_candidates(tree, occ)
            if len(tied) > 1:
                ties.append((occ, tied))
    return ties


def validate_tree(tree: ServiceTree) -> List[Diagnostic]:
    out = structural_diagnostics(tree)
    if has_errors(out):
        return out
    for occ, tied in priority_ties(tree):
        out.append(Diagnostic.error(
            f"PriorityTie on {occ}: {', '.join(tied)} share the highest priority", code="PriorityTie"))
    return out


# ---------------------------------------------------------------------------
# queries

def occurrences(tree: ServiceTree, item_id: str) -> List[Occurrence]:
    if item_id not in tree.items:
        raise KeyError(f"unknown item '{item_id}'")
    return [Occurrence(p) for p in tree.root_paths(item_id)]


def _check_occurrence(tree: ServiceTree, occ: Occurrence) -> None:
    path = occ.path
    if not path or any(i not in tree.items for i in path):
        raise KeyError(f"unknown occurrence {occ}")
    if tree.kind(path[0]) is not CiKind.RFC:
        raise ValueError(f"occurrence {occ} does not start at an RFC")
    for p, c in zip(path, path[1:]):
        if (p, c) not in tree.edges:
            raise ValueError(f"occurrence {occ} is not a walk: no edge '{p}' -> '{c}'")


def sla_candidates(tree: ServiceTree, occ: Occurrence) -> List[str]:
    _check_occurrence(tree, occ)
    return sorted({s for node in occ.path for s in tree.attached(node, CiKind.SLA)})


def _top_candidates(tree: ServiceTree, occ: Occurrence) -> Tuple[str, ...]:
    candidates = {s for node in occ.path for s in tree.attached(node, CiKind.SLA)}
    if not candidates:
        return ()
    best = max(tree.items[s].sla.priority for s in candidates)
    return tuple(sorted(s for s in candidates if tree.items[s].sla.priority == best))


def effective_sla(tree: ServiceTree, occ: Occurrence) -> Optional[str]:
    """The single inherited SLA with the highest priority, or ``None``.

    Raises :class:`PriorityTieError` when the maximum is shared.
    """
    _check_occurrence(tree, occ)
    if tree.kind(occ.target) not in SERVICE_KINDS:
        raise ValueError(f"'{occ.target}' is not a service or host")
    top = _top_candidates(tree, occ)
    if len(top) > 1:
        raise PriorityTieError(occ, top)
    return top[0] if top else None


def accumulated_mtc(tree: ServiceTree, occ: Occurrence) -> Tuple[FrozenSet[str], Decimal]:
    _check_occurrence(tree, occ)
    mtcs = frozenset(m for node in occ.path for m in tree.attached(node, CiKind.MTC))
    total = sum((tree.items[m].mtc.liability for m in mtcs), Decimal(0))
    return mtcs, total


def item_mtc_liability(tree: ServiceTree, item_id: str) -> Tuple[FrozenSet[str], Decimal]:
    """Per-item view: MTCs valid on any occurrence of the item, each counted once."""
    mtcs: FrozenSet[str] = frozenset()
    for occ in occurrences(tree, item_id):
        mtcs |= accumulated_mtc(tree, occ)[0]
    return mtcs, sum((tree.items[m].mtc.liability for m in mtcs), Decimal(0))


def mtc_coverage(tree: ServiceTree) -> Dict[str, FrozenSet[Tuple[str, ...]]]:
    """For each MTC, the service/host occurrences whose accumulated set contains it."""
    cover: Dict[str, set] = {m: set() for m, item in tree.items.items() if item.kind is CiKind.MTC}
    for item_id, item in tree.items.items():
        if item.kind not in SERVICE_KINDS:
            continue
        for occ in occurrences(tree, item_id):
            for m in accumulated_mtc(tree, occ)[0]:
                cover[m].add(occ.path)
    return {m: frozenset(paths) for m, paths in cover.items()}


def find_redundant_mtcs(tree: ServiceTree) -> List[Tuple[str, str]]:
    """MTCs whose whole coverage is also covered by one other MTC.

    Two MTCs with identical coverage are both reported; which one to discharge
    is a business decision.
    """
    cover = mtc_coverage(tree)
    out = []
    for m in sorted(cover):
        mine = cover[m]
        for other in sorted(cover):
            if other != m and mine <= cover[other]:
                if mine:
                    reason = f"all {len(mine)} covered occurrences are also covered by {other}"
                else:
                    reason = f"covers no service or host occurrence ({other} exists)"
                out.append((m, reason))
                break
    return out


# ---------------------------------------------------------------------------
# change gating

@dataclass(frozen=True)
class ReplaceSla:
    node_id: str
    old_sla_id: str
    new_terms: SlaTerms


@dataclass(frozen=True)
class GateVerdict:
    accepted: bool
    rule: Optional[str] = None
    detail: str = ""


def apply_change(tree: ServiceTree, change: ReplaceSla) -> Tuple[ServiceTree, str]:
    """A new tree where ``node -> old SLA`` is replaced by ``node -> new SLA``.

    Other nodes sharing the old SLA keep it. Returns the tree and the new SLA's id.
    """
    if change.node_id not in tree.items:
        raise KeyError(f"unknown node '{change.node_id}'")
    if change.old_sla_id not in tree.items or tree.kind(change.old_sla_id) is not CiKind.SLA:
        raise KeyError(f"unknown SLA '{change.old_sla_id}'")
    if (change.node_id, change.old_sla_id) not in tree.edges:
        raise ValueError(f"SLA '{change.old_sla_id}' is not attached to '{change.node_id}'")
    new_id = change.old_sla_id + "'"
    while new_id in tree.items:
        new_id += "'"
    old = tree.items[change.old_sla_id]
    items = dict(tree.items)
    items[new_id] = ConfigItem(new_id, CiKind.SLA, old.label, sla=change.new_terms)
    edges = set(tree.edges)
    edges.discard((change.node_id, change.old_sla_id))
    edges.add((change.node_id, new_id))
    if not any(c == change.old_sla_id for _, c in edges):
        del items[change.old_sla_id]
    return ServiceTree(items, frozenset(edges)), new_id


def gate_change(tree: ServiceTree, change: ReplaceSla) -> GateVerdict:
    """Accept an SLA replacement only if it lowers total fines and adds no priority tie."""
    updated, new_id = apply_change(tree, change)
    old_total = tree.items[change.old_sla_id].sla.total_fines
    new_total = change.new_terms.total_fines
    if not new_total < old_total:
        return GateVerdict(False, "NR1", f"total fines {new_total} are not less than {old_total}")

    def tie_keys(t: ServiceTree, rename: Dict[str, str]):
        return {(occ.path, tuple(sorted(rename.get(s, s) for s in tied))) for occ, tied in priority_ties(t)}

    before = tie_keys(tree, {})
    after = tie_keys(updated, {new_id: change.old_sla_id})
    introduced = sorted(after - before)
    if introduced:
        path, tied = introduced[0]
        return GateVerdict(False, "PriorityTie",
                           f"{' > '.join(path)}: {', '.join(tied)} would share the highest priority")
    return GateVerdict(True)


# ---------------------------------------------------------------------------
# file format

def _money(value, where: str, problems: List[Diagnostic]) -> Decimal:
    try:
        amount = Decimal(str(value))
    except (InvalidOperation, ValueError):
        problems.append(Diagnostic.error(f"{where}: {value!r} is not a decimal amount"))
        return Decimal(0)
    if not amount.is_finite() or amount < 0:
        problems.append(Diagnostic.error(f"{where}: amount must be a finite value >= 0"))
        return Decimal(0)
    if amount != amount.quantize(CENT):
        problems.append(Diagnostic.error(f"{where}: amount {value} has more than 2 fraction digits"))
    return amount.quantize(CENT)


def _sla_terms(doc, where: str, problems: List[Diagnostic]) -> Optional[SlaTerms]:
    if not isinstance(doc, dict):
        problems.append(Diagnostic.error(f"{where}: sla must be an object"))
        return None
    try:
        priority = doc["priority"]
        if isinstance(priority, bool) or not isinstance(priority, int):
            raise ValueError("priority must be an integer")
        clauses = []
        for j, c in enumerate(doc.get("availability_clauses", [])):
            clauses.append(AvailabilityClause(
                Period.parse(c["period"]),
                Decimal(str(c["min_percent"])),
                _money(c["fine"], f"{where} clause {j} fine", problems)))
        return SlaTerms(
            priority,
            _money(doc.get("first_failure_fine", 0), f"{where} first_failure_fine", problems),
            _money(doc.get("concurrent_failure_fine", 0), f"{where} concurrent_failure_fine", problems),
            tuple(clauses))
    except KeyError as exc:
        problems.append(Diagnostic.error(f"{where}: missing field {exc}"))
    except (ValueError, InvalidOperation, TypeError) as exc:
        problems.append(Diagnostic.error(f"{where}: {exc}"))
    return None


def parse_tree_document(doc) -> Tuple[ServiceTree, List[Diagnostic]]:
    problems: List[Diagnostic] = []
    if not isinstance(doc, dict):
        return ServiceTree(), [Diagnostic.error("tree document must be an object")]
    items: Dict[str, ConfigItem] = {}
    for n, raw in enumerate(doc.get("items", [])):
        where = f"item {n}"
        if not isinstance(raw, dict) or "id" not in raw or "kind" not in raw:
            problems.append(Diagnostic.error(f"{where}: needs 'id' and 'kind'"))
            continue
        item_id = str(raw["id"])
        where = f"item '{item_id}'"
        try:
            kind = CiKind(str(raw["kind"]).upper())
        except ValueError:
            problems.append(Diagnostic.error(f"{where}: unknown kind {raw['kind']!r}"))
            continue
        if item_id in items:
            problems.append(Diagnostic.error(f"duplicate id '{item_id}'"))
            continue
        sla = mtc = None
        if "sla" in raw:
            sla = _sla_terms(raw["sla"], where, problems)
        if "mtc" in raw:
            m = raw["mtc"]
            if isinstance(m, dict) and "liability" in m:
                mtc = MtcTerms(_money(m["liability"], f"{where} liability", problems))
            else:
                problems.append(Diagnostic.error(f"{where}: mtc needs a 'liability'"))
        items[item_id] = ConfigItem(item_id, kind, str(raw.get("label", item_id)), sla, mtc)

    edges = set()
    for n, raw in enumerate(doc.get("edges", [])):
        if not isinstance(raw, dict) or "parent" not in raw or "child" not in raw:
            problems.append(Diagnostic.error(f"edge {n}: needs 'parent' and 'child'"))
            continue
        edge = (str(raw["parent"]), str(raw["child"]))
        if edge in edges:
            problems.append(Diagnostic.warning(f"duplicate edge '{edge[0]}' -> '{edge[1]}'"))
        edges.add(edge)
    return ServiceTree(items, frozenset(edges)), problems


def load_tree(document: str) -> ServiceTree:
    """Parse and structurally validate a tree document.

    Raises :class:`TreeError` listing every violation. Priority ties are not
    checked here; see :func:`validate_tree`.
    """
    try:
        doc = json.loads(document, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise TreeError([Diagnostic.error(f"invalid tree document: {exc.msg}", exc.lineno)]) from exc
    tree, problems = parse_tree_document(doc)
    if not has_errors(problems):
        problems += structural_diagnostics(tree)
    if has_errors(problems):
        raise TreeError(problems)
    return tree


def _fmt_money(d: Decimal) -> str:
    return str(d.quantize(CENT))


def tree_to_document(tree: ServiceTree) -> dict:
    items = []
    for item_id in sorted(tree.items):
        item = tree.items[item_id]
        raw = {"id": item.id, "kind": item.kind.value, "label": item.label}
        if item.sla is not None:
            raw["sla"] = {
                "priority": item.sla.priority,
                "first_failure_fine": _fmt_money(item.sla.first_failure_fine),
                "concurrent_failure_fine": _fmt_money(item.sla.concurrent_failure_fine),
                "availability_clauses": [
                    {"period": c.period.label, "min_percent": str(c.min_percent), "fine": _fmt_money(c.fine)}
                    for c in item.sla.availability_clauses
                ],
            }
        if item.mtc is not None:
            raw["mtc"] = {"liability": _fmt_money(item.mtc.liability)}
        items.append(raw)
    edges = [{"parent": p, "child": c} for p, c in sorted(tree.edges)]
    return {"items": items, "edges": edges}


def dump_tree(tree: ServiceTree) -> str:
    return json.dumps(tree_to_document(tree), indent=2) + "\n"
