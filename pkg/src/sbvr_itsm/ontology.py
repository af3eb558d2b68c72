"""Instance-expanded views of a service tree as triples and DOT.

Every occurrence of an item becomes its own instance ``<id>#<k>`` (k counts
the item's occurrences in path order), which turns the shared-node DAG into
a forest that reads like an ordinary tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

from .tree import CiKind, ServiceTree

LINKED = "is linked to"
HAS = "has"

SHAPES = {
    CiKind.RFC: "box",
    CiKind.SVC: "ellipse",
    CiKind.HOS: "component",
    CiKind.SLA: "note",
    CiKind.MTC: "folder",
}


@dataclass(frozen=True)
class InstanceNode:
    instance_id: str
    item_id: str
    kind: CiKind
    path: Tuple[str, ...]


@dataclass(frozen=True)
class InstanceGraph:
    nodes: Tuple[InstanceNode, ...]
    # (parent instance, child instance)
    edges: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str
    literal: bool = False

    def to_line(self) -> str:
        obj = f'"{self.object}"' if self.literal else self.object
        return f"{self.subject}\t{self.predicate}\t{obj}"


def expand_instances(tree: ServiceTree) -> InstanceGraph:
    by_path: Dict[Tuple[str, ...], str] = {}
    nodes = []
    for item_id in sorted(tree.items):
        for k, path in enumerate(tree.root_paths(item_id), start=1):
            instance_id = f"{item_id}#{k}"
            by_path[path] = instance_id
            nodes.append(InstanceNode(instance_id, item_id, tree.kind(item_id), path))
    edges = sorted((by_path[n.path[:-1]], n.instance_id) for n in nodes if len(n.path) > 1)
    nodes.sort(key=lambda n: n.instance_id)
    return InstanceGraph(tuple(nodes), tuple(edges))


def _attributes(tree: ServiceTree, item_id: str) -> List[str]:
    item = tree.items[item_id]
    if item.sla is not None:
        sla = item.sla
        attrs = [
            f"priority = {sla.priority}",
            f"first failure fine = {sla.first_failure_fine}",
            f"concurrent failure fine = {sla.concurrent_failure_fine}",
        ]
        attrs += [f"{c.period.label} availability = {c.min_percent}% or fine {c.fine}"
                  for c in sla.availability_clauses]
        attrs.append(f"total fines = {sla.total_fines}")
        return attrs
    if item.mtc is not None:
        return [f"liability = {item.mtc.liability}"]
    return []


def to_triples(tree: ServiceTree) -> List[Triple]:
    graph = expand_instances(tree)
    triples = [Triple(child, LINKED, parent) for parent, child in graph.edges]
    for node in graph.nodes:
        triples += [Triple(node.instance_id, HAS, a, literal=True) for a in _attributes(tree, node.item_id)]
    return sorted(triples)


def triples_text(tree: ServiceTree) -> str:
    return "".join(t.to_line() + "\n" for t in to_triples(tree))


def _dot_string(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(tree: ServiceTree, name: str = "service_tree") -> str:
    graph = expand_instances(tree)
    lines = [f"digraph {_dot_string(name)} {{"]
    for node in graph.nodes:
        label = f"{node.kind.value}:{tree.items[node.item_id].label}"
        lines.append(f"  {_dot_string(node.instance_id)} "
                     f"[label={_dot_string(label)}, shape={SHAPES[node.kind]}];")
    for parent, child in graph.edges:
        lines.append(f"  {_dot_string(parent)} -> {_dot_string(child)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
