import json
import random
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import TIE, all_root_paths, brute_accumulated_mtc, brute_effective_sla, random_tree
from sbvr_itsm.diagnostics import TreeError
from sbvr_itsm.tree import (
    CiKind,
    ConfigItem,
    MtcTerms,
    Occurrence,
    PriorityTieError,
    ReplaceSla,
    ServiceTree,
    SlaTerms,
    accumulated_mtc,
    apply_change,
    dump_tree,
    effective_sla,
    find_redundant_mtcs,
    gate_change,
    item_mtc_liability,
    load_tree,
    occurrences,
    validate_tree,
)


def sla(item_id, priority, total=0):
    return ConfigItem(item_id, CiKind.SLA, item_id, sla=SlaTerms(priority, Decimal(total)))


def mtc(item_id, liability):
    return ConfigItem(item_id, CiKind.MTC, item_id, mtc=MtcTerms(Decimal(liability)))


def ci(item_id, kind):
    return ConfigItem(item_id, CiKind(kind), item_id)


def doc(items, edges):
    return json.dumps({"items": items, "edges": [{"parent": p, "child": c} for p, c in edges]})


def load_errors(text):
    with pytest.raises(TreeError) as info:
        load_tree(text)
    return [d.message for d in info.value.diagnostics]


def effective_or_tie(tree, occ):
    try:
        return effective_sla(tree, occ)
    except PriorityTieError:
        return TIE


# -- loading ---------------------------------------------------------------

def test_sample_tree_loads(sample_tree):
    assert sample_tree.roots() == ["RFC1", "RFC2"]
    assert validate_tree(sample_tree) == []


def test_single_rfc():
    t = load_tree(doc([{"id": "RFC1", "kind": "RFC"}], []))
    assert t.roots() == ["RFC1"] and not t.edges


def test_sla_with_children_rejected():
    text = doc([{"id": "RFC1", "kind": "RFC"}, {"id": "HOS1", "kind": "HOS"},
                {"id": "SLA1", "kind": "SLA", "sla": {"priority": 1}}],
               [("RFC1", "SLA1"), ("SLA1", "HOS1")])
    assert any("SLA may not have children" in m for m in load_errors(text))


def test_cycle_detected():
    text = doc([{"id": "RFC1", "kind": "RFC"}, {"id": "SVC1", "kind": "SVC"}, {"id": "SVC2", "kind": "SVC"}],
               [("RFC1", "SVC1"), ("SVC1", "SVC2"), ("SVC2", "SVC1")])
    assert any(m.startswith("cycle detected") for m in load_errors(text))


@pytest.mark.parametrize("items, edges, fragment", [
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "HOS1", "kind": "HOS"}, {"id": "HOS2", "kind": "HOS"}],
     [("RFC1", "HOS1"), ("HOS1", "HOS2")], "illegal edge HOS -> HOS"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "RFC1", "kind": "SVC"}], [], "duplicate id 'RFC1'"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "SLA1", "kind": "SLA"}], [("RFC1", "SLA1")], "has no sla terms"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "MTC1", "kind": "MTC"}], [("RFC1", "MTC1")], "has no mtc terms"),
    ([{"id": "RFC1", "kind": "RFC", "mtc": {"liability": 3}}], [], "may not carry mtc terms"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "SVC1", "kind": "SVC"}], [], "only RFCs may be roots"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "RFC2", "kind": "RFC"}], [("RFC1", "RFC2")], "illegal edge RFC -> RFC"),
    ([{"id": "RFC1", "kind": "RFC"}], [("RFC1", "SVC9")], "unknown item 'SVC9'"),
    ([{"id": "X", "kind": "DB"}], [], "unknown kind"),
    ([{"id": "RFC1", "kind": "RFC"}, {"id": "MTC1", "kind": "MTC", "mtc": {"liability": "1.234"}}],
     [("RFC1", "MTC1")], "more than 2 fraction digits"),
])
def test_structural_errors(items, edges, fragment):
    assert any(fragment in m for m in load_errors(doc(items, edges)))


def test_invalid_json_reports_line():
    with pytest.raises(TreeError) as info:
        load_tree('{\n  "items": [\n')
    assert info.value.diagnostics[0].line is not None


def test_dump_load_round_trip(sample_tree):
    assert load_tree(dump_tree(sample_tree)) == sample_tree


def test_sla_total_fines(sample_tree):
    assert sample_tree.items["SLA2"].sla.total_fines == Decimal("1150.00")


# -- validation ------------------------------------------------------------

def tie_tree():
    items = [ci("RFC1", "RFC"), ci("SVC1", "SVC"), ci("HOS2", "HOS"), sla("SLA1", 2), sla("SLA2", 2)]
    edges = [("RFC1", "SVC1"), ("SVC1", "HOS2"), ("SVC1", "SLA1"), ("HOS2", "SLA2")]
    return ServiceTree.build(items, edges)


def test_priority_tie_flagged():
    diags = validate_tree(tie_tree())
    assert [d.code for d in diags] == ["PriorityTie"]
    assert "SLA1, SLA2" in diags[0].message


def test_empty_tree_is_valid():
    assert validate_tree(ServiceTree()) == []


def test_sample_tree_candidates_strictly_ordered(sample_tree):
    for item_id, paths in all_root_paths(sample_tree).items():
        if sample_tree.kind(item_id) in (CiKind.SVC, CiKind.HOS):
            for p in paths:
                assert brute_effective_sla(sample_tree, p) != TIE


# -- occurrences -------------------------------------------------------------

def test_occurrences_of_shared_host(sample_tree):
    occ = occurrences(sample_tree, "HOS2")
    assert [o.path for o in occ] == [("RFC1", "SVC1", "HOS2"), ("RFC2", "SVC4", "HOS2")]


def test_occurrences_of_root_and_chain(sample_tree):
    assert occurrences(sample_tree, "RFC1") == [Occurrence(("RFC1",))]
    assert occurrences(sample_tree, "HOS5") == [Occurrence(("RFC2", "SVC5", "HOS5"))]


def test_occurrences_unknown(sample_tree):
    with pytest.raises(KeyError):
        occurrences(sample_tree, "NOPE")


def test_occurrences_match_path_oracle(sample_tree):
    oracle = all_root_paths(sample_tree)
    for item_id in sample_tree.items:
        assert [o.path for o in occurrences(sample_tree, item_id)] == oracle[item_id]


# -- inheritance -------------------------------------------------------------

def test_effective_sla_prefers_higher_priority():
    items = [ci("RFC1", "RFC"), ci("SVC1", "SVC"), ci("HOS2", "HOS"), sla("SLA1", 5), sla("SLA2", 3)]
    t = ServiceTree.build(items, [("RFC1", "SVC1"), ("SVC1", "HOS2"), ("SVC1", "SLA1"), ("HOS2", "SLA2")])
    assert effective_sla(t, Occurrence(("RFC1", "SVC1", "HOS2"))) == "SLA1"


def test_effective_sla_none_and_single():
    t = ServiceTree.build([ci("RFC1", "RFC"), ci("HOS1", "HOS")], [("RFC1", "HOS1")])
    assert effective_sla(t, Occurrence(("RFC1", "HOS1"))) is None
    t = ServiceTree.build([ci("RFC1", "RFC"), ci("HOS1", "HOS"), sla("SLA9", 1)],
                          [("RFC1", "HOS1"), ("HOS1", "SLA9")])
    assert effective_sla(t, Occurrence(("RFC1", "HOS1"))) == "SLA9"


def test_effective_sla_tie_raises():
    with pytest.raises(PriorityTieError) as info:
        effective_sla(tie_tree(), Occurrence(("RFC1", "SVC1", "HOS2")))
    assert info.value.tied == ("SLA1", "SLA2")


def test_effective_sla_rejects_bad_occurrence(sample_tree):
    with pytest.raises(ValueError):
        effective_sla(sample_tree, Occurrence(("RFC1", "HOS2")))
    with pytest.raises(ValueError):
        effective_sla(sample_tree, Occurrence(("RFC1", "SVC1", "SLA1")))


def test_shared_host_inherits_per_occurrence(sample_tree):
    a, b = occurrences(sample_tree, "HOS2")
    assert effective_sla(sample_tree, a) == "SLA1"
    assert effective_sla(sample_tree, b) == "SLA4"


def test_accumulated_mtc_sums():
    items = [ci("RFC1", "RFC"), ci("SVC1", "SVC"), ci("HOS1", "HOS"), mtc("MTC1", 10), mtc("MTC2", 15)]
    t = ServiceTree.build(items, [("RFC1", "SVC1"), ("SVC1", "HOS1"), ("RFC1", "MTC1"), ("HOS1", "MTC2")])
    assert accumulated_mtc(t, Occurrence(("RFC1", "SVC1", "HOS1"))) == (frozenset({"MTC1", "MTC2"}), Decimal(25))


def test_accumulated_mtc_empty_and_shared():
    t = ServiceTree.build([ci("RFC1", "RFC"), ci("HOS1", "HOS")], [("RFC1", "HOS1")])
    assert accumulated_mtc(t, Occurrence(("RFC1", "HOS1"))) == (frozenset(), Decimal(0))
    t = ServiceTree.build([ci("RFC1", "RFC"), ci("HOS1", "HOS"), mtc("MTC1", 7)],
                          [("RFC1", "HOS1"), ("RFC1", "MTC1"), ("HOS1", "MTC1")])
    assert accumulated_mtc(t, Occurrence(("RFC1", "HOS1"))) == (frozenset({"MTC1"}), Decimal(7))


def test_item_level_liability(sample_tree):
    assert item_mtc_liability(sample_tree, "HOS2") == (frozenset({"MTC1", "MTC2", "MTC3"}), Decimal("870.00"))


# -- redundancy --------------------------------------------------------------

def test_redundant_leaf_mtc():
    items = [ci("RFC1", "RFC"), ci("SVC1", "SVC"), ci("HOS1", "HOS"), ci("HOS2", "HOS"),
             mtc("MTC_a", 10), mtc("MTC_b", 5)]
    edges = [("RFC1", "SVC1"), ("SVC1", "HOS1"), ("SVC1", "HOS2"), ("RFC1", "MTC_a"), ("HOS2", "MTC_b")]
    result = find_redundant_mtcs(ServiceTree.build(items, edges))
    assert [m for m, _ in result] == ["MTC_b"]
    assert "MTC_a" in result[0][1]


def test_single_mtc_not_redundant():
    t = ServiceTree.build([ci("RFC1", "RFC"), ci("HOS1", "HOS"), mtc("MTC1", 1)],
                          [("RFC1", "HOS1"), ("HOS1", "MTC1")])
    assert find_redundant_mtcs(t) == []


def test_disjoint_mtcs_not_redundant():
    items = [ci("RFC1", "RFC"), ci("HOS1", "HOS"), ci("HOS2", "HOS"), mtc("M1", 1), mtc("M2", 1)]
    t = ServiceTree.build(items, [("RFC1", "HOS1"), ("RFC1", "HOS2"), ("HOS1", "M1"), ("HOS2", "M2")])
    assert find_redundant_mtcs(t) == []


def test_sample_tree_redundancy(sample_tree):
    assert [m for m, _ in find_redundant_mtcs(sample_tree)] == ["MTC4"]


def coverage_oracle(tree):
    cover = {m: set() for m, it in tree.items.items() if it.kind is CiKind.MTC}
    for item_id, paths in all_root_paths(tree).items():
        if tree.kind(item_id) in (CiKind.SVC, CiKind.HOS):
            for p in paths:
                for m in brute_accumulated_mtc(tree, p)[0]:
                    cover[m].add(p)
    return sorted(m for m in cover if any(o != m and cover[m] <= cover[o] for o in cover))


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_redundancy_matches_coverage_oracle(rng):
    t = random_tree(rng, max_items=20)
    assert [m for m, _ in find_redundant_mtcs(t)] == coverage_oracle(t)


# -- gating ------------------------------------------------------------------

def gate_tree(total):
    items = [ci("RFC1", "RFC"), ci("SVC1", "SVC"), ci("HOS1", "HOS"), sla("SLA1", 3, total), sla("SLA2", 5, 10)]
    edges = [("RFC1", "SVC1"), ("SVC1", "HOS1"), ("HOS1", "SLA1"), ("SVC1", "SLA2")]
    return ServiceTree.build(items, edges)


def test_gate_accepts_cheaper():
    assert gate_change(gate_tree(100), ReplaceSla("HOS1", "SLA1", SlaTerms(3, Decimal(80)))).accepted


def test_gate_rejects_equal_total():
    verdict = gate_change(gate_tree(100), ReplaceSla("HOS1", "SLA1", SlaTerms(3, Decimal(100))))
    assert (verdict.accepted, verdict.rule) == (False, "NR1")


def test_gate_rejects_new_tie():
    verdict = gate_change(gate_tree(100), ReplaceSla("HOS1", "SLA1", SlaTerms(5, Decimal(1))))
    assert (verdict.accepted, verdict.rule) == (False, "PriorityTie")


def test_gate_does_not_mutate_and_apply_builds_new_tree():
    t = gate_tree(100)
    before = dump_tree(t)
    new_tree, new_id = apply_change(t, ReplaceSla("HOS1", "SLA1", SlaTerms(3, Decimal(80))))
    assert dump_tree(t) == before
    assert new_id == "SLA1'" and ("HOS1", new_id) in new_tree.edges and "SLA1" not in new_tree.items


def test_gate_errors():
    with pytest.raises(KeyError):
        gate_change(gate_tree(1), ReplaceSla("NOPE", "SLA1", SlaTerms(1)))
    with pytest.raises(ValueError):
        gate_change(gate_tree(1), ReplaceSla("SVC1", "SLA1", SlaTerms(1)))


# -- properties --------------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_oracle_equivalence(rng):
    t = random_tree(rng)
    for item_id, paths in all_root_paths(t).items():
        assert [o.path for o in occurrences(t, item_id)] == paths
        if t.kind(item_id) not in (CiKind.SVC, CiKind.HOS):
            continue
        for p in paths:
            assert effective_or_tie(t, Occurrence(p)) == brute_effective_sla(t, p)
            assert accumulated_mtc(t, Occurrence(p)) == brute_accumulated_mtc(t, p)


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False), st.sampled_from([lambda p: 3 * p + 7, lambda p: p ** 3, lambda p: 2 ** p]))
def test_argmax_invariance(rng, transform):
    t = random_tree(rng)
    items = {i: (ConfigItem(i, it.kind, it.label,
                            sla=SlaTerms(transform(it.sla.priority), it.sla.first_failure_fine))
                 if it.kind is CiKind.SLA else it)
             for i, it in t.items.items()}
    t2 = ServiceTree(items, t.edges)
    for item_id in t.items:
        if t.kind(item_id) in (CiKind.SVC, CiKind.HOS):
            for occ in occurrences(t, item_id):
                assert effective_or_tie(t, occ) == effective_or_tie(t2, occ)


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_inheritance_locality(rng):
    t = random_tree(rng)
    for item_id in t.items:
        if t.kind(item_id) not in (CiKind.SVC, CiKind.HOS):
            continue
        for occ in occurrences(t, item_id):
            path = occ.path
            for i in range(1, len(path)):
                if t.kind(path[i]) not in (CiKind.SVC, CiKind.HOS):
                    continue
                if any(t.attached(n, CiKind.SLA) for n in path[i + 1:]):
                    continue
                assert effective_or_tie(t, occ) == effective_or_tie(t, Occurrence(path[:i + 1]))


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_monotone_accumulation(rng):
    t = random_tree(rng)
    nodes = sorted(i for i in t.items if t.kind(i) in (CiKind.SVC, CiKind.HOS, CiKind.RFC))
    node = rng.choice(nodes)
    items = dict(t.items)
    items["MTCnew"] = ConfigItem("MTCnew", CiKind.MTC, "new", mtc=MtcTerms(Decimal(rng.randint(0, 50))))
    t2 = ServiceTree(items, t.edges | {(node, "MTCnew")})
    for item_id in t.items:
        if t.kind(item_id) not in (CiKind.SVC, CiKind.HOS):
            continue
        for occ in occurrences(t, item_id):
            if node in occ.path:
                assert accumulated_mtc(t2, occ)[1] >= accumulated_mtc(t, occ)[1]


def test_random_trees_are_valid():
    rng = random.Random(3)
    for _ in range(100):
        t = random_tree(rng)
        assert not [d for d in validate_tree(t) if d.code != "PriorityTie"]
