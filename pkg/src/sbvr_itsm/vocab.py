"""Structured-English vocabularies: terms, fact types and normative rules.

A source file is line oriented::

    T:SLA
    T:SVC
    T:total fines
    F: SLA has total fines
    F:SLA is linked to SVC
    NR: For an SLA that is linked to an SVC it is obligatory that the total
    fines of the new SLA are less than the total fines of the old SLA.

Blank lines and ``#`` comments are skipped. An ``NR:`` sentence may wrap onto
following lines until it ends with a period.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .diagnostics import Diagnostic, VocabularyError

__all__ = [
    "Term",
    "FactKind",
    "FactType",
    "Comparison",
    "LinkScope",
    "TermScope",
    "OldAttribute",
    "NumericLiteral",
    "NormativeRule",
    "Vocabulary",
    "parse_vocabulary",
    "validate_vocabulary",
    "canonical_render",
]


@dataclass(frozen=True)
class Term:
    name: str
    declaration_index: int


class FactKind(enum.Enum):
    ATTRIBUTE = "has"
    LINK = "is linked to"


@dataclass(frozen=True)
class FactType:
    kind: FactKind
    subject: str
    object: str
    declaration_index: int

    def text(self) -> str:
        return f"{self.subject} {self.kind.value} {self.object}"


class Comparison(enum.Enum):
    LESS_THAN = ("less than", "<")
    GREATER_THAN = ("greater than", ">")
    EQUAL_TO = ("equal to", "=")
    AT_LEAST = ("at least", ">=")
    AT_MOST = ("at most", "<=")

    def __init__(self, phrase: str, sql: str):
        self.phrase = phrase
        self.sql = sql

    @classmethod
    def from_phrase(cls, phrase: str) -> "Comparison":
        normalized = " ".join(phrase.lower().split())
        for member in cls:
            if member.phrase == normalized:
                return member
        raise ValueError(f"unknown comparison {phrase!r}")

    def evaluate(self, left, right) -> bool:
        if self is Comparison.LESS_THAN:
            return left < right
        if self is Comparison.GREATER_THAN:
            return left > right
        if self is Comparison.EQUAL_TO:
            return left == right
        if self is Comparison.AT_LEAST:
            return left >= right
        return left <= right


@dataclass(frozen=True)
class LinkScope:
    subject: str
    object: str


@dataclass(frozen=True)
class TermScope:
    subject: str


Scope = Union[LinkScope, TermScope]


@dataclass(frozen=True)
class OldAttribute:
    """Right-hand side ``the <attr> of the old <term>``."""


@dataclass(frozen=True)
class NumericLiteral:
    value: Decimal


Rhs = Union[OldAttribute, NumericLiteral]


@dataclass(frozen=True)
class NormativeRule:
    name: str
    scope: Scope
    attribute: str
    comparison: Comparison
    rhs: Rhs

    @property
    def subject(self) -> str:
        return self.scope.subject


@dataclass(frozen=True)
class Vocabulary:
    terms: Tuple[Term, ...] = ()
    fact_types: Tuple[FactType, ...] = ()
    rules: Tuple[NormativeRule, ...] = ()
    source_text: str = field(default="", compare=False, repr=False)

    def term_names(self) -> List[str]:
        return [t.name for t in self.terms]

    def attributes_of(self, term: str) -> List[str]:
        return [f.object for f in self.fact_types if f.kind is FactKind.ATTRIBUTE and f.subject == term]

    def links(self) -> List[FactType]:
        return [f for f in self.fact_types if f.kind is FactKind.LINK]

    def find_link(self, a: str, b: str) -> Optional[FactType]:
        """The declared link between ``a`` and ``b``, in either direction."""
        for f in self.links():
            if (f.subject, f.object) in ((a, b), (b, a)):
                return f
        return None

    def attribute_terms(self) -> set:
        return {f.object for f in self.fact_types if f.kind is FactKind.ATTRIBUTE}


# ---------------------------------------------------------------------------
# validation

def _term_name_problem(name: str) -> Optional[str]:
    if not name:
        return "term name is empty"
    if '"' in name:
        return f"term name {name!r} contains a double quote"
    if "\n" in name or "\r" in name:
        return f"term name {name!r} contains a line break"
    if name != name.strip():
        return f"term name {name!r} has leading or trailing whitespace"
    return None


def _diagnose(
    v: Vocabulary,
    term_lines: Sequence[Optional[int]] = (),
    fact_lines: Sequence[Optional[int]] = (),
    rule_lines: Sequence[Optional[int]] = (),
) -> List[Diagnostic]:
    def at(lines, i):
        return lines[i] if i < len(lines) else None

    out: List[Diagnostic] = []
    declared: Dict[str, int] = {}
    for i, term in enumerate(v.terms):
        problem = _term_name_problem(term.name)
        if problem:
            out.append(Diagnostic.error(problem, at(term_lines, i)))
        if term.name in declared:
            out.append(Diagnostic.error(f"duplicate term '{term.name}'", at(term_lines, i)))
        declared.setdefault(term.name, i)

    attribute_objects = v.attribute_terms()
    seen_facts = set()
    for i, fact in enumerate(v.fact_types):
        line = at(fact_lines, i)
        for name in (fact.subject, fact.object):
            if name not in declared:
                out.append(Diagnostic.error(f"undeclared term '{name}'", line))
        key = (fact.kind, fact.subject, fact.object)
        if key in seen_facts:
            out.append(Diagnostic.error(f"duplicate fact type '{fact.text()}'", line))
        seen_facts.add(key)
        if fact.kind is FactKind.LINK:
            if fact.subject == fact.object:
                out.append(Diagnostic.error(f"term '{fact.subject}' may not be linked to itself", line))
            for name in (fact.subject, fact.object):
                if name in attribute_objects:
                    out.append(Diagnostic.error(
                        f"term '{name}' is used both as an attribute and as a linked table", line))
        else:
            if fact.object == "id":
                out.append(Diagnostic.error("attribute name 'id' is reserved for the identity column", line))
            if fact.subject in attribute_objects:
                out.append(Diagnostic.error(
                    f"term '{fact.subject}' is used as an attribute and may not have attributes", line))

    for i, rule in enumerate(v.rules):
        line = at(rule_lines, i)
        expected = f"NR{i + 1}"
        if rule.name != expected:
            out.append(Diagnostic.error(f"rule name '{rule.name}' should be '{expected}'", line))
        scope_terms = [rule.scope.subject]
        if isinstance(rule.scope, LinkScope):
            scope_terms.append(rule.scope.object)
        missing = [n for n in scope_terms if n not in declared]
        for name in missing:
            out.append(Diagnostic.error(f"undeclared term '{name}'", line))
        if missing:
            continue
        if isinstance(rule.scope, LinkScope) and v.find_link(*scope_terms) is None:
            out.append(Diagnostic.error(
                f"undeclared fact type '{scope_terms[0]} is linked to {scope_terms[1]}'", line))
        if rule.scope.subject in attribute_objects:
            out.append(Diagnostic.error(
                f"rule scope '{rule.scope.subject}' is an attribute, not a table", line))
        if rule.attribute not in v.attributes_of(rule.scope.subject):
            out.append(Diagnostic.error(
                f"undeclared attribute '{rule.attribute}' for term '{rule.scope.subject}'", line))
    return out


def validate_vocabulary(v: Vocabulary) -> List[Diagnostic]:
    """Re-check every invariant of ``v``; an empty list means well-formed."""
    return _diagnose(v)


# ---------------------------------------------------------------------------
# parsing

_PREFIX = re.compile(r"^([A-Za-z]+):(.*)$")
_NUMBER = re.compile(r"^-?\d+(\.\d+)?$")
_FACT_VERBS = (
    (FactKind.ATTRIBUTE, re.compile(r"\s+(?:has|have)\s+")),
    (FactKind.LINK, re.compile(r"\s+(?:is|are)\s+linked\s+to\s+")),
)
_COMPARISON_RE = "|".join(m.phrase.replace(" ", r"\s+") for m in Comparison)


class _SentenceError(Exception):
    pass


class _Cursor:
    """Word-oriented scanner over a single rule sentence."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _rest(self) -> str:
        return self.text[self.pos:]

    def _found(self) -> str:
        words = self._rest().split()
        return "end of sentence" if not words else "'" + " ".join(words[:3]) + "'"

    def expect(self, *alternatives: str) -> str:
        for phrase in alternatives:
            pattern = r"\s*" + r"\s+".join(re.escape(w) for w in phrase.split()) + r"(?=\s|$)"
            m = re.compile(pattern, re.IGNORECASE).match(self.text, self.pos)
            if m:
                self.pos = m.end()
                return phrase
        wanted = " or ".join(f"'{a}'" for a in alternatives)
        raise _SentenceError(f"expected {wanted} but found {self._found()}")

    def phrase_until(self, delimiters: Dict[str, str], what: str) -> Tuple[str, str, re.Match]:
        """Consume text up to the earliest delimiter.

        ``delimiters`` maps a hint name to a regex. Returns the consumed
        phrase, the delimiter's name and its match (the cursor is left
        after the delimiter).
        """
        best = None
        for name, regex in delimiters.items():
            m = re.compile(r"\s+(?:" + regex + r")(?=\s|$)", re.IGNORECASE).search(self.text, self.pos)
            if m and (best is None or m.start() < best[1].start()):
                best = (name, m)
        if best is None:
            hint = " or ".join(f"'{d}'" for d in delimiters)
            raise _SentenceError(f"expected {hint} after {what}")
        name, m = best
        phrase = self.text[self.pos:m.start()].strip()
        if not phrase:
            raise _SentenceError(f"expected {what} before '{name}'")
        self.pos = m.end()
        return phrase, name, m

    def remainder(self) -> str:
        rest = self._rest().strip()
        self.pos = len(self.text)
        return rest


def _article(c: _Cursor) -> None:
    c.expect("an", "a")


def _parse_sentence(text: str, name: str) -> NormativeRule:
    c = _Cursor(text)
    c.expect("For")
    _article(c)
    link_kw = r"that\s+is\s+linked\s+to"
    obligation_kw = r"it\s+is\s+obligatory\s+that"
    subject, delim, _ = c.phrase_until(
        {"that is linked to": link_kw, "it is obligatory that": obligation_kw}, "a term")
    scope: Scope
    if delim == "that is linked to":
        _article(c)
        other, _, _ = c.phrase_until({"it is obligatory that": obligation_kw}, "the linked term")
        scope = LinkScope(subject, other)
    else:
        scope = TermScope(subject)
    c.expect("the")
    attribute, _, _ = c.phrase_until({"of the new": r"of\s+the\s+new"}, "an attribute")
    new_term, _, m = c.phrase_until(
        {"is/are <comparison>": r"(?:is|are)\s+(" + _COMPARISON_RE + r")"}, "the new term")
    comparison = Comparison.from_phrase(m.group(1))
    if new_term != subject:
        raise _SentenceError(f"expected 'the new {subject}' but found 'the new {new_term}'")

    rest = c.remainder()
    if not rest.endswith("."):
        raise _SentenceError("expected '.' at end of rule")
    rest = rest[:-1].strip()
    rhs: Rhs
    if _NUMBER.match(rest):
        rhs = NumericLiteral(Decimal(rest))
    else:
        m = re.match(r"^the\s+(.+?)\s+of\s+the\s+old\s+(.+)$", rest, re.IGNORECASE | re.DOTALL)
        if not m:
            raise _SentenceError(
                f"expected a number or 'the {attribute} of the old {subject}' but found '{rest}'")
        old_attr, old_term = m.group(1).strip(), m.group(2).strip()
        if old_attr != attribute:
            raise _SentenceError(f"expected 'the {attribute} of the old ...' but found 'the {old_attr}'")
        if old_term != subject:
            raise _SentenceError(f"expected 'the old {subject}' but found 'the old {old_term}'")
        rhs = OldAttribute()
    return NormativeRule(name, scope, attribute, comparison, rhs)


def _split_fact(text: str, declared: set) -> Tuple[Optional[FactType], Optional[str]]:
    """Split ``<S> has <O>`` / ``<S> is linked to <O>``.

    Every verb occurrence is tried so that terms containing a verb word still
    resolve; the split whose both sides are declared terms wins.
    """
    fallback = None
    for kind, regex in _FACT_VERBS:
        for m in regex.finditer(text):
            subject, obj = text[:m.start()].strip(), text[m.end():].strip()
            if not subject or not obj:
                continue
            if subject in declared and obj in declared:
                return FactType(kind, subject, obj, -1), None
            if fallback is None:
                missing = subject if subject not in declared else obj
                fallback = f"undeclared term '{missing}'"
    if fallback:
        return None, fallback
    return None, f"expected '<term> has <term>' or '<term> is linked to <term>' but found '{text}'"


def parse_vocabulary(source: str) -> Vocabulary:
    """Parse structured-English ``source`` into a :class:`Vocabulary`.

    Raises :class:`VocabularyError` carrying every diagnostic when the input
    is malformed or fails cross-reference checks.
    """
    diagnostics: List[Diagnostic] = []
    entries: List[List] = []  # [prefix, text, line]

    for number, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _PREFIX.match(line)
        if m is None:
            last = entries[-1] if entries else None
            if last is not None and last[0] == "NR" and not last[1].rstrip().endswith("."):
                last[1] = f"{last[1]} {line}"
                continue
            diagnostics.append(Diagnostic.error(
                "expected a line starting with 'T:', 'F:' or 'NR:'", number))
            continue
        prefix, text = m.group(1), m.group(2).strip()
        if prefix not in ("T", "F", "NR"):
            diagnostics.append(Diagnostic.error(f"unknown line prefix '{prefix}:'", number))
            continue
        entries.append([prefix, text, number])

    terms: List[Term] = []
    term_lines: List[int] = []
    for prefix, text, number in entries:
        if prefix == "T":
            terms.append(Term(text, len(terms)))
            term_lines.append(number)
    declared = {t.name for t in terms}

    facts: List[FactType] = []
    fact_lines: List[int] = []
    for prefix, text, number in entries:
        if prefix != "F":
            continue
        fact, problem = _split_fact(text, declared)
        if fact is None:
            diagnostics.append(Diagnostic.error(problem, number))
            continue
        facts.append(FactType(fact.kind, fact.subject, fact.object, len(facts)))
        fact_lines.append(number)

    rules: List[NormativeRule] = []
    rule_lines: List[int] = []
    nr_count = 0
    for prefix, text, number in entries:
        if prefix != "NR":
            continue
        nr_count += 1
        try:
            rules.append(_parse_sentence(text, f"NR{nr_count}"))
            rule_lines.append(number)
        except _SentenceError as exc:
            diagnostics.append(Diagnostic.error(str(exc), number))

    vocab = Vocabulary(tuple(terms), tuple(facts), tuple(rules), source)
    if not diagnostics:
        diagnostics.extend(_diagnose(vocab, term_lines, fact_lines, rule_lines))
    else:
        # keep cross-reference errors, but rule numbering is already broken
        diagnostics.extend(
            d for d in _diagnose(vocab, term_lines, fact_lines, rule_lines)
            if not d.message.startswith("rule name "))
    if diagnostics:
        diagnostics.sort(key=lambda d: (d.line or 0))
        raise VocabularyError(diagnostics)
    return vocab


# ---------------------------------------------------------------------------
# rendering

def _article_for(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def _render_rule(rule: NormativeRule) -> str:
    subject = rule.scope.subject
    head = f"For {_article_for(subject)} {subject}"
    if isinstance(rule.scope, LinkScope):
        other = rule.scope.object
        head += f" that is linked to {_article_for(other)} {other}"
    if isinstance(rule.rhs, NumericLiteral):
        rhs = str(rule.rhs.value)
    else:
        rhs = f"the {rule.attribute} of the old {subject}"
    return (f"NR: {head} it is obligatory that the {rule.attribute} of the new {subject} "
            f"are {rule.comparison.phrase} {rhs}.")


def canonical_render(v: Vocabulary) -> str:
    lines = [f"T:{t.name}" for t in v.terms]
    lines += [f"F:{f.text()}" for f in v.fact_types]
    lines += [_render_rule(r) for r in v.rules]
    return "".join(line + "\n" for line in lines)
