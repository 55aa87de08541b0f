"""Knowledge-graph snapshot loaded from N-Triples.

Supported grammar: IRIs in angle brackets, literals in double quotes with an
optional ``@lang`` tag or ``^^<datatype>``. Blank nodes are rejected. Files
ending in ``.gz`` are decompressed transparently.
"""

from __future__ import annotations

import gzip
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

from cbe.errors import InvalidQid, ParseError

WD_ENTITY = "http://www.wikidata.org/entity/"
WD_DIRECT = "http://www.wikidata.org/prop/direct/"
QID_RE = re.compile(r"Q[0-9]+")

_IRI = r"<([^<>\"{}|^`\\\x00-\x20]*)>"
_LITERAL = r"(\"(?:[^\"\\\n\r]|\\.)*\"(?:@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*|\^\^<[^<>\"{}|^`\\\x00-\x20]*>)?)"
_LINE_RE = re.compile(rf"^\s*{_IRI}\s+{_IRI}\s+(?:{_IRI}|{_LITERAL})\s*\.\s*(?:#.*)?$")


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str
    # literals keep their quoted N-Triples form in ``object``
    object_is_literal: bool = False

    def to_ntriples(self) -> str:
        obj = self.object if self.object_is_literal else f"<{self.object}>"
        return f"<{self.subject}> <{self.predicate}> {obj} ."


@dataclass(frozen=True)
class KnowledgeGraph:
    triples: frozenset[Triple] = frozenset()
    out_adjacency: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict, compare=False)

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> KnowledgeGraph:
        ts = frozenset(triples)
        adj: dict[str, list[tuple[str, str]]] = {}
        for t in ts:
            if not t.object_is_literal:
                adj.setdefault(t.subject, []).append((t.predicate, t.object))
        return cls(ts, {k: tuple(sorted(v)) for k, v in adj.items()})

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    @property
    def nodes(self) -> set[str]:
        """Every IRI occurring as subject or IRI object."""
        out = set()
        for t in self.triples:
            out.add(t.subject)
            if not t.object_is_literal:
                out.add(t.object)
        return out

    def has_edge(self, s: str, p: str, o: str) -> bool:
        return Triple(s, p, o) in self.triples


def neighbors(g: KnowledgeGraph, node: str) -> list[tuple[str, str]]:
    """Outgoing (predicate, object) pairs of ``node``, sorted; empty if none."""
    return list(g.out_adjacency.get(node, ()))


def parse_line(line: str, line_no: int) -> Triple | None:
    """Parse one N-Triples line; ``None`` for blank and comment lines."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    if re.search(r"(?:^|\s)_:", stripped.split('"', 1)[0]):
        raise ParseError(line_no, "blank nodes are not supported")
    m = _LINE_RE.match(stripped)
    if m is None:
        if not stripped.rstrip().endswith("."):
            raise ParseError(line_no, "missing terminating '.'")
        raise ParseError(line_no, "not a subject-predicate-object statement")
    s, p, o_iri, o_lit = m.groups()
    if not s or not p:
        raise ParseError(line_no, "empty IRI")
    if o_iri is not None:
        if not o_iri:
            raise ParseError(line_no, "empty IRI")
        return Triple(s, p, o_iri)
    return Triple(s, p, o_lit, object_is_literal=True)


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def iter_ntriples(lines: Iterable[str]) -> Iterator[Triple]:
    for line_no, line in enumerate(lines, start=1):
        t = parse_line(line, line_no)
        if t is not None:
            yield t


def load_ntriples(path: str | Path) -> KnowledgeGraph:
    """Load a ``.nt`` (or ``.nt.gz``) file; duplicate lines collapse."""
    with _open_text(Path(path)) as fh:
        return KnowledgeGraph.from_triples(iter_ntriples(fh))


def write_ntriples(g: KnowledgeGraph, path: str | Path) -> None:
    p = Path(path)
    opener = gzip.open if p.suffix == ".gz" else open
    with opener(p, "wt", encoding="utf-8") as fh:
        for t in sorted(g.triples):
            fh.write(t.to_ntriples() + "\n")


def check_qid(qid: str) -> str:
    if not isinstance(qid, str) or QID_RE.fullmatch(qid) is None:
        raise InvalidQid(qid)
    return qid


def qid_of(iri: str) -> str | None:
    """``Q...`` suffix of a Wikidata entity IRI, or None."""
    tail = iri.rsplit("/", 1)[-1]
    return tail if QID_RE.fullmatch(tail) else None


def entity_iri(qid: str) -> str:
    return WD_ENTITY + qid


@dataclass(frozen=True)
class ConceptAddition:
    label: str
    qid: str
    triples: tuple[Triple, ...] = ()

    def __post_init__(self):
        check_qid(self.qid)


def apply_additions(g: KnowledgeGraph, adds: Iterable[ConceptAddition]) -> KnowledgeGraph:
    """Return a new graph that also holds every addition's triples."""
    extra = []
    for a in adds:
        check_qid(a.qid)
        extra.extend(a.triples)
    if not extra:
        return g
    return KnowledgeGraph.from_triples(g.triples | frozenset(extra))


def load_additions(path: str | Path) -> list[ConceptAddition]:
    """Read a concept-addition TSV: ``label<TAB>qid<TAB>predicate<TAB>object``.

    Several rows may share a qid; their triples are grouped. ``predicate`` and
    ``object`` are IRIs or bare Wikidata ids (``P31``, ``Q12136``); bare ids are
    expanded to direct-property and entity IRIs. Rows with empty predicate and
    object only register the label.
    """
    grouped: dict[str, tuple[str, list[Triple]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#") or (line_no == 1 and line.startswith("label\t")):
                continue
            cols = line.split("\t")
            if len(cols) not in (2, 4):
                raise ParseError(line_no, "expected 2 or 4 tab-separated columns")
            label, qid = cols[0], cols[1]
            check_qid(qid)
            label0, triples = grouped.setdefault(qid, (label, []))
            if len(cols) == 4 and cols[2] and cols[3]:
                triples.append(Triple(entity_iri(qid), _expand(cols[2], WD_DIRECT), _expand(cols[3], WD_ENTITY)))
    return [ConceptAddition(label, qid, tuple(ts)) for qid, (label, ts) in grouped.items()]


def _expand(term: str, prefix: str) -> str:
    if re.fullmatch(r"[PQ][0-9]+", term):
        return prefix + term
    return term.strip("<>")
