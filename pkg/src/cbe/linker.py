"""Entity recognition and linking to Wikidata identifiers.

Two recognizers are available: an offline gazetteer matcher and a client for a
remote linking API. Their outputs are merged by union and then passed through
human curation rules and a tabu-type filter.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import socket
import urllib.error
import urllib.request
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from cbe.errors import BadResponse, LinkerTimeout, NetworkError, ParseError, RemoteLinkerError
from cbe.kgstore import QID_RE, check_qid

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://labs.tib.eu/falcon/falcon2/api?mode=long"
ENDPOINT_ENV = "CBE_LINKER_ENDPOINT"
DEFAULT_TABU_TYPES = frozenset({"Album", "Book", "Streets", "Organization", "Song", "Movie"})

_TOKEN_SPAN_RE = re.compile(r"#*\w+(?:-\w+)*")
_QID_IN_STRING = re.compile(r"(?:^|[/:<\s])(Q[0-9]+)>?$")


def normalize_surface(s: str) -> str:
    return " ".join(s.lower().split())


@dataclass(frozen=True)
class EntityMention:
    surface: str
    span: tuple[int, int] | None
    qid: str
    entity_type: str | None = None
    source: str = "gazetteer"
    needs_curation: bool = False

    def __post_init__(self):
        check_qid(self.qid)
        if self.source not in ("gazetteer", "remote", "merged"):
            raise ValueError(f"bad mention source {self.source!r}")


@dataclass
class Gazetteer:
    entries: dict[str, tuple[str, str | None]]

    def __post_init__(self):
        normed = {}
        for surface, (qid, etype) in self.entries.items():
            normed[normalize_surface(surface)] = (check_qid(qid), etype or None)
        self.entries = normed
        self.max_tokens = max((len(k.split()) for k in normed), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, surface: str) -> tuple[str, str | None] | None:
        return self.entries.get(normalize_surface(surface))


def load_gazetteer(path: str | Path) -> Gazetteer:
    """Read ``surface<TAB>qid<TAB>type`` rows (type may be empty)."""
    entries: dict[str, tuple[str, str | None]] = {}
    for line_no, cols in _read_tsv(path):
        if len(cols) not in (2, 3):
            raise ParseError(line_no, "expected surface, qid[, type]")
        if cols[0] == "surface" and line_no == 1:
            continue
        entries[cols[0]] = (cols[1], cols[2] if len(cols) == 3 else None)
    return Gazetteer(entries)


def recognize_gazetteer(text: str, g: Gazetteer) -> list[EntityMention]:
    """Greedy longest-match over token n-grams, scanning left to right.

    N-grams only match when their tokens are separated by plain whitespace,
    so punctuation inside a candidate span blocks the match.
    """
    spans = [m.span() for m in _TOKEN_SPAN_RE.finditer(text)]
    out: list[EntityMention] = []
    i = 0
    while i < len(spans):
        hit = None
        for n in range(min(g.max_tokens, len(spans) - i), 0, -1):
            start, end = spans[i][0], spans[i + n - 1][1]
            found = g.entries.get(normalize_surface(text[start:end]))
            if found is not None:
                hit = (n, start, end, found)
                break
        if hit is None:
            i += 1
            continue
        n, start, end, (qid, etype) = hit
        out.append(EntityMention(text[start:end], (start, end), qid, etype, "gazetteer"))
        i += n
    return out


def _find_qid(value) -> str | None:
    if isinstance(value, str):
        m = _QID_IN_STRING.search(value.strip())
        return m.group(1) if m else None
    return None


_SURFACE_KEYS = ("surface form", "surface_form", "surface", "mention", "label", "text", "name")


def _parse_item(item) -> tuple[str, str | None] | None:
    """(qid, surface) from a response element, if it names an entity."""
    if isinstance(item, (list, tuple)):
        qid = next((q for q in map(_find_qid, item) if q), None)
        if qid is None:
            return None
        surface = next((s for s in item if isinstance(s, str) and _find_qid(s) is None), None)
        return qid, surface
    if isinstance(item, dict):
        qid = next((q for q in map(_find_qid, item.values()) if q), None)
        if qid is None:
            return None
        surface = next((item[k] for k in _SURFACE_KEYS if isinstance(item.get(k), str) and _find_qid(item[k]) is None), None)
        return qid, surface
    return None


def parse_remote_response(payload, text: str) -> list[EntityMention]:
    """Extract mentions from a decoded JSON response.

    Accepts any object with an array field whose elements carry a Wikidata
    IRI or id plus an optional surface string, either as ``[iri, surface]``
    pairs or as objects. Arrays whose elements hold no entity id (relation
    lists, for instance) are ignored. Surfaces are located in ``text`` by
    case-insensitive first occurrence; unlocated mentions get ``span=None``.
    """
    if not isinstance(payload, dict):
        raise BadResponse("response is not a JSON object")
    arrays = [v for v in payload.values() if isinstance(v, list)]
    if not arrays:
        raise BadResponse("response has no array field")
    lowered = text.lower()
    out: list[EntityMention] = []
    seen: set[tuple[str, str | None]] = set()
    for arr in arrays:
        for item in arr:
            parsed = _parse_item(item)
            if parsed is None or parsed in seen:
                continue
            seen.add(parsed)
            qid, surface = parsed
            span = None
            if surface:
                pos = lowered.find(surface.lower())
                if pos >= 0:
                    span = (pos, pos + len(surface))
                    surface = text[pos : pos + len(surface)]
            out.append(EntityMention(surface or "", span, qid, None, "remote"))
    return out


def default_endpoint() -> str:
    return os.environ.get(ENDPOINT_ENV, DEFAULT_ENDPOINT)


def recognize_remote(text: str, endpoint: str | None = None, timeout: float = 10.0) -> list[EntityMention]:
    """Link ``text`` through a remote API (POST ``{"text": ...}``).

    Raises:
        NetworkError, LinkerTimeout, BadResponse: callers should degrade to
            gazetteer-only linking on any of these.
    """
    if not text.strip():
        return []
    url = endpoint or default_endpoint()
    body = json.dumps({"text": text}).encode("utf-8")
    req = urllib.request.Request(url, data=body, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except (TimeoutError, socket.timeout) as exc:
        raise LinkerTimeout(f"{url}: timed out after {timeout}s") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (TimeoutError, socket.timeout)):
            raise LinkerTimeout(f"{url}: timed out after {timeout}s") from exc
        raise NetworkError(f"{url}: {exc}") from exc
    except OSError as exc:
        raise NetworkError(f"{url}: {exc}") from exc
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadResponse(f"{url}: response is not JSON") from exc
    return parse_remote_response(payload, text)


def _sort_key(m: EntityMention, text_len: int) -> tuple:
    start = m.span[0] if m.span is not None else text_len
    return (start, m.qid)


def merge_mentions(a: Sequence[EntityMention], b: Sequence[EntityMention]) -> list[EntityMention]:
    """Union of two mention lists for the same text, keyed by qid.

    The k-th occurrence of a qid in ``a`` pairs with the k-th occurrence in
    ``b``; paired mentions become ``source="merged"``. Distinct qids are all
    kept, even with overlapping spans.
    """
    by_qid_a: dict[str, list[EntityMention]] = defaultdict(list)
    by_qid_b: dict[str, list[EntityMention]] = defaultdict(list)
    for m in a:
        by_qid_a[m.qid].append(m)
    for m in b:
        by_qid_b[m.qid].append(m)
    out = []
    for qid in by_qid_a.keys() | by_qid_b.keys():
        la, lb = by_qid_a.get(qid, []), by_qid_b.get(qid, [])
        for k in range(max(len(la), len(lb))):
            ma = la[k] if k < len(la) else None
            mb = lb[k] if k < len(lb) else None
            if ma is not None and mb is not None:
                base = ma if ma.span is not None or mb.span is None else mb
                out.append(replace(base, source="merged", entity_type=ma.entity_type or mb.entity_type))
            else:
                out.append(ma or mb)
    end = max((m.span[1] for m in out if m.span is not None), default=0) + 1
    out.sort(key=lambda m: _sort_key(m, end))
    return out


@dataclass(frozen=True)
class CurationRule:
    surface: str
    wrong_qid: str
    correct_qid: str

    def __post_init__(self):
        check_qid(self.wrong_qid)
        check_qid(self.correct_qid)
        if self.wrong_qid == self.correct_qid:
            raise ValueError(f"curation rule for {self.surface!r} maps {self.wrong_qid} to itself")


def load_curation_rules(path: str | Path | None = None) -> list[CurationRule]:
    """Read ``surface<TAB>wrong_qid<TAB>correct_qid``; default is the shipped file."""
    if path is None:
        path = resources.files("cbe") / "data" / "curation_default.tsv"
    rules = []
    for line_no, cols in _read_tsv(path):
        if line_no == 1 and cols[0] == "surface":
            continue
        if len(cols) != 3:
            raise ParseError(line_no, "expected surface, wrong_qid, correct_qid")
        rules.append(CurationRule(*cols))
    return rules


def apply_curation(
    ms: Iterable[EntityMention],
    rules: Iterable[CurationRule],
    tabu: Iterable[str] = DEFAULT_TABU_TYPES,
    type_of: Mapping[str, str] | None = None,
) -> list[EntityMention]:
    """Fix known mislinks, then flag remaining mentions of tabu types."""
    fixes = {(normalize_surface(r.surface), r.wrong_qid): r.correct_qid for r in rules}
    tabu = frozenset(tabu)
    if not tabu:
        raise ValueError("tabu type list must be nonempty")
    type_of = type_of or {}
    out = []
    for m in ms:
        key = (normalize_surface(m.surface), m.qid)
        if key in fixes:
            new_qid = fixes[key]
            out.append(replace(m, qid=new_qid, entity_type=type_of.get(new_qid), needs_curation=False))
            continue
        etype = type_of.get(m.qid, m.entity_type)
        out.append(replace(m, needs_curation=etype in tabu))
    return out


def entity_vocabulary(all_mentions: Iterable[Iterable[EntityMention | str]], min_count: int = 2) -> list[str]:
    """Qids mentioned at least ``min_count`` times across the whole corpus.

    Sorted by descending count, then qid.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for post in all_mentions:
        counts.update(m if isinstance(m, str) else m.qid for m in post)
    kept = [(q, c) for q, c in counts.items() if c >= min_count]
    kept.sort(key=lambda qc: (-qc[1], qc[0]))
    return [q for q, _ in kept]


def link_posts(
    texts: Mapping[str, str],
    gazetteer: Gazetteer | None,
    *,
    remote: bool = False,
    endpoint: str | None = None,
    timeout: float = 10.0,
    max_workers: int = 4,
    recognize: Callable[[str], list[EntityMention]] | None = None,
) -> dict[str, list[EntityMention]]:
    """Link every post; returns mentions keyed by post id in input order.

    With ``remote=True`` remote results are merged with the gazetteer's. A
    failed remote call for a post degrades that post to gazetteer-only.
    ``recognize`` replaces the remote call (used for recorded fixtures).
    """
    if gazetteer is None and not remote:
        raise ValueError("need a gazetteer, remote linking, or both")
    local = {pid: recognize_gazetteer(t, gazetteer) if gazetteer else [] for pid, t in texts.items()}
    if not remote:
        return local
    call = recognize or (lambda t: recognize_remote(t, endpoint, timeout))

    def one(pid: str) -> tuple[str, list[EntityMention]]:
        try:
            return pid, call(texts[pid])
        except RemoteLinkerError as exc:
            log.warning("remote linking failed for post %s (%s); using gazetteer only", pid, exc)
            return pid, []

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        remote_out = dict(pool.map(one, texts))
    return {pid: merge_mentions(local[pid], remote_out[pid]) for pid in texts}


def write_mentions(mentions: Mapping[str, Sequence[EntityMention]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE, escapechar="\\")
        w.writerow(["post_id", "surface", "start", "end", "qid", "type", "source", "needs_curation"])
        for pid, ms in mentions.items():
            for m in ms:
                start, end = m.span if m.span is not None else ("", "")
                w.writerow([pid, m.surface, start, end, m.qid, m.entity_type or "", m.source, int(m.needs_curation)])


def read_mentions(path: str | Path, post_ids: Iterable[str] = ()) -> dict[str, list[EntityMention]]:
    """Inverse of :func:`write_mentions`; ``post_ids`` seeds empty entries."""
    out: dict[str, list[EntityMention]] = {pid: [] for pid in post_ids}
    for line_no, cols in _read_tsv(path):
        if line_no == 1:
            continue
        if len(cols) != 8:
            raise ParseError(line_no, "expected 8 columns")
        pid, surface, start, end, qid, etype, source, flag = cols
        span = (int(start), int(end)) if start else None
        out.setdefault(pid, []).append(EntityMention(surface, span, qid, etype or None, source, flag == "1"))
    return out


def _read_tsv(path) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            yield line_no, line.split("\t")


__all__ = [
    "DEFAULT_ENDPOINT",
    "DEFAULT_TABU_TYPES",
    "CurationRule",
    "EntityMention",
    "Gazetteer",
    "QID_RE",
    "apply_curation",
    "entity_vocabulary",
    "link_posts",
    "load_curation_rules",
    "load_gazetteer",
    "merge_mentions",
    "parse_remote_response",
    "read_mentions",
    "recognize_gazetteer",
    "recognize_remote",
    "write_mentions",
]
