"""Labeled short-text corpus: loading, preprocessing and profiling.

The on-disk format is a UTF-8 TSV with header
``id<TAB>text<TAB>ed1<TAB>ed2<TAB>ed3<TAB>ed4``. Any subset of the four task
columns may be present, and an optional ``author_id`` column may follow
``text``. Labels are the literals ``0`` and ``1``.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

from cbe.embed.tokens import tokenize
from cbe.errors import BothEmpty, DuplicateId, EmptyCorpus, MalformedRow, UnknownTask

TASKS = ("ed1", "ed2", "ed3", "ed4")
ITEM_KINDS = ("emoji", "unigram", "hashtag")

DEFAULT_EMOJI_RANGES: tuple[tuple[int, int], ...] = (
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x2600, 0x27BF),
)
ZWJ = "\u200d"
VS16 = "\ufe0f"
URL_PREFIXES = ("http://", "https://", "www.")


def normalize_task(task: str) -> str:
    t = task.strip().lower()
    if t not in TASKS:
        raise UnknownTask(task)
    return t


@dataclass(frozen=True)
class PreprocessConfig:
    emoji_ranges: tuple[tuple[int, int], ...] = DEFAULT_EMOJI_RANGES
    lowercase: bool = True
    drop_urls: bool = True
    drop_mentions: bool = True

    def is_emoji(self, ch: str) -> bool:
        cp = ord(ch)
        return any(lo <= cp <= hi for lo, hi in self.emoji_ranges)


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    clean_text: str = ""
    author_id: str | None = None
    emojis: tuple[str, ...] = ()


@dataclass
class LabeledCorpus:
    posts: list[Post]
    labels: dict[str, dict[str, int]] = field(default_factory=dict)
    tasks: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for p in self.posts:
            if p.id in seen:
                raise DuplicateId(p.id)
            seen.add(p.id)
        for pid, row in self.labels.items():
            if set(row) != set(self.tasks):
                raise ValueError(f"post {pid!r} labels {sorted(row)} != tasks {list(self.tasks)}")
            if any(v not in (0, 1) for v in row.values()):
                raise ValueError(f"post {pid!r} has a non-binary label")

    def __len__(self) -> int:
        return len(self.posts)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.posts]

    def post(self, post_id: str) -> Post:
        return self._by_id()[post_id]

    def _by_id(self) -> dict[str, Post]:
        return {p.id: p for p in self.posts}

    def task_labels(self, task: str) -> list[int]:
        t = normalize_task(task)
        if t not in self.tasks:
            raise UnknownTask(task)
        return [self.labels[p.id][t] for p in self.posts]

    def subset(self, ids: Iterable[str]) -> LabeledCorpus:
        keep = set(ids)
        posts = [p for p in self.posts if p.id in keep]
        return LabeledCorpus(posts, {p.id: self.labels[p.id] for p in posts}, self.tasks)

    def map_posts(self, fn) -> LabeledCorpus:
        return LabeledCorpus([fn(p) for p in self.posts], self.labels, self.tasks)


def load_corpus(path: str | Path) -> LabeledCorpus:
    """Read a corpus TSV. Row order is preserved.

    Raises:
        MalformedRow: wrong column count, tab/CR inside text, or a label that
            is not ``0``/``1``.
        DuplicateId: the same id appears twice.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        return read_corpus(fh)


def read_corpus(fh: io.TextIOBase) -> LabeledCorpus:
    lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRow(1, "missing header")
    header = lines[0].rstrip("\r").split("\t")
    if header[:2] != ["id", "text"]:
        raise MalformedRow(1, "header must start with id, text")
    cols = header[2:]
    has_author = bool(cols) and cols[0] == "author_id"
    task_cols = cols[1:] if has_author else cols
    if any(c not in TASKS for c in task_cols) or len(set(task_cols)) != len(task_cols):
        raise MalformedRow(1, f"unexpected label columns {task_cols}")

    posts: list[Post] = []
    labels: dict[str, dict[str, int]] = {}
    seen: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if line.endswith("\r"):
            line = line[:-1]
        fields = line.split("\t")
        if len(fields) != len(header):
            raise MalformedRow(line_no, f"expected {len(header)} columns, got {len(fields)}")
        pid, text = fields[0], fields[1]
        if "\r" in text:
            raise MalformedRow(line_no, "carriage return inside text")
        if not pid:
            raise MalformedRow(line_no, "empty id")
        if pid in seen:
            raise DuplicateId(pid)
        seen.add(pid)
        author = fields[2] or None if has_author else None
        row = {}
        for task, raw in zip(task_cols, fields[2 + has_author :]):
            if raw not in ("0", "1"):
                raise MalformedRow(line_no, f"label {raw!r} in column {task}")
            row[task] = int(raw)
        posts.append(Post(id=pid, text=text, author_id=author))
        labels[pid] = row
    return LabeledCorpus(posts, labels, tuple(task_cols))


def write_corpus(corpus: LabeledCorpus, path: str | Path, *, clean: bool = False) -> None:
    """Serialize ``corpus`` in the loader's format.

    With ``clean=True`` the preprocessed text is written instead of the raw text.
    """
    has_author = any(p.author_id is not None for p in corpus.posts)
    header = ["id", "text"] + (["author_id"] if has_author else []) + list(corpus.tasks)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for p in corpus.posts:
            text = p.clean_text if clean else p.text
            if "\t" in text or "\n" in text or "\r" in text:
                raise ValueError(f"post {p.id!r} text contains a tab or newline")
            row = [p.id, text]
            if has_author:
                row.append(p.author_id or "")
            row += [str(corpus.labels[p.id][t]) for t in corpus.tasks]
            fh.write("\t".join(row) + "\n")


def extract_emojis(text: str, cfg: PreprocessConfig = PreprocessConfig()) -> tuple[str, list[str]]:
    """Remove emoji grapheme clusters from ``text``.

    A cluster is an emoji codepoint plus any trailing variation selector
    (U+FE0F) and any further emoji joined to it by U+200D. Each cluster is
    replaced by a single space so that neighbouring words stay separate.

    Returns the stripped text and the clusters in order of appearance.
    """
    out: list[str] = []
    found: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if not cfg.is_emoji(ch):
            out.append(ch)
            i += 1
            continue
        j = i + 1
        while j < n:
            if text[j] == VS16:
                j += 1
            elif text[j] == ZWJ and j + 1 < n and cfg.is_emoji(text[j + 1]):
                j += 2
            elif 0x1F3FB <= ord(text[j]) <= 0x1F3FF:
                # skin-tone modifiers attach to the preceding emoji
                j += 1
            else:
                break
        found.append(text[i:j])
        out.append(" ")
        i = j
    return "".join(out), found


def _is_url(token: str) -> bool:
    low = token.lower()
    return low.startswith(URL_PREFIXES)


def clean_text(text: str, cfg: PreprocessConfig = PreprocessConfig()) -> tuple[str, list[str]]:
    """Apply the preprocessing rules to raw text; return (clean text, emojis)."""
    stripped, emojis = extract_emojis(text, cfg)
    # a lone VS16 or ZWJ left behind is not meaningful text
    stripped = stripped.replace(VS16, " ").replace(ZWJ, " ")
    if cfg.lowercase:
        stripped = stripped.lower()
    kept = []
    for tok in stripped.split():
        if cfg.drop_urls and _is_url(tok):
            continue
        if cfg.drop_mentions and tok.startswith("@"):
            continue
        kept.append(tok)
    return " ".join(kept), emojis


def preprocess(post: Post, cfg: PreprocessConfig = PreprocessConfig()) -> Post:
    """Fill ``clean_text`` and ``emojis`` from ``post.text``.

    >>> p = preprocess(Post("1", "Check https://t.co/x #anorexia \U0001F622"))
    >>> p.clean_text, p.emojis
    ('check #anorexia', ('\U0001F622',))
    """
    text, emojis = clean_text(post.text, cfg)
    return replace(post, clean_text=text, emojis=tuple(emojis))


def preprocess_corpus(corpus: LabeledCorpus, cfg: PreprocessConfig = PreprocessConfig()) -> LabeledCorpus:
    return corpus.map_posts(lambda p: preprocess(p, cfg))


def emoji_statistics(corpus: LabeledCorpus) -> tuple[int, float]:
    """Number and fraction of posts that contained at least one emoji."""
    if not corpus.posts:
        raise EmptyCorpus("corpus has no posts")
    n = sum(1 for p in corpus.posts if p.emojis)
    return n, n / len(corpus.posts)


@dataclass
class ClassDistribution:
    task: str
    class_label: int
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def post_items(post: Post, item_kind: str) -> list[str]:
    if item_kind == "emoji":
        return list(post.emojis)
    toks = tokenize(post.clean_text)
    if item_kind == "unigram":
        return toks
    if item_kind == "hashtag":
        return [t for t in toks if t.startswith("#")]
    raise ValueError(f"item_kind must be one of {ITEM_KINDS}, got {item_kind!r}")


def top_items(counts: Counter | dict[str, int], top_n: int) -> list[str]:
    """The ``top_n`` most frequent keys; ties broken lexicographically."""
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [k for k, _ in ranked[:top_n]]


def count_by_class(
    items_per_post: Sequence[Sequence[str]], labels: Sequence[int], top_n: int
) -> tuple[list[str], Counter, Counter]:
    """Per-class item counts restricted to the overall top ``top_n`` items."""
    overall: Counter[str] = Counter()
    per_class = (Counter(), Counter())
    for items, y in zip(items_per_post, labels):
        overall.update(items)
        per_class[y].update(items)
    keep = top_items(overall, top_n)
    keep_set = set(keep)
    c0 = Counter({k: v for k, v in per_class[0].items() if k in keep_set})
    c1 = Counter({k: v for k, v in per_class[1].items() if k in keep_set})
    return keep, c0, c1


def class_distribution(
    corpus: LabeledCorpus, task: str, item_kind: str = "emoji", top_n: int = 165
) -> tuple[ClassDistribution, ClassDistribution]:
    """Frequency of emojis, unigrams or hashtags among posts of each class."""
    t = normalize_task(task)
    labels = corpus.task_labels(t)
    items = [post_items(p, item_kind) for p in corpus.posts]
    _, c0, c1 = count_by_class(items, labels, top_n)
    return ClassDistribution(t, 0, dict(c0)), ClassDistribution(t, 1, dict(c1))


def distribution_vectors(
    d0: ClassDistribution, d1: ClassDistribution
) -> tuple[list[str], list[int], list[int]]:
    """Align two distributions over the union of their items (sorted)."""
    items = sorted(set(d0.counts) | set(d1.counts))
    return items, [d0.counts.get(k, 0) for k in items], [d1.counts.get(k, 0) for k in items]


def overlap_analysis(d0: ClassDistribution, d1: ClassDistribution) -> float:
    """Jaccard overlap of the item sets of two class distributions."""
    k0, k1 = set(d0.counts), set(d1.counts)
    union = k0 | k1
    if not union:
        raise BothEmpty("both distributions are empty")
    return len(k0 & k1) / len(union)


def write_distribution_report(rows: Iterable[ClassDistribution], path: str | Path) -> None:
    """Write distributions as a long TSV: task, class_label, item, count."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["task", "class_label", "item", "count"])
        for d in rows:
            for item, c in sorted(d.counts.items(), key=lambda kv: (-kv[1], kv[0])):
                w.writerow([d.task, d.class_label, item, c])
