"""Context-based embeddings: per-post KG vectors fused with text vectors."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cbe.embed.sgns import EmbeddingTable
from cbe.embed.sif import SifConfig, SifEmbedder, token_frequencies
from cbe.errors import DimensionMismatch, NoSentences
from cbe.kgstore import WD_ENTITY

STRATEGIES = ("concat", "sum", "average")


@dataclass(frozen=True)
class CbeVector:
    values: np.ndarray
    text_dim: int
    kg_dim: int
    kg_missing: bool = False

    def __post_init__(self):
        if self.values.shape != (self.text_dim + self.kg_dim,) and self.values.shape != (self.text_dim,):
            raise DimensionMismatch("CBE length disagrees with its block sizes")


def entity_tokens(qids: Sequence[str], table: EmbeddingTable, prefix: str = WD_ENTITY) -> list[str]:
    """Map qids to table tokens, accepting tables keyed by full IRI or bare qid."""
    out = []
    for q in qids:
        iri = prefix + q
        out.append(iri if iri in table.vocab.index else q)
    return out


class KgSentenceEmbedder:
    """One vector per post from the KG vectors of its linked entities.

    Each post's qid list is treated as a sentence and pooled with SIF. Entity
    frequencies and the removed component are fit on the posts passed to
    :meth:`fit` (the training split) and then frozen.
    """

    def __init__(self, kge_table: EmbeddingTable, cfg: SifConfig = SifConfig(), prefix: str = WD_ENTITY):
        self.table = kge_table
        self.cfg = cfg
        self.prefix = prefix
        self._sif: SifEmbedder | None = None

    def _sentences(self, mentions: Sequence[Sequence[str]]) -> list[list[str]]:
        return [entity_tokens(qs, self.table, self.prefix) for qs in mentions]

    def fit(self, mentions: Sequence[Sequence[str]]) -> KgSentenceEmbedder:
        if not mentions:
            raise NoSentences("no posts to fit on")
        sents = self._sentences(mentions)
        freq = token_frequencies(sents)
        self._sif = SifEmbedder(self.table, self.cfg, freq).fit(sents)
        return self

    def transform(self, mentions: Sequence[Sequence[str]]) -> tuple[np.ndarray, np.ndarray]:
        """Return (vectors, missing) where ``missing`` marks posts with no known entity."""
        if self._sif is None:
            raise RuntimeError("fit before transform")
        return self._sif.transform(self._sentences(mentions))


def kg_sentence_embedding(
    mentions: Sequence[Sequence[str]],
    kge_table: EmbeddingTable,
    cfg: SifConfig = SifConfig(),
    fit_on: Sequence[Sequence[str]] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """SIF-pool each post's entity vectors.

    ``fit_on`` gives the mention lists that define entity frequencies and the
    removed component; it defaults to ``mentions`` itself.

    Returns the ``n x kg_dim`` matrix and the boolean missing-entity mask.
    """
    if not mentions:
        raise NoSentences("no posts")
    emb = KgSentenceEmbedder(kge_table, cfg).fit(fit_on if fit_on is not None else mentions)
    return emb.transform(mentions)


def fuse(text_vec, kg_vec, strategy: str = "concat", kg_missing: bool = False) -> CbeVector:
    """Combine one text vector and one KG vector into a CBE vector."""
    t = np.asarray(text_vec, dtype=float)
    k = np.asarray(kg_vec, dtype=float)
    if strategy == "concat":
        return CbeVector(np.concatenate([t, k]), t.shape[0], k.shape[0], kg_missing)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown fusion strategy {strategy!r}")
    if t.shape != k.shape:
        raise DimensionMismatch(f"{strategy} needs equal dims, got {t.shape[0]} and {k.shape[0]}")
    v = t + k if strategy == "sum" else (t + k) / 2.0
    return CbeVector(v, t.shape[0], 0, kg_missing)


def fuse_matrix(text_x: np.ndarray, kg_x: np.ndarray, strategy: str = "concat") -> np.ndarray:
    """Row-wise :func:`fuse` over two aligned feature matrices."""
    if text_x.shape[0] != kg_x.shape[0]:
        raise DimensionMismatch("text and KG matrices have different row counts")
    if strategy == "concat":
        return np.hstack([text_x, kg_x])
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown fusion strategy {strategy!r}")
    if text_x.shape != kg_x.shape:
        raise DimensionMismatch(f"{strategy} needs equal dims")
    return text_x + kg_x if strategy == "sum" else (text_x + kg_x) / 2.0


class Standardizer:
    """Per-column z-scoring fit on training rows. Constant columns are only centered."""

    def fit(self, x: np.ndarray) -> Standardizer:
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale_ = np.where(std > 1e-12, std, 1.0)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean_) / self.scale_

    def fit_transform(self, x: np.ndarray) -> np.ndarray:
        return self.fit(x).transform(x)


def write_feature_dump(
    path: str | Path,
    ids: Sequence[str],
    labels: Mapping[str, Mapping[str, int]],
    tasks: Sequence[str],
    features: np.ndarray,
) -> None:
    """TSV: ``id``, one column per task, then ``f0..f{d-1}``."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["id", *tasks, *(f"f{j}" for j in range(features.shape[1]))]
        fh.write("\t".join(cols) + "\n")
        for pid, row in zip(ids, features):
            lab = [str(labels[pid][t]) for t in tasks]
            fh.write("\t".join([pid, *lab, *(repr(float(v)) for v in row)]) + "\n")


def read_feature_dump(path: str | Path) -> tuple[list[str], dict[str, dict[str, int]], list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        tasks = [c for c in header[1:] if not c.startswith("f")]
        ids, labels, rows = [], {}, []
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            pid = cols[0]
            ids.append(pid)
            labels[pid] = {t: int(cols[1 + i]) for i, t in enumerate(tasks)}
            rows.append([float(v) for v in cols[1 + len(tasks) :]])
    d = len(header) - 1 - len(tasks)
    return ids, labels, tasks, np.asarray(rows, dtype=float).reshape(len(ids), d)
