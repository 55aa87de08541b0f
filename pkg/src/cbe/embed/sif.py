"""Smooth-inverse-frequency sentence embeddings.

Each sentence vector is the mean of its in-vocabulary token vectors weighted
by a / (a + p(w)). Optionally the projection on the first singular vector of
the stacked sentence matrix is removed afterwards.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from cbe.embed.sgns import EmbeddingTable
from cbe.errors import NoSentences

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SifConfig:
    a: float = 1e-3
    remove_pc: bool = True
    pc_tol: float = 1e-9
    pc_max_iter: int = 1000

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("SIF parameter a must be > 0")


def sif_weight(p: float | np.ndarray, a: float) -> float | np.ndarray:
    return a / (a + p)


def token_frequencies(sentences: Iterable[Sequence[str]]) -> dict[str, float]:
    """Relative frequency of each token over a collection of sentences."""
    counts = Counter(t for s in sentences for t in s)
    total = sum(counts.values())
    return {t: c / total for t, c in counts.items()} if total else {}


def weighted_average(
    sentences: Sequence[Sequence[str]], table: EmbeddingTable, word_freq: Mapping[str, float], a: float
) -> tuple[np.ndarray, np.ndarray]:
    """SIF-weighted means before component removal.

    Tokens absent from ``table`` are skipped. A token in the table without an
    entry in ``word_freq`` is treated as unseen (p = 0, weight 1).

    Returns the ``n x dim`` matrix and a boolean mask of sentences that had no
    in-vocabulary token (their rows are zero).
    """
    out = np.zeros((len(sentences), table.dim))
    empty = np.zeros(len(sentences), dtype=bool)
    for i, sent in enumerate(sentences):
        idx, w = [], []
        for tok in sent:
            j = table.vocab.index.get(tok)
            if j is None:
                continue
            idx.append(j)
            w.append(sif_weight(word_freq.get(tok, 0.0), a))
        if not idx:
            empty[i] = True
            continue
        # a fixed summation order makes the result a function of the token multiset
        order = np.argsort(idx, kind="stable")
        rows = np.asarray(idx)[order]
        out[i] = np.asarray(w)[order] @ table.input_vectors[rows] / len(idx)
    return out, empty


def first_singular_vector(x: np.ndarray, tol: float = 1e-9, max_iter: int = 1000) -> np.ndarray | None:
    """Leading right singular vector of ``x`` (unit norm) by power iteration.

    Iterates on the Gram matrix x^T x starting from the column sum. Returns
    None for an all-zero matrix. If the iteration has not settled within
    ``max_iter`` steps (near-degenerate top singular values) the answer is
    taken from a symmetric eigendecomposition instead.
    """
    gram = x.T @ x
    if not np.any(gram):
        return None
    v = x.sum(axis=0)
    if np.linalg.norm(v) < 1e-12 * max(1.0, np.abs(x).max()):
        v = np.ones(x.shape[1])
    v = v / np.linalg.norm(v)
    for _ in range(max_iter):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            v = np.random.default_rng(0).standard_normal(x.shape[1])
            v /= np.linalg.norm(v)
            continue
        w /= norm
        if w @ v < 0:
            w = -w
        if np.linalg.norm(w - v) < tol:
            return w
        v = w
    log.warning("power iteration did not converge in %d steps; using eigh", max_iter)
    _, vecs = np.linalg.eigh(gram)
    return vecs[:, -1]


def remove_component(x: np.ndarray, direction: np.ndarray | None) -> np.ndarray:
    if direction is None:
        return x.copy()
    return x - np.outer(x @ direction, direction)


class SifEmbedder:
    """SIF with frequencies and the removed direction frozen at fit time.

    Fitting on training sentences and reusing the embedder on test sentences
    keeps test statistics out of the features.
    """

    def __init__(self, table: EmbeddingTable, cfg: SifConfig = SifConfig(), word_freq: Mapping[str, float] | None = None):
        self.table = table
        self.cfg = cfg
        self.word_freq = dict(word_freq) if word_freq is not None else None
        self.direction: np.ndarray | None = None

    def fit(self, sentences: Sequence[Sequence[str]]) -> SifEmbedder:
        if not sentences:
            raise NoSentences("cannot fit SIF on zero sentences")
        if self.word_freq is None:
            self.word_freq = token_frequencies(sentences)
        _check_freq(self.word_freq)
        x, _ = weighted_average(sentences, self.table, self.word_freq, self.cfg.a)
        self.direction = None
        if self.cfg.remove_pc and len(sentences) >= 2:
            self.direction = first_singular_vector(x, self.cfg.pc_tol, self.cfg.pc_max_iter)
        return self

    def transform(self, sentences: Sequence[Sequence[str]]) -> tuple[np.ndarray, np.ndarray]:
        if self.word_freq is None:
            raise RuntimeError("SifEmbedder.transform called before fit")
        if not sentences:
            raise NoSentences("no sentences to embed")
        x, empty = weighted_average(sentences, self.table, self.word_freq, self.cfg.a)
        return remove_component(x, self.direction), empty

    def fit_transform(self, sentences):
        return self.fit(sentences).transform(sentences)


def _check_freq(word_freq: Mapping[str, float]) -> None:
    bad = [t for t, p in word_freq.items() if not 0.0 < p <= 1.0]
    if bad:
        raise ValueError(f"word frequencies must lie in (0, 1]; offending tokens: {bad[:5]}")


def sif_embed(
    sentences: Sequence[Sequence[str]],
    table: EmbeddingTable,
    word_freq: Mapping[str, float],
    cfg: SifConfig = SifConfig(),
) -> np.ndarray:
    """Embed every sentence; the removed component is fit on these sentences.

    Sentences without any in-vocabulary token map to the zero vector.

    Raises:
        NoSentences: ``sentences`` is empty.
    """
    if not sentences:
        raise NoSentences("no sentences to embed")
    vecs, _ = SifEmbedder(table, cfg, word_freq).fit_transform(sentences)
    return vecs
