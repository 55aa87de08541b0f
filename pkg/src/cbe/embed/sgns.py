"""Skip-gram with negative sampling, trained by plain SGD.

The hot loop is compiled with numba; everything else is numpy. Training over
token sequences is agnostic to what the tokens are, so the same code learns
word vectors from posts and entity vectors from graph walks.
"""

from __future__ import annotations

import logging
import threading
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numba import njit

from cbe.embed.tokens import Vocabulary, build_vocab
from cbe.errors import DimensionMismatch

log = logging.getLogger(__name__)

MIN_LR = 1e-4
NEG_TABLE_POWER = 0.75


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = MIN_LR
    subsample_threshold: float = 1e-3
    min_count: int = 1
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim, window and negatives must all be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0 or self.min_learning_rate <= 0:
            raise ValueError("learning rates must be > 0")
        if self.subsample_threshold < 0:
            raise ValueError("subsample_threshold must be >= 0")
        if self.min_count < 1 or self.workers < 1:
            raise ValueError("min_count and workers must be >= 1")


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray

    def __post_init__(self):
        n = len(self.vocab)
        if self.input_vectors.ndim != 2 or self.input_vectors.shape[0] != n:
            raise DimensionMismatch(f"input matrix shape {self.input_vectors.shape} vs vocab size {n}")
        if self.output_vectors.shape != self.input_vectors.shape:
            raise DimensionMismatch("input and output matrices differ in shape")

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __getitem__(self, token: str) -> np.ndarray:
        return self.input_vectors[self.vocab.index[token]]

    def most_similar(self, token: str, topn: int = 5) -> list[tuple[str, float]]:
        unit = self.input_vectors / np.maximum(np.linalg.norm(self.input_vectors, axis=1, keepdims=True), 1e-12)
        sims = unit @ unit[self.vocab.index[token]]
        order = np.argsort(-sims, kind="stable")
        return [(self.vocab.tokens[i], float(sims[i])) for i in order if self.vocab.tokens[i] != token][:topn]


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def sgns_loss_and_grad(center_vec, context_vec, negative_vecs=()):
    """Negative-sampling loss for one (center, context) pair and its gradients.

    loss = -log s(u.v) - sum_n log s(-u_n.v), with v the center (input) vector,
    u the context (output) vector and u_n the negative samples.

    Returns:
        ``(loss, grad_center, grad_context, grad_negatives)`` where
        ``grad_negatives`` has one row per negative.
    """
    v = np.asarray(center_vec, dtype=float)
    u = np.asarray(context_vec, dtype=float)
    if v.ndim != 1 or u.shape != v.shape:
        raise DimensionMismatch(f"center {v.shape} and context {u.shape} differ")
    negs = np.asarray(negative_vecs, dtype=float)
    if negs.size == 0:
        negs = np.zeros((0, v.shape[0]))
    elif negs.ndim != 2 or negs.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"negatives {negs.shape} do not match dim {v.shape[0]}")
    pos = u @ v
    neg = negs @ v
    loss = -_log_sigmoid(pos) - _log_sigmoid(-neg).sum()
    g_pos = _sigmoid(pos) - 1.0
    g_neg = _sigmoid(neg)
    grad_center = g_pos * u + g_neg @ negs
    grad_context = g_pos * v
    grad_negs = g_neg[:, None] * v[None, :]
    return float(loss), grad_center, grad_context, grad_negs


@njit(cache=True, nogil=True)
def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _train_pass(tokens, offsets, w_in, w_out, cum_neg, keep_prob, window, negatives,
                lr0, lr_min, done0, total, seed):  # pragma: no cover - compiled
    np.random.seed(seed)
    dim = w_in.shape[1]
    grad_v = np.zeros(dim)
    sent = np.empty(tokens.shape[0], dtype=np.int64)
    done = done0
    n_seq = offsets.shape[0] - 1
    for s in range(n_seq):
        start, stop = offsets[s], offsets[s + 1]
        length = 0
        for k in range(start, stop):
            w = tokens[k]
            if keep_prob[w] >= 1.0 or np.random.random() < keep_prob[w]:
                sent[length] = w
                length += 1
        for i in range(length):
            progress = done / total if total > 0 else 1.0
            lr = lr0 - (lr0 - lr_min) * progress
            if lr < lr_min:
                lr = lr_min
            done += 1
            c = sent[i]
            lo = max(0, i - window)
            hi = min(length, i + window + 1)
            for j in range(lo, hi):
                if j == i:
                    continue
                ctx = sent[j]
                grad_v[:] = 0.0
                # positive pair
                dot = 0.0
                for d in range(dim):
                    dot += w_in[c, d] * w_out[ctx, d]
                g = (_sig(dot) - 1.0) * lr
                for d in range(dim):
                    grad_v[d] += g * w_out[ctx, d]
                    w_out[ctx, d] -= g * w_in[c, d]
                for _ in range(negatives):
                    r = np.random.random() * cum_neg[-1]
                    neg = np.searchsorted(cum_neg, r, side="right")
                    if neg >= cum_neg.shape[0]:
                        neg = cum_neg.shape[0] - 1
                    if neg == ctx:
                        continue
                    dot = 0.0
                    for d in range(dim):
                        dot += w_in[c, d] * w_out[neg, d]
                    g = _sig(dot) * lr
                    for d in range(dim):
                        grad_v[d] += g * w_out[neg, d]
                        w_out[neg, d] -= g * w_in[c, d]
                for d in range(dim):
                    w_in[c, d] -= grad_v[d]
    return done


def _encode(sequences: Sequence[Sequence[str]], vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    ids: list[int] = []
    offsets = [0]
    for seq in sequences:
        ids.extend(vocab.index[t] for t in seq if t in vocab.index)
        offsets.append(len(ids))
    return np.asarray(ids, dtype=np.int64), np.asarray(offsets, dtype=np.int64)


def negative_table(vocab: Vocabulary, power: float = NEG_TABLE_POWER) -> np.ndarray:
    """Cumulative (unnormalized) unigram^power distribution over the vocabulary."""
    counts = np.array([vocab.counts[t] for t in vocab.tokens], dtype=float)
    return np.cumsum(counts**power)


def keep_probabilities(vocab: Vocabulary, threshold: float) -> np.ndarray:
    """Per-token probability of surviving frequent-word subsampling."""
    counts = np.array([vocab.counts[t] for t in vocab.tokens], dtype=float)
    if threshold <= 0:
        return np.ones_like(counts)
    f = counts / counts.sum()
    keep = (np.sqrt(f / threshold) + 1.0) * threshold / f
    return np.minimum(keep, 1.0)


def init_table(vocab: Vocabulary, dim: int, seed: int) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    return EmbeddingTable(vocab, w_in, np.zeros_like(w_in))


def train_skipgram(sequences: Sequence[Sequence[str]], cfg: SgnsConfig = SgnsConfig()) -> EmbeddingTable:
    """Learn token vectors from co-occurrence inside a sliding window.

    Negatives are drawn from the unigram distribution raised to 0.75 and the
    learning rate decays linearly to ``cfg.min_learning_rate``. With
    ``workers=1`` the result is a deterministic function of ``cfg.seed``;
    more workers run unsynchronized updates over sequence shards.

    Raises:
        EmptyAfterFiltering: no token survives ``min_count``.
    """
    vocab = build_vocab(sequences, cfg.min_count)
    table = init_table(vocab, cfg.dim, cfg.seed)
    if cfg.epochs == 0:
        return table
    tokens, offsets = _encode(sequences, vocab)
    cum_neg = negative_table(vocab)
    keep = keep_probabilities(vocab, cfg.subsample_threshold)
    # total center positions before subsampling; decay reaches the floor a bit
    # early when subsampling drops tokens, which matches common practice
    expected = float(np.sum(keep[tokens])) * cfg.epochs if len(tokens) else 1.0
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    done = 0
    for epoch in range(cfg.epochs):
        seeds = rng.integers(0, 2**31 - 1, size=cfg.workers)
        if cfg.workers == 1:
            done = _train_pass(tokens, offsets, table.input_vectors, table.output_vectors, cum_neg, keep,
                               cfg.window, cfg.negatives, cfg.learning_rate, cfg.min_learning_rate,
                               done, expected, int(seeds[0]))
        else:
            done = _parallel_pass(tokens, offsets, table, cum_neg, keep, cfg, done, expected, seeds)
        if not (np.isfinite(table.input_vectors).all() and np.isfinite(table.output_vectors).all()):
            raise FloatingPointError(f"non-finite embedding after epoch {epoch}")
        log.debug("sgns epoch %d/%d done (%d positions)", epoch + 1, cfg.epochs, done)
    return table


def _parallel_pass(tokens, offsets, table, cum_neg, keep, cfg, done, expected, seeds) -> int:
    n_seq = len(offsets) - 1
    bounds = np.linspace(0, n_seq, cfg.workers + 1).astype(int)
    results = [0] * cfg.workers

    def work(w: int):
        lo, hi = bounds[w], bounds[w + 1]
        sub_off = offsets[lo : hi + 1] - offsets[lo]
        sub_tok = tokens[offsets[lo] : offsets[hi]]
        start = done + int(expected / cfg.epochs * lo / max(n_seq, 1))
        results[w] = _train_pass(sub_tok, sub_off, table.input_vectors, table.output_vectors, cum_neg, keep,
                                 cfg.window, cfg.negatives, cfg.learning_rate, cfg.min_learning_rate,
                                 start, expected, int(seeds[w])) - start

    threads = [threading.Thread(target=work, args=(w,)) for w in range(cfg.workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return done + sum(results)
