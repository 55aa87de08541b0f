"""Bounded random walks over a knowledge graph.

Walk corpora are token sequences (entities, optionally interleaved with
predicates) meant for :func:`cbe.embed.train_skipgram`.
"""

from __future__ import annotations

import hashlib
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cbe.errors import UnknownSeed
from cbe.kgstore import KnowledgeGraph


@dataclass(frozen=True)
class WalkConfig:
    max_depth: int = 4
    max_walks: int = 50
    include_predicates: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1 or self.max_walks < 1:
            raise ValueError("max_depth and max_walks must be >= 1")


@dataclass(frozen=True)
class Walk:
    tokens: tuple[str, ...]
    with_predicates: bool = True

    @property
    def hops(self) -> int:
        return (len(self.tokens) - 1) // 2 if self.with_predicates else len(self.tokens) - 1

    def entities(self) -> tuple[str, ...]:
        return self.tokens[::2] if self.with_predicates else self.tokens


def _seed_stream(base_seed: int, iri: str) -> np.random.Generator:
    digest = hashlib.sha256(iri.encode("utf-8")).digest()
    return np.random.default_rng([base_seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest[:8], "little")])


def walks_from(g: KnowledgeGraph, seed_iri: str, cfg: WalkConfig) -> list[Walk]:
    """Up to ``cfg.max_walks`` distinct walks rooted at ``seed_iri``.

    Each step picks an outgoing edge uniformly at random; a walk ends after
    ``max_depth`` hops or at a node without outgoing edges. Duplicates are
    dropped after sampling, keeping first occurrences.
    """
    rng = _seed_stream(cfg.seed, seed_iri)
    seen: set[tuple[str, ...]] = set()
    out: list[Walk] = []
    for _ in range(cfg.max_walks):
        toks = [seed_iri]
        node = seed_iri
        for _ in range(cfg.max_depth):
            edges = g.out_adjacency.get(node)
            if not edges:
                break
            pred, node = edges[int(rng.integers(len(edges)))]
            if cfg.include_predicates:
                toks.append(pred)
            toks.append(node)
        key = tuple(toks)
        if key not in seen:
            seen.add(key)
            out.append(Walk(key, cfg.include_predicates))
    return out


def generate_walks(g: KnowledgeGraph, seeds: Iterable[str], cfg: WalkConfig = WalkConfig()) -> dict[str, list[Walk]]:
    """Walks for every seed, keyed by seed IRI in input order.

    Each seed draws from its own random stream derived from ``cfg.seed`` and
    the IRI, so results do not depend on seed order. Seeds absent from the
    graph get an empty list and an :class:`UnknownSeed` warning.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("no seeds given")
    nodes = g.nodes
    out: dict[str, list[Walk]] = {}
    for s in seeds:
        if s in out:
            continue
        if s not in nodes:
            warnings.warn(UnknownSeed(s), stacklevel=2)
            out[s] = []
            continue
        out[s] = walks_from(g, s, cfg)
    return out


def walks_to_sequences(walks: Iterable[Walk] | Mapping[str, Sequence[Walk]], include_predicates: bool | None = None) -> list[list[str]]:
    """Flatten walks into token lists, optionally dropping predicate tokens."""
    if isinstance(walks, Mapping):
        walks = [w for ws in walks.values() for w in ws]
    seqs = []
    for w in walks:
        if include_predicates is False and w.with_predicates:
            seqs.append(list(w.tokens[::2]))
        else:
            seqs.append(list(w.tokens))
    return seqs


def validate_walk(g: KnowledgeGraph, walk: Walk) -> bool:
    """True when every hop of a predicate-bearing walk is a graph edge."""
    t = walk.tokens
    if not walk.with_predicates or len(t) % 2 == 0:
        return False
    return all(g.has_edge(t[i], t[i + 1], t[i + 2]) for i in range(0, len(t) - 2, 2))


def write_walks(walks: Mapping[str, Sequence[Walk]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ws in walks.values():
            for w in ws:
                fh.write(" ".join(w.tokens) + "\n")


def read_walk_sequences(path: str | Path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]
