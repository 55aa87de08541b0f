"""Generated corpus + knowledge graph with a planted label signal.

Every post mentions one entity from one of two graph clusters and carries one of
two sets of marker words. Entity clusters are only visible through the graph
(their surface forms are arbitrary pseudo-words), while marker words are only
visible through text co-occurrence. Each task label combines both signals, so
a classifier needs the text vector and the KG vector together to reach it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cbe.corpus import LabeledCorpus, Post, write_corpus
from cbe.kgstore import WD_DIRECT, WD_ENTITY, KnowledgeGraph, Triple, write_ntriples
from cbe.linker import Gazetteer

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

INSTANCE_OF = WD_DIRECT + "P31"
SUBCLASS_OF = WD_DIRECT + "P279"
RELATED = WD_DIRECT + "P1889"
LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

# task -> label as a function of (cluster, marker)
TASK_RULES = {
    "ed1": lambda c, m: c & m,
    "ed2": lambda c, m: c | m,
    "ed3": lambda c, m: c & (1 - m),
    "ed4": lambda c, m: (1 - c) & m,
}


def _pseudo_words(rng: np.random.Generator, n: int, syllables: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS)) for _ in range(syllables))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


@dataclass
class PlantedBenchmark:
    corpus: LabeledCorpus
    graph: KnowledgeGraph
    gazetteer: Gazetteer
    cluster_of: dict[str, int]
    marker_of: dict[str, int]

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"corpus": d / "corpus.tsv", "kg": d / "kg.nt", "gazetteer": d / "gazetteer.tsv"}
        write_corpus(self.corpus, paths["corpus"])
        write_ntriples(self.graph, paths["kg"])
        with open(paths["gazetteer"], "w", encoding="utf-8") as fh:
            fh.write("surface\tqid\ttype\n")
            for surface, (qid, etype) in sorted(self.gazetteer.entries.items()):
                fh.write(f"{surface}\t{qid}\t{etype or ''}\n")
        return paths


def planted_benchmark(
    seed: int = 0,
    n_posts: int = 400,
    entities_per_cluster: int = 40,
    hubs_per_cluster: int = 4,
    markers_per_class: int = 8,
    fillers: int = 60,
    emoji_rate: float = 0.2,
    cross_edge_rate: float = 0.05,
) -> PlantedBenchmark:
    """Build the benchmark deterministically from ``seed``."""
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    qid_counter = iter(range(9_000_001, 10_000_000))

    def new_qid() -> str:
        return f"Q{next(qid_counter)}"

    triples: list[Triple] = []
    roots = [new_qid(), new_qid()]
    hubs = [[new_qid() for _ in range(hubs_per_cluster)] for _ in range(2)]
    ents = [[new_qid() for _ in range(entities_per_cluster)] for _ in range(2)]
    surfaces = _pseudo_words(rng, 2 * entities_per_cluster, 3, taken)

    gaz: dict[str, tuple[str, str | None]] = {}
    cluster_of: dict[str, int] = {}
    for c in range(2):
        for h in hubs[c]:
            triples.append(Triple(WD_ENTITY + h, SUBCLASS_OF, WD_ENTITY + roots[c]))
        for i, q in enumerate(ents[c]):
            iri = WD_ENTITY + q
            surface = surfaces[c * entities_per_cluster + i]
            gaz[surface] = (q, "Concept")
            cluster_of[q] = c
            triples.append(Triple(iri, LABEL, f'"{surface}"@en', object_is_literal=True))
            for h in rng.choice(hubs[c], size=2, replace=False):
                triples.append(Triple(iri, INSTANCE_OF, WD_ENTITY + h))
            other_c = 1 - c if rng.random() < cross_edge_rate else c
            peer = ents[other_c][int(rng.integers(entities_per_cluster))]
            if peer != q:
                triples.append(Triple(iri, RELATED, WD_ENTITY + peer))

    marker_words = [_pseudo_words(rng, markers_per_class, 2, taken) for _ in range(2)]
    filler_words = _pseudo_words(rng, fillers, 2, taken)
    emojis = ["\U0001F622", "\U0001F62D", "\u2764\ufe0f", "\U0001F4AA", "\U0001F60A"]

    posts, labels, marker_of = [], {}, {}
    for i in range(n_posts):
        c = int(rng.integers(2))
        m = int(rng.integers(2))
        words: list[str] = []
        # one entity per post keeps cluster identity out of text co-occurrence
        words.append(surfaces[c * entities_per_cluster + int(rng.integers(entities_per_cluster))])
        words += list(rng.choice(marker_words[m], size=3, replace=True))
        words += list(rng.choice(filler_words, size=int(rng.integers(4, 8)), replace=True))
        rng.shuffle(words)
        text = " ".join(words)
        if rng.random() < emoji_rate:
            text += " " + emojis[int(rng.integers(len(emojis)))]
        if rng.random() < 0.1:
            text = "@user " + text + " https://example.org/p/" + str(i)
        pid = f"p{i:04d}"
        posts.append(Post(pid, text))
        labels[pid] = {t: int(rule(c, m)) for t, rule in TASK_RULES.items()}
        marker_of[pid] = m
    corpus = LabeledCorpus(posts, labels, tuple(TASK_RULES))
    return PlantedBenchmark(corpus, KnowledgeGraph.from_triples(triples), Gazetteer(gaz), cluster_of, marker_of)
