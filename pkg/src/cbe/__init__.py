"""Knowledge-graph-augmented short-text classification with context-based embeddings.

Modules:

- :mod:`cbe.corpus`: labeled post corpora, preprocessing, emoji/term profiling
- :mod:`cbe.kgstore`: N-Triples snapshots and curated concept additions
- :mod:`cbe.linker`: gazetteer and remote entity linking, curation
- :mod:`cbe.walks`: random walks over the graph
- :mod:`cbe.embed`: skip-gram training, SIF pooling, embedding files
- :mod:`cbe.fusion`: per-post KG vectors and their fusion with text vectors
- :mod:`cbe.learn`: logistic regression, one-hidden-layer network, k-NN
- :mod:`cbe.evaluation`: splits, folds, metrics, Spearman, grid search, bias check
- :mod:`cbe.pipeline` and :mod:`cbe.cli`: the staged experiment runner
"""

__version__ = "0.1.0"
