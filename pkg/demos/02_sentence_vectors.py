"""Skip-gram token vectors pooled into sentence vectors, then fused.

Run: python demos/02_sentence_vectors.py
"""

# %% Train token vectors on a planted corpus
import numpy as np

from cbe.embed import SgnsConfig, SifEmbedder, tokenize, train_skipgram
from cbe.fusion import Standardizer, fuse_matrix
from cbe.synthetic import planted_benchmark

bench = planted_benchmark(seed=0, n_posts=300)
sentences = [tokenize(p.text) for p in bench.corpus.posts]
table = train_skipgram(sentences, SgnsConfig(dim=32, epochs=5, seed=0))
print("vocabulary size:", len(table.vocab))

# %% Pool with frequency weights; the common direction is fit on the first 200 posts only
sif = SifEmbedder(table).fit(sentences[:200])
x_train, _ = sif.transform(sentences[:200])
x_test, empty = sif.transform(sentences[200:])
print("train/test shapes:", x_train.shape, x_test.shape, "empty test posts:", int(empty.sum()))

# %% After removal the training vectors carry almost nothing along the removed direction
print("mean |projection| on removed direction:", float(np.abs(x_train @ sif.direction).mean()))

# %% Stand-in graph block, fused by concatenation and standardized on training rows
rng = np.random.default_rng(0)
kg_train, kg_test = rng.normal(size=(200, 16)), rng.normal(size=(100, 16))
scaler = Standardizer().fit(fuse_matrix(x_train, kg_train))
fused_test = scaler.transform(fuse_matrix(x_test, kg_test))
print("fused test block:", fused_test.shape)
