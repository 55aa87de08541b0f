import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import sif_reference

from cbe.embed import EmbeddingTable, SifConfig
from cbe.embed.tokens import Vocabulary
from cbe.errors import DimensionMismatch
from cbe.fusion import (
    KgSentenceEmbedder,
    Standardizer,
    fuse,
    fuse_matrix,
    kg_sentence_embedding,
    read_feature_dump,
    write_feature_dump,
)
from cbe.kgstore import WD_ENTITY

QIDS = ["Q254327", "Q181600", "Q474191", "Q131749"]


def kge(dim=3, seed=0, bare=False):
    rng = np.random.default_rng(seed)
    toks = QIDS if bare else [WD_ENTITY + q for q in QIDS]
    w = rng.normal(size=(len(toks), dim))
    return EmbeddingTable(Vocabulary(toks, {t: 1 for t in toks}), w, np.zeros_like(w))


def test_single_entity_post():
    t = kge()
    a = 1e-3
    vecs, missing = kg_sentence_embedding([["Q254327"], ["Q181600"]], t, SifConfig(a=a, remove_pc=False))
    # each entity makes up half the mentions
    assert np.allclose(vecs[0], a / (a + 0.5) * t[WD_ENTITY + "Q254327"])
    assert not missing.any()


def test_bare_qid_tables_work():
    t = kge(bare=True)
    vecs, _ = kg_sentence_embedding([["Q254327"]], t, SifConfig(remove_pc=False))
    assert np.any(vecs[0])


def test_no_mentions_zero_and_flagged():
    vecs, missing = kg_sentence_embedding([["Q254327"], [], ["Q999"]], kge(), SifConfig(remove_pc=False))
    assert missing.tolist() == [False, True, True]
    assert np.all(vecs[1] == 0) and np.all(vecs[2] == 0)


def test_identical_multisets_identical_vectors():
    posts = [["Q254327", "Q181600", "Q254327"], ["Q181600", "Q254327", "Q254327"], ["Q474191"]]
    vecs, _ = kg_sentence_embedding(posts, kge(), SifConfig())
    assert np.array_equal(vecs[0], vecs[1])


def test_frequencies_come_from_fit_posts_only():
    t = kge()
    train = [["Q254327"], ["Q254327"], ["Q181600"]]
    emb = KgSentenceEmbedder(t, SifConfig(remove_pc=False)).fit(train)
    vec, _ = emb.transform([["Q474191"]])
    # unseen in training: weight 1
    assert np.allclose(vec[0], t[WD_ENTITY + "Q474191"])


def test_matches_bruteforce():
    rng = np.random.default_rng(2)
    t = kge(dim=4)
    vectors = {q: t[WD_ENTITY + q] for q in QIDS}
    for _ in range(30):
        posts = [list(rng.choice(QIDS, size=int(rng.integers(0, 5)))) for _ in range(int(rng.integers(2, 10)))]
        if not any(posts):
            continue
        total = sum(len(p) for p in posts)
        freq = {q: sum(p.count(q) for p in posts) / total for q in QIDS}
        freq = {q: f for q, f in freq.items() if f > 0}
        got, _ = kg_sentence_embedding(posts, t, SifConfig())
        want = sif_reference(posts, vectors, freq, 1e-3, True)
        assert np.max(np.abs(got - want)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from(QIDS), max_size=5), min_size=2, max_size=8), st.randoms())
def test_order_invariance(posts, rnd):
    shuffled = [rnd.sample(p, len(p)) for p in posts]
    a, ma = kg_sentence_embedding(posts, kge(), SifConfig())
    b, mb = kg_sentence_embedding(shuffled, kge(), SifConfig(), fit_on=posts)
    assert np.allclose(a, b, atol=1e-12)
    assert np.array_equal(ma, mb)
    for row, flag, post in zip(a, ma, posts):
        assert flag == (not post)
        if flag:
            assert not np.any(row)


def test_fuse_concat():
    text = np.arange(100.0)
    v = fuse(text, np.ones(100))
    assert v.values.shape == (200,)
    z = fuse(text, np.zeros(100), kg_missing=True)
    assert np.array_equal(z.values[:100], text)
    assert z.kg_missing


def test_fuse_sum_average():
    v = np.array([1.0, -2.0, 3.0])
    assert np.all(fuse(v, -v, "sum").values == 0)
    assert np.allclose(fuse(v, 3 * v, "average").values, 2 * v)
    with pytest.raises(DimensionMismatch):
        fuse(v, np.ones(2), "sum")
    with pytest.raises(ValueError):
        fuse(v, v, "max")


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
)
def test_concat_injective(t1, k1, t2, k2):
    a, b = fuse(t1, k1).values, fuse(t2, k2).values
    if t1 != t2 or k1 != k2:
        assert not np.array_equal(a, b)


def test_fuse_matrix_rows():
    a, b = np.ones((4, 2)), np.zeros((4, 3))
    assert fuse_matrix(a, b).shape == (4, 5)
    with pytest.raises(DimensionMismatch):
        fuse_matrix(a, np.zeros((3, 2)))


def test_standardizer_fit_on_train():
    x = np.array([[1.0, 5.0], [3.0, 5.0], [100.0, 0.0]])
    s = Standardizer().fit(x[:2])
    out = s.transform(x)
    assert np.allclose(out[:2, 0], [-1, 1])
    assert np.all(out[:2, 1] == 0)


def test_feature_dump_round_trip(tmp_path):
    ids = ["a", "b"]
    labels = {"a": {"ed1": 1}, "b": {"ed1": 0}}
    x = np.array([[0.1, 1 / 3], [2.0, -1e-9]])
    write_feature_dump(tmp_path / "f.tsv", ids, labels, ["ed1"], x)
    rid, rlab, tasks, rx = read_feature_dump(tmp_path / "f.tsv")
    assert rid == ids and rlab == labels and tasks == ["ed1"]
    assert np.array_equal(rx, x)
