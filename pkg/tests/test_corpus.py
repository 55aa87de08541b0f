import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbe.corpus import (
    LabeledCorpus,
    Post,
    class_distribution,
    clean_text,
    emoji_statistics,
    extract_emojis,
    load_corpus,
    overlap_analysis,
    ClassDistribution,
    preprocess,
    preprocess_corpus,
    read_corpus,
    write_corpus,
)
from cbe.errors import BothEmpty, DuplicateId, EmptyCorpus, MalformedRow, UnknownTask

SAD = "\U0001F622"
HEART = "❤️"
FAMILY = "\U0001F468‍\U0001F469‍\U0001F467"


def make_corpus(rows, tasks=("ed1",)):
    posts = [preprocess(Post(f"p{i}", text)) for i, (text, _) in enumerate(rows)]
    labels = {f"p{i}": {t: y for t in tasks} for i, (_, y) in enumerate(rows)}
    return LabeledCorpus(posts, labels, tuple(tasks))


def test_load_corpus_columns(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("id\ttext\ted1\ted2\ted3\ted4\n1\thello\t0\t1\t0\t1\n2\tbye\t1\t1\t0\t0\n", encoding="utf-8")
    c = load_corpus(path)
    assert len(c) == 2
    assert c.tasks == ("ed1", "ed2", "ed3", "ed4")
    assert c.labels["1"] == {"ed1": 0, "ed2": 1, "ed3": 0, "ed4": 1}


def test_header_only_corpus_is_empty():
    c = read_corpus(io.StringIO("id\ttext\ted1\n"))
    assert len(c) == 0


def test_label_outside_binary_is_malformed():
    with pytest.raises(MalformedRow):
        read_corpus(io.StringIO("id\ttext\ted1\n1\tx\t2\n"))


def test_wrong_column_count_is_malformed():
    with pytest.raises(MalformedRow):
        read_corpus(io.StringIO("id\ttext\ted1\n1\tx\n"))


def test_duplicate_ids_rejected():
    with pytest.raises(DuplicateId):
        read_corpus(io.StringIO("id\ttext\ted1\n1\tx\t0\n1\ty\t1\n"))


def test_author_column_optional():
    c = read_corpus(io.StringIO("id\ttext\tauthor_id\ted2\n1\tx\tu9\t1\n"))
    assert c.posts[0].author_id == "u9"
    assert c.tasks == ("ed2",)


def test_unknown_task():
    c = make_corpus([("a", 0)])
    with pytest.raises(UnknownTask):
        c.task_labels("ed9")


def test_preprocess_running_example():
    p = preprocess(Post("1", f"Check https://t.co/x #anorexia {SAD}"))
    assert p.clean_text == "check #anorexia"
    assert p.emojis == (SAD,)


def test_preprocess_empty():
    p = preprocess(Post("1", ""))
    assert p.clean_text == "" and p.emojis == ()


def test_no_emoji_text_only_changes_case_and_urls():
    p = preprocess(Post("1", "Going Out www.example.com @friend Today"))
    assert p.clean_text == "going out today"
    assert p.emojis == ()


def test_emoji_clusters_kept_whole():
    _, found = extract_emojis(f"a{HEART}b {FAMILY} c\U0001F44D\U0001F3FD")
    assert found == [HEART, FAMILY, "\U0001F44D\U0001F3FD"]


def test_emoji_separates_words():
    text, emojis = clean_text(f"good{SAD}day")
    assert text == "good day"
    assert emojis == [SAD]


def test_emoji_statistics_counts():
    c = make_corpus([(f"a {SAD}", 0), ("b", 0), ("c", 1), ("d", 1)])
    assert emoji_statistics(c) == (1, 0.25)


def test_emoji_statistics_none():
    c = make_corpus([("a", 0), ("b", 1)])
    assert emoji_statistics(c) == (0, 0.0)


def test_emoji_statistics_empty_corpus():
    with pytest.raises(EmptyCorpus):
        emoji_statistics(LabeledCorpus([], {}, ("ed1",)))


def test_class_distribution_unigrams():
    c = make_corpus([("a b", 0), ("a", 0), ("b", 1)])
    d0, d1 = class_distribution(c, "ed1", "unigram", top_n=10)
    assert d0.counts == {"a": 2, "b": 1}
    assert d1.counts == {"b": 1}


def test_class_distribution_without_emojis_is_empty():
    c = make_corpus([("a b", 0), ("b", 1)])
    d0, d1 = class_distribution(c, "ed1", "emoji")
    assert d0.counts == {} and d1.counts == {}


def test_class_distribution_hashtags():
    c = make_corpus([("#proana a", 1), ("#proana #edrecovery", 0)])
    d0, d1 = class_distribution(c, "ED1", "hashtag")
    assert d0.counts == {"#proana": 1, "#edrecovery": 1}
    assert d1.counts == {"#proana": 1}


def test_top_n_ties_break_lexicographically():
    c = make_corpus([("b a c", 0), ("c", 1)])
    d0, d1 = class_distribution(c, "ed1", "unigram", top_n=2)
    # c appears twice; a and b tie at one, a wins the tie
    assert set(d0.counts) | set(d1.counts) == {"a", "c"}


def test_overlap_examples():
    mk = lambda keys: ClassDistribution("ed1", 0, {k: 1 for k in keys})  # noqa: E731
    assert overlap_analysis(mk("abc"), mk("abc")) == 1.0
    assert overlap_analysis(mk("ab"), mk("cd")) == 0.0
    assert overlap_analysis(mk("abc"), mk("bcd")) == 0.5
    with pytest.raises(BothEmpty):
        overlap_analysis(mk(""), mk(""))


texts = st.text(
    alphabet=st.sampled_from(list("abcXYZ #@-_.:/") + [SAD, "\u2764", "‍", "️", "\U0001F3FD", "☀", "é"]),
    max_size=40,
)


@settings(max_examples=200, deadline=None)
@given(texts)
def test_preprocess_idempotent(text):
    once = preprocess(Post("1", text))
    twice = preprocess(Post("1", once.clean_text))
    assert twice.clean_text == once.clean_text
    assert twice.emojis == ()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(texts, st.integers(0, 1)), max_size=12))
def test_class_counts_sum_to_corpus_counts(rows):
    from collections import Counter

    from cbe.embed.tokens import tokenize

    c = make_corpus(rows)
    d0, d1 = class_distribution(c, "ed1", "unigram", top_n=10**6)
    total = Counter(t for p in c.posts for t in tokenize(p.clean_text))
    merged = Counter(d0.counts) + Counter(d1.counts)
    assert merged == total


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(texts, st.integers(0, 1)), min_size=1, max_size=12))
def test_emoji_fraction_definition(rows):
    c = make_corpus(rows)
    n, frac = emoji_statistics(c)
    assert 0.0 <= frac <= 1.0
    assert frac == n / len(c)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(texts.filter(lambda s: "\r" not in s), st.integers(0, 1)), max_size=8))
def test_corpus_round_trip(tmp_path_factory, rows):
    c = LabeledCorpus(
        [Post(f"p{i}", t) for i, (t, _) in enumerate(rows)],
        {f"p{i}": {"ed1": y, "ed3": 1 - y} for i, (_, y) in enumerate(rows)},
        ("ed1", "ed3"),
    )
    path = tmp_path_factory.mktemp("rt") / "c.tsv"
    write_corpus(c, path)
    back = load_corpus(path)
    assert back == c
    assert preprocess_corpus(back) == preprocess_corpus(c)
