"""Splitting, cross-validation, metrics, rank correlation, grid search and
the term-distribution bias check."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from cbe.corpus import LabeledCorpus, count_by_class, normalize_task
from cbe.embed.tokens import tokenize
from cbe.errors import (
    EmptyGrid,
    EmptyMatrix,
    LengthMismatch,
    SingleClass,
    TooFewMinority,
    TooShort,
    UnknownTask,
    ZeroVariance,
)
from cbe.learn import Dataset, predict, train_model

log = logging.getLogger(__name__)

P_FLOOR = 1e-12


# splitting


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split_indices(labels: Sequence[int], train_ratio: float = 0.7, seed: int = 0) -> tuple[list[int], list[int]]:
    """Row indices of a class-stratified train/test split.

    Each class contributes round(ratio * n_class) training rows. If the sum
    misses round(ratio * n) the larger class absorbs the difference.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError("train_ratio must lie strictly between 0 and 1")
    y = np.asarray(labels, dtype=int)
    classes = [np.flatnonzero(y == c) for c in (0, 1)]
    if any(len(c) == 0 for c in classes):
        raise SingleClass("stratified split needs both classes")
    n_train = [_round_half_up(train_ratio * len(c)) for c in classes]
    diff = _round_half_up(train_ratio * len(y)) - sum(n_train)
    big = 0 if len(classes[0]) >= len(classes[1]) else 1
    n_train[big] = min(max(n_train[big] + diff, 0), len(classes[big]))
    rng = np.random.default_rng(seed)
    train: list[int] = []
    for idx, k in zip(classes, n_train):
        perm = rng.permutation(idx)
        train.extend(perm[:k].tolist())
    train.sort()
    in_train = set(train)
    test = [i for i in range(len(y)) if i not in in_train]
    if not test:
        raise ValueError("split leaves the test set empty")
    return train, test


def stratified_split(corpus: LabeledCorpus, task: str, train_ratio: float = 0.7, seed: int = 0) -> tuple[list[str], list[str]]:
    """Train and test post ids, each in corpus order."""
    ids = corpus.ids
    tr, te = stratified_split_indices(corpus.task_labels(task), train_ratio, seed)
    return [ids[i] for i in tr], [ids[i] for i in te]


@dataclass
class FoldAssignment:
    k: int
    fold_of: dict[str, int]

    def folds(self, ids: Sequence[str]) -> list[tuple[list[int], list[int]]]:
        """(train rows, test rows) for each fold, as positions within ``ids``."""
        f = np.array([self.fold_of[i] for i in ids])
        return [(np.flatnonzero(f != j).tolist(), np.flatnonzero(f == j).tolist()) for j in range(self.k)]


def stratified_kfold(labels: Sequence[int], k: int = 10, seed: int = 0, ids: Sequence[str] | None = None) -> FoldAssignment:
    """Assign rows to ``k`` folds preserving class balance.

    Rows are shuffled within each class, the negatives are listed before the
    positives, and the combined list is dealt round-robin. Fold sizes and
    per-fold positive counts therefore differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    y = np.asarray(labels, dtype=int)
    ids = list(ids) if ids is not None else [str(i) for i in range(len(y))]
    if len(ids) != len(y):
        raise LengthMismatch("ids and labels differ in length")
    minority = min(int((y == 0).sum()), int((y == 1).sum()))
    if minority < k:
        raise TooFewMinority(f"minority class has {minority} rows, fewer than k={k}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in (0, 1)])
    fold_of = {ids[row]: pos % k for pos, row in enumerate(order)}
    return FoldAssignment(k, {i: fold_of[i] for i in ids})


# metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
        t = np.asarray(y_true, dtype=int)
        p = np.asarray(y_pred, dtype=int)
        if t.shape != p.shape:
            raise LengthMismatch("y_true and y_pred differ in length")
        return cls(
            int(((t == 1) & (p == 1)).sum()),
            int(((t == 0) & (p == 1)).sum()),
            int(((t == 0) & (p == 0)).sum()),
            int(((t == 1) & (p == 0)).sum()),
        )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Precision, recall, F1 and accuracy of the positive class.

    Undefined ratios (zero denominators) are returned as None.
    """
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport((cm.tp + cm.tn) / cm.total, precision, recall, f1)


# rank correlation


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    a = np.asarray(x, dtype=float)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a))
    sorted_a = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float], p_floor: float = P_FLOOR) -> tuple[float, float]:
    """Spearman's rho with a two-sided p-value from the t approximation.

    Raises:
        LengthMismatch, TooShort (fewer than 3 pairs), ZeroVariance.
    """
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)} values")
    n = len(xs)
    if n < 3:
        raise TooShort("spearman needs at least 3 pairs")
    rx, ry = average_ranks(xs), average_ranks(ys)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("one input is constant")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if 1.0 - rho * rho <= 0.0:
        return rho, p_floor
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return rho, min(1.0, max(p, p_floor))


# grid search


@dataclass
class ConfigScore:
    config: dict
    mean: float
    fold_scores: list[float]
    mean_accuracy: float
    mean_f1: float
    undefined_f1_folds: int = 0


FoldData = Callable[[int, list[int], list[int]], tuple[Dataset, Dataset]]


def grid_search(
    family: str,
    grid: Mapping[str, Sequence],
    ds: Dataset,
    folds: FoldAssignment,
    metric: str = "f1",
    seed: int = 0,
    fold_data: FoldData | None = None,
) -> tuple[dict, list[ConfigScore]]:
    """Score every hyperparameter combination by mean held-out metric.

    Combinations are enumerated as the Cartesian product in the grid's key
    order; the first best wins ties. An undefined fold F1 (no predicted and
    no actual positives) counts as 0 and is tallied in
    ``undefined_f1_folds``. ``fold_data`` may rebuild features per fold; it
    receives the fold index and the train/test row positions.
    """
    if metric not in ("f1", "accuracy"):
        raise ValueError("metric must be 'f1' or 'accuracy'")
    if not grid:
        raise EmptyGrid("grid has no hyperparameters")
    keys = list(grid)
    if any(len(grid[k]) == 0 for k in keys):
        raise EmptyGrid("a hyperparameter has no values")
    splits = folds.folds(ds.ids)
    fold_sets = [
        fold_data(j, tr, te) if fold_data else (ds.subset(tr), ds.subset(te)) for j, (tr, te) in enumerate(splits)
    ]
    results: list[ConfigScore] = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        config = dict(zip(keys, combo))
        accs, f1s, undefined = [], [], 0
        for train, test in fold_sets:
            model = train_model(family, train, seed=seed, **config)
            pred, _ = predict(model, test.features)
            rep = metrics(ConfusionMatrix.from_labels(test.labels, pred))
            accs.append(rep.accuracy)
            if rep.f1 is None:
                undefined += 1
            f1s.append(rep.f1 if rep.f1 is not None else 0.0)
        scores = f1s if metric == "f1" else accs
        results.append(ConfigScore(config, float(np.mean(scores)), scores, float(np.mean(accs)), float(np.mean(f1s)), undefined))
    best = results[0]
    for r in results[1:]:
        if r.mean > best.mean:
            best = r
    return best.config, results


# bias check


@dataclass
class BiasReport:
    task: str
    input_kind: str
    model: str
    rho_input: float | None
    p_input: float | None
    rho_output: float | None
    p_output: float | None
    n_items: int
    note: str = ""


def _safe_spearman(xs, ys) -> tuple[float | None, float | None, str]:
    try:
        rho, p = spearman(xs, ys)
        return rho, p, ""
    except (ZeroVariance, TooShort) as exc:
        return None, None, type(exc).__name__


def bias_check(
    corpus: LabeledCorpus,
    task: str,
    predictions: Mapping[str, int],
    top_n: int = 165,
    *,
    count: str = "token",
    model: str = "",
    input_kind: str = "",
) -> BiasReport:
    """Compare class-wise term distributions under gold and predicted labels.

    The ``top_n`` most frequent unigrams among the evaluated posts are counted
    separately for class 0 and class 1, once with gold labels and once with
    predicted ones, and each pair of count vectors is rank-correlated.
    ``count="document"`` counts each term once per post.
    """
    t = normalize_task(task)
    if t not in corpus.tasks:
        raise UnknownTask(task)
    posts = [p for p in corpus.posts if p.id in predictions]
    if not posts:
        raise ValueError("predictions cover no post of the corpus")
    items = []
    for p in posts:
        toks = tokenize(p.clean_text)
        items.append(sorted(set(toks)) if count == "document" else toks)
    gold = [corpus.labels[p.id][t] for p in posts]
    pred = [int(predictions[p.id]) for p in posts]
    keep, g0, g1 = count_by_class(items, gold, top_n)
    _, o0, o1 = count_by_class(items, pred, top_n)
    rho_in, p_in, note_in = _safe_spearman([g0[k] for k in keep], [g1[k] for k in keep])
    rho_out, p_out, note_out = _safe_spearman([o0[k] for k in keep], [o1[k] for k in keep])
    notes = [f"input:{note_in}"] * bool(note_in) + [f"output:{note_out}"] * bool(note_out)
    return BiasReport(t, input_kind, model, rho_in, p_in, rho_out, p_out, len(keep), ";".join(notes))


# report writers


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ResultRow:
    model: str
    input: str
    task: str
    f1: float
    accuracy: float
    best_config: dict = field(default_factory=dict)


def write_results(rows: Sequence[ResultRow], path: str | Path) -> None:
    """Results table: model, input, task, f1, accuracy, best hyperparameters."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model\tinput\ttask\tf1\taccuracy\tconfig\n")
        for r in rows:
            cfg = ",".join(f"{k}={r.best_config[k]}" for k in sorted(r.best_config))
            fh.write(f"{r.model}\t{r.input}\t{r.task}\t{r.f1:.6f}\t{r.accuracy:.6f}\t{cfg}\n")


def write_bias_reports(rows: Sequence[BiasReport], path: str | Path) -> None:
    cols = ["model", "input", "task", "rho_input", "p_input", "rho_output", "p_output", "n_items", "note"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in rows:
            vals = [r.model, r.input_kind, r.task, r.rho_input, r.p_input, r.rho_output, r.p_output, r.n_items, r.note]
            fh.write("\t".join(_fmt(v) for v in vals) + "\n")
