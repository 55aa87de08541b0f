"""Deliberately naive reference implementations used as test oracles.

None of these share code with the package: they recompute by brute force
(explicit loops, full SVD, exhaustive enumeration, finite differences).
"""

from __future__ import annotations

import math

import numpy as np


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / denom)


def table1_metrics(tp: int, fp: int, tn: int, fn: int) -> dict:
    """Precision, recall, F1, accuracy straight from their definitions."""
    p = tp / (tp + fp) if tp + fp else None
    r = tp / (tp + fn) if tp + fn else None
    f1 = 2 * p * r / (p + r) if p is not None and r is not None and p + r > 0 else None
    total = tp + fp + tn + fn
    return {"precision": p, "recall": r, "f1": f1, "accuracy": (tp + tn) / total}


def ranks_with_ties(x) -> list[float]:
    """1-based ranks, tied values sharing the mean of their positions."""
    n = len(x)
    out = [0.0] * n
    for i in range(n):
        less = sum(1 for j in range(n) if x[j] < x[i])
        equal = sum(1 for j in range(n) if x[j] == x[i])
        out[i] = less + (equal + 1) / 2.0
    return out


def pearson(a, b) -> float:
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((u - ma) * (v - mb) for u, v in zip(a, b))
    va = math.sqrt(sum((u - ma) ** 2 for u in a))
    vb = math.sqrt(sum((v - mb) ** 2 for v in b))
    return cov / (va * vb)


def spearman_rho(xs, ys) -> float:
    return pearson(ranks_with_ties(xs), ranks_with_ties(ys))


def sif_reference(sentences, vectors: dict, freq: dict, a: float, remove_pc: bool) -> np.ndarray:
    """Weighted means by explicit loops, then projection off the top right singular vector from a full SVD."""
    dim = len(next(iter(vectors.values())))
    rows = []
    for sent in sentences:
        acc = np.zeros(dim)
        n = 0
        for tok in sent:
            if tok in vectors:
                acc += a / (a + freq.get(tok, 0.0)) * np.asarray(vectors[tok])
                n += 1
        rows.append(acc / n if n else acc)
    x = np.array(rows)
    if remove_pc and len(sentences) >= 2 and np.any(x):
        _, _, vt = np.linalg.svd(x, full_matrices=True)
        u = vt[0]
        x = x - np.outer(x @ u, u)
    return x


def enumerate_walks(adjacency: dict, seed: str, max_depth: int) -> set[tuple[str, ...]]:
    """Every walk a walker could emit: extend until max_depth hops or a dead end."""
    out = set()

    def rec(path, node, depth):
        edges = adjacency.get(node, [])
        if depth == max_depth or not edges:
            out.add(tuple(path))
            return
        for p, o in edges:
            rec(path + [p, o], o, depth + 1)

    rec([seed], seed, 0)
    return out


def count_walks(adjacency: dict, seed: str, max_depth: int) -> int:
    edges = adjacency.get(seed, [])
    if max_depth == 0 or not edges:
        return 1
    return sum(count_walks(adjacency, o, max_depth - 1) for _, o in edges)
