"""Scores for orderings and graphs."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .graph import Dag, _check_permutation


@dataclass(frozen=True)
class Scores:
    order_divergence: int | None = None
    shd: int | None = None
    f1: float | None = None
    auc: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def order_divergence(pi, g_true: Dag) -> int:
    """Number of true edges whose head is placed before its tail."""
    pi = _check_permutation(pi, g_true.d)
    pos = {v: k for k, v in enumerate(pi)}
    return sum(pos[i] < pos[j] for j, i in g_true.edges)


def _check_same_d(a: Dag, b: Dag) -> None:
    if a.d != b.d:
        raise ValueError(f"graphs have different vertex counts: {a.d} vs {b.d}")


def shd(g_pred: Dag, g_true: Dag) -> int:
    """Structural Hamming distance; a reversed edge counts once."""
    _check_same_d(g_pred, g_true)
    P, T = g_pred.adjacency(), g_true.adjacency()
    # compare unordered pairs: any mismatch in (j->i, i->j) costs 1
    iu = np.triu_indices(g_true.d, 1)
    pp = np.stack([P[iu], P.T[iu]])
    tt = np.stack([T[iu], T.T[iu]])
    return int(np.any(pp != tt, axis=0).sum())


def f1(g_pred: Dag, g_true: Dag) -> float:
    _check_same_d(g_pred, g_true)
    tp = len(g_pred.edges & g_true.edges)
    if not g_pred.edges and not g_true.edges:
        return 1.0
    if tp == 0:
        return 0.0
    precision = tp / len(g_pred.edges)
    recall = tp / len(g_true.edges)
    return 2 * precision * recall / (precision + recall)


def auc(score_matrix, g_true: Dag) -> float:
    """ROC AUC over all ordered off-diagonal pairs, ties at midrank.

    ``score_matrix[j, i]`` scores the edge j -> i. Raises ``ValueError`` when
    either class is empty.
    """
    S = np.asarray(score_matrix, dtype=float)
    d = g_true.d
    if S.shape != (d, d):
        raise ValueError(f"score matrix shape {S.shape} does not match d={d}")
    if np.any(np.isnan(S)):
        raise ValueError("score matrix contains NaN")
    if np.any(np.diag(S) != 0):
        raise ValueError("score matrix must have a zero diagonal")
    off = ~np.eye(d, dtype=bool)
    labels = g_true.adjacency()[off].astype(bool)
    scores = S[off]
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined with a single class")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pvalues_to_scores(pvals) -> np.ndarray:
    """``1 - p`` for tested pairs; NaN (untested) entries and the diagonal become 0."""
    P = np.asarray(pvals, dtype=float)
    S = np.where(np.isnan(P), 0.0, 1.0 - P)
    np.fill_diagonal(S, 0.0)
    return S
