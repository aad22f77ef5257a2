"""ROC-AUC of a saliency map as a classifier of fixated vs. non-fixated pixels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedScoreError(ValueError):
    """Raised when a score needs at least one positive and one negative."""


@dataclass(frozen=True)
class AucScore:
    value: float
    n_positives: int
    n_negatives: int

    def __float__(self) -> float:
        return self.value


def _flat_indices(points, shape) -> np.ndarray:
    h, w = shape
    pts = []
    for p in points:
        pts.append((p.x, p.y) if hasattr(p, "x") else (p[0], p[1]))
    pts = np.asarray(pts, dtype=int).reshape(-1, 2)
    if len(pts) and (pts[:, 0].min() < 0 or pts[:, 1].min() < 0
                     or pts[:, 0].max() >= w or pts[:, 1].max() >= h):
        raise ValueError(f"pixel outside {w}x{h} map")
    # repeated landings on one pixel count once
    return np.unique(pts[:, 1] * w + pts[:, 0])


def _sweep(pos_values: np.ndarray, neg_values: np.ndarray) -> float:
    # walk the distinct saliency levels from low to high; a positive at level
    # v beats every negative strictly below v and ties the ones at v
    levels, inverse = np.unique(np.concatenate([pos_values, neg_values]), return_inverse=True)
    n_pos = len(pos_values)
    pos_at = np.bincount(inverse[:n_pos], minlength=len(levels)).astype(np.float64)
    neg_at = np.bincount(inverse[n_pos:], minlength=len(levels)).astype(np.float64)
    neg_below = np.cumsum(neg_at) - neg_at
    u = np.sum(pos_at * (neg_below + 0.5 * neg_at))
    return float(u / (n_pos * len(neg_values)))


def _rank_against_all(flat: np.ndarray, pos: np.ndarray) -> float:
    # rank each positive in the sorted map; the pool includes the positives
    # themselves, whose mutual comparisons add k^2/2
    k = len(pos)
    ordered = np.sort(flat)
    v = flat[pos]
    below = np.searchsorted(ordered, v, side="left").astype(np.float64)
    equal = np.searchsorted(ordered, v, side="right") - below
    u = np.sum(below + 0.5 * equal) - 0.5 * k * k
    return float(u / (k * (flat.size - k)))


def auc_score(saliency: np.ndarray, positives, negatives="all") -> AucScore:
    """AUC of ``saliency`` at separating fixated pixels from negatives.

    ``negatives="all"`` uses every pixel not in the positive set. Otherwise
    ``negatives`` is a pixel list, e.g. fixations pooled from other images for
    a shuffled-AUC variant. Ties earn half credit, so a constant map scores
    exactly 0.5.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    pos = _flat_indices(positives, saliency.shape)
    if len(pos) == 0:
        raise UndefinedScoreError("AUC needs at least one fixated pixel")
    flat = saliency.ravel()
    if isinstance(negatives, str):
        if negatives != "all":
            raise ValueError(f"unknown negative policy {negatives!r}")
        if flat.size == len(pos):
            raise UndefinedScoreError("AUC needs at least one negative pixel")
        return AucScore(_rank_against_all(flat, pos), len(pos), flat.size - len(pos))
    else:
        neg_values = flat[_flat_indices(negatives, saliency.shape)]
    if len(neg_values) == 0:
        raise UndefinedScoreError("AUC needs at least one negative pixel")
    return AucScore(_sweep(flat[pos], neg_values), len(pos), len(neg_values))


def auc_bruteforce(saliency: np.ndarray, positives, negatives) -> AucScore:
    """Exact pairwise Mann-Whitney count; quadratic, meant as a test oracle.

    Both pixel lists are used as given (no de-duplication).
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    p = [saliency[q[1], q[0]] for q in positives]
    n = [saliency[q[1], q[0]] for q in negatives]
    if not p or not n:
        raise ValueError("brute-force AUC needs non-empty positive and negative lists")
    wins = 0.0
    for a in p:
        for b in n:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return AucScore(wins / (len(p) * len(n)), len(p), len(n))


class MapRanker:
    """Scores many positive sets against one map with all-other-pixel negatives.

    Sorting the map once makes each query cost O(k log n) for k positives,
    which matters when one saliency map is scored against several fixation
    pools. Results equal :func:`auc_score` with ``negatives="all"``.
    """

    def __init__(self, saliency: np.ndarray):
        self.shape = np.shape(saliency)
        self.flat = np.asarray(saliency, dtype=np.float64).ravel()
        self.sorted = np.sort(self.flat)

    def score(self, positives) -> AucScore:
        pos = _flat_indices(positives, self.shape)
        k = len(pos)
        n_neg = self.flat.size - k
        if k == 0:
            raise UndefinedScoreError("AUC needs at least one fixated pixel")
        if n_neg == 0:
            raise UndefinedScoreError("AUC needs at least one negative pixel")
        v = self.flat[pos]
        below = np.searchsorted(self.sorted, v, side="left").astype(np.float64)
        equal = np.searchsorted(self.sorted, v, side="right") - below
        u = np.sum(below + 0.5 * equal) - 0.5 * k * k
        return AucScore(float(u / (k * n_neg)), k, n_neg)
