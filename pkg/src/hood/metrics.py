"""FPR at a target TPR, AUROC and AUPR for scores where higher means more inlier-like."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .numerics import ContractError


@dataclass(frozen=True)
class MetricsReport:
    fpr95: float
    auroc: float
    aupr: float
    n_in: int
    n_out: int


def split_scores(samples) -> tuple[np.ndarray, np.ndarray]:
    """Accept ScoredSample-like objects or a (scores, is_inlier) pair."""
    if isinstance(samples, tuple) and len(samples) == 2:
        scores, is_in = samples
        scores = np.asarray(scores, dtype=np.float64)
        is_in = np.asarray(is_in, dtype=bool)
    else:
        scores = np.array([s.score for s in samples], dtype=np.float64)
        is_in = np.array([s.is_inlier for s in samples], dtype=bool)
    s_in, s_out = scores[is_in], scores[~is_in]
    if len(s_in) == 0 or len(s_out) == 0:
        raise ContractError(f"need both inliers and outliers, got {len(s_in)} and {len(s_out)}")
    if not np.all(np.isfinite(scores)):
        raise ContractError("scores must be finite")
    return s_in, s_out


def fpr_at_tpr(samples, tpr_target: float = 0.95) -> float:
    if not 0 < tpr_target <= 1:
        raise ContractError(f"tpr_target must be in (0, 1], got {tpr_target}")
    s_in, s_out = split_scores(samples)
    n = len(s_in)
    # fewest inliers k with k / n >= target, using the same float comparison as TPR(t) >= target
    k = max(1, min(n, int(np.ceil(tpr_target * n))))
    while k > 1 and (k - 1) / n >= tpr_target:
        k -= 1
    while k < n and k / n < tpr_target:
        k += 1
    t = np.sort(s_in)[::-1][k - 1]
    return float(np.count_nonzero(s_out >= t)) / len(s_out)


def auroc(samples) -> float:
    """P(s_in > s_out) + P(s_in = s_out) / 2 via average ranks."""
    s_in, s_out = split_scores(samples)
    ranks = rankdata(np.concatenate([s_in, s_out]))
    u = ranks[: len(s_in)].sum() - len(s_in) * (len(s_in) + 1) / 2.0
    return float(u / (len(s_in) * len(s_out)))


def aupr(samples) -> float:
    """Average precision with outliers as positives, flagged when score <= t."""
    s_in, s_out = split_scores(samples)
    scores = np.concatenate([s_in, s_out])
    pos = np.concatenate([np.zeros(len(s_in)), np.ones(len(s_out))])
    order = np.argsort(scores, kind="stable")
    scores, pos = scores[order], pos[order]
    tp = np.cumsum(pos)
    fp = np.cumsum(1.0 - pos)
    # keep only the last index of each run of tied scores
    last = np.r_[scores[1:] != scores[:-1], True]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / len(s_out)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def evaluate(samples, tpr_target: float = 0.95) -> MetricsReport:
    s_in, s_out = split_scores(samples)
    return MetricsReport(
        fpr_at_tpr(samples, tpr_target), auroc(samples), aupr(samples), len(s_in), len(s_out)
    )
