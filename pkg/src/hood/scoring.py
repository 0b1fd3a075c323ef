"""Test-time scores: class-mean correlation (COR), max softmax probability (MSP), thresholding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderParams, log_softmax, logits
from .numerics import ContractError, as_matrix, as_vector


@dataclass(frozen=True)
class ClassMeans:
    mu: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class ScoredSample:
    score: float
    is_inlier: bool


def class_means(z_train, labels, n_classes: int | None = None, centered: bool = False) -> ClassMeans:
    """Per-class mean of training features. ``centered`` subtracts the global feature mean first."""
    z = as_matrix(z_train, "z_train")
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(y) != len(z):
        raise ContractError(f"{len(y)} labels for {len(z)} rows")
    c = int(y.max()) + 1 if n_classes is None else n_classes
    if y.min() < 0 or y.max() >= c:
        raise ContractError(f"labels must lie in [0, {c})")
    if centered:
        z = z - z.mean(axis=0)
    counts = np.bincount(y, minlength=c)
    if np.any(counts == 0):
        raise ContractError(f"classes {np.flatnonzero(counts == 0).tolist()} have no samples")
    mu = np.zeros((c, z.shape[1]))
    np.add.at(mu, y, z)
    return ClassMeans(mu / counts[:, None], counts)


def cor_scores(means: ClassMeans, q) -> np.ndarray:
    """max_c |mu_c . q| for every row of q."""
    q = as_matrix(q, "q")
    if q.shape[1] != means.mu.shape[1]:
        raise ContractError(f"feature dim {q.shape[1]} does not match class means dim {means.mu.shape[1]}")
    return np.abs(q @ means.mu.T).max(axis=1)


def cor_score(means: ClassMeans, q) -> float:
    return float(cor_scores(means, as_vector(q, "q")[None, :])[0])


def msp_scores(params: EncoderParams, q) -> np.ndarray:
    q = as_matrix(q, "q")
    if q.shape[1] != params.feature_dim:
        raise ContractError(f"feature dim {q.shape[1]} does not match classifier dim {params.feature_dim}")
    return np.exp(log_softmax(logits(params, q)).max(axis=1))


def msp_score(params: EncoderParams, q) -> float:
    return float(msp_scores(params, as_vector(q, "q")[None, :])[0])


def classify(score: float, tau: float) -> str:
    """'ood' when the score is at or below the threshold, else 'inlier'."""
    return "ood" if score <= tau else "inlier"


def appendix_bound_check(z_train, q):
    """Return (|mu.q|, mean_j sum_i |z_ij q_i|, ||Z^T G||_F^2) with G holding q in every row.

    The first never exceeds the second, and the third vanishes only if mu.q = 0 or q = 0.
    """
    z = as_matrix(z_train, "z_train")
    q = as_vector(q, "q")
    if len(q) != z.shape[1]:
        raise ContractError(f"q has length {len(q)}, features have {z.shape[1]} dims")
    n = len(z)
    lhs = abs(float(z.mean(axis=0) @ q))
    rhs = float(np.abs(z * q).sum()) / n
    c = z.T @ np.tile(q, (n, 1))
    return lhs, rhs, float(np.sum(c * c))
