"""Biased HSIC, the cross-covariance form, biased MMD and a permutation test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec, center, cross_kernel, kernel_matrix
from .numerics import ContractError, Rng, as_matrix


@dataclass(frozen=True)
class HsicEstimate:
    value: float
    n: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class PermutationTestResult:
    statistic: float
    p_value: float
    permutations: int


def _paired(z, g):
    z = as_matrix(z, "z")
    g = as_matrix(g, "g")
    if z.shape[0] != g.shape[0]:
        raise ContractError(f"z and g need the same row count, got {z.shape[0]} and {g.shape[0]}")
    if z.shape[0] < 2:
        raise ContractError("need at least 2 paired rows")
    return z, g


def hsic_from_centered(kh_z: np.ndarray, kh_g: np.ndarray) -> float:
    n = kh_z.shape[0]
    # tr(A B) without forming the product
    return float(np.sum(kh_z * kh_g.T)) / (n - 1) ** 2


def hsic_biased(z, g, spec: KernelSpec) -> HsicEstimate:
    """tr(K_z H K_g H) / (N-1)^2."""
    z, g = _paired(z, g)
    kh_z = center(kernel_matrix(z, spec))
    kh_g = center(kernel_matrix(g, spec))
    return HsicEstimate(hsic_from_centered(kh_z, kh_g), z.shape[0])


def hsic_linear_covariance(z, g) -> float:
    """||Z^T G||_F^2 / (N-1)^2; equals linear-kernel HSIC when Z, G are column-centered."""
    z, g = _paired(z, g)
    c = z.T @ g
    return float(np.sum(c * c)) / (z.shape[0] - 1) ** 2


def mmd_biased(z, g, spec: KernelSpec) -> float:
    """V-statistic MMD^2: mean K_zz - 2 mean K_zg + mean K_gg (diagonals included)."""
    z, g = _paired(z, g)
    return float(
        cross_kernel(z, z, spec).mean()
        - 2.0 * cross_kernel(z, g, spec).mean()
        + cross_kernel(g, g, spec).mean()
    )


def permutation_independence_test(z, g, spec: KernelSpec, permutations: int, rng: Rng) -> PermutationTestResult:
    if permutations < 99:
        raise ContractError(f"need at least 99 permutations, got {permutations}")
    z, g = _paired(z, g)
    kh_z = center(kernel_matrix(z, spec))
    k_g = kernel_matrix(g, spec).k
    stat = hsic_from_centered(kh_z, center(k_g))
    exceed = 0
    for _ in range(permutations):
        p = rng.permutation(z.shape[0])
        # permuting g's rows permutes K_g's rows and columns
        if hsic_from_centered(kh_z, center(k_g[np.ix_(p, p)])) >= stat:
            exceed += 1
    return PermutationTestResult(stat, (1 + exceed) / (permutations + 1), permutations)
