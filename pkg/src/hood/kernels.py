"""Kernel matrices (RBF, linear, inverse multi-quadric) and their vector-Jacobian products."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ContractError, as_matrix

KINDS = ("rbf", "linear", "imq")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    sigma: float = 5.0
    imq_c: float = 1.0
    standardize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if not self.sigma > 0:
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        if not self.imq_c > 0:
            raise ContractError(f"imq_c must be positive, got {self.imq_c}")


@dataclass(frozen=True)
class KernelMatrix:
    k: np.ndarray
    spec: KernelSpec


def sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Explicit differences: the expanded |x|^2 - 2xy + |y|^2 form loses the exact zero diagonal.
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def cross_kernel(x, y, spec: KernelSpec) -> np.ndarray:
    """K[i, j] = k(x_i, y_j)."""
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ContractError(f"feature dims differ: {x.shape[1]} vs {y.shape[1]}")
    if spec.kind == "linear":
        return x @ y.T
    d2 = sq_dists(x, y)
    if spec.kind == "rbf":
        return np.exp(-d2 / (2.0 * spec.sigma**2))
    return 1.0 / np.sqrt(d2 + spec.imq_c)


def kernel_matrix(x, spec: KernelSpec) -> KernelMatrix:
    x = as_matrix(x, "x")
    if x.shape[0] < 2:
        raise ContractError(f"kernel_matrix needs at least 2 rows, got {x.shape[0]}")
    if spec.standardize:
        x = _standardize(x)
    k = cross_kernel(x, x, spec)
    # exact symmetry; the einsum/matmul paths can differ in the last ulp
    k = 0.5 * (k + k.T)
    return KernelMatrix(k, spec)


def center(k: KernelMatrix | np.ndarray) -> np.ndarray:
    """Return K H with H = I - 11^T / N, i.e. subtract each row's mean."""
    m = k.k if isinstance(k, KernelMatrix) else as_matrix(k, "k")
    if m.shape[0] != m.shape[1]:
        raise ContractError(f"kernel matrix must be square, got {m.shape}")
    return m - m.mean(axis=1, keepdims=True)


def cross_kernel_vjp(x: np.ndarray, y: np.ndarray, spec: KernelSpec, grad_k: np.ndarray):
    """Pull ``grad_k`` (dL/dK for K = cross_kernel(x, y)) back to (dL/dx, dL/dy).

    For a self-kernel call with x is y, add the two returned pieces.
    Standardization is not differentiated through.
    """
    if spec.kind == "linear":
        return grad_k @ y, grad_k.T @ x
    d2 = sq_dists(x, y)
    if spec.kind == "rbf":
        dphi = -np.exp(-d2 / (2.0 * spec.sigma**2)) / (2.0 * spec.sigma**2)
    else:
        dphi = -0.5 * (d2 + spec.imq_c) ** -1.5
    p = grad_k * dphi
    gx = 2.0 * (p.sum(axis=1)[:, None] * x - p @ y)
    gy = 2.0 * (p.sum(axis=0)[:, None] * y - p.T @ x)
    return gx, gy


def self_kernel_vjp(x: np.ndarray, spec: KernelSpec, grad_k: np.ndarray) -> np.ndarray:
    gx, gy = cross_kernel_vjp(x, x, spec, grad_k)
    return gx + gy
