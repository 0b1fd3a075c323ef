"""Dense float64 matrix helpers and a seeded, platform-stable RNG.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The helpers here
only validate shapes and keep construction in one place.
"""
from __future__ import annotations

import numpy as np


class ContractError(ValueError):
    """Raised when an operation's precondition is violated."""


Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    # PCG64 streams are specified bit-for-bit, so a seed reproduces everywhere.
    if seed < 0:
        raise ContractError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*parts: int) -> int:
    """Mix integers into one 63-bit seed (order sensitive)."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def as_matrix(x, name: str = "x", *, finite: bool = True) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    if finite and not np.all(np.isfinite(a)):
        raise ContractError(f"{name} contains non-finite entries")
    return a


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a", finite=False)
    b = as_matrix(b, "b", finite=False)
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def gaussian_sample(rng: Rng, n: int, d: int, mean=0.0, std: float = 1.0) -> np.ndarray:
    """n x d i.i.d. normal draws with per-column ``mean`` and scalar ``std``."""
    if not std > 0:
        raise ContractError(f"std must be positive, got {std}")
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (d,))
    return mean + std * rng.standard_normal((n, d))
