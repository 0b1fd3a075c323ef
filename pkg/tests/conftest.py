import numpy as np
import pytest

from hood.numerics import make_rng


@pytest.fixture
def rng():
    return make_rng(20240601)


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def dense_hsic(kz, kg):
    """tr(K_z H K_g H) / (N-1)^2 with an explicit centering matrix."""
    n = kz.shape[0]
    h = np.eye(n) - np.ones((n, n)) / n
    return np.trace(kz @ h @ kg @ h) / (n - 1) ** 2
