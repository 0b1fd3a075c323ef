import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hood.kernels import KernelSpec, center, kernel_matrix
from hood.numerics import ContractError, make_rng

KINDS = ["rbf", "linear", "imq"]


def test_default_spec_matches_published_setting():
    spec = KernelSpec()
    assert (spec.kind, spec.sigma, spec.imq_c) == ("rbf", 5.0, 1.0)


def test_rbf_diagonal_is_one(rng):
    k = kernel_matrix(rng.standard_normal((9, 4)) * 10, KernelSpec(sigma=0.7)).k
    assert np.all(np.diag(k) == 1.0)


def test_rbf_analytic_entry():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    k = kernel_matrix(x, KernelSpec("rbf", sigma=1.0)).k
    assert k[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert k[0, 1] == pytest.approx(0.367879, abs=1e-6)


def test_linear_and_imq_entries():
    x = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert kernel_matrix(x, KernelSpec("linear")).k[0, 1] == 1.0
    # squared distance 4 + 9 = 13
    assert kernel_matrix(x, KernelSpec("imq", imq_c=3.0)).k[0, 1] == pytest.approx(0.25)


@pytest.mark.parametrize("kind", KINDS)
def test_symmetric_and_psd(rng, kind):
    x = rng.standard_normal((12, 3))
    k = kernel_matrix(x, KernelSpec(kind, sigma=1.3)).k
    assert np.max(np.abs(k - k.T)) < 1e-12
    assert np.linalg.eigvalsh(k).min() >= -1e-8


def test_rbf_entries_in_unit_interval(rng):
    k = kernel_matrix(rng.standard_normal((15, 5)), KernelSpec(sigma=2.0)).k
    assert np.all((k > 0) & (k <= 1))


def test_rbf_monotone_in_distance():
    pts = np.linspace(0, 6, 13)[:, None] * np.array([[1.0, -2.0, 0.5]])
    row = kernel_matrix(pts, KernelSpec(sigma=1.5)).k[0]
    assert np.all(np.diff(row) < 0)


def test_rejects_bad_inputs():
    with pytest.raises(ContractError):
        kernel_matrix(np.ones((1, 3)), KernelSpec())
    with pytest.raises(ContractError):
        kernel_matrix(np.array([[0.0, np.nan], [1.0, 1.0]]), KernelSpec())
    with pytest.raises(ContractError):
        KernelSpec(sigma=0.0)
    with pytest.raises(ContractError):
        KernelSpec("poly")


def test_center_constant_kernel_is_zero():
    assert np.all(center(np.ones((5, 5))) == 0.0)


def test_center_identity_two_by_two():
    assert center(np.eye(2)).tolist() == [[0.5, -0.5], [-0.5, 0.5]]


def test_center_matches_explicit_h(rng):
    a = rng.standard_normal((10, 10))
    k = a @ a.T
    h = np.eye(10) - np.ones((10, 10)) / 10
    assert np.max(np.abs(center(k) - k @ h)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.sampled_from(KINDS))
def test_centered_rows_sum_to_zero(seed, n, kind):
    x = make_rng(seed).standard_normal((n, 3))
    kh = center(kernel_matrix(x, KernelSpec(kind, sigma=1.0)))
    # K H subtracts row means; its transpose H K has zero column means
    assert np.max(np.abs(kh.T.mean(axis=0))) < 1e-10 * max(1.0, np.abs(kh).max())
