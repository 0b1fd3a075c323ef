import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hood.encoder import init_params, log_softmax
from hood.numerics import ContractError, make_rng
from hood.scoring import (
    ClassMeans,
    appendix_bound_check,
    class_means,
    classify,
    cor_score,
    msp_score,
)


def means(*rows):
    return ClassMeans(np.array(rows, float), np.ones(len(rows), int))


def test_one_sample_per_class():
    z = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    assert np.array_equal(class_means(z, [0, 1, 2]).mu, z)


def test_two_sample_mean():
    cm = class_means(np.array([[1.0, 0.0], [3.0, 0.0], [9.0, 9.0]]), [0, 0, 1])
    assert cm.mu[0].tolist() == [2.0, 0.0]
    assert cm.counts.tolist() == [2, 1]


def test_class_means_grouped_oracle(rng):
    z = rng.standard_normal((40, 5))
    y = rng.integers(0, 4, 40)
    y[:4] = [0, 1, 2, 3]
    expected = np.array([sum(z[i] for i in range(40) if y[i] == c) / np.sum(y == c) for c in range(4)])
    assert np.max(np.abs(class_means(z, y).mu - expected)) < 1e-12


def test_empty_class_rejected():
    with pytest.raises(ContractError):
        class_means(np.ones((3, 2)), [0, 0, 2])


def test_cor_examples():
    assert cor_score(means([1.0, 0.0], [0.0, 2.0]), [0.0, 0.0]) == 0.0
    assert cor_score(means([1.0, 0.0], [0.0, 0.0]), [0.0, 5.0]) == 0.0
    assert cor_score(means([1.0, 0.0]), [-2.0, 0.0]) == 2.0
    assert cor_score(means([1.0, 0.0], [0.0, 3.0]), [1.0, 1.0]) == 3.0
    with pytest.raises(ContractError):
        cor_score(means([1.0, 0.0]), [1.0, 2.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cor_symmetries(seed):
    r = make_rng(seed)
    cm = ClassMeans(r.standard_normal((5, 4)), np.ones(5, int))
    q = r.standard_normal(4)
    p = r.permutation(5)
    assert cor_score(cm, q) == cor_score(ClassMeans(cm.mu[p], cm.counts[p]), q)
    assert cor_score(cm, -q) == cor_score(cm, q)


def test_msp_examples(rng):
    p = init_params(3, (4,), 2, 5, rng)
    p.classifier[:] = 0.0
    assert msp_score(p, [1.0, -1.0]) == pytest.approx(1 / 5, abs=1e-15)
    p.classifier[2] = [50.0, 0.0]
    # 1 - 1e-20 rounds to 1.0 in float64
    assert 1.0 - msp_score(p, [1.0, 0.0]) < 1e-20
    with pytest.raises(ContractError):
        msp_score(p, [1.0, 2.0, 3.0])


def test_msp_naive_oracle(rng):
    p = init_params(3, (4,), 6, 4, rng)
    q = rng.standard_normal(6)
    logits = [float(np.dot(w, q)) for w in p.classifier]
    expected = max(np.exp(l) for l in logits) / sum(np.exp(l) for l in logits)
    assert abs(msp_score(p, q) - expected) < 1e-12
    assert np.allclose(np.exp(log_softmax(np.array([logits]))).sum(), 1.0)


def test_classify_boundary():
    assert classify(1.5, 1.5) == "ood"
    assert classify(np.nextafter(1.5, 2.0), 1.5) == "inlier"
    assert all(classify(s, -1e300) == "inlier" for s in (-5.0, 0.0, 7.0))


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_classify_respects_order(a, b, tau):
    a, b = min(a, b), max(a, b)
    if classify(b, tau) == "ood":
        assert classify(a, tau) == "ood"


def test_bound_zero_query(rng):
    assert appendix_bound_check(rng.standard_normal((6, 3)), np.zeros(3)) == (0.0, 0.0, 0.0)


def test_bound_equality_same_sign(rng):
    z = np.abs(rng.standard_normal((8, 4)))
    q = np.abs(rng.standard_normal(4))
    lhs, rhs, _ = appendix_bound_check(z, q)
    assert abs(lhs - rhs) < 1e-12


def test_bound_frobenius_matches_definition(rng):
    z, q = rng.standard_normal((5, 3)), rng.standard_normal(3)
    g = np.tile(q, (5, 1))
    assert appendix_bound_check(z, q)[2] == pytest.approx(np.linalg.norm(z.T @ g) ** 2, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bound_holds_and_frob_zero_implies_lhs_zero(seed):
    r = make_rng(seed)
    n, d = r.integers(1, 20), r.integers(1, 8)
    z = r.standard_normal((n, d))
    q = r.standard_normal(d) * (0.0 if r.random() < 0.1 else 1.0)
    lhs, rhs, frob = appendix_bound_check(z, q)
    assert lhs <= rhs + 1e-12
    if frob < 1e-20:
        assert lhs < 1e-9


def test_frob_scales_with_lhs_squared(rng):
    z, q = rng.standard_normal((7, 4)), rng.standard_normal(4)
    pts = [appendix_bound_check(z, t * q) for t in (0.0, 0.5, 1.0, 2.0, 3.5)]
    lhs2 = [p[0] ** 2 for p in pts]
    frob = [p[2] for p in pts]
    assert all(a <= b for a, b in zip(lhs2, lhs2[1:]))
    assert all(a <= b for a, b in zip(frob, frob[1:]))
