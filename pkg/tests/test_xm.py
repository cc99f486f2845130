import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xmembed.explain import explain_matrix
from xmembed.xm import (
    XmConfig, feature_ratio, orthogonality_loss, sparsity_loss, xm_gradient, xm_loss,
    xm_loss_direct,
)

rng = np.random.default_rng(11)


def away_from_zero(shape, r, lo=1e-3):
    x = r.normal(size=shape)
    return np.where(np.abs(x) < lo, np.sign(x + 1e-300) * lo * 2, x)


def central_diff(fun, y, h=1e-6):
    g = np.zeros_like(y)
    for i in range(y.size):
        e = np.zeros_like(y)
        e[i] = h
        g[i] = (fun(y + e) - fun(y - e)) / (2 * h)
    return g


def test_config_validation():
    with pytest.raises(ValueError):
        XmConfig(gamma=-1)
    with pytest.raises(ValueError):
        XmConfig(delta=float("nan"))
    assert not XmConfig().enabled and XmConfig(0, 0.1).enabled


def test_sparsity_examples():
    assert sparsity_loss(np.array([[0.6, 0], [0.8, 0]])) == pytest.approx(1.4)
    assert sparsity_loss(np.array([[0, 0], [0.3, 0]])) == pytest.approx(0.3)
    d, f = 5, 3
    E = explain_matrix(np.ones(d), np.ones(f))
    assert sparsity_loss(E) == pytest.approx(np.sqrt(d * f))


def test_orthogonality_examples():
    assert orthogonality_loss(np.array([[1.0, 0], [0, 2.0]])) == 0
    assert orthogonality_loss(np.array([[0.6, 0], [0.8, 0]])) == pytest.approx(0.96)
    E = np.array([[0.6, 0], [0.8, 0]])
    assert orthogonality_loss(E, include_diagonal=True) == pytest.approx(0.96 + 1.0)


def test_xm_loss_examples():
    assert xm_loss([1, 1], [1, 1], XmConfig(1, 1)) == pytest.approx(3)
    assert xm_loss([1, 2], [3, 4], XmConfig()) == 0
    f = rng.random(7)
    y = np.zeros(8)
    y[3] = -2.0
    assert xm_loss(y, f, XmConfig(0, 1)) == 0
    assert xm_loss(y, f, XmConfig(1, 0)) == pytest.approx(np.abs(f).sum() / np.linalg.norm(f))


def test_closed_forms_match_direct_sums():
    for _ in range(1000):
        d, k = int(rng.integers(1, 40)), int(rng.integers(1, 15))
        y = rng.normal(size=d) * rng.random(d)
        f = rng.random(k) + 1e-3
        E = explain_matrix(y, f)
        l1, l2 = np.abs(y).sum(), np.linalg.norm(y)
        closed_s = l1 * np.abs(f).sum() / (l2 * np.linalg.norm(f))
        closed_o = (l1 ** 2 - l2 ** 2) / l2 ** 2
        assert sparsity_loss(E) == pytest.approx(closed_s, rel=1e-9)
        assert orthogonality_loss(E) == pytest.approx(closed_o, rel=1e-9, abs=1e-12)
        cfg = XmConfig(0.3, 0.7)
        assert xm_loss(y, f, cfg) == pytest.approx(xm_loss_direct(y, f, cfg), rel=1e-9, abs=1e-12)


def test_include_diagonal_matches_direct():
    y, f = rng.normal(size=6), rng.random(4)
    cfg = XmConfig(0.5, 2.0, include_diagonal=True)
    assert xm_loss(y, f, cfg) == pytest.approx(xm_loss_direct(y, f, cfg), rel=1e-9)


def test_batched_loss_matches_rows():
    Y, F = rng.normal(size=(10, 6)), rng.random((10, 4))
    cfg = XmConfig(1.0, 0.5)
    out = xm_loss(Y, F, cfg)
    assert out.shape == (10,)
    assert np.allclose(out, [xm_loss(Y[k], F[k], cfg) for k in range(10)])


def test_zero_y_is_collapse():
    with pytest.raises(ValueError, match="collapse"):
        xm_loss(np.zeros(3), np.ones(2), XmConfig(1, 1))
    with pytest.raises(ValueError, match="collapse"):
        xm_gradient(np.zeros(3), np.ones(2), XmConfig(1, 1))


def test_gradient_finite_differences():
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 20))
        y = away_from_zero(d, rng)
        f = rng.random(7) + 0.01
        cfg = XmConfig(float(rng.random()), float(rng.random()))
        num = central_diff(lambda v: xm_loss(v, f, cfg), y)
        ana = xm_gradient(y, f, cfg)
        worst = max(worst, np.linalg.norm(ana - num) / np.linalg.norm(num))
    assert worst <= 1e-5


def test_gradient_one_hot_sparse_component_zero():
    y = np.zeros(5)
    y[2] = 1.0
    g = xm_gradient(y, rng.random(3), XmConfig(1.0, 0.0))
    assert g[2] == pytest.approx(0, abs=1e-15)


def test_gradient_minus_one_homogeneous():
    y, f = away_from_zero(9, rng), rng.random(7)
    cfg = XmConfig(0.4, 0.9)
    assert np.allclose(xm_gradient(2 * y, f, cfg), 0.5 * xm_gradient(y, f, cfg))


def test_batched_gradient_matches_rows():
    Y, F = away_from_zero((6, 5), rng), rng.random((6, 3))
    cfg = XmConfig(0.2, 0.3)
    G = xm_gradient(Y, F, cfg)
    assert np.allclose(G, [xm_gradient(Y[k], F[k], cfg) for k in range(6)])


def test_feature_ratio():
    assert feature_ratio([3.0, 4.0]) == pytest.approx(7 / 5)
    with pytest.raises(ValueError):
        feature_ratio([0.0, 0.0])


vectors = arrays(np.float64, st.integers(1, 24),
                 elements=st.floats(-1e3, 1e3, allow_subnormal=False)).filter(
    lambda y: np.linalg.norm(y) > 1e-6)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(0.01, 100))
def test_scale_invariance_and_euler(y, alpha):
    f = np.linspace(0.1, 1.0, 7)
    cfg = XmConfig(0.7, 1.3)
    assert xm_loss(alpha * y, f, cfg) == pytest.approx(xm_loss(y, f, cfg), rel=1e-9)
    g = xm_gradient(y, f, cfg)
    assert abs(g @ y) <= 1e-8 * max(1.0, np.linalg.norm(g) * np.linalg.norm(y))


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_bounds_and_zero_iff_single_coordinate(y):
    # a coordinate far below the norm's precision is numerically zero
    y = np.where(np.abs(y) < 1e-6 * np.abs(y).max(), 0.0, y)
    f = np.linspace(0.1, 1.0, 7)
    d = y.size
    ortho = xm_loss(y, f, XmConfig(0, 1))
    sparse = xm_loss(y, f, XmConfig(1, 0))
    assert -1e-12 <= ortho <= d - 1 + 1e-9
    assert sparse <= np.sqrt(d) * feature_ratio(f) + 1e-9
    assert (ortho <= 1e-12) == (np.count_nonzero(y) <= 1)
