import numpy as np
import pytest
from hypothesis import given, strategies as st

from eebeam.approx import inv1p_tangent, log_quadratic_bound, qol_bound, ratio_bound

from conftest import complex_normal

pos = st.floats(1e-3, 1e3)


def test_qol_tangency_and_orthogonal():
    rng = np.random.default_rng(0)
    h, w0 = complex_normal(rng, 3), complex_normal(rng, 3)
    assert qol_bound(h, w0, 2.0, w0, 2.0) == pytest.approx(abs(np.vdot(h, w0)) ** 2 / 2.0)
    w_orth = np.array([-h[1].conjugate(), h[0].conjugate(), 0.0])
    assert abs(np.vdot(h, w_orth)) < 1e-12
    assert qol_bound(h, complex_normal(rng, 3), 0.7, w_orth, 1.3) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        qol_bound(h, w0, 1.0, w0, 0.0)


@given(st.integers(0, 10 ** 6), pos, pos)
def test_qol_lower_bound(seed, beta, beta0):
    rng = np.random.default_rng(seed)
    h, w, w0 = complex_normal(rng, 4), complex_normal(rng, 4), complex_normal(rng, 4)
    exact = abs(np.vdot(h, w)) ** 2 / beta
    assert exact - qol_bound(h, w, beta, w0, beta0) >= -1e-12 * max(1.0, exact)


def test_ratio_bound_examples():
    assert ratio_bound(2.0, 3.0, 2.0, 3.0) == pytest.approx(4.0 / 3.0)
    assert ratio_bound(5.0, 2.0, 0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        ratio_bound(1.0, 1.0, 1.0, 0.0)


@given(pos, pos, pos, pos)
def test_ratio_lower_bound(r, z, r0, z0):
    exact = r ** 2 / z
    assert exact - ratio_bound(r, z, r0, z0) >= -1e-12 * max(1.0, exact)


def test_inv1p_examples():
    assert inv1p_tangent(2.0, 2.0) == pytest.approx(1 / 3)
    assert inv1p_tangent(1.0, 0.0) == pytest.approx(0.0)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_inv1p_below_function(g, g0):
    gap = 1 / (1 + g) - inv1p_tangent(g, g0)
    assert gap >= -1e-12
    if abs(g - g0) > 1e-3 * (1 + g0):
        assert gap > 0


def test_log_quadratic_examples():
    assert log_quadratic_bound(1.5, 1.5) == pytest.approx(np.log(2.5), abs=1e-15)
    assert log_quadratic_bound(1.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        log_quadratic_bound(-1.0, 0.0)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_log_quadratic_below_log(g, g0):
    assert np.log1p(g) - log_quadratic_bound(g, g0) >= -1e-12 * max(1.0, np.log1p(g))


@given(st.floats(0.01, 100.0))
def test_log_quadratic_slope_at_expansion(g0):
    h = 1e-6 * (1 + g0)
    fd = (log_quadratic_bound(g0 + h, g0) - log_quadratic_bound(g0 - h, g0)) / (2 * h)
    assert fd == pytest.approx(1 / (1 + g0), rel=1e-8)
