import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scale_probe.mesh import Rect
from scale_probe.scaling import (AffineScaleMap, GapError, MultiIndex, ScaleError, ScaleOrderingError, build_cutoff,
                                 default_cutoff, epsilon, layered_sum, map_backward, map_forward,
                                 rhs_bound_local_estimate, rhs_bound_superapprox, verify_derivative_scaling)
from scale_probe.solutions import linear, sine, trig

ALPHAS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_map_examples():
    m = AffineScaleMap((0.0, 0.0), 2.0)
    assert np.allclose(map_forward(m, [1.0, 1.0]), [0.5, 0.5])
    assert np.allclose(map_forward(m, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(ScaleError):
        AffineScaleMap((0.0, 0.0), 0.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 10), st.floats(-5, 5), st.floats(-5, 5))
def test_map_roundtrip(x0, y0, d, x, y):
    m = AffineScaleMap((x0, y0), d)
    assert np.allclose(map_backward(m, map_forward(m, [x, y])), [x, y], rtol=0, atol=1e-14 * (1 + abs(x) + abs(y)))


def test_multi_index_order():
    assert MultiIndex(2, 1).order == 3


def test_derivative_scaling_examples():
    pts = np.random.default_rng(0).uniform(0.1, 0.9, (20, 2))
    assert verify_derivative_scaling(linear(2.0, -1.0, 0.5), AffineScaleMap((0.3, 0.4), 0.5), (1, 0), pts) < 1e-12
    assert verify_derivative_scaling(sine(), AffineScaleMap((0.5, 0.5), 0.5), (0, 0), pts) < 1e-14
    assert verify_derivative_scaling(sine(), AffineScaleMap((0.5, 0.5), 0.5), (1, 1), pts) < 1e-6


@pytest.mark.parametrize("d", [0.25, 0.5, 2.0])
@pytest.mark.parametrize("alpha", ALPHAS)
def test_derivative_scaling_trig(d, alpha):
    pts = np.random.default_rng(1).uniform(0.05, 0.95, (30, 2))
    for u in (sine(), trig(2.0, 3.0), trig(1.3, 0.7, 1.1)):
        assert verify_derivative_scaling(u, AffineScaleMap((0.5, 0.5), d), alpha, pts) < 1e-6


def test_epsilon_examples():
    assert epsilon(1.0, 0.1, 1) == pytest.approx(math.sqrt(0.11), rel=1e-14)
    assert epsilon(0.5, 0.5, 2) == pytest.approx(math.sqrt(0.5 ** -2 + 1), rel=1e-14)
    with pytest.raises(ScaleOrderingError):
        epsilon(0.1, 0.2, 1)


@given(st.floats(0.01, 1), st.floats(1.0, 4.0), st.floats(1.01, 3.0), st.sampled_from([1, 2]))
def test_epsilon_monotone(h, ratio, grow, r):
    d = h * ratio
    assert epsilon(d * grow, h, r) < epsilon(d, h, r)
    assert epsilon(d, h / grow, r) < epsilon(d, h, r)


@given(st.floats(0.2, 5), st.floats(0.01, 0.99))
def test_epsilon_decreases_with_degree(d, q):
    assert epsilon(d, q * d, 2) < epsilon(d, q * d, 1)


def test_rhs_bound_examples():
    assert rhs_bound_superapprox(1.0, 0.1, 1, 0.0, 0.0) == 0.0
    assert rhs_bound_superapprox(1.0, 0.1, 1, 1.0, 1.0) == pytest.approx(0.2)
    a = rhs_bound_superapprox(1.0, 0.1, 1, 1.0, 0.0)
    assert rhs_bound_superapprox(2.0, 0.1, 1, 1.0, 0.0) == pytest.approx(a / 4)
    b = rhs_bound_superapprox(1.0, 0.1, 1, 0.0, 1.0)
    assert rhs_bound_superapprox(2.0, 0.1, 1, 0.0, 1.0) == pytest.approx(b / 2)
    assert rhs_bound_local_estimate(0.0, 3, 0.1, 2.0, 1.0, C=2.0) == pytest.approx(6.0)
    assert rhs_bound_local_estimate(0.5, 1, 0.1, 1.0, 0.0) == pytest.approx(6.5)


@given(st.floats(0.0, 0.95), st.integers(0, 30))
def test_layered_sum_geometric(eps, p):
    s = layered_sum(eps, p)
    assert 1.0 <= s <= 1.0 / (1.0 - eps) + 1e-12
    bound = math.sqrt(eps) / 0.1 + 1 / (1 - eps)
    assert rhs_bound_local_estimate(eps, p, 0.1, 1.0, 0.0) <= bound + 1e-9


def test_layered_sum_zero_power():
    assert layered_sum(0.0, 0) == 1.0
    assert layered_sum(0.0, 4, half_powers=True) == 1.0
    assert layered_sum(0.25, 2, half_powers=True) == pytest.approx(1 + 0.5 + 0.25)


def test_cutoff_examples():
    om = build_cutoff(Rect(0.25, 0.25, 0.75, 0.75), Rect(0.0, 0.0, 1.0, 1.0))
    assert om(0.5, 0.5) == 1.0
    assert om(1.5, 0.5) == 0.0
    assert om.derivative_bound == pytest.approx(7.5)
    with pytest.raises(GapError):
        build_cutoff(Rect(0.0, 0.25, 0.75, 0.75), Rect(0.0, 0.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        build_cutoff(Rect(0.25, 0.25, 0.75, 0.75), Rect(0.0, 0.0, 1.0, 1.0), smoothness=3)


def test_cutoff_sandwich_and_bound():
    om = build_cutoff(Rect(0.3, 0.2, 0.6, 0.7), Rect(0.1, 0.1, 0.9, 0.8))
    pts = np.random.default_rng(0).uniform(-0.1, 1.1, (10_000, 2))
    v = om(pts[:, 0], pts[:, 1])
    assert np.all((v >= 0) & (v <= 1))
    g = np.linalg.norm(om.gradient(pts[:, 0], pts[:, 1]), axis=-1)
    # the tensor-product gradient can exceed the 1D bound by at most sqrt(2)
    assert np.all(g <= math.sqrt(2) * om.derivative_bound * (1 + 1e-8))
    axis = np.abs(om.gradient(pts[:, 0], pts[:, 1]))
    assert np.all(axis <= om.derivative_bound * (1 + 1e-8))


def test_cutoff_plateau_and_outside():
    om = default_cutoff(Rect(0.0, 0.0, 1.0, 1.0))
    rng = np.random.default_rng(3)
    inner = rng.uniform(0.25, 0.75, (1000, 2))
    assert np.all(om(inner[:, 0], inner[:, 1]) == 1.0)
    outer = rng.uniform(0.0, 0.125, (1000, 2))
    assert np.all(om(outer[:, 0], outer[:, 1]) == 0.0)


@pytest.mark.parametrize("seam", [0.1, 0.3, 0.6, 0.9])
def test_cutoff_continuity_at_seams(seam):
    om = build_cutoff(Rect(0.3, 0.3, 0.6, 0.6), Rect(0.1, 0.1, 0.9, 0.9))
    y = np.linspace(0.0, 1.0, 101)
    for k in range(3):
        lo = om.derivative((1, 0) if k == 1 else (0, 0) if k == 0 else (2, 0), seam - 1e-12, y)
        hi = om.derivative((1, 0) if k == 1 else (0, 0) if k == 0 else (2, 0), seam + 1e-12, y)
        assert np.max(np.abs(lo - hi)) < 1e-8 * max(1.0, om.derivative_bound ** k)


def test_cutoff_analytic_derivatives_match_differences():
    om = build_cutoff(Rect(0.3, 0.3, 0.6, 0.6), Rect(0.1, 0.1, 0.9, 0.9))
    x, y, h = 0.2, 0.65, 1e-6
    gx = (om(x + h, y) - om(x - h, y)) / (2 * h)
    assert om.gradient(x, y)[0] == pytest.approx(gx, rel=1e-6)
    hxy = (om.gradient(x, y + h)[0] - om.gradient(x, y - h)[0]) / (2 * h)
    assert om.hessian(x, y)[0, 1] == pytest.approx(hxy, rel=1e-5)
