import numpy as np
import pytest
from hypothesis import given, strategies as st

from scale_probe.quadrature import monomial_integral, triangle_rule


@pytest.mark.parametrize("degree", range(0, 13))
def test_exactness(degree):
    rule = triangle_rule(degree)
    assert rule.exactness_degree >= degree
    assert np.all(rule.weights > 0)
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = monomial_integral(a, b)
            assert abs(rule.weights @ (x ** a * y ** b) - exact) <= 1e-13 * exact


def test_points_inside_reference_triangle():
    rule = triangle_rule(10)
    x, y = rule.points.T
    assert np.all(x > 0) and np.all(y > 0) and np.all(x + y < 1)


def test_not_exact_beyond_degree():
    rule = triangle_rule(3)
    x, y = rule.points.T
    d = rule.exactness_degree + 1
    assert abs(rule.weights @ x ** d - monomial_integral(d, 0)) > 1e-8


@given(st.integers(0, 8), st.integers(0, 8))
def test_monomial_formula_symmetry(a, b):
    assert monomial_integral(a, b) == monomial_integral(b, a)
