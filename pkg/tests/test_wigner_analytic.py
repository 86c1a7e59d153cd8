import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import INV_PI2
from vortexbell.errors import DomainError
from vortexbell.wigner_analytic import (QuadraturePoint, pi_value, q_invariants, rotate_phase_space,
                                        scale_to_quadrature, wdf_analytic, wdf_n1_closed)

coord = st.floats(-4, 4, allow_nan=False)
points = st.builds(QuadraturePoint, coord, coord, coord, coord)
orders = st.integers(0, 3)


@pytest.mark.parametrize("p, expected", [
    ((0, 0, 0, 0), (0.0, 0.0)),
    ((1, 0, 0, 1), (0.5, 0.5)),
    ((0.45, 0, 0, 0.45), (0.10125, 0.10125)),
    ((0, 1, 1, 0), (0.5, -0.5)),
])
def test_q_invariants_examples(p, expected):
    assert tuple(q_invariants(QuadraturePoint(*p))) == pytest.approx(expected, abs=1e-15)


@given(points)
def test_q2_bounded_by_q0(p):
    q0, q2 = q_invariants(p)
    assert q0 >= 0
    assert abs(q2) <= q0 + 1e-12


def test_wdf_examples():
    origin = QuadraturePoint(0, 0, 0, 0)
    assert wdf_analytic(0, 0, origin) == pytest.approx(INV_PI2, abs=1e-15)
    assert INV_PI2 == pytest.approx(0.101321, abs=1e-6)
    assert wdf_analytic(1, 0, origin) == pytest.approx(-INV_PI2, abs=1e-15)
    p = QuadraturePoint(0.45, 0, 0, 0.45)
    assert wdf_analytic(1, 0, p) == pytest.approx(wdf_n1_closed(p), abs=1e-12)


def test_wdf_frozen_values():
    # independent hand evaluation: n=2 at (0.3, 0.1, -0.2, 0.4)
    p = QuadraturePoint(0.3, 0.1, -0.2, 0.4)
    q0 = (0.09 + 0.01 + 0.04 + 0.16) / 4
    q2 = (0.3 * 0.4 - (-0.2) * 0.1) / 2
    u = 4 * (q0 + q2)
    expected = (1 - 2 * u + u * u / 2) * math.exp(-4 * q0) / math.pi ** 2
    assert wdf_analytic(2, 0, p) == pytest.approx(expected, abs=1e-15)
    # radial index: n=0, m=1 is (-1) L_1(4 Q0 - 4 Q2) exp(-4 Q0) / pi^2
    v = 4 * (q0 - q2)
    assert wdf_analytic(0, 1, p) == pytest.approx(-(1 - v) * math.exp(-4 * q0) / math.pi ** 2, abs=1e-15)


def test_n1_closed_examples():
    assert wdf_n1_closed(QuadraturePoint(0, 0, 0, 0)) == pytest.approx(-INV_PI2, abs=1e-15)
    assert wdf_n1_closed(QuadraturePoint(0, 1, 1, 0)) == pytest.approx(-math.exp(-2) / math.pi ** 2, abs=1e-15)


@given(points)
def test_n1_closed_matches_general(p):
    assert wdf_n1_closed(p) == pytest.approx(wdf_analytic(1, 0, p), abs=1e-12)


@pytest.mark.parametrize("n, expected", [(1, -1.0), (0, 1.0), (2, 1.0), (3, -1.0)])
def test_pi_value_at_origin(n, expected):
    assert pi_value(n, 0, QuadraturePoint(0, 0, 0, 0)) == pytest.approx(expected, abs=1e-14)


def test_scale_to_quadrature():
    w, lb = 300.0, 0.085
    assert scale_to_quadrature(w / math.sqrt(2), 0.0, w, lb)[0] == pytest.approx(1.0)
    assert scale_to_quadrature(0.0, 0.0, w, lb)[0] == 0.0
    assert scale_to_quadrature(0.0, math.sqrt(2) * lb / w, w, lb)[1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        scale_to_quadrature(1.0, 1.0, 0.0, lb)


@pytest.mark.parametrize("n, m", [(9, 0), (-9, 0), (1, 5), (1, -1), (1.5, 0)])
def test_order_domain(n, m):
    with pytest.raises(DomainError):
        wdf_analytic(n, m, QuadraturePoint(0, 0, 0, 0))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_normalisation(n):
    step = 0.25
    a = np.arange(-6, 6 + 1e-9, step)
    w = np.full(a.size, step)
    w[[0, -1]] = step / 2
    grids = np.meshgrid(a, a, a, a, indexing="ij", sparse=True)
    W = wdf_analytic(n, 0, grids)
    assert np.einsum("ijkl,i,j,k,l->", W, w, w, w, w) == pytest.approx(1.0, abs=1e-4)


@given(points, orders, st.integers(0, 2))
def test_parity_symmetry(p, n, m):
    neg = QuadraturePoint(*(-c for c in p))
    assert abs(wdf_analytic(n, m, p) - wdf_analytic(n, m, neg)) <= 1e-15


@given(points, orders, st.floats(-math.pi, math.pi))
def test_rotation_symmetry(p, n, angle):
    assert wdf_analytic(n, 0, rotate_phase_space(p, angle)) == pytest.approx(wdf_analytic(n, 0, p), abs=1e-12)


@given(points, orders)
def test_bounded_parity_expectation(p, n):
    assert abs(pi_value(n, 0, p)) <= 1 + 1e-12


@given(points, st.integers(1, 3), st.integers(0, 2))
def test_charge_conjugation(p, n, m):
    X, PX, Y, PY = p
    assert wdf_analytic(-n, m, p) == pytest.approx(wdf_analytic(n, m, QuadraturePoint(X, -PX, Y, -PY)), abs=1e-15)


def test_vectorised_evaluation():
    rng = np.random.default_rng(4)
    pts = tuple(rng.uniform(-2, 2, 50) for _ in range(4))
    vec = wdf_analytic(2, 1, pts)
    loop = [wdf_analytic(2, 1, QuadraturePoint(*(c[i] for c in pts))) for i in range(50)]
    np.testing.assert_allclose(vec, loop, rtol=0, atol=1e-16)
