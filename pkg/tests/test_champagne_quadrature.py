"""Radial integrals against an independent high-precision quadrature in r."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudolattice._champagne import energy_floor, radial_integrals, regularity_margin, turning_points

# (E, j) -> (I_r, T, Theta); mpmath tanh-sinh quadrature of the radial momentum
# in the original r variable at 30 digits, frozen here.
ORACLE = {
    (0.5, 0.3): (0.26241201707440152, 2.2303177345367743, 2.5078710072319638),
    (1.0, 0.5): (0.34275224030738885, 1.8750646384850964, 2.5784777680592461),
    (-0.1, 0.1): (0.070869351959286409, 3.3009947303706899, 1.0444128179037378),
    (0.2, -0.4): (0.11679467246117254, 2.3201685879690535, -2.078255337194218),
    (1.5, 0.0): (0.71826890595718749, 1.7905596369489036, np.pi),
    (-0.2, 0.0): (0.02550695166104213, 3.27438190903693, 0.0),
}


@pytest.mark.parametrize("value", sorted(ORACLE))
def test_against_frozen_oracle(value):
    action, period, rot = radial_integrals(*value)
    want = ORACLE[value]
    assert action[0] == pytest.approx(want[0], abs=1e-12)
    assert period[0] == pytest.approx(want[1], abs=1e-12)
    assert rot[0] == pytest.approx(want[2], abs=1e-12)


def test_turning_points_are_roots():
    E = np.array([0.5, 1.0, -0.1])
    j = np.array([0.3, 0.5, 0.1])
    um, up, u3 = turning_points(E, j)
    g = lambda u: -2 * u**3 + 2 * u**2 + 2 * E * u - j**2  # noqa: E731
    assert np.max(np.abs(g(um))) < 1e-13
    assert np.max(np.abs(g(up))) < 1e-13
    assert np.allclose(um + up + u3, 1.0)


def test_energy_floor_is_boundary_of_regular_set():
    for j in (0.1, 0.3, 0.7):
        E0 = float(energy_floor(np.array(j)))
        assert regularity_margin(E0 + 1e-6, j) > 0
        assert regularity_margin(E0 - 1e-6, j) < 0
    assert float(energy_floor(np.array(0.0))) == pytest.approx(-0.25)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.05, 0.8))
def test_derivatives_match_finite_differences(E, j):
    if regularity_margin(E - 1e-3, j) <= 1e-3:
        return
    step = 1e-5
    _, T, Th = radial_integrals(E, j)
    dE = (radial_integrals(E + step, j)[0] - radial_integrals(E - step, j)[0]) / (2 * step)
    dj = (radial_integrals(E, j + step)[0] - radial_integrals(E, j - step)[0]) / (2 * step)
    assert dE[0] == pytest.approx(T[0] / (2 * np.pi), rel=1e-6)
    assert dj[0] == pytest.approx(-Th[0] / (2 * np.pi), rel=1e-6, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.2, 1.5), st.floats(0.01, 0.8))
def test_action_even_rotation_odd_in_j(E, j):
    if regularity_margin(E, j) <= 1e-6:
        return
    a, t, r = radial_integrals(E, j)
    b, s, q = radial_integrals(E, -j)
    assert a[0] == pytest.approx(b[0], abs=1e-13)
    assert t[0] == pytest.approx(s[0], abs=1e-13)
    assert r[0] == pytest.approx(-q[0], abs=1e-13)
