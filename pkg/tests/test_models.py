import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudolattice import gl2z
from pseudolattice._champagne import radial_integrals
from pseudolattice.errors import NonIntegerTransition, NoOverlap, OpenLoop, OutsideRegularRegion, SingularMatrix
from pseudolattice.models import (
    action_chart_at,
    champagne_bottle,
    circle_loop,
    classical_holonomy,
    classical_transition,
    flat_model,
    isoenergetic_check,
    kinetic_model,
    model_from_config,
)

T = ((1, 1), (0, 1))
T_INV = ((1, -1), (0, 1))


def continuation_oracle(loop):
    """Holonomy of the radial-action branch by brute-force continuation.

    Along the loop the first action is I_r(E, j) + m j for an integer m chosen
    at each of the loop points so that d(action)/dj = -Theta/2pi + m varies
    continuously; the net change of m is the off-diagonal monodromy entry.
    """
    _, _, rot = radial_integrals(loop[:, 0], loop[:, 1])
    slope = -rot / (2 * np.pi)
    m = [0]
    for k in range(1, len(loop)):
        m.append(int(np.round(slope[k - 1] + m[-1] - slope[k])))
    return ((1, m[-1] - m[0]), (0, 1))


# -- flat model -------------------------------------------------------------


def test_flat_model_is_affine():
    S = np.array([[1.0, 0.0], [1.0, 1.0]])
    model = flat_model(S, (0.5, -0.25))
    c = np.array([[0.3, 0.7], [1.0, -2.0]])
    xi, J = model.actions(c)
    assert np.allclose(xi, c @ S.T + [0.5, -0.25])
    assert np.allclose(J, S)
    assert np.allclose(model.values(xi, "global"), c)


def test_flat_model_rejects_singular_shear():
    with pytest.raises(SingularMatrix):
        flat_model([[1.0, 0.0], [0.0, 0.0]])


def test_identity_chart_is_identity():
    chart = action_chart_at(flat_model(np.eye(2)), (1.0, 0.5), 0.1)
    pts = chart.sample(10)
    assert np.allclose(chart.action_map(pts), pts)
    assert np.array_equal(chart.maslov, [0, 0]) and np.array_equal(chart.action_offset, [0, 0])


def test_flat_transition_same_chart_is_identity():
    chart = action_chart_at(flat_model([[2.0, 1.0], [0.5, 1.0]]), (0.0, 0.0), 0.5)
    M, C = classical_transition(chart, chart)
    assert M == gl2z.IDENTITY and np.allclose(C, 0)


def test_flat_transition_recovers_shear_ratio():
    S = np.array([[1.0, 0.3], [0.2, 1.1]])
    Tm = np.array(T, dtype=float)
    # d(phi_i^-1 o phi_j) = S_i S_j^-1
    ci = action_chart_at(flat_model(Tm @ S), (0.0, 0.0), 0.5)
    cj = action_chart_at(flat_model(S), (0.2, 0.0), 0.5)
    assert classical_transition(ci, cj)[0] == T
    # with a shear commuting with T the right factor gives the inverse
    U = np.array([[1.0, 0.3], [0.0, 1.0]])
    ci = action_chart_at(flat_model(U), (0.0, 0.0), 0.5)
    cj = action_chart_at(flat_model(U @ Tm), (0.2, 0.0), 0.5)
    assert classical_transition(ci, cj)[0] == T_INV


def test_flat_transition_disjoint_and_non_integer():
    model = flat_model(np.eye(2))
    with pytest.raises(NoOverlap):
        classical_transition(action_chart_at(model, (0, 0), 0.1), action_chart_at(model, (1, 0), 0.1))
    half = action_chart_at(flat_model(np.diag([1.5, 1.0])), (0, 0), 0.5)
    with pytest.raises(NonIntegerTransition):
        classical_transition(half, action_chart_at(model, (0.1, 0), 0.5))


@pytest.mark.parametrize("shear", [np.eye(2), [[1.0, 0.0], [1.0, 1.0]]])
def test_flat_holonomy_is_identity(shear):
    loop = circle_loop((0.3, -0.2), 1.0, 24)
    assert classical_holonomy(flat_model(shear), loop, 0.4).is_identity


def test_open_loop_rejected():
    loop = circle_loop((0, 0), 1.0, 12)[:-1]
    with pytest.raises(OpenLoop):
        classical_holonomy(flat_model(np.eye(2)), loop, 0.5)


# -- champagne bottle --------------------------------------------------------


def test_chart_near_focus_focus_rejected(champagne):
    with pytest.raises(OutsideRegularRegion):
        action_chart_at(champagne, (0.0, 0.0), 0.01)
    with pytest.raises(OutsideRegularRegion):
        champagne.actions([[0.01, 0.01]])


def test_action_symmetric_in_j(champagne):
    rng = np.random.default_rng(3)
    c = np.c_[rng.uniform(0.2, 1.5, 30), rng.uniform(0.05, 0.8, 30)]
    c = c[champagne.is_regular(c) & champagne.is_regular(c * [1, -1])]
    for dom in ("G+", "E-"):  # sectors using the plain radial action
        a = champagne.action_provider(c, dom)[0]
        b = champagne.action_provider(c * [1, -1], dom)[0]
        assert np.allclose(a[:, 0], b[:, 0], atol=1e-13)
        assert np.allclose(a[:, 1], -b[:, 1])


def test_differential_matches_finite_differences(champagne):
    chart = action_chart_at(champagne, (1.0, 0.5), 0.05)
    pts = chart.sample(20)
    step = 1e-5
    for c in pts:
        J = chart.differential(c[None, :])[0]
        fd = np.column_stack(
            [(chart.action_map((c + e)[None, :]) - chart.action_map((c - e)[None, :]))[0] / (2 * step) for e in np.eye(2) * step]
        )
        assert np.max(np.abs(J - fd)) <= 1e-5 * max(1.0, np.max(np.abs(J)))


def test_frequency_is_gradient_of_energy(champagne):
    """First row of (dphi^-1)^-1 against finite differences of xi -> E."""
    rng = np.random.default_rng(11)
    c = np.c_[rng.uniform(-0.2, 1.8, 400), rng.uniform(-1.2, 1.2, 400)]
    c = c[champagne.is_regular(c) & (champagne.region.contains(c + 0.02) & champagne.region.contains(c - 0.02))][:100]
    assert len(c) == 100
    step = 1e-5
    worst = 0.0
    for dom in ("E+", "G+", "E-", "G-"):
        sel = np.array([champagne.domain_of(p) == dom for p in c])
        if not np.any(sel):
            continue
        sub = c[sel]
        xi, J = champagne.actions(sub, dom)
        omega = np.linalg.inv(J)[:, 0, :]
        grad = np.column_stack(
            [
                (champagne.energy(xi + e, dom, sub) - champagne.energy(xi - e, dom, sub)) / (2 * step)
                for e in np.eye(2) * step
            ]
        )
        worst = max(worst, float(np.max(np.abs(omega - grad))))
    assert worst <= 1e-5


def test_value_map_inverts_action_map(champagne):
    c = np.array([[1.0, 0.5], [0.3, -0.4], [-0.1, 0.15], [0.5, 0.0]])
    for p in c:
        dom = champagne.domain_of(p)
        xi, _ = champagne.actions(p[None, :], dom)
        assert np.allclose(champagne.values(xi, dom), p[None, :], atol=1e-11)


@pytest.mark.parametrize("points", [64, 128])
@pytest.mark.parametrize("start", [0.0, 37.0])
def test_holonomy_around_focus_focus(champagne, points, start):
    loop = circle_loop((0.0, 0.0), 0.15, points, start)
    hol = classical_holonomy(champagne, loop, 0.03)
    assert hol.representative == T
    assert hol.representative == continuation_oracle(loop)


def test_reversed_loop_gives_inverse(champagne):
    loop = circle_loop((0.0, 0.0), 0.15, 64)[::-1]
    hol = classical_holonomy(champagne, loop, 0.03)
    assert hol.representative == T_INV == continuation_oracle(loop)


@pytest.mark.parametrize("center", [(0.5, 0.3), (1.0, -0.5), (0.3, 0.0)])
def test_loop_not_enclosing_focus_focus_is_trivial(champagne, center):
    loop = circle_loop(center, 0.1, 48)
    assert classical_holonomy(champagne, loop, 0.025).is_identity
    assert continuation_oracle(loop) == gl2z.IDENTITY


def test_isoenergetic_check_cases(champagne):
    assert isoenergetic_check(champagne, action_chart_at(champagne, (1.0, 0.5), 0.05))
    report = isoenergetic_check(flat_model(np.eye(2)), action_chart_at(flat_model(np.eye(2)), (1.0, 0.5), 0.1))
    assert not report and len(report.failing) > 0
    kin = kinetic_model()
    assert isoenergetic_check(kin, action_chart_at(kin, (1.0, 0.5), 0.1))


def test_model_from_config_roundtrip():
    m = model_from_config({"name": "flat", "shear": [[1, 0], [1, 1]], "maslov": [2, 0]})
    assert np.array_equal(m.eta("global"), [2, 0])
    assert model_from_config({"name": "champagne"}).name == champagne_bottle().name
    with pytest.raises(ValueError):
        model_from_config({"name": "pendulum"})


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 1.5), st.floats(-0.9, 0.9))
def test_jacobian_first_row_is_inverse_frequency(E, G):
    model = champagne_bottle()
    c = np.array([[E, G]])
    if not model.is_regular(c)[0]:
        return
    xi, J = model.actions(c)
    omega = model.frequency(xi, model.domain_of(c), c)
    assert np.allclose(omega @ J[0], [1.0, 0.0], atol=1e-9)
