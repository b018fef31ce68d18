import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudolattice.diophantine import (
    DiophantineParams,
    bad_fraction,
    diophantine_scan,
    good_mask,
    good_values,
    is_diophantine,
    kam_good_values,
)
from pseudolattice.errors import EmptySegment, InvalidParameter, LambdaTooLarge
from pseudolattice.geometry import Rect
from pseudolattice.models import action_chart_at, flat_model

GOLDEN = (1 + 5**0.5) / 2

# min over 0 < |k|_inf <= 1e4 of |<omega, k>| |k|^(1+d), by exhaustive
# enumeration of all 4e8 integer vectors (frozen).
BRUTE_FORCE = {
    ((1.0, GOLDEN), 0.01): (0.8610028156592194, (2, -1)),
    ((1.0, 2**0.5), 0.01): (0.5878201408186233, (1, -1)),
    ((1.0, GOLDEN), 1.0): (1.0, (1, 0)),
}


def test_resonant_frequency_fails():
    r = is_diophantine((1.0, 1.0), DiophantineParams(1e-9))
    assert not r and r.worst_ratio == 0.0


def test_golden_ratio_is_diophantine():
    r = is_diophantine((1.0, GOLDEN), DiophantineParams(0.2, 1, 10_000))
    assert r.ok and r.k_max == 10_000


@pytest.mark.parametrize("key", sorted(BRUTE_FORCE))
def test_scan_matches_exhaustive_minimum(key):
    omega, d = key
    value, k = BRUTE_FORCE[key]
    ok, worst, kk = diophantine_scan(np.array([omega]), 0.01, d, 10_000)
    assert worst[0] * 0.01 == pytest.approx(value, rel=1e-12)
    assert tuple(abs(x) for x in kk[0]) == tuple(abs(x) for x in k)


def test_scan_matches_live_brute_force_small_kmax():
    rng = np.random.default_rng(5)
    om = rng.uniform(1, 2, (20, 2))
    K = 60
    k1, k2 = np.meshgrid(np.arange(-K, K + 1), np.arange(-K, K + 1))
    k1, k2 = k1.ravel(), k2.ravel()
    nz = (k1 != 0) | (k2 != 0)
    k1, k2 = k1[nz], k2[nz]
    _, worst, _ = diophantine_scan(om, 1.0, 1.0, K)
    for w, o in zip(worst, om):
        brute = np.min(np.abs(o[0] * k1 + o[1] * k2) * np.hypot(k1, k2) ** 2)
        assert w == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=0.1, d=0.0), dict(alpha=0.1, k_max=4)])
def test_invalid_parameters(kw):
    with pytest.raises(InvalidParameter):
        DiophantineParams(**kw)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(1.01, 4.0), st.floats(1e-4, 0.5))
def test_rescaling_preserves_diophantine(a, b, t, alpha):
    p = DiophantineParams(alpha, 1.0, 500)
    if is_diophantine((a, b), p):
        assert is_diophantine((t * a, t * b), p)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(1e-6, 1.0))
def test_rational_ratio_always_fails(p, q, alpha):
    assert not is_diophantine((float(p), float(q)), DiophantineParams(alpha, 1.0, 100))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.005, 0.05), st.floats(1.2, 3.0))
def test_good_values_monotone_in_alpha(alpha, factor):
    model = flat_model([[1.0, 0.0], [0.3, 1.0]])
    chart = action_chart_at(model, (1.0, 1.5), 0.4)
    small = good_values(model, chart, 1.0, DiophantineParams(alpha), 40)
    large = good_values(model, chart, 1.0, DiophantineParams(alpha * factor), 40)
    assert set(large.tolist()) <= set(small.tolist())


def test_flat_good_values_match_pointwise_test():
    # omega = (1, -0.5 G) for this shear, so resonances sit at rational G
    S = np.array([[1.0, 0.0], [0.5, 1.0]])
    model = flat_model(S)
    chart = action_chart_at(model, (1.0, 0.0), 0.9)
    p = DiophantineParams(0.01)
    gv = good_values(model, chart, 1.0, p, 50)
    omega = np.linalg.inv(S)[0]
    # omega is constant for a flat model: every G survives or none do
    expect = bool(is_diophantine(omega, p))
    assert np.all(gv.clauses["diophantine"] == expect)


def test_champagne_excludes_critical_neighbourhood(champagne, params):
    chart = action_chart_at(champagne, (0.0, 0.2), 0.1)
    gv = good_values(champagne, chart, 0.0, params, 60)
    near = np.abs(gv.grid) < params.alpha
    assert not np.any(gv.mask[near])
    assert not np.any(gv.clauses["critical"][near])


def test_empty_segment(champagne, params):
    chart = action_chart_at(champagne, (1.0, 0.5), 0.05)
    with pytest.raises(EmptySegment):
        good_values(champagne, chart, 1.0, params, 0)
    with pytest.raises(EmptySegment):
        good_values(champagne, chart, 5.0, params, 20)


def test_kam_good_values(champagne, params):
    chart = action_chart_at(champagne, (1.0, 0.5), 0.1)
    base = good_values(champagne, chart, 1.0, params, 40)
    anchor = (1.0, base.values[len(base) // 2])
    same = kam_good_values(champagne.with_perturbation(0.0), chart, anchor, params, 40)
    assert same.tolist() == base.tolist()
    pert = champagne.with_perturbation(1e-5)
    kam = kam_good_values(pert, chart, anchor, params, 40)
    assert len(kam) > 0
    # mirror chart: the perturbed good set is symmetric under j -> -j
    mirror = action_chart_at(champagne, (1.0, -0.5), 0.1)
    kam_m = kam_good_values(pert, mirror, (1.0, -anchor[1]), params, 40)
    assert np.allclose(sorted(kam.values), sorted(-kam_m.values))
    with pytest.raises(LambdaTooLarge):
        kam_good_values(champagne.with_perturbation(params.alpha**2), chart, anchor, params, 40)


def test_good_mask_agrees_with_good_values(champagne, params):
    chart = action_chart_at(champagne, (1.0, 0.5), 0.1)
    gv = good_values(champagne, chart, 1.0, params, 40)
    pts = np.c_[np.full(len(gv.grid), 1.0), gv.grid]
    step = float(gv.grid[1] - gv.grid[0])
    assert np.array_equal(good_mask(champagne, pts, params, step, [chart.domain_id] * len(pts)), gv.mask)


def test_bad_fraction_trivial_and_invalid():
    box = Rect(1.0, 2.0, 1.0, 2.0)
    assert bad_fraction(box, DiophantineParams(1e3), 2000).fraction == 1.0
    with pytest.raises(InvalidParameter):
        bad_fraction(Rect(1.0, 1.0, 1.0, 2.0), DiophantineParams(0.1), 10)
    with pytest.raises(InvalidParameter):
        bad_fraction(box, DiophantineParams(0.1), 0)


def test_bad_fraction_small_run_scaling():
    box = Rect(1.0, 2.0, 1.0, 2.0)
    a = bad_fraction(box, DiophantineParams(0.1), 20_000, seed=1)
    b = bad_fraction(box, DiophantineParams(0.05), 20_000, seed=1)
    assert a.fraction <= 0.5
    assert 0.3 <= b.fraction / a.fraction <= 0.8
    assert a.stderr == pytest.approx(np.sqrt(a.fraction * (1 - a.fraction) / 20_000))
