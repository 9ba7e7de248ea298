import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from escapelab.classify import (
    BOUNDED,
    FAST,
    FLAT_MODERATE,
    FLAT_SLOW,
    MODERATE,
    SLOW,
    SLOW_FAMILY,
    UNIFORM_SLOW,
    ClassifyParams,
    ConePreconditionFailed,
    EscapeCertificate,
    check_category,
    classify,
    invariance_check,
    ku_cone_test,
    ku_fast_check,
    ku_region_test,
    min_modulus_condition,
    orbit_data,
)
from escapelab.construction import ConstructionConfig, construct_point, default_rows, sample_rows
from escapelab.expmap import ExpMap
from escapelab.itinerary import seq_linear

F1 = ExpMap(1)
HINT20 = ClassifyParams(R_hints=(20,))


@pytest.fixture(scope="module")
def constructed():
    f = ExpMap(1, 256)
    cfg = ConstructionConfig(20, seq_linear(31))
    rng = np.random.default_rng(2024)
    return f, [construct_point(f, cfg, sample_rows(f, cfg, 30, rng)) for _ in range(100)]


def test_bounded_example():
    cert = classify(ExpMap(0.25), 0, 100)
    assert cert.category == BOUNDED
    assert cert.N is None


def test_fast_example():
    cert = classify(F1, 100, 6)
    assert cert.category == FAST and cert.ell == 0


def test_fast_tower_comparison_with_unit_base():
    cert = check_category(F1, 100, FAST, 6, 0, ClassifyParams(fast_base=1.0))
    assert cert is not None and cert.ell == 0


def test_constructed_point_is_uniformly_slow():
    f = ExpMap(1, 256)
    cfg = ConstructionConfig(20, seq_linear(31))
    chain = construct_point(f, cfg, default_rows(f, cfg, 30))
    cert = classify(f, chain.point, chain.verified_steps, HINT20)
    assert cert.category == UNIFORM_SLOW and cert.R == 20
    # t = 1, 1, 1, 2, 3, ...: |z| / R^0 lies in H_1, |f z| / R in [1, R], later ratios in [1/R, 1]
    assert 20**-1 <= cert.C1 <= cert.C2 <= 20**2


def test_horizon_validation():
    with pytest.raises(ValueError):
        classify(F1, 0, 0)


def test_escape_radius_blocks_bounded_cone_points():
    # 0.3 is in the cone but converges for lam = 0.25
    assert classify(ExpMap(0.25), 0.3, 30).category == BOUNDED


def test_cone_examples():
    assert ku_cone_test(F1, 4 + 3j)
    assert not ku_cone_test(F1, 1j)
    assert ku_cone_test(F1, 1 + 1j)
    assert not ku_region_test(F1, 4 + 3j)
    assert ku_region_test(F1, 60 + 3j)


@given(st.complex_numbers(max_magnitude=300, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=0.01, max_magnitude=100, allow_nan=False, allow_infinity=False))
def test_cone_image_dominates_max_modulus(z, lam):
    f = ExpMap(lam)
    if ku_cone_test(f, z):
        # |f(z)| / M(|z|/2) - 1 = expm1(Re z - |z|/2), evaluated without cancellation
        with mpmath.workdps(120):
            x, y = mpmath.mpf(z.real), mpmath.mpf(z.imag)
            assert mpmath.expm1(x - mpmath.sqrt(x * x + y * y) / 2) > 0


def test_fast_check_examples():
    assert ku_fast_check(F1, 100, 0, 5)
    assert ku_fast_check(F1, 3, 0, 3)


def test_fast_check_precondition():
    # f(100 + pi i) = -e^100 leaves the cone
    with pytest.raises(ConePreconditionFailed) as exc:
        ku_fast_check(F1, 100 + math.pi * 1j, 0, 5)
    assert exc.value.n == 1
    with pytest.raises(ValueError):
        ku_fast_check(F1, 100, 4, 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(50, 600), st.integers(-20, 20), st.floats(-0.5, 0.5))
def test_fast_check_on_cone_preserving_orbits(re, k, dy):
    # Im z within pi/3 of 2 pi k keeps f(z) in the cone; the next iterate is in tower form
    z = complex(re, 2 * math.pi * k + dy)
    if ku_cone_test(F1, z):
        assert ku_fast_check(F1, z, 0, 5)
        assert classify(F1, z, 5).category == FAST


def test_min_modulus_examples():
    assert min_modulus_condition(F1, 1, 2, 0).holds
    rep = min_modulus_condition(ExpMap(5), 1, 2, math.log(5))
    assert rep.holds
    assert all(r < rho < 2 * r for r, rho in zip(rep.sampled_r, rep.found_rho))
    assert not min_modulus_condition(F1, 0, 2, 0).holds
    assert not min_modulus_condition(ExpMap(100), 1, 2, 1).holds
    with pytest.raises(ValueError):
        min_modulus_condition(F1, 1, 1, 0)


def test_min_modulus_closed_form_matches_witnesses():
    rng = np.random.default_rng(7)
    for _ in range(50):
        lam = complex(*rng.normal(size=2)) * 3
        c, d, r0 = rng.uniform(0.1, 5), rng.uniform(1.1, 4), rng.uniform(0.1, 5)
        rep = min_modulus_condition(ExpMap(lam), c, d, r0)
        assert rep.holds == (abs(lam) * math.exp(-d * r0) < c)


def test_nesting_on_constructed_points(constructed):
    f, chains = constructed
    for ch in chains:
        H = ch.verified_steps
        cert = classify(f, ch.point, H, HINT20)
        assert cert.category == UNIFORM_SLOW
        assert check_category(f, ch.point, FLAT_SLOW, H, cert.N) is not None
        assert check_category(f, ch.point, SLOW, H, cert.N) is not None


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.05, 40.0), min_size=8, max_size=8))
def test_flat_moderate_implies_moderate(steps):
    # synthetic log-magnitudes, increasing and above the escape radius
    d = orbit_data(F1, 3, 8)
    d.L[:] = 1.5 + np.cumsum([0.0, *steps])
    d.LL[:] = np.log(d.L)
    for N in range(5):
        cert = check_category(F1, d, FLAT_MODERATE, 8, N)
        if cert is not None:
            assert check_category(F1, d, MODERATE, 8, N) is not None


def test_flat_moderate_example():
    # log|f^n| = n log n + 1 tracks the lower edge with p = 1
    d = orbit_data(F1, 3, 8)
    n = np.arange(9)
    d.L[:] = n * np.log(np.maximum(n, 1)) + 2
    d.LL[:] = np.log(d.L)
    cert = check_category(F1, d, FLAT_MODERATE, 8, 1)
    assert cert is not None and cert.p == 1


def test_slow_fast_exclusive(constructed):
    f, chains = constructed
    for ch in chains[:20]:
        H = ch.verified_steps
        assert check_category(f, ch.point, FAST, H, 0) is None
    for z in [100, 200 + 0.1j, 3]:
        d = orbit_data(F1, z, 5)
        fast = check_category(F1, d, FAST, 5, 0)
        assert fast is not None
        for cat in SLOW_FAMILY:
            assert check_category(F1, d, cat, 5, 0) is None


def test_forward_shift(constructed):
    f, chains = constructed
    for ch in chains:
        H = ch.verified_steps
        slow = check_category(f, ch.point, SLOW, H, 0)
        shifted = check_category(f, f(ch.point), SLOW, H - 1, max(slow.N - 1, 0))
        assert shifted is not None
        # |f^n(f z)| = |f^(n+1) z| <= R^(n+1) <= (R^2)^n
        assert shifted.R <= slow.R**2 * (1 + 1e-12)


def test_invariance(constructed):
    f, chains = constructed
    for ch in chains:
        cert = classify(f, ch.point, ch.verified_steps, HINT20)
        rep = invariance_check(f, ch.point, cert, 0, HINT20)
        assert rep["ok"], rep


def test_invariance_precondition():
    rep = invariance_check(ExpMap(0.25), 0, classify(ExpMap(0.25), 0, 10), 0)
    assert not rep["precondition"] and not rep["ok"]


def test_invariance_left_preimage_is_noted():
    f = ExpMap(1, 256)
    cfg = ConstructionConfig(20, seq_linear(31))
    ch = construct_point(f, cfg, default_rows(f, cfg, 30))
    # three preimages down, |w| < 1, so the next preimage has Re < 0
    w = ch.point
    for _ in range(3):
        w = f.inverse_branch(w, 0)
    assert abs(complex(w)) < 1
    cert = classify(f, w, ch.verified_steps + 3, HINT20)
    assert cert.category == UNIFORM_SLOW
    rep = invariance_check(f, w, cert, 0, HINT20)
    assert rep["preimage"]["preimage_re"] < 0
    assert "note" in rep["preimage"]
    assert rep["ok"]


def test_determinism():
    f = ExpMap(0.7 + 0.2j)
    for z in [0.5, 30 + 1j, 100, -2 + 5j]:
        assert classify(f, z, 12).to_json() == classify(f, z, 12).to_json()


def test_certificate_json():
    cert = EscapeCertificate(FAST, 6, N=0, ell=0, method="cone")
    d = json.loads(cert.to_json())
    assert {"category", "horizon", "N", "R", "C1", "C2", "p", "C", "ell", "window_checked"} <= set(d)
    assert d["window_checked"] == [0, 6]
    assert list(d) == sorted(d)
