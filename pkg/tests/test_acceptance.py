"""Acceptance criteria, one test each, at the stated tolerances and runtime limits.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion is
printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from escapelab.classify import (
    FLAT_SLOW,
    SLOW,
    SLOW_FAMILY,
    UNIFORM_SLOW,
    ClassifyParams,
    ConePreconditionFailed,
    check_category,
    classify,
    invariance_check,
    ku_cone_test,
    ku_fast_check,
    min_modulus_condition,
)
from escapelab.construction import (
    ConstructionConfig,
    PolyLogFamily,
    chain_from_regions,
    construct_point,
    default_rows,
    distortion_chain_audit,
    mcmullen_from_itinerary,
    sample_rows,
    upper_bound_audit,
)
from escapelab.expmap import ExpMap
from escapelab.geometry import (
    HalfAnnulus,
    contained_components,
    density,
    density_lower_bound,
    mc_density,
    sample_lemma_tuple,
)
from escapelab.itinerary import AnnularPartition, annular_index, compute_R0, seq_linear, seq_square

SEED = 42
E = math.e


class Clock:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False

    def check(self):
        assert self.elapsed < self.limit, f"runtime {self.elapsed:.2f} s exceeds {self.limit} s"


@pytest.mark.acceptance(1, "density sweep over 200 random tuples")
def test_density_sweep():
    rng = np.random.default_rng(SEED)
    failures = []
    with Clock(30) as clock:
        for _ in range(200):
            lam, s1, s2 = sample_lemma_tuple(rng)
            f = ExpMap(lam)
            comps = contained_components(f, s1, s2)
            exact = density(comps, s1).exact
            bound = density_lower_bound(f, s1, s2)
            if not exact >= bound:
                failures.append(("density", lam, s1, s2, exact, bound))
            if not len(comps) >= (s1.r2 - s1.r1) / (2 * math.pi):
                failures.append(("count", lam, s1, s2, len(comps)))
    assert not failures, failures[:3]
    clock.check()


@pytest.mark.acceptance(2, "worked density instance")
def test_worked_instance():
    with Clock(5) as clock:
        f = ExpMap(1)
        s1, s2 = HalfAnnulus(10, 70), HalfAnnulus(E, E**2)
        comps = contained_components(f, s1, s2)
        exact = density(comps, s1).exact
        bound = density_lower_bound(f, s1, s2)
        mean, sigma = mc_density(comps, s1, 1_000_000, seed=SEED)
    assert len(comps) == 18
    assert exact == pytest.approx(0.0075, rel=1e-12)
    assert bound == pytest.approx(1 / (140 * math.pi), rel=1e-12)
    assert bound == pytest.approx(0.0022736, abs=5e-8)
    assert abs(mean - 0.0075) <= 4 * sigma
    clock.check()


@pytest.mark.acceptance(3, "distortion: single step and seq_linear chains")
def test_distortion():
    with Clock(10) as clock:
        f = ExpMap(1, 128)
        regions = [HalfAnnulus(0.5, 100), HalfAnnulus(E, E**2)]
        single = distortion_chain_audit(f, chain_from_regions(f, regions, [0], complex(4, 0), R=20))
        f1 = ExpMap(1, 256)
        cfg = ConstructionConfig(compute_R0(f1, 0.1), seq_linear(6), tau0=2)
        rows = default_rows(f1, cfg, 5)
        audits = [distortion_chain_audit(f1, construct_point(f1, cfg, rows[:d]), tau0=2) for d in range(6)]
    assert abs(single.value / E - 1) < 1e-9
    for a in audits:
        assert a.value <= 2 * cfg.R, (a.depth, a.value)
    clock.check()


@pytest.mark.acceptance(4, "finite-depth dimension bound")
def test_mcmullen():
    with Clock(5) as clock:
        R = compute_R0(ExpMap(1), 0.1)
        lin4 = mcmullen_from_itinerary(R, seq_linear(10_001), 2, 10_000).value
        lin5 = mcmullen_from_itinerary(R, seq_linear(100_001), 2, 100_000).value
        sq3 = mcmullen_from_itinerary(R, seq_square(1001), 2, 1000).value
        doubled = mcmullen_from_itinerary(R, seq_linear(10_001), 4, 10_000).value
    assert R == pytest.approx(20)
    assert abs(lin4 - 1) < 0.05
    assert abs(lin5 - 1) < 1e-3
    assert abs(sq3 - 1) < 0.05
    assert abs(doubled - lin4) < 0.01
    clock.check()


@pytest.mark.acceptance(5, "construction round trip at depth 30, 256 bits")
def test_construction_round_trip():
    with Clock(20) as clock:
        f = ExpMap(1, 256)
        cfg = ConstructionConfig(20, seq_linear(31), precision_bits=256)
        chain = construct_point(f, cfg, default_rows(f, cfg, 30))
        # independent forward route: iterate and read annular indices directly
        part = AnnularPartition(20)
        idx = []
        for p in f.orbit(chain.point, chain.verified_steps + 3):
            try:
                idx.append(annular_index(part, p))
            except OverflowError:  # the orbit has left the prescribed path long before this
                break
        agree = next((i for i, (a, b) in enumerate(zip(idx, cfg.t)) if a != b), len(idx)) - 1
        cert = classify(f, chain.point, chain.verified_steps, ClassifyParams(R_hints=(20,)))
    assert all(chain.residence)
    assert chain.verified_steps >= 10
    assert agree >= 10
    assert cert.category == UNIFORM_SLOW and cert.R == 20
    assert cert.horizon == chain.verified_steps
    clock.check()


@pytest.mark.acceptance(6, "classifier nesting and invariance on 100 constructed points")
def test_nesting_and_invariance():
    problems = []
    with Clock(60) as clock:
        f = ExpMap(1, 256)
        cfg = ConstructionConfig(20, seq_linear(31), precision_bits=256)
        params = ClassifyParams(R_hints=(20,))
        rng = np.random.default_rng(SEED)
        for i in range(100):
            chain = construct_point(f, cfg, sample_rows(f, cfg, 30, rng))
            H = chain.verified_steps
            cert = classify(f, chain.point, H, params)
            if cert.category != UNIFORM_SLOW:
                problems.append((i, "category", cert.category))
                continue
            for cat in (FLAT_SLOW, SLOW):
                if check_category(f, chain.point, cat, H, cert.N, params) is None:
                    problems.append((i, cat))
            rep = invariance_check(f, chain.point, cert, 0, params)
            if not rep["ok"]:
                problems.append((i, "invariance", rep))
    assert not problems, problems[:3]
    clock.check()


def _cone_sample(rng, count):
    """Uniform Re in [50, 500], then Im uniform on the slice where Re > |z|/2 + 1."""
    re = rng.uniform(50, 500, count)
    half = np.sqrt(4 * (re - 1) ** 2 - re**2)
    im = rng.uniform(-1, 1, count) * half * (1 - 1e-12)
    return re + 1j * im


@pytest.mark.acceptance(7, "cone and fast consistency on 1000 random points")
def test_cone_fast_consistency():
    rng = np.random.default_rng(SEED)
    f = ExpMap(1)
    cone_fail, fast_fail, slow_found = 0, 0, 0
    with Clock(10) as clock:
        for z in _cone_sample(rng, 1000):
            z = complex(z)
            assert z.real > max(50, abs(z) / 2 + 1)
            if not ku_cone_test(f, z):
                cone_fail += 1
            try:
                ok = ku_fast_check(f, z, 0, 5)
            except ConePreconditionFailed:
                ok = False
            fast_fail += not ok
            if any(check_category(f, z, cat, 5, 0) is not None for cat in SLOW_FAMILY):
                slow_found += 1
    assert cone_fail == 0
    assert slow_found == 0
    assert fast_fail == 0, f"ku_fast_check false or precondition failed for {fast_fail} of 1000 points"
    clock.check()


@pytest.mark.acceptance(8, "upper-bound audit for the polylog family")
def test_upper_bound_audit():
    with Clock(5) as clock:
        audit = upper_bound_audit(PolyLogFamily(), 1, 0.5, (100, 10_000))
    log_q, ratio = audit["log_q"], audit["ratio"]
    assert np.all(np.diff(log_q) < 0)
    assert log_q[-1] < math.log(1e-3)
    assert ratio.max() > 10, f"largest ratio up to n = 10^4 is {ratio.max():.4f}"
    clock.check()


@pytest.mark.acceptance(9, "min-modulus condition for 20 random lambda")
def test_min_modulus():
    rng = np.random.default_rng(SEED)
    with Clock(1) as clock:
        reports = []
        for _ in range(20):
            lam = complex(*rng.normal(size=2)) * math.exp(rng.uniform(-3, 3))
            reports.append((lam, min_modulus_condition(ExpMap(lam), abs(lam), 2, 1)))
    for lam, rep in reports:
        assert rep.holds, lam
        # closed form: |lam| e^(-d r0) < c with c = |lam|
        assert abs(lam) * math.exp(-2) < abs(lam)
        assert all(r < rho < 2 * r for r, rho in zip(rep.sampled_r, rep.found_rho))
    clock.check()
