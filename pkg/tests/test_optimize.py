import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetdp.optimize import (
    affine_segments,
    optimize_affine,
    optimize_threshold,
    plan_for_tau,
    public_private_affine,
    ratio,
    two_level_affine_closed_form,
)
from hetdp.profile import INF, PrivacyProfile, clipped_sums, mse_affine_at, n_at_threshold

from conftest import profiles, rel_close


def brute_threshold(profile):
    """Enumerate every record's budget as the threshold, straight from the record list."""
    budgets = profile.budgets()
    best = (None, INF)
    for eps in sorted(set(budgets)):
        n = sum(b >= eps for b in budgets)
        val = 1 / (4 * n) + (0.0 if eps == INF else 2 / (eps * n) ** 2)
        if val <= best[1]:
            best = (eps, val)
    return best


def dense_affine(profile, points=20_001):
    """Dense log grid plus the budgets, evaluated from the expanded record list."""
    b = np.array(profile.budgets())
    finite = b[np.isfinite(b)]
    lo = finite.min() / 8 if finite.size else 1e-3
    hi = 1e4 * (finite.max() if finite.size else 1.0)
    taus = np.union1d(np.geomspace(lo, hi, points), finite)
    c = np.minimum(b[None, :], taus[:, None])
    vals = ((c**2).sum(1) + 8) / (4 * c.sum(1) ** 2)
    i = vals.argmin()
    return taus[i], vals[i]


class TestThreshold:
    def test_example(self, example_profile):
        eps, val = optimize_threshold(example_profile)
        assert eps == 0.5
        assert rel_close(val, 17 / 8, 1e-12)

    def test_public_instance_uses_everything(self, tight_public):
        eps, val = optimize_threshold(tight_public)
        assert eps == 0.001
        # exact rational evaluation of 1/(4*10012) + 2/10.012**2
        assert rel_close(val, 0.019977056297923915, 1e-12)
        assert val < 1 / 48

    @pytest.mark.parametrize("eps,n", [(0.1, 5), (1.0, 100), (7.0, 1)])
    def test_single_level(self, eps, n):
        assert optimize_threshold(PrivacyProfile(((eps, n),))) == (eps, pytest.approx(1 / (4 * n) + 2 / (n * eps) ** 2, rel=1e-12))

    def test_public_only_wins(self):
        p = PrivacyProfile(((1e-4, 3),), 50)
        assert optimize_threshold(p) == (INF, pytest.approx(1 / 200))

    def test_tie_goes_to_largest(self):
        # both thresholds give exactly 5/32: 1/32 + 2/16 and 1/8 + 2/64
        p = PrivacyProfile(((0.5, 6), (4.0, 2)))
        assert optimize_threshold(p) == (4.0, 5 / 32)

    @given(profiles())
    def test_matches_enumeration(self, p):
        eps, val = optimize_threshold(p)
        b_eps, b_val = brute_threshold(p)
        assert rel_close(val, b_val, 1e-12)
        assert eps == b_eps


class TestAffine:
    def test_example(self, example_profile):
        plan = optimize_affine(example_profile)
        assert plan.tau_star == 1.0
        assert rel_close(plan.mse, 37 / 36, 1e-12)
        assert plan.weight_for(0.5) == pytest.approx(1 / 3, rel=1e-12)
        assert plan.weight_for(1.0) == pytest.approx(2 / 3, rel=1e-12)
        assert plan.eta == pytest.approx(2 / 3, rel=1e-12)

    def test_public_instance(self, tight_public):
        plan = optimize_affine(tight_public)
        assert rel_close(plan.tau_star, 0.801, 1e-12)
        # value from exact rational evaluation at tau = 801/1000
        assert rel_close(plan.mse, 0.010210585355904548, 1e-12)
        assert rel_close(plan.mse, public_private_affine(10_000, 0.001, 12), 1e-12)

    def test_equal_revenue_clamps(self, er3):
        segs = affine_segments(er3)
        last = segs[-1]
        assert (last.lo, last.hi) == (0.5, 1.0)
        assert last.stationary == pytest.approx(4.375, rel=1e-15)
        plan = optimize_affine(er3)
        assert plan.tau_star == 1.0
        assert rel_close(plan.mse, 9.75 / 36, 1e-12)
        grid_tau, grid_val = dense_affine(er3)
        assert grid_val >= plan.mse * (1 - 1e-12)
        assert grid_val == pytest.approx(plan.mse, rel=1e-9)

    def test_all_public(self):
        plan = optimize_affine(PrivacyProfile((), 4))
        assert plan.tau_star == INF
        assert plan.eta == 0.0
        assert plan.mse == pytest.approx(1 / 16)
        assert plan.weights == ((INF, 0.25),)

    def test_single_level_takes_smallest_tau(self):
        plan = optimize_affine(PrivacyProfile(((0.3, 7),)))
        assert plan.tau_star == 0.3

    def test_segments_layout(self, tight_public):
        segs = affine_segments(tight_public)
        assert [(s.lo, s.hi, s.above) for s in segs] == [(0.0, 0.001, 10_012), (0.001, INF, 12)]
        assert segs[0].stationary == INF
        assert segs[1].lin == pytest.approx(10.0) and segs[1].quad == pytest.approx(0.01)

    @given(profiles())
    def test_segment_formula_matches_clipped_sums(self, p):
        for seg in affine_segments(p):
            hi = seg.hi if math.isfinite(seg.hi) else 2 * seg.lo + 1
            for tau in (0.5 * (seg.lo + hi), hi):
                assert rel_close(seg.value(tau), mse_affine_at(p, tau), 1e-10)

    @settings(max_examples=60, deadline=None)
    @given(profiles(max_levels=6))
    def test_not_beaten_by_dense_grid(self, p):
        plan = optimize_affine(p)
        _, grid_val = dense_affine(p)
        assert plan.mse <= grid_val * (1 + 1e-12)

    @given(profiles())
    def test_plan_invariants(self, p):
        plan = optimize_affine(p)
        total = sum(c * plan.weight_for(e) for e, c in p.levels)
        if p.public_count:
            total += p.public_count * plan.weight_for(INF)
        assert total == pytest.approx(1.0, abs=1e-9)
        if math.isfinite(plan.tau_star):
            for e, w in plan.weights:
                assert w == pytest.approx(min(e, plan.tau_star) * plan.eta, rel=1e-12)
                if math.isfinite(e):
                    assert w / e <= plan.eta + 1e-12


class TestRatio:
    def test_example(self, example_profile):
        rep = ratio(example_profile)
        assert rel_close(rep.ratio, 153 / 74, 1e-12)
        assert rep.ratio > 2
        assert rep.to_dict() == {"eps_star": 0.5, "mse_thr": 2.125, "tau_star": 1.0,
                                 "mse_aff": rep.mse_aff, "ratio": rep.ratio}

    def test_public_instance(self, tight_public):
        assert 1.95 < ratio(tight_public).ratio < 1.96

    def test_single_level(self):
        assert ratio(PrivacyProfile(((0.2, 40),))).ratio == pytest.approx(1.0, rel=1e-12)

    def test_inf_serialized_as_string(self):
        rep = ratio(PrivacyProfile((), 3))
        assert rep.to_dict()["eps_star"] == "inf"
        assert rep.to_dict()["tau_star"] == "inf"

    @given(profiles())
    def test_dominance(self, p):
        rep = ratio(p)
        assert rep.mse_aff <= rep.mse_thr + 1e-12
        assert rep.ratio >= 1 - 1e-9


two_level = st.tuples(
    st.integers(1, 10**6), st.floats(1e-4, 1e2), st.integers(1, 10**6), st.floats(1e-4, 1e2)
).filter(lambda t: t[1] != t[3]).map(
    lambda t: (t[0], min(t[1], t[3]), t[2], max(t[1], t[3])))


class TestClosedForms:
    def test_two_level_example(self):
        assert rel_close(two_level_affine_closed_form(1, 0.5, 1, 1.0), 37 / 36, 1e-12)

    def test_two_level_rejects_order(self):
        with pytest.raises(ValueError):
            two_level_affine_closed_form(1, 1.0, 1, 0.5)
        with pytest.raises(ValueError):
            two_level_affine_closed_form(1, 1.0, 1, 1.0)

    @pytest.mark.parametrize("n1,eps1,n2", [(1, 0.5, 1), (100, 0.01, 7), (10**5, 2.0, 3)])
    def test_two_level_continuous_at_switch(self, n1, eps1, n2):
        r = 1 + 8 / (n1 * eps1**2)
        e2 = r * eps1
        first = (n1 * eps1**2 + n2 * e2**2 + 8) / (4 * (n1 * eps1 + n2 * e2) ** 2)
        second = r / (4 * (n1 + n2 * r))
        assert rel_close(first, second, 1e-12)
        assert rel_close(two_level_affine_closed_form(n1, eps1, n2, e2), second, 1e-12)

    @given(two_level)
    def test_two_level_matches_segments(self, t):
        n1, e1, n2, e2 = t
        p = PrivacyProfile(((e1, n1), (e2, n2)))
        assert rel_close(two_level_affine_closed_form(n1, e1, n2, e2), optimize_affine(p).mse, 1e-9)
        r = 1 + 8 / (n1 * e1**2)
        stat = affine_segments(p)[1].stationary
        assert abs(stat - r * e1) <= 1e-12 * r * e1

    def test_public_private_equal_risks(self):
        # pick eps so the private-only and public-only risks are equal
        n1, n2 = 10, 5
        eps = math.sqrt(2 / (n1**2 * (1 / (4 * n2) - 1 / (4 * n1))))
        a = 1 / (4 * n2)
        assert rel_close(public_private_affine(n1, eps, n2), a / 2, 1e-12)

    def test_public_private_vanishes(self):
        assert public_private_affine(10, 0.1, 10**12) < 1e-12

    @given(st.integers(1, 10**6), st.floats(1e-4, 1e2), st.integers(1, 10**6))
    def test_public_private_matches_segments(self, n1, e1, n2):
        p = PrivacyProfile(((e1, n1),), n2)
        assert rel_close(public_private_affine(n1, e1, n2), optimize_affine(p).mse, 1e-9)


class TestScaling:
    @given(profiles(allow_public=False), st.floats(1e-2, 1e2))
    def test_counts_and_clipped_sums_scale(self, p, c):
        q = p.scaled(c)
        for e in p.epsilons:
            assert n_at_threshold(q, e * c) == n_at_threshold(p, e)
        tau = p.epsilons[0] * 1.5
        a, b = clipped_sums(p, tau), clipped_sums(q, tau * c)
        assert rel_close(b.s_tau, c * a.s_tau, 1e-12)
        assert rel_close(b.q_tau, c * c * a.q_tau, 1e-12)

    def test_optimizers_are_not_scale_covariant(self):
        # the sampling term 1/(4n) does not scale with the budgets, so the
        # optimal threshold and clip level move non-proportionally
        p = PrivacyProfile(((1.0, 2), (4.0, 1)))
        assert optimize_threshold(p.scaled(0.01))[0] == 0.04
        assert optimize_threshold(p.scaled(100))[0] == 100.0
        p = PrivacyProfile(((1.0, 2), (3.0, 1)))
        assert optimize_affine(p).tau_star == 3.0
        assert optimize_affine(p.scaled(100)).tau_star == pytest.approx(100.04, rel=1e-12)
