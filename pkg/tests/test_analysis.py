import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from mmwave_hetnet.analysis import (
    Scenario,
    SinrQuery,
    association_probabilities,
    laplace_derivatives,
    omega_exponent_derivatives,
    omega_kernel,
    rate_coverage,
    rate_threshold,
    scenario_coverage,
)
from mmwave_hetnet.model import FadingModel, Tier, TierParams, table1_config
from mmwave_hetnet.numerics import QuadratureSpec

TIGHT = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-15, max_subdivisions=4000)


def _no_micro(cfg):
    micro = TierParams(Tier.MICRO, 0.0, 0.0, cfg.micro.mu, cfg.micro.power,
                       cfg.micro.g_max, cfg.micro.g_min, cfg.micro.beamwidth,
                       cfg.micro.spectrum)
    return cfg.replace(micro=micro)


class TestAssociation:
    def test_table1_values(self, cfg):
        rep = association_probabilities(cfg)
        assert rep.b_micro == pytest.approx(1 - math.exp(-math.pi), rel=1e-14)
        assert rep.b_macro == pytest.approx(1.0, abs=1e-12)
        assert rep.rho == pytest.approx(4 ** (-1 / 2.2), rel=1e-14)

    def test_partition_of_unity(self, cfg):
        rep = association_probabilities(cfg)
        total = rep.p_assoc_macro + rep.p_assoc_micro + rep.scenario1_prob
        assert total == pytest.approx(1.0, abs=1e-12)
        assert rep.overlap_macro + rep.overlap_micro == pytest.approx(
            rep.b_macro * rep.b_micro, abs=1e-12)

    def test_no_micro_tier(self, cfg):
        rep = association_probabilities(_no_micro(cfg))
        assert rep.p_assoc_micro == 0.0
        assert rep.load_micro == 0.0
        assert rep.p_assoc_macro == pytest.approx(rep.b_macro, abs=1e-15)

    def test_huge_bias_limit(self, cfg):
        rep = association_probabilities(cfg.with_bias(1e8))
        assert rep.p_assoc_micro == pytest.approx(rep.b_micro, abs=1e-5)

    def test_loads(self, cfg):
        rep = association_probabilities(cfg)
        assert rep.load_macro == pytest.approx(0.1 * rep.p_assoc_macro / (1e-5 / 0.6),
                                               rel=1e-14)
        assert rep.load_micro == pytest.approx(0.1 * rep.p_assoc_micro / 2e-4, rel=1e-14)

    @pytest.mark.parametrize("bias", [1.0, 37.0, 400.0, 5e3])
    def test_against_scipy(self, cfg, bias):
        c = cfg.with_bias(bias)
        rep = association_probabilities(c)
        lm, ls = c.macro.lambda_los, c.micro.lambda_los
        mu_m, mu_s = c.macro.mu, c.micro.mu
        bm = 1 - math.exp(-lm * math.pi * mu_m ** 2)
        bs = 1 - math.exp(-ls * math.pi * mu_s ** 2)
        rho = rep.rho

        def f(lam, mu, x):  # conditional nearest-distance density
            return 2 * lam * math.pi * x * math.exp(-lam * math.pi * x * x) / (
                1 - math.exp(-lam * math.pi * mu * mu))

        def F(lam, mu, x):
            x = min(x, mu)
            return (1 - math.exp(-lam * math.pi * x * x)) / (
                1 - math.exp(-lam * math.pi * mu * mu))

        pts_m = [rho * mu_m] if rho * mu_m < mu_s else None
        pts_s = [mu_s / rho] if mu_s / rho < mu_m else None
        om, _ = sp_integrate.quad(lambda x: f(ls, mu_s, x) * F(lm, mu_m, x / rho), 0, mu_s,
                                  epsabs=1e-14, epsrel=1e-12, limit=400, points=pts_m)
        os_, _ = sp_integrate.quad(lambda x: f(lm, mu_m, x) * F(ls, mu_s, rho * x), 0, mu_m,
                                   epsabs=1e-14, epsrel=1e-12, limit=400, points=pts_s)
        assert rep.p_assoc_macro == pytest.approx(bm * (1 - bs) + bm * bs * om, abs=1e-9)
        assert rep.p_assoc_micro == pytest.approx(bs * (1 - bm) + bm * bs * os_, abs=1e-9)

    @given(st.floats(1, 1e4), st.floats(1, 1e4))
    @settings(max_examples=20, deadline=None)
    def test_macro_share_decreases_with_bias(self, b1, b2):
        cfg = table1_config()
        lo, hi = sorted((b1, b2))
        pm_lo = association_probabilities(cfg.with_bias(lo)).p_assoc_macro
        pm_hi = association_probabilities(cfg.with_bias(hi)).p_assoc_macro
        assert pm_hi <= pm_lo + 1e-12


class TestOmegaKernel:
    def test_zero_argument(self, cfg):
        assert omega_kernel(cfg.macro, 0.0, 50.0, 1, cfg.alpha) == 0.0

    def test_saturates_to_full_circle(self, cfg):
        val = omega_kernel(cfg.micro, 1e30, 50.0, 3, cfg.alpha)
        assert val == pytest.approx(2 * math.pi, rel=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_direct_formula(self, cfg, m):
        t, a, r = cfg.macro, 1e-7, 200.0
        tmax = a * t.power * t.g_max / (m * r ** cfg.alpha)
        tmin = a * t.power * t.g_min / (m * r ** cfg.alpha)
        exact = (t.beamwidth * (1 - (1 + tmax) ** -m)
                 + (2 * math.pi - t.beamwidth) * (1 - (1 + tmin) ** -m))
        assert omega_kernel(t, a, r, m, cfg.alpha) == pytest.approx(exact, rel=1e-12)

    def test_matches_angle_average(self, cfg):
        # Ω = ∫ E_h[1 - exp(-a P G(θ) h / r^α)] dθ with Gamma(m, 1/m) fading
        t, a, r, m = cfg.micro, 3e-6, 40.0, 2
        gains = np.where(np.abs(np.linspace(-math.pi, math.pi, 200001)) <= t.beamwidth / 2,
                         t.g_max, t.g_min)
        s = -a * t.power * gains / r ** cfg.alpha
        vals = 1 - (1 - s / m) ** (-m)
        assert omega_kernel(t, a, r, m, cfg.alpha) == pytest.approx(
            vals.mean() * 2 * math.pi, rel=1e-3)

    def test_invalid(self, cfg):
        with pytest.raises(ValueError):
            omega_kernel(cfg.macro, -1.0, 10.0, 1, cfg.alpha)
        with pytest.raises(ValueError):
            omega_kernel(cfg.macro, 1.0, 0.0, 1, cfg.alpha)


def _log_laplace(cfg, scenario, a, x, exact):
    return math.log(laplace_derivatives(cfg, scenario, a, x, 0, exact_exclusion=exact,
                                        quad=TIGHT)[0])


class TestDerivatives:
    @pytest.mark.parametrize("scenario", list(Scenario))
    @pytest.mark.parametrize("m", [1, 3])
    def test_first_derivative_matches_difference(self, cfg, scenario, m):
        c = cfg.replace(fading=FadingModel(m))
        x, a = 30.0, 2e-6
        h = 1e-4 * a
        fd = (_log_laplace(c, scenario, a + h, x, False)
              - _log_laplace(c, scenario, a - h, x, False)) / (2 * h)
        g1 = omega_exponent_derivatives(c, scenario, 1, a, x, quad=TIGHT)
        assert g1 == pytest.approx(fd, rel=1e-6)

    def test_noise_only_first_derivative(self, cfg):
        # no other BS: g'(a) = -σ² exactly
        c = _no_micro(cfg).replace(noise=2.5)
        g1 = omega_exponent_derivatives(c, Scenario.S2, 1, 0.3, c.macro.mu)
        assert g1 == pytest.approx(-2.5, rel=1e-14)

    def test_order_validation(self, cfg):
        with pytest.raises(ValueError):
            omega_exponent_derivatives(cfg, Scenario.S2, 0, 1e-6, 10.0)
        with pytest.raises(ValueError):
            laplace_derivatives(cfg, Scenario.S2, 0.0, 10.0, 2)

    @pytest.mark.parametrize("scenario", list(Scenario))
    def test_complete_monotonicity(self, cfg, scenario):
        c = cfg.replace(fading=FadingModel(6))
        for a in (1e-8, 1e-6, 1e-4):
            stack = laplace_derivatives(c, scenario, a, 20.0, 5)
            for k, v in enumerate(stack.values):
                assert (-1) ** k * v >= 0


def _rayleigh_reference(cfg, scenario, tau, exact):
    """Direct m = 1 coverage: ∫ w(x) exp(-aσ²) Π exp(-λ ∫ r Ω dr) dx via scipy."""
    lm, ls = cfg.macro.lambda_los, cfg.micro.lambda_los
    mu_m, mu_s = cfg.macro.mu, cfg.micro.mu
    al = cfg.alpha
    rho = (cfg.macro.power * cfg.macro.g_max
           / (cfg.bias * cfg.micro.power * cfg.micro.g_max)) ** (-1 / al)
    serving = cfg.macro if scenario in (2, 4) else cfg.micro
    em, es = math.exp(-lm * math.pi * mu_m ** 2), math.exp(-ls * math.pi * mu_s ** 2)

    def dens(lam, x):
        return 2 * lam * math.pi * x * math.exp(-lam * math.pi * x * x)

    def omega(tier, a, r):
        out = 0.0
        for w, g in ((tier.beamwidth, tier.g_max), (2 * math.pi - tier.beamwidth, tier.g_min)):
            s = a * tier.power * g / r ** al
            out += w * s / (1 + s)
        return out

    def inner(tier, a, lo):
        if lo >= tier.mu:
            return 0.0
        v, _ = sp_integrate.quad(lambda r: r * omega(tier, a, r), lo, tier.mu,
                                 epsabs=1e-14, epsrel=1e-12, limit=400)
        return tier.lambda_los * v

    if scenario == 2:
        upper, w = mu_m, lambda x: es * dens(lm, x)
        lims = lambda x: [(cfg.macro, x)]
    elif scenario == 3:
        upper, w = mu_s, lambda x: em * dens(ls, x)
        lims = lambda x: [(cfg.micro, x)]
    elif scenario == 4:
        upper = min(mu_s / rho, mu_m)
        w = lambda x: (math.exp(-ls * math.pi * (rho * x) ** 2) - es) * dens(lm, x)
        lims = lambda x: [(cfg.macro, x), (cfg.micro, min(rho * x, mu_s) if exact else 0.0)]
    else:
        upper = min(mu_s, rho * mu_m)
        w = lambda x: (math.exp(-lm * math.pi * (x / rho) ** 2) - em) * dens(ls, x)
        lims = lambda x: [(cfg.micro, x), (cfg.macro, min(x / rho, mu_m) if exact else 0.0)]

    def outer(x):
        a = tau / (serving.power * serving.g_max) * x ** al
        expo = -a * cfg.noise - sum(inner(t, a, lo) for t, lo in lims(x))
        return w(x) * math.exp(expo)

    v, _ = sp_integrate.quad(outer, 0, upper, epsabs=1e-14, epsrel=1e-11, limit=400)
    return v


class TestScenarioCoverage:
    @pytest.mark.parametrize("exact", [False, True])
    @pytest.mark.parametrize("scenario", [2, 3, 4, 5])
    def test_rayleigh_reference(self, cfg, scenario, exact):
        tau = 0.7
        ours = scenario_coverage(cfg, SinrQuery.build(cfg, scenario, tau),
                                 exact_exclusion=exact, quad=TIGHT)
        ref = _rayleigh_reference(cfg, scenario, tau, exact)
        assert ours == pytest.approx(ref, rel=0, abs=1e-10)

    @pytest.mark.parametrize("scenario", [2, 3, 4, 5])
    def test_tiny_threshold_gives_scenario_probability(self, cfg, scenario):
        rep = association_probabilities(cfg)
        val = scenario_coverage(cfg, SinrQuery.build(cfg, scenario, 1e-9))
        assert val == pytest.approx(rep.scenario_prob(scenario), abs=1e-6)

    @pytest.mark.parametrize("m", [1, 3])
    def test_decreasing_in_threshold(self, cfg, m):
        c = cfg.replace(fading=FadingModel(m))
        for s in Scenario:
            vals = [scenario_coverage(c, SinrQuery.build(c, s, t))
                    for t in (0.01, 0.3, 1.0, 5.0, 40.0)]
            assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    def test_infinite_threshold(self, cfg):
        assert scenario_coverage(cfg, SinrQuery.build(cfg, 2, math.inf)) == 0.0

    def test_negative_threshold(self, cfg):
        with pytest.raises(ValueError):
            SinrQuery.build(cfg, 2, -1.0)

    def test_exclusion_only_removes_interference(self, cfg):
        for s in (4, 5):
            q = SinrQuery.build(cfg, s, 1.0)
            assert scenario_coverage(cfg, q, exact_exclusion=True) >= \
                scenario_coverage(cfg, q)
        for s in (2, 3):
            q = SinrQuery.build(cfg, s, 1.0)
            assert scenario_coverage(cfg, q, exact_exclusion=True) == \
                scenario_coverage(cfg, q)


class TestRateCoverage:
    def test_threshold_examples(self):
        assert rate_threshold(1e9, 1.0, 1e9) == pytest.approx(1.0, rel=1e-15)
        assert rate_threshold(1e-3, 1.0, 1e9) == pytest.approx(1e-12 * math.log(2), rel=1e-9)
        assert rate_threshold(1e12, 1e3, 1e9) == math.inf

    def test_components_add_up(self, cfg):
        res = rate_coverage(cfg, 1e6)
        assert res.p_c == pytest.approx(res.p2 + res.p3 + res.p4 + res.p5, rel=1e-15)
        assert 0 <= res.p_c <= 1
        assert res.tau_macro == pytest.approx(
            rate_threshold(1e6, res.association.load_macro, 1e9))

    def test_unreachable_rate(self, cfg):
        assert rate_coverage(cfg, 1e12).p_c == 0.0

    def test_invalid_delta(self, cfg):
        with pytest.raises(ValueError):
            rate_coverage(cfg, 0.0)

    def test_decreasing_in_delta(self, cfg):
        vals = [rate_coverage(cfg, d).p_c for d in np.logspace(5, 8, 7)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_no_micro_tier(self, cfg):
        res = rate_coverage(_no_micro(cfg), 1e6)
        assert res.p3 == res.p4 == res.p5 == 0.0
