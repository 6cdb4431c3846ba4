import math

import numpy as np
import pytest

from efpsa.errors import ValidationError
from efpsa.optics import OpticalInterface
from efpsa.repeater import (
    LinkParams,
    channel_capacity,
    fiber_index_mode,
    herald_density,
    link_success_p1,
    local_bk_p2,
    monte_carlo_protocol,
    optimize_hybrid,
    rate_curve,
    rate_efpsa,
    rate_hybrid,
    rate_mzi,
    scheme_rates,
    superradiance_fidelity,
    tradeoff,
)

LP = LinkParams()
OPTICS = OpticalInterface()


class TestLinkProbabilities:
    def test_p1_closed_form(self):
        # 2 * alpha * e^(-gamma*L) * p_d * p_c * eta_wg
        eta = OPTICS.eta_wg()
        expected = 2 * 0.01 * math.exp(-0.041) * 0.83 * 0.33 * eta
        assert link_success_p1(LP, eta) == pytest.approx(expected, rel=1e-12)
        assert link_success_p1(LP, eta) == pytest.approx(1.133e-3, rel=1e-3)

    def test_p2_closed_form(self):
        eta = OPTICS.eta_wg()
        assert local_bk_p2(LP, eta) == pytest.approx((0.83 * eta) ** 2 / 2, rel=1e-12)

    def test_capacity_at_one_km(self):
        # 10 frequency channels * floor(t_link / 10 ns) time bins
        assert channel_capacity(LP) == 3330

    def test_fiber_index_mode_shrinks_capacity_budget(self):
        slow = fiber_index_mode(LP)
        assert slow.t_link > LP.t_link
        assert channel_capacity(slow) > channel_capacity(LP)

    def test_parameter_validation(self):
        with pytest.raises(ValidationError):
            LinkParams(p_d=1.5)
        with pytest.raises(ValidationError):
            LinkParams(L=-1.0)


class TestRateCurves:
    def test_single_array_peak_location_and_height(self):
        ns = np.arange(1, 4000)
        rates = np.array([rate_efpsa(int(n), LP, OPTICS)[0] for n in ns])
        peak = int(ns[np.argmax(rates)])
        assert 600 <= peak <= 1200
        assert 5e3 <= rates.max() <= 1e5

    def test_capacity_flag_engages_above_capacity(self):
        cap = channel_capacity(LP)
        assert rate_efpsa(cap, LP, OPTICS)[1] == "loss"
        assert rate_efpsa(cap + 1, LP, OPTICS)[1] == "capacity"

    def test_switch_tree_scaling_exponent(self):
        # rate ~ N * eff^ceil(log2 N): fitted slope 1 + log2(0.92)
        ns = np.unique(np.logspace(0, math.log10(3000), 60).astype(int))
        rates = np.array([rate_mzi(int(n), LP, OPTICS)[0] for n in ns])
        slope = np.polyfit(np.log(ns), np.log(rates), 1)[0]
        assert slope == pytest.approx(1.0 + math.log2(0.92), abs=0.01)

    def test_hybrid_endpoints_recover_pure_architectures(self):
        assert rate_hybrid(700, 1, LP, OPTICS)[0] == pytest.approx(
            rate_efpsa(700, LP, OPTICS)[0], rel=1e-12
        )
        assert rate_hybrid(512, 512, LP, OPTICS)[0] == pytest.approx(
            rate_mzi(512, LP, OPTICS)[0], rel=1e-12
        )

    def test_hybrid_envelope_dominates_everywhere(self):
        for n in (1, 7, 64, 500, 1500, 4000):
            _, best = optimize_hybrid(n, LP, OPTICS)
            assert best >= rate_efpsa(n, LP, OPTICS)[0] - 1e-9
            assert best >= rate_mzi(n, LP, OPTICS)[0] - 1e-9

    def test_rate_curve_wrapper_flags_and_shapes(self):
        curve = rate_curve("efpsa", [10, 100, 4000], LP, OPTICS)
        assert curve.rate.shape == (3,)
        assert curve.limit == ["loss", "loss", "capacity"]

    def test_unknown_architecture_rejected(self):
        with pytest.raises(ValidationError):
            rate_curve("carrier-pigeon", [10], LP, OPTICS)

    def test_bad_device_split_rejected(self):
        with pytest.raises(ValidationError):
            rate_hybrid(8, 9, LP, OPTICS)


class TestSuperradiance:
    def test_initial_fidelity_is_one_third(self):
        assert superradiance_fidelity(0.0, 100e6) == pytest.approx(1.0 / 3.0)

    def test_crosses_099_near_53_ns(self):
        gamma = 100e6
        t = np.linspace(0, 100e-9, 20001)
        f = np.array([superradiance_fidelity(ti, gamma) for ti in t])
        t0 = t[np.searchsorted(f, 0.99)]
        assert t0 == pytest.approx(52.9e-9, abs=0.5e-9)

    def test_tradeoff_oracle(self):
        assert tradeoff(0.99) == pytest.approx(5.05e-3, abs=1e-5)

    def test_tradeoff_equals_herald_mass_past_crossing(self):
        # integral of Gamma e^(-Gamma t) beyond t0 equals (1-F)/(2F)
        gamma, f0 = 100e6, 0.95
        t0 = math.log(2 * f0 / (1 - f0)) / gamma
        mass = math.exp(-gamma * t0)
        assert tradeoff(f0) == pytest.approx(mass, rel=1e-12)

    def test_herald_density_normalized(self):
        gamma = 100e6
        t = np.linspace(0, 2e-6, 200001)
        p = np.array([herald_density(ti, gamma) for ti in t])
        assert np.trapezoid(p, t) == pytest.approx(1.0, abs=1e-6)

    def test_out_of_range_fidelity_rejected(self):
        with pytest.raises(ValidationError):
            tradeoff(0.2)


class TestSchemeRates:
    def test_component_oracles(self):
        r = scheme_rates(0.99, 0.03)
        assert r["barrett_kok"] == pytest.approx(0.03**2 / 2)
        assert r["single_photon"] == pytest.approx(2 * 0.01 * 0.03)
        assert r["superradiance"] == pytest.approx(tradeoff(0.99) * 0.03)
        assert r["bk_superradiance"] == pytest.approx(
            r["barrett_kok"] + 0.03 * tradeoff(0.99)
        )

    def test_combined_scheme_overtakes_near_3_percent(self):
        # crossover against the single-photon scheme: p/2 = 2(1-F) - (1-F)/(2F)
        f0 = 0.99
        p_cross = 4 * (1 - f0) - (1 - f0) / f0
        assert p_cross == pytest.approx(0.0299, abs=1e-4)
        below = scheme_rates(f0, p_cross * 0.9)
        above = scheme_rates(f0, p_cross * 1.1)
        assert below["single_photon"] > below["bk_superradiance"]
        assert above["bk_superradiance"] > max(
            above["single_photon"], above["barrett_kok"], above["superradiance"]
        )


class TestMonteCarlo:
    def test_seed_determinism(self):
        a = monte_carlo_protocol(50, LP, OPTICS, seed=3, n_trials=5000)
        b = monte_carlo_protocol(50, LP, OPTICS, seed=3, n_trials=5000)
        assert a == b

    def test_saturated_channels_give_capacity_rate(self):
        # p1 = 1, no heralding latency: every channel delivers every t_link
        lp = LinkParams(alpha=0.5, gamma_fiber=1e-12, p_d=1.0, p_c=1.0,
                        herald_latency=0.0)
        optics = OpticalInterface(t_wg_db=0.0, f_p=1e9)
        rate, _ = monte_carlo_protocol(10, lp, optics, seed=0, n_trials=5000)
        assert rate == pytest.approx(10 / lp.t_link, rel=1e-9)

    @pytest.mark.parametrize("n", [10, 100, 800])
    def test_agrees_with_closed_form(self, n):
        rate, stderr = monte_carlo_protocol(n, LP, OPTICS, seed=0, n_trials=40000)
        closed, _ = rate_efpsa(n, LP, OPTICS)
        assert abs(rate - closed) < 3 * stderr

    def test_swap_time_slows_the_protocol(self):
        fast, _ = monte_carlo_protocol(100, LP, OPTICS, seed=1, n_trials=5000)
        lp_slow = LinkParams(swap_time=1e-3)
        slow, _ = monte_carlo_protocol(100, lp_slow, OPTICS, seed=1, n_trials=5000)
        assert slow < fast

    def test_too_few_trials_rejected(self):
        with pytest.raises(ValidationError):
            monte_carlo_protocol(10, LP, OPTICS, n_trials=10)
