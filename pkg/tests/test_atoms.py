import math

import numpy as np
import pytest

from rydsim.atoms import (
    DEFAULT_FG_TABLE,
    AtomParams,
    DetectionModel,
    K_B,
    PERFECT_DETECTION,
    RB87_MASS,
    cavity_suppression,
    combined_t1,
    detection_probabilities,
    doppler_sigma,
    doppler_sigma_khz,
    effective_wavevector,
    pure_dephasing,
    rydberg_lifetime,
    two_photon_rabi,
)
from rydsim.units import TWO_PI


class TestTwoPhotonRabi:
    def test_reference_values(self):
        assert two_photon_rabi(AtomParams(omega_blue_mhz=60, omega_red_mhz=40,
                                          delta_intermediate_mhz=600)) == 2.0

    def test_symmetric_in_the_two_lasers(self):
        a = AtomParams(omega_blue_mhz=60, omega_red_mhz=40)
        b = AtomParams(omega_blue_mhz=40, omega_red_mhz=60)
        assert two_photon_rabi(a) == two_photon_rabi(b)

    def test_doubled_detuning_halves_rabi(self):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = AtomParams(delta_intermediate_mhz=1200.0)
        assert two_photon_rabi(p) == 1.0

    def test_invalid_detuning_rejected(self):
        with pytest.raises(ValueError):
            AtomParams(delta_intermediate_mhz=0.0)

    def test_small_detuning_warns(self):
        with pytest.warns(UserWarning):
            AtomParams(delta_intermediate_mhz=100.0)


class TestDopplerSigma:
    def test_matches_quoted_width_within_2_percent(self):
        sigma = doppler_sigma(AtomParams())
        target = TWO_PI * 43.5  # krad/s
        assert abs(sigma - target) / target < 0.02

    def test_formula_from_first_principles(self):
        # 10 uK: sigma_v = sqrt(kB T / m) = 0.0309 m/s, k_eff = 8.757e6 rad/m
        p = AtomParams()
        sigma_v = math.sqrt(K_B * 10e-6 / RB87_MASS)
        assert abs(sigma_v - 0.0309) < 1e-4
        k_eff = effective_wavevector(p) * 1e6
        assert abs(k_eff - 8.757e6) < 1e3
        assert abs(doppler_sigma_khz(p) - 43.1) < 0.05

    def test_scales_as_sqrt_temperature(self):
        hot = doppler_sigma(AtomParams(temperature_uk=40.0))
        cold = doppler_sigma(AtomParams(temperature_uk=10.0))
        assert abs(hot / cold - 2.0) < 1e-12

    def test_vanishes_at_zero_temperature_limit(self):
        sigma = doppler_sigma(AtomParams(temperature_uk=1e-12))
        assert sigma < 1e-3

    def test_copropagating_beams_add_wavevectors(self):
        co = effective_wavevector(AtomParams(counter_propagating=False))
        counter = effective_wavevector(AtomParams(counter_propagating=True))
        assert co > counter


class TestLifetimes:
    def test_combined_t1_reference(self):
        # T_ryd = 146 us, gamma_red = 1/80 -> 51.7 us
        p = AtomParams(t_blackbody_us=292.0, t_radiative_us=292.0)
        assert abs(rydberg_lifetime(p) - 146.0) < 1e-9
        assert abs(combined_t1(p) - 51.68) < 0.01

    def test_default_lifetime_close_to_quoted_value(self):
        # 230 us blackbody + 410 us radiative combine to about 146 us
        assert abs(rydberg_lifetime(AtomParams()) - 146.0) / 146.0 < 0.02

    def test_zero_scatter_returns_rydberg_lifetime(self):
        p = AtomParams(gamma_red_scatter=0.0)
        assert combined_t1(p) == rydberg_lifetime(p)

    def test_monotone_in_rates(self):
        base = combined_t1(AtomParams())
        assert combined_t1(AtomParams(gamma_red_scatter=1 / 40.0)) < base
        assert combined_t1(AtomParams(t_blackbody_us=100.0)) < base


class TestPureDephasing:
    def test_single_atom_value(self):
        assert abs(pure_dephasing(32.0, 51.0, 0.5) - 46.6) < 0.1

    def test_shared_excitation_value(self):
        value = pure_dephasing(36.0, 51.0, 1.0)
        assert abs(value - 122.4) < 0.1
        assert value > 100.0

    def test_lifetime_limit_raises(self):
        with pytest.raises(ValueError, match="lifetime limit"):
            pure_dephasing(102.0, 51.0, 0.5)

    def test_fraction_validated(self):
        with pytest.raises(ValueError):
            pure_dephasing(32.0, 51.0, 0.0)


class TestCavitySuppression:
    def test_reference_offset(self):
        value = cavity_suppression(1.0, 0.5)
        assert abs(value - math.sqrt(17)) < 1e-12
        assert value >= 4.0

    def test_carrier_transmitted(self):
        assert cavity_suppression(0.0, 0.5) == 1.0

    def test_half_width_point(self):
        assert abs(cavity_suppression(0.25, 0.5) - math.sqrt(2)) < 1e-12

    def test_monotone_in_offset(self):
        values = [cavity_suppression(f, 0.5) for f in np.linspace(0, 3, 20)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            cavity_suppression(1.0, 0.0)


class TestDetection:
    def test_ground_state_recapture(self):
        d = DetectionModel(f_g=0.99, f_r=0.96)
        probs = detection_probabilities(d, ("g",))
        assert abs(probs[(True,)] - 0.99) < 1e-12

    def test_rydberg_loss(self):
        d = DetectionModel(f_g=0.99, f_r=0.96)
        probs = detection_probabilities(d, ("r",))
        assert abs(probs[(False,)] - 0.96) < 1e-12

    def test_blackbody_state_reads_like_rydberg(self):
        d = DetectionModel(f_g=0.99, f_r=0.96)
        assert detection_probabilities(d, ("r'",)) == detection_probabilities(d, ("r",))

    def test_two_atom_deterministic_channel(self):
        probs = detection_probabilities(PERFECT_DETECTION, ("g", "r"))
        assert probs[(True, False)] == 1.0

    def test_distribution_normalized(self):
        rng = np.random.default_rng(3)
        d = DetectionModel(f_g=0.97, f_r=0.9)
        for _ in range(25):
            state = tuple(rng.choice(["g", "r", "r'"], size=2))
            total = sum(detection_probabilities(d, state).values())
            assert abs(total - 1.0) < 1e-12

    def test_table_interpolation(self):
        d = DetectionModel(f_g=None, f_g_table=DEFAULT_FG_TABLE)
        assert d.fg_at(2.0) == 0.99
        assert abs(d.fg_at(6.0) - 0.9725) < 1e-12
        assert d.fg_at(8.0) == 0.955

    def test_table_has_no_extrapolation(self):
        d = DetectionModel(f_g=None, f_g_table=DEFAULT_FG_TABLE)
        with pytest.raises(ValueError, match="no extrapolation"):
            d.fg_at(9.0)

    def test_table_times_must_increase(self):
        with pytest.raises(ValueError):
            DetectionModel(f_g=None, f_g_table=((0.0, 0.99), (0.0, 0.96)))

    def test_exactly_one_fg_source(self):
        with pytest.raises(ValueError):
            DetectionModel(f_g=0.99, f_g_table=DEFAULT_FG_TABLE)
        with pytest.raises(ValueError):
            DetectionModel(f_g=None, f_g_table=None)

    def test_probability_bounds_checked(self):
        with pytest.raises(ValueError):
            DetectionModel(f_g=1.2, f_r=0.96)
