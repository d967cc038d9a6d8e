import math

import numpy as np
import pytest

from rydsim.atoms import AtomParams, DetectionModel, doppler_sigma
from rydsim.blockade import TwoAtomParams
from rydsim.fitting import fit_damped_cosine
from rydsim.montecarlo import (
    EnsembleSpec,
    apply_detection,
    measured_outcomes,
    run_ensemble,
    sample_noise,
    shot_seed,
    wilson_interval,
)
from rydsim.pulses import (
    SystemModel,
    ZERO_NOISE_1,
    compile_sequence,
    preset,
    run_compiled,
)


def make_spec(preset_name, scan_var, system, **kwargs):
    return EnsembleSpec(
        build=lambda v: preset(preset_name, **{scan_var: v}),
        system=system,
        **kwargs,
    )


class TestSampleNoise:
    def test_zero_width_gives_zeros(self):
        rng = np.random.default_rng(0)
        sample = sample_noise(0.0, 0.0, 2, rng)
        assert sample.doppler_krad_s == (0.0, 0.0)
        assert sample.position_um == (0.0, 0.0)

    def test_deterministic_given_state(self):
        a = sample_noise(100.0, 0.2, 2, np.random.default_rng(5))
        b = sample_noise(100.0, 0.2, 2, np.random.default_rng(5))
        assert a == b

    def test_sample_std_matches_width(self):
        rng = np.random.default_rng(12)
        sigma = 2 * math.pi * 43.5
        draws = np.array(
            [sample_noise(sigma, 0.0, 1, rng).doppler_krad_s[0] for _ in range(100000)]
        )
        assert abs(draws.std() - sigma) / sigma < 0.01

    def test_negative_width_rejected(self):
        with pytest.raises(ValueError):
            sample_noise(-1.0, 0.0, 1, np.random.default_rng(0))


class TestShotSeed:
    def test_stable_value(self):
        assert shot_seed(1, 2, 3) == shot_seed(1, 2, 3)

    def test_distinct_across_indices(self):
        seeds = {shot_seed(0, i, j) for i in range(50) for j in range(50)}
        assert len(seeds) == 2500


class TestApplyDetection:
    def test_pure_rydberg_loss(self):
        d = DetectionModel(f_g=0.99, f_r=0.96)
        out = apply_detection({"g": 0.0, "r": 1.0, "r'": 0.0}, d)
        assert abs(out["r"] - 0.96) < 1e-12

    def test_pure_ground_recapture(self):
        d = DetectionModel(f_g=0.99, f_r=0.96)
        out = apply_detection({"g": 1.0, "r": 0.0, "r'": 0.0}, d)
        assert abs(out["g"] - 0.99) < 1e-12

    def test_identity_detection_marginalizes_dark_state(self):
        out = apply_detection({"g": 0.25, "r": 0.5, "r'": 0.25}, None)
        assert out == {"g": 0.25, "r": 0.75}

    def test_output_normalized(self):
        d = DetectionModel(f_g=0.97, f_r=0.9)
        dist = {"gg": 0.1, "gr": 0.2, "rg": 0.3, "rr": 0.15, "gr'": 0.25}
        out = apply_detection(dist, d)
        assert abs(sum(out.values()) - 1.0) < 1e-12
        assert set(out) == set(measured_outcomes(2))

    def test_malformed_distribution_rejected(self):
        with pytest.raises(ValueError, match="sums"):
            apply_detection({"g": 0.5, "r": 0.2}, None)


class TestWilson:
    def test_half_width_at_even_odds(self):
        lo, hi = wilson_interval(0.5, 100)
        assert abs((hi - lo) / 2 - 0.05) < 0.01

    def test_bounded(self):
        lo, hi = wilson_interval(0.0, 10)
        assert lo <= 1e-12 and hi > 0.0
        lo, hi = wilson_interval(1.0, 10)
        assert hi >= 1.0 - 1e-12 and lo < 1.0


class TestRunEnsemble:
    def test_single_shot_no_noise_matches_direct_evolution(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec = make_spec(
            "rabi", "drive_time", system,
            sigma_doppler_krad_s=0.0, sigma_position_um=0.0,
        )
        res = run_ensemble(spec, [0.3], n_shots=1)
        compiled = compile_sequence(preset("rabi", drive_time=0.3), system, ZERO_NOISE_1)
        rho = run_compiled(compiled, system.initial_state())
        expected_r = rho.population("r") + rho.population("r'")
        assert abs(res.column("r")[0] - expected_r) < 1e-12

    def test_ramsey_contrast_decays_at_thermal_width(self):
        # Doppler only: ensemble average of e^{i delta t} is a Gaussian with
        # 1/e time sqrt(2)/sigma
        atom = AtomParams()
        system = SystemModel(atom=atom, n_atoms=1, scattering=False, blackbody=False)
        spec = make_spec("ramsey", "gap", system)
        scan = np.linspace(0.05, 12.05, 25)
        res = run_ensemble(spec, scan, n_shots=500, master_seed=3)
        fit = fit_damped_cosine(scan, res.column("g"), "gauss_envelope")
        target = math.sqrt(2.0) / (doppler_sigma(atom) * 1e-3)
        assert abs(fit.params["tau_us"] - target) < 0.3

    def test_sampled_mode_interval_width(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1, scattering=False,
                             blackbody=False)
        spec = make_spec(
            "rabi", "drive_time", system,
            sigma_doppler_krad_s=0.0, sigma_position_um=0.0,
        )
        res = run_ensemble(spec, [0.125], n_shots=100, mode="sampled", master_seed=1)
        j = res.outcomes.index("r")
        half_width = (res.ci_high[0, j] - res.ci_low[0, j]) / 2
        assert abs(half_width - 0.05) < 0.01

    def test_spin_echo_refocuses_every_shot(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1, scattering=False,
                             blackbody=False)
        spec = make_spec("spin_echo", "gap", system, ideal_pulses=True)
        res = run_ensemble(spec, [4.0, 16.0], n_shots=30, return_shots=True)
        p_g = res.per_shot[:, :, res.outcomes.index("g")]
        assert np.all(p_g >= 1.0 - 1e-6)

    def test_w_echo_refocuses_every_shot_projected(self):
        system = SystemModel(
            atom=AtomParams(), n_atoms=2, two_atom=TwoAtomParams(),
            blockade_model="projected", scattering=False, blackbody=False,
        )
        spec = make_spec("w_echo", "gap", system, ideal_pulses=True)
        res = run_ensemble(spec, [6.0], n_shots=25, return_shots=True)
        p_gg = res.per_shot[:, :, res.outcomes.index("gg")]
        assert np.all(p_gg >= 1.0 - 1e-5)

    def test_bit_identical_reruns(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec = make_spec("ramsey", "gap", system)
        a = run_ensemble(spec, [1.0, 3.0], n_shots=8, master_seed=11, mode="sampled")
        b = run_ensemble(spec, [1.0, 3.0], n_shots=8, master_seed=11, mode="sampled")
        np.testing.assert_array_equal(a.probabilities, b.probabilities)
        np.testing.assert_array_equal(a.ci_low, b.ci_low)

    def test_seed_changes_results(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec = make_spec("ramsey", "gap", system)
        a = run_ensemble(spec, [3.0], n_shots=8, master_seed=11)
        b = run_ensemble(spec, [3.0], n_shots=8, master_seed=12)
        assert not np.array_equal(a.probabilities, b.probabilities)

    def test_detection_shifts_probabilities(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec_raw = make_spec(
            "rabi", "drive_time", system,
            sigma_doppler_krad_s=0.0, sigma_position_um=0.0,
        )
        spec_det = make_spec(
            "rabi", "drive_time", system,
            detection=DetectionModel(f_g=0.99, f_r=0.96),
            sigma_doppler_krad_s=0.0, sigma_position_um=0.0,
        )
        raw = run_ensemble(spec_raw, [0.25], n_shots=1)
        det = run_ensemble(spec_det, [0.25], n_shots=1)
        # near-pure r: measured loss limited by f_r
        assert raw.column("r")[0] > 0.995
        assert abs(det.column("r")[0] - 0.96) < 5e-3
        np.testing.assert_allclose(det.raw_probabilities, raw.probabilities, atol=1e-12)

    def test_invalid_mode_rejected(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec = make_spec("rabi", "drive_time", system)
        with pytest.raises(ValueError):
            run_ensemble(spec, [0.1], n_shots=1, mode="bogus")
        with pytest.raises(ValueError):
            run_ensemble(spec, [0.1], n_shots=0)


class TestWorkerDeterminism:
    def test_parallel_matches_serial_bit_for_bit(self):
        import functools

        from rydsim.experiments import _build_sequence

        system = SystemModel(atom=AtomParams(), n_atoms=1)
        spec = EnsembleSpec(
            build=functools.partial(_build_sequence, "ramsey", "gap", {}),
            system=system,
        )
        scan = [1.0, 3.0, 5.0]
        serial = run_ensemble(spec, scan, n_shots=10, master_seed=9, mode="sampled")
        parallel = run_ensemble(
            spec, scan, n_shots=10, master_seed=9, mode="sampled", n_workers=2
        )
        np.testing.assert_array_equal(serial.probabilities, parallel.probabilities)
        np.testing.assert_array_equal(
            serial.raw_probabilities, parallel.raw_probabilities
        )
