import math

import numpy as np
import pytest

from rydsim.atoms import AtomParams
from rydsim.blockade import TwoAtomParams
from rydsim.dynamics import coherence, population
from rydsim.pulses import (
    GlobalDrive,
    LocalPhaseGate,
    NoiseSample,
    PulseSequence,
    SystemModel,
    Wait,
    ZERO_NOISE_2,
    collective_pi_time,
    compile_sequence,
    pi_time,
    preset,
    run_compiled,
)


def bare_system(n_atoms=1, **kwargs):
    """System with all decay channels off, for purely coherent checks."""
    defaults = dict(scattering=False, blackbody=False)
    defaults.update(kwargs)
    if n_atoms == 2:
        defaults.setdefault("two_atom", TwoAtomParams(positions_um=(0.0, 5.7)))
    return SystemModel(atom=AtomParams(), n_atoms=n_atoms, **defaults)


class TestPulseTimings:
    def test_pi_time_at_2_mhz(self):
        assert abs(pi_time(2.0) - 0.25) < 1e-12

    def test_blockaded_pi_time(self):
        assert abs(collective_pi_time(2.0) - 0.17678) < 1e-4


class TestCompile:
    def test_total_duration_matches_sequence_exactly(self):
        seq = preset("spin_echo", gap=3.0)
        compiled = compile_sequence(seq, bare_system())
        assert compiled.total_duration == seq.total_duration

    def test_two_half_pi_pulses_equal_one_pi(self):
        seq = PulseSequence(
            (GlobalDrive(0.125, 2.0), GlobalDrive(0.125, 2.0)), n_atoms=1
        )
        system = bare_system()
        rho = run_compiled(compile_sequence(seq, system), system.initial_state())
        assert abs(rho.population("r") - 1.0) < 1e-8

    def test_phase_gate_imparts_relative_phase_pi(self):
        # 5 MHz light shift for 0.1 us -> phase 2*pi*5*0.1 = pi on g
        system = bare_system()
        prep = PulseSequence((GlobalDrive(0.125, 2.0),), n_atoms=1)  # pi/2
        rho = run_compiled(compile_sequence(prep, system), system.initial_state())
        before = coherence(rho, "g", "r")

        gate = PulseSequence(
            (GlobalDrive(0.125, 2.0), LocalPhaseGate(0.1, light_shift_mhz=5.0)),
            n_atoms=1,
        )
        rho2 = run_compiled(compile_sequence(gate, system), system.initial_state())
        after = coherence(rho2, "g", "r")
        assert abs(after + before) < 1e-7  # e^{i pi} = -1 on the g side

    def test_phase_gate_commutes_with_wait(self):
        system = bare_system()
        noise = NoiseSample((50.0,), (0.1,))  # finite Doppler draw
        prep = GlobalDrive(0.125, 2.0)
        a = PulseSequence((prep, LocalPhaseGate(0.3), Wait(1.0)), n_atoms=1)
        b = PulseSequence((prep, Wait(1.0), LocalPhaseGate(0.3)), n_atoms=1)
        rho_a = run_compiled(compile_sequence(a, system, noise), system.initial_state())
        rho_b = run_compiled(compile_sequence(b, system, noise), system.initial_state())
        assert rho_a.isclose(rho_b, 1e-10)

    def test_channel_gating_blue_only_during_drive(self):
        system = SystemModel(atom=AtomParams(), n_atoms=1)
        seq = PulseSequence((GlobalDrive(0.25, 2.0), Wait(1.0)), n_atoms=1)
        compiled = compile_sequence(seq, system)
        drive_step, wait_step = compiled.steps
        # blue projector channel present only while the drive is on
        assert len(drive_step.channels) == len(wait_step.channels) + 1

    def test_atom_count_mismatch(self):
        with pytest.raises(ValueError, match="atom"):
            compile_sequence(preset("blockade_rabi", drive_time=0.5), bare_system())

    def test_noise_sample_size_checked(self):
        with pytest.raises(ValueError):
            compile_sequence(preset("rabi", drive_time=0.5), bare_system(), ZERO_NOISE_2)

    def test_projected_model_rejects_blackbody(self):
        with pytest.raises(ValueError, match="projected"):
            SystemModel(
                atom=AtomParams(), n_atoms=2, two_atom=TwoAtomParams(),
                blockade_model="projected", blackbody=True,
            )

    def test_doppler_enters_as_static_detuning(self):
        system = bare_system()
        sigma = 200.0  # krad/s -> 0.2 rad/us
        noise = NoiseSample((sigma,), (0.0,))
        seq = PulseSequence((GlobalDrive(0.0625, 2.0), Wait(5.0)), n_atoms=1)
        rho = run_compiled(compile_sequence(seq, system, noise), system.initial_state())
        phase = np.angle(coherence(rho, "g", "r"))
        rho0 = run_compiled(compile_sequence(seq, system), system.initial_state())
        phase0 = np.angle(coherence(rho0, "g", "r"))
        accumulated = (phase - phase0) % (2 * math.pi)
        wrapped = min(accumulated, 2 * math.pi - accumulated)
        assert abs(wrapped - (0.2 * 5.0)) < 1e-2


class TestIdealPulses:
    def test_ideal_drive_is_instantaneous_unitary(self):
        system = bare_system()
        seq = PulseSequence((GlobalDrive(0.25, 2.0),), n_atoms=1)
        compiled = compile_sequence(seq, system, ideal_pulses=True)
        assert compiled.steps[0].unitary is not None
        rho = run_compiled(compiled, system.initial_state())
        assert abs(rho.population("r") - 1.0) < 1e-12


class TestPresets:
    def test_ramsey_structure(self):
        seq = preset("ramsey", gap=2.0)
        kinds = [type(el).__name__ for el in seq.elements]
        assert kinds == ["GlobalDrive", "Wait", "GlobalDrive"]
        assert seq.elements[1].duration == 2.0
        assert abs(seq.elements[0].duration - 0.125) < 1e-12

    def test_spin_echo_structure(self):
        seq = preset("spin_echo", gap=2.0)
        durations = [el.duration for el in seq.elements]
        assert durations[1] == durations[3] == 1.0  # symmetric arms
        assert abs(seq.elements[2].duration - 0.25) < 1e-12  # central pi

    def test_w_echo_structure(self):
        seq = preset("w_echo", gap=10.0)
        assert seq.n_atoms == 2
        durations = [el.duration for el in seq.elements]
        t_pi = collective_pi_time(2.0)
        np.testing.assert_allclose(
            durations, [t_pi, 5.0, 2 * t_pi, 5.0, t_pi], atol=1e-12
        )

    def test_unknown_preset_suggests_name(self):
        with pytest.raises(ValueError, match="w_echo"):
            preset("w_ech", gap=1.0)

    def test_all_presets_build(self):
        for name, kwargs in [
            ("rabi", {"drive_time": 1.0}),
            ("t1", {"gap": 1.0}),
            ("ramsey", {"gap": 1.0}),
            ("spin_echo", {"gap": 1.0}),
            ("phase_gate_echo", {"gate_time": 0.3}),
            ("blockade_rabi", {"drive_time": 1.0}),
            ("parity_scan", {"gate_time": 0.1}),
            ("w_lifetime", {"gap": 1.0}),
            ("w_echo", {"gap": 1.0}),
        ]:
            seq = preset(name, **kwargs)
            assert seq.total_duration > 0

    def test_phase_gate_echo_balanced_arms(self):
        seq = preset("phase_gate_echo", gate_time=0.4, arm_us=1.0)
        # gate + padding in arm one equals the plain second arm
        gate, pad, arm2 = seq.elements[1], seq.elements[2], seq.elements[4]
        assert abs((gate.duration + pad.duration) - arm2.duration) < 1e-12

    def test_phase_gate_echo_rejects_oversize_gate(self):
        with pytest.raises(ValueError, match="arm"):
            preset("phase_gate_echo", gate_time=1.5, arm_us=1.0)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            PulseSequence((), n_atoms=1)

    def test_zero_duration_sequence_rejected(self):
        with pytest.raises(ValueError):
            PulseSequence((Wait(0.0),), n_atoms=1)


class TestBlockadePhysics:
    def test_collective_oscillation_sqrt2_speedup(self):
        system = bare_system(n_atoms=2)
        seq = PulseSequence((GlobalDrive(collective_pi_time(2.0), 2.0),), n_atoms=2)
        rho = run_compiled(compile_sequence(seq, system, ZERO_NOISE_2), system.initial_state())
        p_single = rho.population("gr") + rho.population("rg")
        assert p_single > 0.995

    def test_position_phases_cancel_between_prep_and_readout(self):
        system = bare_system(n_atoms=2)
        noise = NoiseSample((0.0, 0.0), (0.31, -0.24))
        t_pi = collective_pi_time(2.0)
        seq = PulseSequence(
            (GlobalDrive(t_pi, 2.0), GlobalDrive(t_pi, 2.0)), n_atoms=2
        )
        rho = run_compiled(compile_sequence(seq, system, noise), system.initial_state())
        # prep and readout share the same static positions, so the second pi
        # pulse fully de-excites the pair despite the random drive phases
        assert rho.population("gg") > 0.995
