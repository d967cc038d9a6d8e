"""Built-in verification suite.

Each check exercises one quantitative requirement end to end at a pinned
tolerance and reports a single pass/fail line. The same checks back the
pytest acceptance module and the ``rydsim check`` CLI subcommand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atoms import AtomParams, DetectionModel, doppler_sigma, two_photon_rabi
from .blockade import (
    BellRecord,
    TwoAtomParams,
    detection_corrected_fidelity,
    parity_amplitude,
)
from .dynamics import (
    DensityMatrix,
    LindbladChannel,
    Segment,
    coherence,
    evolve,
    tensor,
)
from .fitting import fit_damped_cosine, fit_decay
from .montecarlo import EnsembleSpec, apply_detection, run_ensemble
from .pulses import SystemModel, preset
from .units import TWO_PI

__all__ = ["CheckResult", "ALL_CHECKS", "run_all"]


@dataclass
class CheckResult:
    criterion: int
    title: str
    passed: bool
    detail: str
    seconds: float


def _ensemble(build_name, system, scan, n_shots, seed=7, detection=None,
              ideal_pulses=False, sigma_doppler=None, sigma_position=0.2,
              return_shots=False, **params):
    spec = EnsembleSpec(
        build=lambda v: preset(build_name, **{_SCAN_VAR[build_name]: v}, **params),
        system=system,
        detection=detection,
        sigma_doppler_krad_s=sigma_doppler,
        sigma_position_um=sigma_position,
        ideal_pulses=ideal_pulses,
    )
    return run_ensemble(spec, scan, n_shots, master_seed=seed, return_shots=return_shots)


_SCAN_VAR = {
    "rabi": "drive_time",
    "t1": "gap",
    "ramsey": "gap",
    "spin_echo": "gap",
    "phase_gate_echo": "gate_time",
    "blockade_rabi": "drive_time",
    "parity_scan": "gate_time",
    "w_lifetime": "gap",
    "w_echo": "gap",
}


def check_two_photon_rabi() -> tuple[bool, str]:
    value = two_photon_rabi(AtomParams(omega_blue_mhz=60, omega_red_mhz=40,
                                       delta_intermediate_mhz=600))
    return value == 2.0, f"Omega = {value} MHz (expected exactly 2.0)"


def check_doppler_width() -> tuple[bool, str]:
    sigma = doppler_sigma(AtomParams())  # krad/s
    target = TWO_PI * 43.5  # 2*pi * 43.5 kHz in krad/s
    rel = abs(sigma - target) / target
    return rel < 0.02, f"sigma = {sigma:.2f} krad/s vs 2pi*43.5 kHz ({rel * 100:.2f}% off)"


def check_t1_preset() -> tuple[bool, str]:
    system = SystemModel(atom=AtomParams(), n_atoms=1)
    scan = np.linspace(0.0, 150.0, 20)
    res = _ensemble("t1", system, scan, n_shots=200)
    fit = fit_decay(scan, res.column("g"), "exponential")
    tau = fit.params["tau_us"]
    ok = abs(tau - 51.7) / 51.7 < 0.10
    return ok, f"T1 = {tau:.2f} us vs 51.7 us (10% tolerance)"


def check_ramsey_preset() -> tuple[bool, str]:
    atom = AtomParams()
    system = SystemModel(atom=atom, n_atoms=1)
    scan = np.linspace(0.05, 12.05, 49)
    res = _ensemble("ramsey", system, scan, n_shots=1000)
    fit = fit_damped_cosine(scan, res.column("g"), "gauss_envelope")
    tau = fit.params["tau_us"]
    target = math.sqrt(2.0) / (doppler_sigma(atom) * 1e-3)
    ok = abs(tau - target) / target < 0.10
    return ok, f"T2* = {tau:.2f} us vs sqrt(2)/sigma = {target:.2f} us (10% tolerance)"


def check_spin_echo_preset() -> tuple[bool, str]:
    scan = np.linspace(0.0, 60.0, 16)
    system = SystemModel(atom=AtomParams(), n_atoms=1)
    res = _ensemble("spin_echo", system, scan, n_shots=150)
    fit = fit_decay(scan, res.column("g"), "exponential", floor=0.5)
    t2_model = fit.params["tau_us"]

    tuned = SystemModel(atom=AtomParams(), n_atoms=1, gamma_laser=1.0 / (2 * 47.0))
    res2 = _ensemble("spin_echo", tuned, scan, n_shots=150)
    fit2 = fit_decay(scan, res2.column("g"), "exponential", floor=0.5)
    t2_tuned = fit2.params["tau_us"]

    ok = t2_model >= 40.0 and abs(t2_tuned - 32.0) / 32.0 < 0.20
    return ok, (
        f"model T2 = {t2_model:.1f} us (>= 40); with gamma_laser = 1/(2*47 us): "
        f"T2 = {t2_tuned:.1f} us vs 32 us (20% tolerance)"
    )


def check_rabi_preset() -> tuple[bool, str]:
    system = SystemModel(atom=AtomParams(), n_atoms=1)
    scan = np.linspace(0.05, 12.05, 121)
    res = _ensemble("rabi", system, scan, n_shots=100)
    fit = fit_damped_cosine(scan, res.column("r"), "gauss_envelope")
    tau = fit.params["tau_us"]
    ok = 20.0 <= tau <= 35.0
    return ok, f"Rabi coherence time = {tau:.2f} us (window [20, 35] us)"


def check_blockade_oscillation() -> tuple[bool, str]:
    system = SystemModel(atom=AtomParams(), n_atoms=2, two_atom=TwoAtomParams())
    scan = np.linspace(0.02, 1.6, 80)
    res = _ensemble("blockade_rabi", system, scan, n_shots=1,
                    sigma_doppler=0.0, sigma_position=0.0)
    fit = fit_damped_cosine(scan, res.column("gg"), "exp_envelope")
    freq = fit.params["frequency_mhz"]
    target = 2.0 * math.sqrt(2.0)
    max_prr = float(np.max(res.raw_column("rr")))
    ok = abs(freq - target) / target < 0.01 and max_prr < 5e-3
    return ok, (
        f"collective frequency = {freq:.4f} MHz vs {target:.4f} (1% tolerance); "
        f"max P_rr = {max_prr:.2e} (< 5e-3)"
    )


def check_fidelity_pipeline() -> tuple[bool, str]:
    d = DetectionModel(f_g=0.99, f_r=0.96)
    # perfect W through detection: gr and rg populations 1/2 each
    detected = apply_detection({"gg": 0.0, "gr": 0.5, "rg": 0.5, "rr": 0.0}, d, 1.0)
    diag_ceiling = detected["gr"] + detected["rg"]
    ok_diag = abs(diag_ceiling - 0.95) <= 0.01

    record = BellRecord.from_measured(0.94, 0.88)
    ok_eq1 = abs(record.fidelity - 0.910) < 1e-12

    corrected = detection_corrected_fidelity(0.91, d)
    ok_corr = abs(corrected - 0.97) <= 0.01
    ok = ok_diag and ok_eq1 and ok_corr
    return ok, (
        f"diag ceiling = {diag_ceiling:.4f} (0.95 +- 0.01); "
        f"F(0.94, 0.88) = {record.fidelity:.3f} (= 0.910); "
        f"corrected = {corrected:.4f} (0.97 +- 0.01)"
    )


def _random_density_matrix(rng, dim=4) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def check_parity_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    times = np.linspace(0.0, 0.4, 41)
    worst = 0.0
    for _ in range(100):
        rho = DensityMatrix(_random_density_matrix(rng), ("gg", "gr", "rg", "rr"))
        alpha, _, _ = parity_amplitude(rho, 5.0, times)
        direct = abs(coherence(rho, "gr", "rg"))
        worst = max(worst, abs(alpha - direct))
    return worst <= 1e-9, f"max |alpha_fit - |rho_gr,rg|| = {worst:.2e} over 100 states (<= 1e-9)"


def check_w_echo() -> tuple[bool, str]:
    # refocusing: Doppler + position noise only, projected model, fast pulses
    projected = SystemModel(
        atom=AtomParams(), n_atoms=2, two_atom=TwoAtomParams(),
        blockade_model="projected", scattering=False, blackbody=False,
    )
    res = _ensemble("w_echo", projected, [4.0, 20.0], n_shots=50,
                    ideal_pulses=True, return_shots=True)
    worst = float(1.0 - res.per_shot[:, :, 0].min())
    ok_immune = worst <= 1e-5

    # full noise model: decay-limited lifetime
    full = SystemModel(atom=AtomParams(), n_atoms=2, two_atom=TwoAtomParams())
    scan = np.linspace(0.2, 60.0, 16)
    res2 = _ensemble("w_echo", full, scan, n_shots=60)
    fit = fit_decay(scan, res2.column("gg"), "exponential")
    tau_echo = fit.params["tau_us"]
    ok_tau = 40.0 <= tau_echo <= 60.0

    # without the swap pulse the lifetime collapses to the Doppler scale
    scan3 = np.linspace(0.1, 10.0, 21)
    res3 = _ensemble("w_lifetime", full, scan3, n_shots=100)
    fit3 = fit_decay(scan3, res3.column("gg"), "gaussian")
    tau_plain = fit3.params["tau_us"]
    ok_plain = tau_plain < 8.0

    ok = ok_immune and ok_tau and ok_plain
    return ok, (
        f"per-shot refocusing error = {worst:.2e} (<= 1e-5); echo lifetime = "
        f"{tau_echo:.1f} us ([40, 60]); without swap pulse = {tau_plain:.1f} us (< 8)"
    )


def check_decoherence_free_subspace() -> tuple[bool, str]:
    gamma = 0.05  # 1/us
    basis = ("gg", "gr", "rg", "rr")
    proj_r = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    collective = tensor(proj_r, eye2) + tensor(eye2, proj_r)
    channel = LindbladChannel.from_rate(gamma, collective)

    w = np.zeros(4, complex)
    w[1] = w[2] = 1 / math.sqrt(2)
    rho0 = DensityMatrix.from_state_vector(w, basis)
    h = np.zeros((4, 4), dtype=complex)
    traj = evolve(rho0, [Segment(h, 20.0)], [channel], sample_dt=2.0)
    drift = max(abs(coherence(dm, "gr", "rg") - 0.5) for _, dm in traj)
    ok_dfs = drift <= 1e-9

    # single atom: same gamma decays the g-r coherence at gamma/2
    single = DensityMatrix.from_state_vector(np.array([1, 1]) / math.sqrt(2), ("g", "r"))
    chan1 = LindbladChannel.from_rate(gamma, proj_r)
    final = evolve(single, [Segment(np.zeros((2, 2), complex), 20.0)], [chan1])[-1][1]
    measured = abs(coherence(final, "g", "r"))
    expected = 0.5 * math.exp(-gamma * 20.0 / 2.0)
    rel = abs(measured - expected) / expected
    ok_single = rel < 0.01
    return ok_dfs and ok_single, (
        f"pair coherence drift = {drift:.2e} over 20 us (<= 1e-9); single-atom "
        f"coherence decay off by {rel * 100:.3f}% from exp(-gamma t/2)"
    )


def check_integrator_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    basis = ("a", "b", "c", "d")
    worst = 0.0
    for _ in range(50):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (a + a.conj().T) / 2.0
        rho0 = DensityMatrix(_random_density_matrix(rng), basis)
        t = 1.0
        final = evolve(rho0, [Segment(h, t)])[-1][1].matrix
        # independent oracle: eigendecomposition propagator
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        exact = u @ rho0.matrix @ u.conj().T
        worst = max(worst, float(np.max(np.abs(final - exact))))
    return worst <= 1e-8, f"max |evolve - expm| = {worst:.2e} over 50 Hamiltonians (<= 1e-8)"


ALL_CHECKS: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
    (1, "two-photon Rabi frequency", check_two_photon_rabi),
    (2, "Doppler width", check_doppler_width),
    (3, "excited-state lifetime preset", check_t1_preset),
    (4, "Ramsey dephasing preset", check_ramsey_preset),
    (5, "spin-echo preset", check_spin_echo_preset),
    (6, "Rabi coherence preset", check_rabi_preset),
    (7, "blockaded collective oscillation", check_blockade_oscillation),
    (8, "Bell fidelity pipeline", check_fidelity_pipeline),
    (9, "parity-scan oracle equivalence", check_parity_oracle),
    (10, "entangled-state echo", check_w_echo),
    (11, "decoherence-free subspace", check_decoherence_free_subspace),
    (12, "integrator vs matrix exponential", check_integrator_oracle),
]


def run_check(criterion: int) -> CheckResult:
    for num, title, fn in ALL_CHECKS:
        if num == criterion:
            start = time.perf_counter()
            passed, detail = fn()
            return CheckResult(num, title, passed, detail, time.perf_counter() - start)
    raise ValueError(f"no acceptance criterion {criterion}")


def run_all(echo: bool = True) -> list[CheckResult]:
    results = []
    for num, title, fn in ALL_CHECKS:
        start = time.perf_counter()
        passed, detail = fn()
        result = CheckResult(num, title, passed, detail, time.perf_counter() - start)
        results.append(result)
        if echo:
            status = "PASS" if passed else "FAIL"
            print(f"[{status}] {num:2d} {title}: {detail} ({result.seconds:.1f}s)")
    return results
