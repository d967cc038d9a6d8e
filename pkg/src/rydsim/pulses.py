"""Declarative pulse sequences and their compilation to dynamics segments.

A sequence is an ordered list of timed elements:

* ``GlobalDrive``: the two-photon drive on all atoms, with Rabi frequency,
  two-photon detuning and phase.
* ``Wait``: free evolution (detunings and interaction only).
* ``LocalPhaseGate``: an off-resonant beam focused on one atom that light
  shifts its ground state, accumulating phase on g relative to r.

``compile_sequence`` turns a sequence plus a physical system description
and one Monte Carlo noise draw into piecewise-constant Hamiltonian
segments with per-segment Lindblad channels. The red laser stays on for
the whole sequence while the blue laser is pulsed, so red scattering and
blackbody loss run during every element and blue scattering only during
drive elements.
"""

from __future__ import annotations

import difflib
import functools
import math
from dataclasses import dataclass

import numpy as np

from .atoms import AtomParams, effective_wavevector, rydberg_lifetime
from .blockade import TwoAtomParams
from .dynamics import DensityMatrix, LindbladChannel, Segment
from .units import TWO_PI, krad_s_to_angular, mhz_to_angular

__all__ = [
    "GlobalDrive",
    "Wait",
    "LocalPhaseGate",
    "PulseSequence",
    "NoiseSample",
    "ZERO_NOISE_1",
    "ZERO_NOISE_2",
    "SystemModel",
    "CompiledStep",
    "CompiledSequence",
    "compile_sequence",
    "run_compiled",
    "preset",
    "PRESET_NAMES",
    "pi_time",
    "collective_pi_time",
]


@dataclass(frozen=True)
class GlobalDrive:
    duration: float  # us
    rabi_mhz: float
    detuning_mhz: float = 0.0  # two-photon detuning
    phase: float = 0.0  # rad, common drive phase

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")
        if self.rabi_mhz <= 0:
            raise ValueError(f"drive needs a positive Rabi frequency, got {self.rabi_mhz}")


@dataclass(frozen=True)
class Wait:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")


@dataclass(frozen=True)
class LocalPhaseGate:
    duration: float
    target_atom: int = 0
    light_shift_mhz: float = 5.0
    crosstalk_fraction: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")
        if not 0 <= self.crosstalk_fraction < 1:
            raise ValueError(f"crosstalk fraction {self.crosstalk_fraction} outside [0, 1)")


@dataclass(frozen=True)
class PulseSequence:
    elements: tuple
    n_atoms: int

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValueError("empty pulse sequence")
        if self.n_atoms not in (1, 2):
            raise ValueError(f"n_atoms must be 1 or 2, got {self.n_atoms}")
        if self.total_duration <= 0:
            raise ValueError("sequence must have a positive total duration")
        for el in self.elements:
            if isinstance(el, LocalPhaseGate) and not 0 <= el.target_atom < self.n_atoms:
                raise ValueError(
                    f"phase-gate target {el.target_atom} invalid for {self.n_atoms} atom(s)"
                )

    @property
    def total_duration(self) -> float:
        return sum(el.duration for el in self.elements)


@dataclass(frozen=True)
class NoiseSample:
    """One Monte Carlo draw: per-atom Doppler detuning and position offset.

    Doppler detunings are in krad/s (static within a shot); positions are
    offsets in um from the nominal array positions.
    """

    doppler_krad_s: tuple[float, ...]
    position_um: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "doppler_krad_s", tuple(map(float, self.doppler_krad_s)))
        object.__setattr__(self, "position_um", tuple(map(float, self.position_um)))
        if len(self.doppler_krad_s) != len(self.position_um):
            raise ValueError("doppler and position lengths differ")
        values = self.doppler_krad_s + self.position_um
        if not all(math.isfinite(v) for v in values):
            raise ValueError("non-finite noise sample")

    @property
    def n_atoms(self) -> int:
        return len(self.doppler_krad_s)


ZERO_NOISE_1 = NoiseSample((0.0,), (0.0,))
ZERO_NOISE_2 = NoiseSample((0.0, 0.0), (0.0, 0.0))


def zero_noise(n_atoms: int) -> NoiseSample:
    return NoiseSample((0.0,) * n_atoms, (0.0,) * n_atoms)


# Per-atom level alphabet. r' is the blackbody product state, dark to the
# drive and detected like r.
SINGLE_ATOM_LEVELS = ("g", "r", "r'")


@dataclass(frozen=True)
class SystemModel:
    """Physical system a sequence is compiled against.

    ``blockade_model`` selects the two-atom level set: "full" keeps all
    product states of (g, r, r'); "projected" removes the doubly excited
    state entirely (blockade taken as infinite), leaving (gg, gr, rg) with
    no blackbody channel.
    """

    atom: AtomParams
    n_atoms: int = 1
    two_atom: TwoAtomParams | None = None
    blockade_model: str = "full"
    scattering: bool = True  # blue (drive-gated) and red (always-on) channels
    blackbody: bool = True
    gamma_laser: float = 0.0  # 1/us, added dephasing rate of each g-r coherence

    def __post_init__(self):
        if self.n_atoms not in (1, 2):
            raise ValueError(f"n_atoms must be 1 or 2, got {self.n_atoms}")
        if self.blockade_model not in ("full", "projected"):
            raise ValueError(f"unknown blockade model {self.blockade_model!r}")
        if self.n_atoms == 2 and self.two_atom is None:
            object.__setattr__(self, "two_atom", TwoAtomParams())
        if self.gamma_laser < 0:
            raise ValueError(f"negative gamma_laser {self.gamma_laser}")
        if self.n_atoms == 2 and self.blockade_model == "projected" and self.blackbody:
            raise ValueError(
                "the projected two-atom model has no r' state; disable blackbody "
                "or use the full model"
            )

    @property
    def level_tuples(self) -> tuple[tuple[str, ...], ...]:
        if self.n_atoms == 1:
            return tuple((lvl,) for lvl in SINGLE_ATOM_LEVELS)
        if self.blockade_model == "projected":
            return (("g", "g"), ("g", "r"), ("r", "g"))
        return tuple(
            (a, b) for a in SINGLE_ATOM_LEVELS for b in SINGLE_ATOM_LEVELS
        )

    @property
    def basis_labels(self) -> tuple[str, ...]:
        return tuple("".join(t) for t in self.level_tuples)

    @property
    def dim(self) -> int:
        return len(self.level_tuples)

    def initial_state(self) -> DensityMatrix:
        return DensityMatrix.pure("g" * self.n_atoms, self.basis_labels)

    def nominal_positions(self) -> tuple[float, ...]:
        if self.n_atoms == 1:
            return (0.0,)
        return self.two_atom.positions_um

    def wavevector(self) -> float:
        if self.n_atoms == 2 and self.two_atom.k_eff_rad_per_um is not None:
            return self.two_atom.k_eff_rad_per_um
        return effective_wavevector(self.atom)

    # -- operator construction over the labeled basis ---------------------

    def level_operator(self, atom: int, frm: str, to: str) -> np.ndarray:
        """|to><frm| on one atom, zero where the target state is projected out."""
        return _level_operator(self, atom, frm, to)

    def projector(self, atom: int, level: str) -> np.ndarray:
        return _level_operator(self, atom, level, level)

    def double_excitation_projector(self) -> np.ndarray:
        return _double_excitation_projector(self)

    # -- Hamiltonian pieces ------------------------------------------------

    def free_hamiltonian(self, noise: NoiseSample, detuning_mhz: float = 0.0) -> np.ndarray:
        """Detuning and interaction terms present in every element."""
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for atom in range(self.n_atoms):
            delta = krad_s_to_angular(noise.doppler_krad_s[atom]) + mhz_to_angular(
                detuning_mhz
            )
            h -= delta * self.projector(atom, "r")
        if self.n_atoms == 2:
            h += mhz_to_angular(self.two_atom.interaction_u_mhz) * (
                self.double_excitation_projector()
            )
        return h

    def drive_hamiltonian(
        self, element: GlobalDrive, noise: NoiseSample, include_doppler: bool = True
    ) -> np.ndarray:
        """Two-photon drive with position-dependent phases plus free terms.

        ``include_doppler=False`` drops the Doppler detunings but keeps the
        static position phases (the idealized fast-pulse limit).
        """
        k = self.wavevector()
        nominal = self.nominal_positions()
        omega = mhz_to_angular(element.rabi_mhz)
        doppler = noise if include_doppler else zero_noise(self.n_atoms)
        h = self.free_hamiltonian(doppler, element.detuning_mhz)
        positions = [nominal[i] + noise.position_um[i] for i in range(self.n_atoms)]
        for atom in range(self.n_atoms):
            phase = k * positions[atom] + element.phase
            coupling = 0.5 * omega * np.exp(1j * phase)
            raising = self.level_operator(atom, "g", "r")
            h = h + coupling * raising + np.conj(coupling) * raising.conj().T
        return h

    def phase_gate_hamiltonian(self, element: LocalPhaseGate, noise: NoiseSample) -> np.ndarray:
        """Ground-state light shift on the target atom plus free terms."""
        h = self.free_hamiltonian(noise)
        shift = mhz_to_angular(element.light_shift_mhz)
        h -= shift * self.projector(element.target_atom, "g")
        if element.crosstalk_fraction and self.n_atoms == 2:
            other = 1 - element.target_atom
            h -= element.crosstalk_fraction * shift * self.projector(other, "g")
        return h

    # -- Lindblad channels --------------------------------------------------

    def channels(self, drive_on: bool) -> tuple[LindbladChannel, ...]:
        """Jump operators active during an element (blue scattering is
        gated on the drive; everything else runs for the whole sequence)."""
        return _channels(self, drive_on)


@functools.lru_cache(maxsize=512)
def _level_operator(system: SystemModel, atom: int, frm: str, to: str) -> np.ndarray:
    levels = system.level_tuples
    index = {t: i for i, t in enumerate(levels)}
    op = np.zeros((system.dim, system.dim), dtype=complex)
    for i, t in enumerate(levels):
        if t[atom] != frm:
            continue
        target = t[:atom] + (to,) + t[atom + 1 :]
        j = index.get(target)
        if j is not None:
            op[j, i] = 1.0
    op.setflags(write=False)
    return op


@functools.lru_cache(maxsize=64)
def _double_excitation_projector(system: SystemModel) -> np.ndarray:
    op = np.zeros((system.dim, system.dim), dtype=complex)
    for i, t in enumerate(system.level_tuples):
        if all(lvl == "r" for lvl in t):
            op[i, i] = 1.0
    op.setflags(write=False)
    return op


@functools.lru_cache(maxsize=64)
def _channels(system: SystemModel, drive_on: bool) -> tuple[LindbladChannel, ...]:
    chans: list[LindbladChannel] = []
    for atom in range(system.n_atoms):
        if system.scattering:
            if drive_on and system.atom.gamma_blue_scatter > 0:
                chans.append(
                    LindbladChannel.from_rate(
                        system.atom.gamma_blue_scatter, system.projector(atom, "g")
                    )
                )
            if system.atom.gamma_red_scatter > 0:
                chans.append(
                    LindbladChannel.from_rate(
                        system.atom.gamma_red_scatter, system.level_operator(atom, "r", "g")
                    )
                )
        if system.blackbody:
            chans.append(
                LindbladChannel.from_rate(
                    1.0 / rydberg_lifetime(system.atom),
                    system.level_operator(atom, "r", "r'"),
                )
            )
    if system.gamma_laser > 0:
        collective = sum(
            system.projector(atom, "r") for atom in range(system.n_atoms)
        )
        chans.append(LindbladChannel.from_rate(2.0 * system.gamma_laser, collective))
    return tuple(chans)


@dataclass(frozen=True)
class CompiledStep:
    """Either a finite-duration segment or an instantaneous unitary."""

    channels: tuple[LindbladChannel, ...]
    segment: Segment | None = None
    unitary: np.ndarray | None = None

    def __post_init__(self):
        if (self.segment is None) == (self.unitary is None):
            raise ValueError("a step is exactly one of segment or unitary")


@dataclass(frozen=True)
class CompiledSequence:
    steps: tuple[CompiledStep, ...]
    basis_labels: tuple[str, ...]
    total_duration: float

    @property
    def segments(self) -> tuple[Segment, ...]:
        return tuple(s.segment for s in self.steps if s.segment is not None)


def compile_sequence(
    seq: PulseSequence,
    system: SystemModel,
    noise: NoiseSample | None = None,
    ideal_pulses: bool = False,
) -> CompiledSequence:
    """Compile a pulse sequence against a system and one noise draw.

    With ``ideal_pulses`` every GlobalDrive becomes an instantaneous
    unitary exp(-i H_drive * duration) built without Doppler detunings (the
    limit of pulses much faster than any detuning); waits and phase gates
    are unaffected. Useful for isolating free-evolution physics, e.g. echo
    refocusing checks.
    """
    if seq.n_atoms != system.n_atoms:
        raise ValueError(
            f"sequence is for {seq.n_atoms} atom(s) but the system has {system.n_atoms}"
        )
    if noise is None:
        noise = zero_noise(system.n_atoms)
    if noise.n_atoms != system.n_atoms:
        raise ValueError(
            f"noise sample has {noise.n_atoms} atom(s), system {system.n_atoms}"
        )

    steps: list[CompiledStep] = []
    total = 0.0
    for el in seq.elements:
        if isinstance(el, GlobalDrive):
            if ideal_pulses:
                h = system.drive_hamiltonian(el, noise, include_doppler=False)
                w, v = np.linalg.eigh(h)
                u = (v * np.exp(-1j * w * el.duration)) @ v.conj().T
                steps.append(CompiledStep(channels=(), unitary=u))
                continue
            h = system.drive_hamiltonian(el, noise)
            steps.append(
                CompiledStep(
                    channels=system.channels(drive_on=True),
                    segment=Segment(h, el.duration),
                )
            )
        elif isinstance(el, Wait):
            steps.append(
                CompiledStep(
                    channels=system.channels(drive_on=False),
                    segment=Segment(system.free_hamiltonian(noise), el.duration),
                )
            )
        elif isinstance(el, LocalPhaseGate):
            steps.append(
                CompiledStep(
                    channels=system.channels(drive_on=False),
                    segment=Segment(system.phase_gate_hamiltonian(el, noise), el.duration),
                )
            )
        else:
            raise ValueError(f"unknown pulse element {el!r}")
        total += el.duration

    if not ideal_pulses and not math.isclose(
        total, seq.total_duration, rel_tol=0.0, abs_tol=1e-12
    ):
        raise AssertionError("compiled duration drifted from the sequence duration")
    return CompiledSequence(tuple(steps), system.basis_labels, total)


def run_compiled(
    compiled: CompiledSequence,
    rho0: DensityMatrix,
    dt_max: float | None = None,
) -> DensityMatrix:
    """Evolve an initial state through a compiled sequence, returning the end state."""
    from .dynamics import DEFAULT_DT_MAX, apply_unitary, evolve

    dt = DEFAULT_DT_MAX if dt_max is None else dt_max
    rho = rho0
    for step in compiled.steps:
        if step.unitary is not None:
            rho = apply_unitary(rho, step.unitary)
        else:
            rho = evolve(rho, [step.segment], step.channels, dt_max=dt)[-1][1]
    return rho


# -- presets ---------------------------------------------------------------


def pi_time(rabi_mhz: float) -> float:
    """Duration of a resonant single-atom pi pulse, us."""
    return math.pi / mhz_to_angular(rabi_mhz)


def collective_pi_time(rabi_mhz: float) -> float:
    """Duration of a blockaded pi pulse at the sqrt(2)-enhanced rate, us."""
    return math.pi / (math.sqrt(2.0) * mhz_to_angular(rabi_mhz))


def _drive(rabi_mhz: float, angle: float, phase: float = 0.0, collective: bool = False):
    t_pi = collective_pi_time(rabi_mhz) if collective else pi_time(rabi_mhz)
    return GlobalDrive(duration=angle / math.pi * t_pi, rabi_mhz=rabi_mhz, phase=phase)


def _preset_rabi(drive_time: float, rabi_mhz: float = 2.0) -> PulseSequence:
    return PulseSequence((GlobalDrive(drive_time, rabi_mhz),), n_atoms=1)


def _preset_t1(gap: float, rabi_mhz: float = 2.0) -> PulseSequence:
    pi = _drive(rabi_mhz, math.pi)
    return PulseSequence((pi, Wait(gap), pi), n_atoms=1)


def _preset_ramsey(gap: float, rabi_mhz: float = 2.0, fringe_mhz: float = 0.5) -> PulseSequence:
    """pi/2 - wait - pi/2 with a synthetic fringe.

    The second pi/2 phase advances as 2*pi*fringe*gap, which draws fringes
    at ``fringe_mhz`` on the scan without detuning the pulses themselves.
    """
    first = _drive(rabi_mhz, math.pi / 2)
    second = _drive(rabi_mhz, math.pi / 2, phase=TWO_PI * fringe_mhz * gap)
    return PulseSequence((first, Wait(gap), second), n_atoms=1)


def _preset_spin_echo(gap: float, rabi_mhz: float = 2.0) -> PulseSequence:
    half = _drive(rabi_mhz, math.pi / 2)
    return PulseSequence(
        (half, Wait(gap / 2), _drive(rabi_mhz, math.pi), Wait(gap / 2), half),
        n_atoms=1,
    )


def _preset_phase_gate_echo(
    gate_time: float,
    rabi_mhz: float = 2.0,
    light_shift_mhz: float = 5.0,
    arm_us: float = 1.0,
    crosstalk_fraction: float = 0.0,
) -> PulseSequence:
    """Spin echo with a ground-state phase gate inside the first arm.

    Both arms keep a fixed duration ``arm_us`` so the echo stays balanced
    while the gate time is scanned.
    """
    if gate_time > arm_us:
        raise ValueError(f"gate time {gate_time} exceeds the echo arm {arm_us}")
    half = _drive(rabi_mhz, math.pi / 2)
    gate = LocalPhaseGate(
        gate_time, target_atom=0, light_shift_mhz=light_shift_mhz,
        crosstalk_fraction=crosstalk_fraction,
    )
    return PulseSequence(
        (
            half,
            gate,
            Wait(arm_us - gate_time),
            _drive(rabi_mhz, math.pi),
            Wait(arm_us),
            half,
        ),
        n_atoms=1,
    )


def _preset_blockade_rabi(drive_time: float, rabi_mhz: float = 2.0) -> PulseSequence:
    return PulseSequence((GlobalDrive(drive_time, rabi_mhz),), n_atoms=2)


def _preset_parity_scan(
    gate_time: float,
    rabi_mhz: float = 2.0,
    light_shift_mhz: float = 5.0,
    crosstalk_fraction: float = 0.0,
) -> PulseSequence:
    pi_w = _drive(rabi_mhz, math.pi, collective=True)
    gate = LocalPhaseGate(
        gate_time, target_atom=0, light_shift_mhz=light_shift_mhz,
        crosstalk_fraction=crosstalk_fraction,
    )
    return PulseSequence((pi_w, gate, pi_w), n_atoms=2)


def _preset_w_lifetime(gap: float, rabi_mhz: float = 2.0) -> PulseSequence:
    pi_w = _drive(rabi_mhz, math.pi, collective=True)
    return PulseSequence((pi_w, Wait(gap), pi_w), n_atoms=2)


def _preset_w_echo(gap: float, rabi_mhz: float = 2.0) -> PulseSequence:
    """Entangled-state echo: a blockaded 2*pi pulse halfway through the gap
    swaps the two single-excitation amplitudes and refocuses per-atom
    Doppler phases."""
    pi_w = _drive(rabi_mhz, math.pi, collective=True)
    two_pi_w = _drive(rabi_mhz, 2 * math.pi, collective=True)
    return PulseSequence(
        (pi_w, Wait(gap / 2), two_pi_w, Wait(gap / 2), pi_w), n_atoms=2
    )


_PRESET_BUILDERS = {
    "rabi": _preset_rabi,
    "t1": _preset_t1,
    "ramsey": _preset_ramsey,
    "spin_echo": _preset_spin_echo,
    "phase_gate_echo": _preset_phase_gate_echo,
    "blockade_rabi": _preset_blockade_rabi,
    "parity_scan": _preset_parity_scan,
    "w_lifetime": _preset_w_lifetime,
    "w_echo": _preset_w_echo,
}

PRESET_NAMES = tuple(_PRESET_BUILDERS)


def preset(name: str, **params) -> PulseSequence:
    """Build a named sequence; the first positional parameter of each preset
    is its scanned variable (drive time, gap or gate time)."""
    try:
        builder = _PRESET_BUILDERS[name]
    except KeyError:
        hint = difflib.get_close_matches(name, PRESET_NAMES, n=1)
        suffix = f"; did you mean {hint[0]!r}?" if hint else ""
        raise ValueError(f"unknown preset {name!r}{suffix}") from None
    return builder(**params)
