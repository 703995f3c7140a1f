"""Pulse envelopes, sequence compilation and the rotating-frame drive.

All microwave drives live in the frame rotating at ``params.f01`` (the
qubit frequency at the degeneracy point). Gate-line pulses move the offset
charge and appear as slow diagonal terms through
:func:`qpd_sim.qdyn.dispersion_term`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from qpd_sim import qdyn
from qpd_sim.qdyn import TWO_PI, ParityLabel, TransmonParams

NG_DEGENERACY = 0.25
# 0.67 V on the gate line moves ng from 0.25 to ~0.45 (see README, "gate amplitude").
DEFAULT_GATE_VOLTS = 0.67
DEFAULT_VOLTS_PER_2E = 3.35
DEFAULT_GATE_AMPLITUDE = DEFAULT_GATE_VOLTS / DEFAULT_VOLTS_PER_2E

SQRT2 = math.sqrt(2.0)


def volts_to_charge(volts, volts_per_2e: float = DEFAULT_VOLTS_PER_2E):
    return np.asarray(volts, dtype=float) / volts_per_2e if np.ndim(volts) else volts / volts_per_2e


def charge_to_volts(ng, volts_per_2e: float = DEFAULT_VOLTS_PER_2E):
    return np.asarray(ng, dtype=float) * volts_per_2e if np.ndim(ng) else ng * volts_per_2e


# ---------------------------------------------------------------------------
# Waveforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MicrowavePulse:
    """Cosine-envelope microwave pulse with DRAG quadrature.

    ``amplitude`` is the peak Rabi rate in rad/ns, so the rotation angle is
    ``amplitude * duration / 2``. ``phase`` sets the rotation axis in the
    xy-plane (0 -> x, pi/2 -> y). ``drive_frequency`` of None means the
    drive sits at the frame frequency.
    """

    duration: float = 20.0
    buffer: float = 5.0
    amplitude: float = 0.0
    phase: float = 0.0
    drag_coefficient: float = 0.5
    eta: float = qdyn.DEVICE_ETA
    drive_frequency: Optional[float] = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.buffer < 0:
            raise ValueError("buffer must be non-negative")

    @property
    def span(self) -> float:
        return self.duration + 2.0 * self.buffer

    @property
    def angle(self) -> float:
        return self.amplitude * self.duration / 2.0

    def rotated(self, angle: float, axis_phase: float) -> "MicrowavePulse":
        """Copy calibrated for a rotation by ``angle`` about ``axis_phase``."""
        if angle < 0:
            angle, axis_phase = -angle, axis_phase + math.pi
        return replace(self, amplitude=2.0 * angle / self.duration, phase=axis_phase)


def drag_envelope(p: MicrowavePulse, t):
    """Complex drive amplitude (rad/ns) at time ``t`` measured from the start
    of the pulse span (buffers included)."""
    t = np.asarray(t, dtype=float)
    tau = t - p.buffer
    inside = (tau >= 0.0) & (tau <= p.duration)
    arg = TWO_PI * tau / p.duration
    omega = 0.5 * p.amplitude * (1.0 - np.cos(arg))
    domega = 0.5 * p.amplitude * (TWO_PI / p.duration) * np.sin(arg)
    eta_ang = TWO_PI * p.eta
    quad = p.drag_coefficient / eta_ang * domega if eta_ang > 0 else 0.0 * domega
    env = (omega + 1j * quad) * np.exp(1j * p.phase)
    return np.where(inside, env, 0.0 + 0.0j)


@dataclass(frozen=True)
class SmoothedSquare:
    """Square pulse with erf edges: half the amplitude times the difference of
    erf steps at ``t0`` and ``t0 + flat_top``, each of width ``sigma``."""

    t0: float
    flat_top: float
    sigma: float
    amplitude: float

    def __post_init__(self):
        if not self.flat_top > 0:
            raise ValueError("flat-top duration must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def smoothed_square_value(p: SmoothedSquare, t):
    t = np.asarray(t, dtype=float)
    s = SQRT2 * p.sigma
    return 0.5 * p.amplitude * (erf((t - p.t0) / s) - erf((t - p.t0 - p.flat_top) / s))


@dataclass(frozen=True)
class GatePulseNetZero:
    """Two smoothed-square displacements of opposite sign around ``ng0``."""

    ng0: float
    first: SmoothedSquare
    second: SmoothedSquare

    def __post_init__(self):
        if not math.isclose(self.second.amplitude, -self.first.amplitude, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("second pulse amplitude must be the negative of the first")

    @classmethod
    def build(cls, amplitude=DEFAULT_GATE_AMPLITUDE, flat_top=217.0, sigma=5.0, ng0=NG_DEGENERACY,
              t1=0.0, t2=None):
        if t2 is None:
            t2 = t1 + flat_top + 4 * sigma
        return cls(ng0, SmoothedSquare(t1, flat_top, sigma, amplitude), SmoothedSquare(t2, flat_top, sigma, -amplitude))

    @property
    def amplitude(self) -> float:
        return self.first.amplitude

    @property
    def flat_top(self) -> float:
        return self.first.flat_top

    @property
    def sigma(self) -> float:
        return self.first.sigma

    @property
    def segment_span(self) -> float:
        """Span of each displacement segment, flat top plus 2 sigma per edge."""
        return self.flat_top + 4.0 * self.sigma


def ng_of_t(g: GatePulseNetZero, t):
    return g.ng0 + smoothed_square_value(g.first, t) + smoothed_square_value(g.second, t)


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    kind: str  # "mw" | "gate" | "idle"
    t_start: float
    t_end: float
    label: str = ""
    mw: Optional[MicrowavePulse] = None
    gate: Optional[SmoothedSquare] = None

    @property
    def span(self) -> float:
        return self.t_end - self.t_start

    @property
    def center(self) -> float:
        return 0.5 * (self.t_start + self.t_end)


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple
    ng0: float = NG_DEGENERACY
    name: str = ""

    def __post_init__(self):
        t = 0.0
        for seg in self.segments:
            if not math.isclose(seg.t_start, t, abs_tol=1e-9):
                if seg.t_start < t:
                    raise ValueError(f"segment {seg.label!r} overlaps its predecessor")
                raise ValueError(f"gap before segment {seg.label!r}")
            if seg.t_end < seg.t_start:
                raise ValueError(f"segment {seg.label!r} has negative span")
            t = seg.t_end

    @property
    def duration(self) -> float:
        return self.segments[-1].t_end if self.segments else 0.0

    def gate_pulses(self):
        return [s.gate for s in self.segments if s.kind == "gate"]

    def mw_segments(self):
        return [s for s in self.segments if s.kind == "mw"]

    def ng(self, t):
        """Offset charge on the full timeline (erf tails are not truncated)."""
        out = np.full(np.shape(t), self.ng0, dtype=float)
        for g in self.gate_pulses():
            out = out + smoothed_square_value(g, t)
        return out

    def drive(self, t):
        """Complex drive amplitude (rad/ns) in the frame rotating at f01."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for seg in self.mw_segments():
            mask = (t >= seg.t_start) & (t <= seg.t_end)
            if not np.any(mask):
                continue
            env = drag_envelope(seg.mw, t[mask] - seg.t_start)
            out[mask] += env
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start", "t_end", "kind", "params"])
        for seg in self.segments:
            if seg.kind == "mw":
                m = seg.mw
                params = (f"label={seg.label};angle={m.angle:.12g};phase={m.phase:.12g};"
                          f"duration={m.duration:.12g};buffer={m.buffer:.12g};drag={m.drag_coefficient:.12g}")
            elif seg.kind == "gate":
                g = seg.gate
                params = f"label={seg.label};t0={g.t0:.12g};flat_top={g.flat_top:.12g};sigma={g.sigma:.12g};amplitude={g.amplitude:.12g}"
            else:
                params = f"label={seg.label}"
            w.writerow([f"{seg.t_start:.12g}", f"{seg.t_end:.12g}", seg.kind, params])
        return buf.getvalue()


_MW_GATES = {
    "X/2": (math.pi / 2, 0.0),
    "-X/2": (-math.pi / 2, 0.0),
    "Y/2": (math.pi / 2, math.pi / 2),
    "-Y/2": (-math.pi / 2, math.pi / 2),
    "X": (math.pi, 0.0),
    "Y": (math.pi, math.pi / 2),
    "-X": (-math.pi, 0.0),
    "-Y": (-math.pi, math.pi / 2),
}


def mw_gate(name: str, template: MicrowavePulse) -> MicrowavePulse:
    try:
        angle, axis = _MW_GATES[name]
    except KeyError:
        raise ValueError(f"unknown microwave gate {name!r}") from None
    return template.rotated(angle, axis)


class _Builder:
    def __init__(self):
        self.t = 0.0
        self.segments = []

    def mw(self, name, template):
        p = mw_gate(name, template)
        self.segments.append(Segment("mw", self.t, self.t + p.span, name, mw=p))
        self.t += p.span

    def gate(self, label, amplitude, flat_top, sigma):
        span = flat_top + 4.0 * sigma
        g = SmoothedSquare(self.t + 2.0 * sigma, flat_top, sigma, amplitude)
        self.segments.append(Segment("gate", self.t, self.t + span, label, gate=g))
        self.t += span

    def idle(self, duration, label="idle"):
        self.segments.append(Segment("idle", self.t, self.t + duration, label))
        self.t += duration


def compile_echo_cpm(params: TransmonParams, gate: GatePulseNetZero, mw: MicrowavePulse,
                     final_gate: str = "Y/2") -> PulseSequence:
    """X/2 - gate(+A) - X - gate(-A) - final_gate."""
    if final_gate not in ("Y/2", "X/2", "-X/2", "-Y/2"):
        raise ValueError(f"unsupported final gate {final_gate!r}")
    b = _Builder()
    b.mw("X/2", mw)
    b.gate("gate+", gate.amplitude, gate.flat_top, gate.sigma)
    b.mw("X", mw)
    b.gate("gate-", -gate.amplitude, gate.flat_top, gate.sigma)
    b.mw(final_gate, mw)
    return PulseSequence(tuple(b.segments), ng0=gate.ng0, name=f"echo_cpm[{final_gate}]")


def compile_echo_pa(gate: GatePulseNetZero, mw: MicrowavePulse, sign: int = 1) -> PulseSequence:
    """Central phase-accumulation block gate(+sA) - X - gate(-sA)."""
    b = _Builder()
    b.gate("gate+", sign * gate.amplitude, gate.flat_top, gate.sigma)
    b.mw("X", mw)
    b.gate("gate-", -sign * gate.amplitude, gate.flat_top, gate.sigma)
    return PulseSequence(tuple(b.segments), ng0=gate.ng0, name=f"echo_pa[{sign:+d}]")


def compile_pseudo_z(gate: GatePulseNetZero, mw: MicrowavePulse) -> PulseSequence:
    """echoPA followed by echoPA' (opposite gate sign)."""
    b = _Builder()
    for sign in (1, -1):
        b.gate("gate+" if sign > 0 else "gate-", sign * gate.amplitude, gate.flat_top, gate.sigma)
        b.mw("X", mw)
        b.gate("gate-" if sign > 0 else "gate+", -sign * gate.amplitude, gate.flat_top, gate.sigma)
    return PulseSequence(tuple(b.segments), ng0=gate.ng0, name="pseudo_z")


def compile_ramsey_cpm(params: TransmonParams, gate: GatePulseNetZero, mw: MicrowavePulse,
                       flat_duration: Optional[float] = None, final_gate: str = "Y/2") -> PulseSequence:
    """X/2 - single gate displacement - final_gate.

    With ``flat_duration`` None the single displacement is lengthened so its
    parity phase matches the two echo displacements of ``gate``.
    """
    if flat_duration is None:
        flat_duration = matched_ramsey_duration(params, gate)
    b = _Builder()
    b.mw("X/2", mw)
    b.gate("gate+", gate.amplitude, flat_duration, gate.sigma)
    b.mw(final_gate, mw)
    return PulseSequence(tuple(b.segments), ng0=gate.ng0, name=f"ramsey_cpm[{final_gate}]")


def single_gate_sequence(name: str, mw: MicrowavePulse, ng0: float = NG_DEGENERACY) -> PulseSequence:
    """One microwave gate (with its buffers) as a stand-alone sequence."""
    b = _Builder()
    b.mw(name, mw)
    return PulseSequence(tuple(b.segments), ng0=ng0, name=name)


def compile_charge_monitor(params: TransmonParams, delay: float, ng0: float = NG_DEGENERACY,
                           mw: Optional[MicrowavePulse] = None) -> PulseSequence:
    """X/2 - idle(delay) - X/2 with the drive at the degenerate frequency."""
    if delay < 0:
        raise ValueError("delay must be non-negative")
    mw = mw or MicrowavePulse(eta=params.eta)
    b = _Builder()
    b.mw("X/2", mw)
    if delay > 0:
        b.idle(delay)
    b.mw("X/2", mw)
    return PulseSequence(tuple(b.segments), ng0=ng0, name="charge_monitor")


# ---------------------------------------------------------------------------
# Parity phase bookkeeping
# ---------------------------------------------------------------------------


def _fine_grid(t0, t1, resolution=0.05):
    n = max(int(math.ceil((t1 - t0) / resolution)), 1)
    return np.linspace(t0, t1, n + 1)


def parity_phase(params: TransmonParams, sequence: PulseSequence, parity, t0=None, t1=None,
                 resolution=0.05) -> float:
    """2 pi * integral of the parity detuning over [t0, t1] (rad)."""
    t0 = 0.0 if t0 is None else t0
    t1 = sequence.duration if t1 is None else t1
    if t1 <= t0:
        return 0.0
    t = _fine_grid(t0, t1, resolution)
    det = qdyn.parity_detuning(params, sequence.ng(t), parity)
    return float(TWO_PI * np.trapezoid(det, t))


def parity_phase_difference(params: TransmonParams, sequence: PulseSequence) -> float:
    """delta: accumulated even-minus-odd phase with echo sign flips applied.

    Phase accrued after an odd number of pi pulses enters with flipped sign.
    """
    tot = {}
    for parity in (ParityLabel.EVEN, ParityLabel.ODD):
        acc = 0.0
        sign = 1.0
        last = 0.0
        for seg in sequence.mw_segments():
            acc += sign * parity_phase(params, sequence, parity, last, seg.center)
            last = seg.center
            if abs(abs(seg.mw.angle) - math.pi) < 1e-9:
                sign = -sign
        acc += sign * parity_phase(params, sequence, parity, last, sequence.duration)
        tot[parity] = acc
    return tot[ParityLabel.EVEN] - tot[ParityLabel.ODD]


def hard_edge_delta(params: TransmonParams, flat_top: float, amplitude: float = 0.25,
                    ng0: float = NG_DEGENERACY) -> float:
    """Parity phase difference of the echo pair for ideal rectangular pulses."""
    split = abs(params.eps10_signed) * 1e-3 * abs(math.cos(TWO_PI * (ng0 + amplitude)))
    return TWO_PI * split * 2.0 * flat_top


def theoretical_duration(params: TransmonParams) -> float:
    """Flat-top duration giving delta = pi with rectangular pulses at the sweet point: 1/(4|eps10|)."""
    return 1.0 / (4.0 * abs(params.eps10) * 1e-3)


def matched_ramsey_duration(params: TransmonParams, gate: GatePulseNetZero) -> float:
    """Single-pulse flat top whose parity phase equals that of the echo pair."""
    from scipy.optimize import brentq

    mw = MicrowavePulse(eta=params.eta)
    target = abs(parity_phase_difference(params, compile_echo_cpm(params, gate, mw)))

    def f(flat):
        seq = compile_ramsey_cpm(params, gate, mw, flat_duration=flat)
        return abs(parity_phase_difference(params, seq)) - target

    lo, hi = gate.flat_top, 2.0 * gate.flat_top + 8.0 * gate.sigma
    return brentq(f, lo, hi, xtol=1e-9)


# ---------------------------------------------------------------------------
# Ideal phase model
# ---------------------------------------------------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def rotation(angle: float, axis_phase: float) -> np.ndarray:
    n = math.cos(axis_phase) * _SX + math.sin(axis_phase) * _SY
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * n


def bloch_from_state(psi) -> np.ndarray:
    """Bloch vector(s) of 2-component state(s); last axis is the component."""
    psi = np.asarray(psi)
    a, b = psi[..., 0], psi[..., 1]
    x = 2 * (np.conj(a) * b).real
    y = 2 * (np.conj(a) * b).imag
    z = np.abs(a) ** 2 - np.abs(b) ** 2
    return np.stack([x, y, z], axis=-1)


def ideal_phase_model(sequence: PulseSequence, parity, params: Optional[TransmonParams] = None,
                      ng_trajectory=None, detuning=0.0, checkpoints: bool = False):
    """Closed-form qubit evolution with microwave gates as instantaneous
    rotations at their centers and free evolution diag(1, exp(-i phi)).

    ``ng_trajectory`` is a callable t -> ng overriding ``sequence.ng``.
    ``detuning`` (GHz, scalar or array of per-shot values) adds a constant
    frequency offset over the whole timeline. Returns the final Bloch
    vector(s); with ``checkpoints`` also the states after each segment
    (S1 = initial, then one per segment).
    """
    params = params or TransmonParams()
    ngf = ng_trajectory or sequence.ng
    det = np.atleast_1d(np.asarray(detuning, dtype=float))
    psi = np.zeros((det.size, 2), dtype=complex)
    psi[:, 0] = 1.0

    def free(psi, t0, t1):
        if t1 <= t0:
            return psi
        t = _fine_grid(t0, t1)
        d = qdyn.parity_detuning(params, ngf(t), parity)
        phi = TWO_PI * (np.trapezoid(d, t) + det * (t1 - t0))
        out = psi.copy()
        out[:, 1] *= np.exp(-1j * phi)
        return out

    states = [psi.copy()]
    last = 0.0
    for seg in sequence.segments:
        if seg.kind == "mw":
            psi = free(psi, last, seg.center)
            psi = psi @ rotation(seg.mw.angle, seg.mw.phase).T
            last = seg.center
        psi_end = free(psi, last, seg.t_end)
        states.append(psi_end)
    final = states[-1]
    bloch = bloch_from_state(final)
    scalar = np.ndim(detuning) == 0
    if scalar:
        bloch = bloch[0]
    if checkpoints:
        cps = [bloch_from_state(s) for s in states]
        if scalar:
            cps = [c[0] for c in cps]
        return bloch, cps
    return bloch


def mapped_pole(sequence: PulseSequence, parity, params: Optional[TransmonParams] = None) -> int:
    """Computational state (0 or 1) the ideal model sends ``parity`` to."""
    z = ideal_phase_model(sequence, parity, params)[2]
    return 0 if z >= 0 else 1


# ---------------------------------------------------------------------------
# Rotating-frame Hamiltonian
# ---------------------------------------------------------------------------


class DrivenHamiltonian:
    """H(t) for a compiled sequence and fixed parity, vectorised over t.

    H = static (frame at f01) + dispersion(ng(t)) + (eps(t) a^dag + h.c.)/2.
    """

    def __init__(self, params: TransmonParams, sequence: PulseSequence, parity,
                 frame_frequency: Optional[float] = None, ng_override: Optional[float] = None,
                 detuning: float = 0.0):
        self.params = params
        self.sequence = sequence
        self.parity = ParityLabel(int(parity))
        self.frame = params.f01 if frame_frequency is None else frame_frequency
        self.ng_override = ng_override
        k = params.levels
        self._static = np.diag(qdyn.build_static_hamiltonian(params, self.frame)).real.copy()
        self._static[1:] += TWO_PI * detuning * np.arange(1, k)
        self._eps = np.asarray(params.epsilon) * 1e-3
        self._sq = np.sqrt(np.arange(1, k, dtype=float))

    def ng(self, t):
        if self.ng_override is not None:
            return np.full(np.shape(t), self.ng_override, dtype=float)
        return self.sequence.ng(t)

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        k = self.params.levels
        n = t_arr.size
        h = np.zeros((n, k, k), dtype=complex)
        pf = qdyn.parity_factor(self.ng(t_arr), self.parity)
        diag = self._static[None, :] - 0.5 * TWO_PI * self._eps[None, :] * pf[:, None]
        idx = np.arange(k)
        h[:, idx, idx] = diag
        drive = self.sequence.drive(t_arr)
        for j in range(k - 1):
            h[:, j + 1, j] = 0.5 * drive * self._sq[j]
            h[:, j, j + 1] = 0.5 * np.conj(drive) * self._sq[j]
        if np.ndim(t) == 0:
            return h[0]
        return h
