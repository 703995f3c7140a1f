"""Simulated calibration experiments.

Populations are the probability of leaving the qubit ground state. Every
routine can run on the closed-form phase model (``method="ideal"``) or on the
pulse-level master equation (``method="lindblad"``).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from qpd_sim import cliffords, pulses, qdyn, spectral
from qpd_sim.parity import (EVEN, FidelityModel, ParityTrace, TunnelingModel, generate_ideal_segmented,
                            measure_trace)
from qpd_sim.pulses import GatePulseNetZero, MicrowavePulse, PulseSequence
from qpd_sim.qdyn import ParityLabel, TransmonParams

logger = logging.getLogger(__name__)

PARITIES = (ParityLabel.EVEN, ParityLabel.ODD)


class CalibrationError(RuntimeError):
    """A sweep did not contain the feature it was meant to locate."""


@dataclass
class SweepResult:
    axis: np.ndarray
    population_even: np.ndarray
    population_odd: np.ndarray
    axis_name: str = "axis"
    located: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.population_even = np.asarray(self.population_even, dtype=float)
        self.population_odd = np.asarray(self.population_odd, dtype=float)
        if self.axis.ndim != 1 or self.axis.size < 2:
            raise ValueError("sweep axis needs at least two points")
        d = np.diff(self.axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep axis must be strictly monotone")
        for pop in (self.population_even, self.population_odd):
            if pop.shape[0] != self.axis.size:
                raise ValueError("population length does not match the axis")
            if np.any(pop < -1e-9) or np.any(pop > 1 + 1e-9):
                raise ValueError("populations must lie in [0, 1]")

    @property
    def population_mean(self) -> np.ndarray:
        return 0.5 * (self.population_even + self.population_odd)

    def to_csv(self) -> str:
        """One row per axis point; 2D populations (several traces) are flattened
        with the trace index appended to the column name."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        pe, po, pm = self.population_even, self.population_odd, self.population_mean
        if pe.ndim == 1:
            w.writerow(["axis", "population_even", "population_odd", "population_mean"])
            for row in zip(self.axis, pe, po, pm):
                w.writerow([f"{v:.12g}" for v in row])
            return buf.getvalue()
        labels = self.extra.get("trace_labels", [str(i) for i in range(pe.shape[1])])
        head = ["axis"]
        for lab in labels:
            head += [f"population_even[{lab}]", f"population_odd[{lab}]", f"population_mean[{lab}]"]
        w.writerow(head)
        for i, x in enumerate(self.axis):
            row = [f"{x:.12g}"]
            for j in range(pe.shape[1]):
                row += [f"{pe[i, j]:.12g}", f"{po[i, j]:.12g}", f"{pm[i, j]:.12g}"]
            w.writerow(row)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Population evaluation
# ---------------------------------------------------------------------------


def excited_population(params: TransmonParams, sequence: PulseSequence, parity, method: str = "ideal",
                       dt: float = qdyn.DEFAULT_DT, dephasing_source: str = "echo") -> float:
    """1 - P(ground) at the end of ``sequence`` starting from the ground state."""
    if method == "ideal":
        z = pulses.ideal_phase_model(sequence, parity, params)[2]
        return float(np.clip(0.5 * (1.0 - z), 0.0, 1.0))
    if method == "lindblad":
        k = params.levels
        h = pulses.DrivenHamiltonian(params, sequence, parity)
        rho = qdyn.lindblad_evolve(h, qdyn.collapse_operators(params, dephasing_source),
                                   qdyn.pure_state(qdyn.basis(k, 0)), (0.0, sequence.duration), dt)
        return float(np.clip(1.0 - rho[0, 0].real, 0.0, 1.0))
    raise ValueError(f"unknown method {method!r}")


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _parabola_vertex(x, y, i):
    """Vertex of the parabola through points i-1, i, i+1 (falls back to x[i])."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), min(x0, x2), max(x0, x2)))


def local_maxima(x, y, prominence: float = 0.5) -> list:
    """Quadratic-refined interior maxima of ``y`` rising above
    min + prominence * (max - min)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = y.min(), y.max()
    if hi - lo <= 1e-12:
        return []
    thresh = lo + prominence * (hi - lo)
    out = []
    for i in range(1, y.size - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > thresh:
            out.append(_parabola_vertex(x, y, i))
    return out


def linear_crossings(x, d) -> list:
    """Zeros of ``d`` by linear interpolation between sign changes."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    out = []
    for i in range(d.size - 1):
        if d[i] == 0.0:
            out.append(float(x[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(x[i] - d[i] * (x[i + 1] - x[i]) / (d[i + 1] - d[i])))
    if d.size and d[-1] == 0.0:
        out.append(float(x[-1]))
    return out


# ---------------------------------------------------------------------------
# Degeneracy point
# ---------------------------------------------------------------------------


def find_degeneracy(params: TransmonParams, voltage_grid, delay: float = 800.0,
                    volts_per_2e: float = pulses.DEFAULT_VOLTS_PER_2E, offset_v: float = 0.0,
                    method: str = "ideal", threads: int = 1) -> SweepResult:
    """Charge-monitor population versus gate voltage; maxima mark ng = 0.25 mod 0.5.

    ``offset_v`` injects a static offset-charge drift (in gate volts). The
    parity-averaged population is periodic in ng with period 0.5, so the
    grid must span at least that much.
    """
    v = np.asarray(voltage_grid, dtype=float)
    ng = pulses.volts_to_charge(v + offset_v, volts_per_2e)
    if abs(ng[-1] - ng[0]) < 0.5 - 1e-9:
        raise ValueError("voltage grid must cover at least half a charge period (0.5 in ng)")
    mw = MicrowavePulse(eta=params.eta)

    def point(n):
        seq = pulses.compile_charge_monitor(params, delay, ng0=float(n), mw=mw)
        return [excited_population(params, seq, p, method) for p in PARITIES]

    pops = np.array(_map(point, ng, threads))
    res = SweepResult(v, pops[:, 0], pops[:, 1], "gate_volts")
    maxima = local_maxima(v, res.population_mean)
    if not maxima:
        raise CalibrationError("no population maximum inside the voltage grid")
    res.located = maxima
    res.extra = {"maxima_ng": [float(pulses.volts_to_charge(m + offset_v, volts_per_2e)) for m in maxima],
                 "delay_ns": delay, "volts_per_2e": volts_per_2e}
    return res


@dataclass
class DriftCheck:
    shift_v: float
    threshold_v: float

    @property
    def accepted(self) -> bool:
        return abs(self.shift_v) <= self.threshold_v


def check_offset_drift(params: TransmonParams, voltage_grid, drift_before_v: float, drift_after_v: float,
                       threshold_v: float = 0.1, **kwargs) -> DriftCheck:
    """Locate the degeneracy point before and after a run with the supplied
    drift values injected; reject when it moved by more than ``threshold_v``."""
    before = find_degeneracy(params, voltage_grid, offset_v=drift_before_v, **kwargs)
    after = find_degeneracy(params, voltage_grid, offset_v=drift_after_v, **kwargs)
    period = 0.5 * before.extra["volts_per_2e"]
    ref = before.located[0]
    nearest = min(after.located, key=lambda m: abs((m - ref + period / 2) % period - period / 2))
    shift = (nearest - ref + period / 2) % period - period / 2
    return DriftCheck(float(shift), threshold_v)


# ---------------------------------------------------------------------------
# Gate-pulse duration
# ---------------------------------------------------------------------------


def calibrate_duration(params: TransmonParams, durations, amplitude: float = pulses.DEFAULT_GATE_AMPLITUDE,
                       sigma: float = 5.0, method: str = "ideal", mw: Optional[MicrowavePulse] = None,
                       threads: int = 1) -> SweepResult:
    """EchoCPM with final X/2 and -X/2 per duration; the parity-averaged
    traces cross where delta = pi.

    A very small ``sigma`` approximates rectangular gate pulses.
    """
    durations = np.asarray(durations, dtype=float)
    mw = mw or MicrowavePulse(eta=params.eta)
    finals = ("X/2", "-X/2")

    def point(flat):
        gate = GatePulseNetZero.build(amplitude, float(flat), sigma)
        out = []
        for final in finals:
            seq = pulses.compile_echo_cpm(params, gate, mw, final_gate=final)
            out.append([excited_population(params, seq, p, method) for p in PARITIES])
        return out

    pops = np.array(_map(point, durations, threads))  # (n, final, parity)
    res = SweepResult(durations, pops[:, :, 0], pops[:, :, 1], "duration_ns",
                      extra={"trace_labels": list(finals), "amplitude": amplitude, "sigma": sigma})
    mean = res.population_mean
    crossings = linear_crossings(durations, mean[:, 0] - mean[:, 1])
    if not crossings:
        raise CalibrationError("the X/2 and -X/2 traces do not cross inside the duration range")
    res.located = crossings
    return res


def pseudo_z_channels(params: TransmonParams, flat_top: float, amplitude: float = pulses.DEFAULT_GATE_AMPLITUDE,
                      sigma: float = 5.0, decoherence: bool = True, method: str = "ideal",
                      mw: Optional[MicrowavePulse] = None, dt: float = qdyn.DEFAULT_DT):
    """Per-parity pseudo-Z PTMs for a given flat-top duration.

    ``ideal``: closed-form composition of the two phase-accumulation blocks at
    the simulated phase difference, followed by T1/T2 damping over the block
    duration. ``lindblad``: full pulse-level master-equation channels.
    """
    mw = mw or MicrowavePulse(eta=params.eta)
    gate = GatePulseNetZero.build(amplitude, flat_top, sigma)
    seq = pulses.compile_pseudo_z(gate, mw)
    if method == "lindblad":
        p = params if decoherence else params.replace(t1=math.inf, t2_echo=math.inf, t2_ramsey=math.inf)
        collapse = qdyn.collapse_operators(p) if decoherence else []
        out = []
        for parity in PARITIES:
            h = pulses.DrivenHamiltonian(params, seq, parity)
            s = qdyn.superoperator(h, collapse, (0.0, seq.duration), params.levels, dt)
            out.append(cliffords.superop_to_ptm(s, params.levels))
        return np.array(out)
    if method != "ideal":
        raise ValueError(f"unknown method {method!r}")
    delta = abs(pulses.parity_phase_difference(params, pulses.compile_echo_cpm(params, gate, mw)))
    damp = (cliffords.damping_ptm(seq.duration * 1e-3, params.t1, params.t2_echo) if decoherence
            else np.eye(4))
    out = []
    for parity in PARITIES:
        u = cliffords.echo_pa(delta, parity, prime=True) @ cliffords.echo_pa(delta, parity)
        out.append(damp @ cliffords.unitary_to_ptm(u))
    return np.array(out)


def reference_channels(params: TransmonParams, decoherence: bool = True, gate_time: float = 30.0):
    """Analytic physical-gate channels (ideal rotations plus damping over the
    gate slot, ``gate_time`` in ns)."""
    if not decoherence:
        return cliffords.PhysicalGateChannels({g: cliffords.unitary_to_ptm(u)
                                               for g, u in cliffords.PHYSICAL_GATES.items()})
    return cliffords.PhysicalGateChannels.analytic(gate_time * 1e-3, params.t1, params.t2_echo)


def optimize_duration_irb(params: TransmonParams, durations, depth: int = 50, n_sequences: int = 30,
                          seed: int = 0, amplitude: float = pulses.DEFAULT_GATE_AMPLITUDE,
                          sigma: float = 5.0, decoherence: bool = True, method: str = "ideal",
                          threads: int = 1) -> SweepResult:
    """Interleaved-RB sequence fidelity at ``depth`` with pseudo-Z
    interleaved, per duration. The same random Clifford sequences are used
    at every duration. The optimum is the vertex of a parabola fitted to the
    points around the best duration.

    The even/odd population columns hold the sequence fidelity restricted to
    sequences that drew each parity.
    """
    durations = np.asarray(durations, dtype=float)
    ref = reference_channels(params, decoherence)
    group = cliffords.clifford_group()
    inter_idx = group.index_of(cliffords.NAMED_CLIFFORDS["pseudo-Z"])
    seqs = []
    for j in range(n_sequences):
        rng = cliffords.sequence_rng(seed, 0, j)
        seqs.append(cliffords.random_rb_sequence(depth, rng, inter_idx))

    def point(flat):
        pz = pseudo_z_channels(params, float(flat), amplitude, sigma, decoherence, method)
        chan = cliffords.PhysicalGateChannels(ref.gate_ptms, {"pseudo-Z": pz}, check=decoherence)
        per = []
        for parity in (0, 1):
            vals = []
            for elems, rec in seqs:
                fixed = _FixedParity(chan, parity)
                vals.append(cliffords.simulate_sequence(elems, rec, fixed, "pseudo-Z"))
            per.append(np.mean(vals))
        return per

    pops = np.array(_map(point, durations, threads))
    res = SweepResult(durations, pops[:, 0], pops[:, 1], "duration_ns",
                      extra={"depth": depth, "n_sequences": n_sequences})
    f = res.population_mean
    i = int(np.argmax(f))
    res.located = [_smoothed_argmax(durations, f, i)]
    return res


class _FixedParity(cliffords.ChannelModel):
    def __init__(self, inner, parity):
        self.inner = inner
        self.parity = parity
        self.noisy_recovery = inner.noisy_recovery

    def clifford_ptms(self, parity=None):
        return self.inner.clifford_ptms(self.parity)

    def interleaved_ptm(self, name, parity=None):
        return self.inner.interleaved_ptm(name, self.parity)


def _smoothed_argmax(x, y, i, half_width: int = 2) -> float:
    lo, hi = max(0, i - half_width), min(len(x), i + half_width + 1)
    if hi - lo < 3:
        return float(x[i])
    a, b, _ = np.polyfit(x[lo:hi], y[lo:hi], 2)
    if a >= 0:
        return float(x[i])
    return float(np.clip(-b / (2 * a), x[lo], x[hi - 1]))


# ---------------------------------------------------------------------------
# Ramsey versus echo parity mapping under quasi-static detuning noise
# ---------------------------------------------------------------------------


def default_detuning_sigma(params: TransmonParams) -> float:
    """Gaussian detuning spread (GHz) whose Ramsey envelope exp(-(t/T2*)^2)
    reproduces ``params.t2_ramsey``."""
    return math.sqrt(2.0) / (2.0 * math.pi * params.t2_ramsey * 1e3)


@dataclass
class QuasiStaticNoise:
    """Qubit detuning drawn once per shot from N(0, sigma) and held constant
    during the shot. ``sigma`` in GHz; None selects :func:`default_detuning_sigma`."""

    enabled: bool = True
    sigma: Optional[float] = None

    def resolve(self, params: TransmonParams) -> float:
        if not self.enabled:
            return 0.0
        s = default_detuning_sigma(params) if self.sigma is None else self.sigma
        if s < 0:
            raise ValueError("detuning sigma must be non-negative")
        return s


@dataclass
class TraceConfig:
    tau_ms: float = 30.2
    dt_us: float = 4.0
    duration_s: float = 30.0
    fidelity: FidelityModel = field(default_factory=FidelityModel)
    segment_len: int = spectral.DEFAULT_SEGMENT
    seed: int = 0

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * 1e6 / self.dt_us))


def mapping_contrast(params: TransmonParams, sequence: PulseSequence, detuning) -> np.ndarray:
    """Signed projection onto the even-assigned pole, per detuning value and
    parity; returns (2, n) for (even, odd)."""
    det = np.atleast_1d(np.asarray(detuning, dtype=float))
    even_pole = pulses.ideal_phase_model(sequence, ParityLabel.EVEN, params)[2]
    s = 1.0 if even_pole >= 0 else -1.0
    return np.array([s * pulses.ideal_phase_model(sequence, p, params, detuning=det)[:, 2] for p in PARITIES])


def _mapping_probabilities(params, sequence, ideal: ParityTrace, fid: FidelityModel, det, grid_points=4001):
    if np.all(det == 0):
        c = mapping_contrast(params, sequence, 0.0)[:, 0]
        contrast = np.where(ideal.samples == EVEN, c[0], c[1])
    else:
        # the contrast is smooth in the detuning; tabulate and interpolate
        span = max(np.max(np.abs(det)), 1e-12)
        grid = np.linspace(-span, span, grid_points)
        table = mapping_contrast(params, sequence, grid)
        contrast = np.where(ideal.samples == EVEN, np.interp(det, grid, table[0]), np.interp(det, grid, table[1]))
    return 0.5 * (1.0 + fid.f_m * contrast)


@dataclass
class RamseyEchoComparison:
    f_eff_ramsey: float
    f_eff_echo: float
    fit_ramsey: spectral.LorentzianFit
    fit_echo: spectral.LorentzianFit
    detuning_sigma: float

    def report(self) -> dict:
        return {
            "f_eff_ramsey": self.f_eff_ramsey, "f_eff_echo": self.f_eff_echo,
            "f_eff_ramsey_err": self.fit_ramsey.errors["f_eff"], "f_eff_echo_err": self.fit_echo.errors["f_eff"],
            "tau_ramsey_ms": self.fit_ramsey.tau_hat * 1e3, "tau_echo_ms": self.fit_echo.tau_hat * 1e3,
            "detuning_sigma_ghz": self.detuning_sigma,
        }


def compare_ramsey_echo(params: TransmonParams, noise_model: QuasiStaticNoise, trace_config: TraceConfig,
                        gate: Optional[GatePulseNetZero] = None,
                        mw: Optional[MicrowavePulse] = None) -> RamseyEchoComparison:
    """Full chain for both mapping protocols on one tunneling record.

    Both protocols see the same ideal parity trace, the same per-shot
    detuning draws and the same mapping/readout random numbers, so any
    difference between them comes from the protocols alone.
    """
    gate = gate or GatePulseNetZero.build()
    mw = mw or MicrowavePulse(eta=params.eta)
    echo = pulses.compile_echo_cpm(params, gate, mw)
    ramsey = pulses.compile_ramsey_cpm(params, gate, mw)
    cfg = trace_config
    ideal = generate_ideal_segmented(TunnelingModel.from_tau(cfg.tau_ms), cfg.dt_us, cfg.n_samples,
                                     cfg.seed)
    sigma = noise_model.resolve(params)
    det = cliffords.sequence_rng(cfg.seed, 1).normal(0.0, sigma, ideal.n) if sigma > 0 else np.zeros(ideal.n)
    fits = []
    for seq in (ramsey, echo):
        p_exc = _mapping_probabilities(params, seq, ideal, cfg.fidelity, det)
        measured = measure_trace(ideal, cfg.fidelity, cliffords.sequence_rng(cfg.seed, 2), p_excited=p_exc)
        psd = spectral.periodogram(measured, cfg.segment_len)
        fits.append(spectral.fit_lorentzian(psd, cfg.fidelity))
    return RamseyEchoComparison(fits[0].f_eff_hat, fits[1].f_eff_hat, fits[0], fits[1], sigma)


# ---------------------------------------------------------------------------
# Parity-mapping simulation
# ---------------------------------------------------------------------------


@dataclass
class MappingResult:
    fidelity: dict  # ParityLabel -> fidelity to its target pole
    targets: dict  # ParityLabel -> target computational state
    checkpoint_times: np.ndarray
    bloch: dict  # ParityLabel -> (n_checkpoints, 3) from the master equation
    bloch_ideal: dict  # ParityLabel -> (n_checkpoints, 3) from the phase model
    final_states: dict = field(repr=False, default_factory=dict)

    @property
    def average(self) -> float:
        return float(np.mean(list(self.fidelity.values())))

    def checkpoints_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parity", "checkpoint", "t_ns", "x", "y", "z", "x_ideal", "y_ideal", "z_ideal"])
        for p in PARITIES:
            for i, t in enumerate(self.checkpoint_times):
                b, bi = self.bloch[p][i], self.bloch_ideal[p][i]
                w.writerow([p.name.lower(), f"S{i + 1}", f"{t:.12g}",
                            *(f"{v:.12g}" for v in b), *(f"{v:.12g}" for v in bi)])
        return buf.getvalue()


def simulate_mapping(params: TransmonParams, gate: Optional[GatePulseNetZero] = None,
                     mw: Optional[MicrowavePulse] = None, decoherence: bool = True,
                     dt: float = qdyn.DEFAULT_DT, dephasing_source: str = "echo",
                     target_gate: Optional[GatePulseNetZero] = None) -> MappingResult:
    """Master-equation EchoCPM for both parities.

    Each parity is scored against the pole the phase model assigns to it for
    ``target_gate`` (default: ``gate``), so a gate with the wrong phase is
    scored against the nominal targets. Checkpoints are the segment
    boundaries (S1 is the initial state).
    """
    gate = gate or GatePulseNetZero.build()
    mw = mw or MicrowavePulse(eta=params.eta)
    seq = pulses.compile_echo_cpm(params, gate, mw)
    ref = pulses.compile_echo_cpm(params, target_gate or gate, mw)
    collapse = qdyn.collapse_operators(params, dephasing_source) if decoherence else []
    times = np.array([0.0] + [s.t_end for s in seq.segments])
    k = params.levels
    rho0 = qdyn.pure_state(qdyn.basis(k, 0))
    fid, targets, bloch, bloch_ideal, finals = {}, {}, {}, {}, {}
    for p in PARITIES:
        h = pulses.DrivenHamiltonian(params, seq, p)
        final, states = qdyn.lindblad_evolve(h, collapse, rho0, (0.0, seq.duration), dt, checkpoints=times)
        targets[p] = pulses.mapped_pole(ref, p, params)
        fid[p] = qdyn.state_fidelity(final, qdyn.basis(k, targets[p]))
        bloch[p] = np.array([qdyn.bloch_vector(s) for s in states])
        bloch_ideal[p] = np.array(pulses.ideal_phase_model(seq, p, params, checkpoints=True)[1])
        finals[p] = final
    return MappingResult(fid, targets, times, bloch, bloch_ideal, finals)
