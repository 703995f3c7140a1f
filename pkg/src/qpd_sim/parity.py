"""Quasiparticle tunneling as a random telegraph signal, and its detection
through imperfect parity mapping and qubit readout.

Conventions: parity +1 is odd, -1 is even. After mapping, even parity sits
on the excited qubit state; index 0 of the 2x2 fidelity matrices is
(even, excited) and index 1 is (odd, ground).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

EVEN = -1
ODD = 1


@dataclass(frozen=True)
class TunnelingModel:
    """Poisson parity switching with rate ``gamma`` in 1/ms."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("tunneling rate must be positive")

    @classmethod
    def from_tau(cls, tau_ms: float) -> "TunnelingModel":
        return cls(1.0 / tau_ms)

    @property
    def tau(self) -> float:
        return 1.0 / self.gamma

    @property
    def gamma_per_s(self) -> float:
        return self.gamma * 1e3


@dataclass(frozen=True)
class FidelityModel:
    f_g: float = 0.995
    f_e: float = 0.951
    f_m: float = 0.9937

    def __post_init__(self):
        for name in ("f_g", "f_e", "f_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def readout_matrix(self) -> np.ndarray:
        """Columns: prepared (excited, ground); rows: reported (excited, ground)."""
        return np.array([[self.f_e, 1 - self.f_g], [1 - self.f_e, self.f_g]])

    @property
    def mapping_matrix(self) -> np.ndarray:
        a = (self.f_m + 1) / 2
        b = (1 - self.f_m) / 2
        return np.array([[a, b], [b, a]])

    @property
    def total_matrix(self) -> np.ndarray:
        return self.readout_matrix @ self.mapping_matrix

    @property
    def f_eff(self) -> float:
        return effective_fidelity(self)


M_CORR = np.array([[1.0, -1.0], [-1.0, 1.0]])


def effective_fidelity(fid: FidelityModel) -> float:
    return (fid.f_g + fid.f_e - 1.0) * fid.f_m


def correlation_expectations(fid: FidelityModel) -> np.ndarray:
    """E_ab = <a| F_tot^T M_corr F_tot |b> for a, b in (even, odd)."""
    ft = fid.total_matrix
    return ft.T @ M_CORR @ ft


@dataclass
class ParityTrace:
    samples: np.ndarray
    dt: float  # µs
    kind: str = "ideal"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int8)
        if self.samples.size < 1:
            raise ValueError("trace must contain at least one sample")
        if not np.all(np.abs(self.samples) == 1):
            raise ValueError("trace samples must be +1 or -1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kind not in ("ideal", "measured"):
            raise ValueError(f"unknown trace kind {self.kind!r}")

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def length(self) -> float:
        return self.n * self.dt


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def sample_switch_times(model: TunnelingModel, duration: float, rng: np.random.Generator,
                        t_start: float = 0.0) -> np.ndarray:
    """Event times (same unit as ``model.tau``, ms) of a homogeneous Poisson
    process on [t_start, t_start + duration)."""
    if duration <= 0:
        return np.zeros(0)
    n = rng.poisson(duration * model.gamma)
    return np.sort(t_start + rng.uniform(0.0, duration, size=n))


def ideal_trace(events, dt: float, n_samples: int, initial_parity: int) -> ParityTrace:
    """Parity at t_k = k*dt is initial * (-1)^(#events <= t_k).

    ``events`` and ``dt`` share a time unit; the trace stores ``dt`` as given.
    """
    if initial_parity not in (EVEN, ODD):
        raise ValueError("initial parity must be -1 or +1")
    events = np.asarray(events, dtype=float)
    t = np.arange(n_samples) * dt
    counts = np.searchsorted(events, t, side="right")
    samples = (initial_parity * (1 - 2 * (counts & 1))).astype(np.int8)
    return ParityTrace(samples, dt, "ideal")


def generate_ideal(model: TunnelingModel, dt_us: float, n_samples: int, rng: np.random.Generator,
                   initial_parity: Optional[int] = None) -> ParityTrace:
    if initial_parity is None:
        initial_parity = int(rng.choice([EVEN, ODD]))
    dt_ms = dt_us * 1e-3
    events = sample_switch_times(model, n_samples * dt_ms, rng)
    tr = ideal_trace(events, dt_ms, n_samples, initial_parity)
    return ParityTrace(tr.samples, dt_us, "ideal", {"gamma": model.gamma})


def generate_ideal_segmented(model: TunnelingModel, dt_us: float, n_samples: int, seed: int,
                             segment: int = 1 << 20, initial_parity: Optional[int] = None) -> ParityTrace:
    """Long trace built from independently seeded segments; each segment starts
    from the parity its predecessor ended on plus any switch in the gap."""
    ss = np.random.SeedSequence(seed)
    n_seg = max(1, math.ceil(n_samples / segment))
    children = ss.spawn(n_seg + 1)
    rng0 = np.random.default_rng(children[0])
    parity = int(rng0.choice([EVEN, ODD])) if initial_parity is None else initial_parity
    dt_ms = dt_us * 1e-3
    parts = []
    for i in range(n_seg):
        rng = np.random.default_rng(children[i + 1])
        n = min(segment, n_samples - i * segment)
        events = sample_switch_times(model, n * dt_ms, rng)
        tr = ideal_trace(events, dt_ms, n, parity)
        parts.append(tr.samples)
        # carry forward: parity after the last sample plus switches in (t_last, n*dt)
        tail = np.count_nonzero(events > (n - 1) * dt_ms)
        parity = int(tr.samples[-1]) * (-1) ** tail
    return ParityTrace(np.concatenate(parts), dt_us, "ideal", {"gamma": model.gamma})


def measure_probabilities(fid: FidelityModel) -> tuple:
    """P(reported even | true even), P(reported even | true odd)."""
    ft = fid.total_matrix
    return ft[0, 0], ft[0, 1]


def measure_trace(ideal: ParityTrace, fid: FidelityModel, rng: np.random.Generator,
                  p_excited=None) -> ParityTrace:
    """Pass every sample through the mapping then the readout confusion matrix.

    ``p_excited`` optionally overrides the mapping stage with per-sample
    probabilities of landing on the excited (even-assigned) state, e.g. from
    a shot-by-shot pulse simulation.
    """
    s = ideal.samples
    if p_excited is None:
        a = (fid.f_m + 1) / 2
        p_exc = np.where(s == EVEN, a, 1 - a)
    else:
        p_exc = np.asarray(p_excited, dtype=float)
        if p_exc.shape != s.shape:
            raise ValueError("p_excited must match the trace length")
    u1 = rng.random(s.size)
    excited = u1 < p_exc
    u2 = rng.random(s.size)
    read_exc = np.where(excited, u2 < fid.f_e, u2 < (1 - fid.f_g))
    out = np.where(read_exc, EVEN, ODD).astype(np.int8)
    meta = dict(ideal.meta)
    meta.update({"f_g": fid.f_g, "f_e": fid.f_e, "f_m": fid.f_m})
    return ParityTrace(out, ideal.dt, "measured", meta)


def analytic_autocorr(fid: FidelityModel, model: TunnelingModel, tau_lag):
    """C(tau) = (F_e - F_g)^2 + F_eff^2 exp(-2 Gamma |tau|) for tau != 0, 1 at 0.

    ``tau_lag`` in ms (the unit of ``model.gamma``).
    """
    tau = np.asarray(tau_lag, dtype=float)
    c = (fid.f_e - fid.f_g) ** 2 + effective_fidelity(fid) ** 2 * np.exp(-2 * model.gamma * np.abs(tau))
    c = np.where(tau == 0, 1.0, c)
    return float(c) if c.ndim == 0 else c


def empirical_autocorr(samples, lags) -> np.ndarray:
    """Time-averaged <P(t) P(t + lag)> (no mean subtraction)."""
    x = np.asarray(samples, dtype=np.float64)
    out = []
    for lag in lags:
        lag = int(lag)
        out.append(np.dot(x[: x.size - lag], x[lag:]) / (x.size - lag) if lag else 1.0)
    return np.array(out)


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("dt_us", "kind", "seed", "gamma", "f_g", "f_e", "f_m")


def write_trace(trace: ParityTrace, path, seed: Optional[int] = None) -> None:
    """CSV with a '# {json header}' first line, then index,value rows.

    Paths ending in ``.npz`` are stored in binary with the same header.
    """
    path = Path(path)
    header = {"dt_us": trace.dt, "kind": trace.kind, "seed": seed}
    for k in ("gamma", "f_g", "f_e", "f_m"):
        header[k] = trace.meta.get(k)
    if path.suffix == ".npz":
        np.savez_compressed(path, samples=trace.samples, header=json.dumps(header, sort_keys=True))
        return
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write("index,value\n")
        idx = np.arange(trace.n)
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([idx, trace.samples]), fmt="%d", delimiter=",")
        fh.write(buf.getvalue())


def read_trace(path) -> tuple:
    """Returns (ParityTrace, header dict)."""
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            samples = z["samples"]
    else:
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError("trace file is missing its header line")
            header = json.loads(first[1:].strip())
            cols = fh.readline().strip()
            if cols != "index,value":
                raise ValueError(f"unexpected trace columns {cols!r}")
            data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        samples = data[:, 1]
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ValueError(f"trace header is missing {missing}")
    meta = {k: header[k] for k in ("gamma", "f_g", "f_e", "f_m") if header.get(k) is not None}
    return ParityTrace(samples, float(header["dt_us"]), header["kind"], meta), header
