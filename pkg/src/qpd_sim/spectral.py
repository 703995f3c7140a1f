"""Power spectral density of parity traces and the Lorentzian RTS fit.

The periodogram is normalized as a two-sided density evaluated at positive
frequencies: a white sequence with per-sample variance s^2 sampled every dt
seconds has a flat level s^2 * dt. That is the convention in which the
detection floor of the Lorentzian model reads [1 - F_eff^2 - (F_e-F_g)^2] dt.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.special import digamma

from qpd_sim.parity import FidelityModel, ParityTrace

logger = logging.getLogger(__name__)

DEFAULT_SEGMENT = 1 << 16
MIN_SEGMENT = 16


class FitError(RuntimeError):
    """The Lorentzian fit failed or its result is not resolvable in the band."""


@dataclass
class Psd:
    frequencies: np.ndarray  # Hz
    values: np.ndarray  # 1/Hz
    dt: float  # s
    n_segments: int
    segment_len: Optional[int] = None

    def __post_init__(self):
        f = np.asarray(self.frequencies)
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if f.size and f[-1] > 0.5 / self.dt * (1 + 1e-12):
            raise ValueError("frequencies exceed Nyquist")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("PSD values must be non-negative")

    @property
    def weights(self) -> np.ndarray:
        """Inverse variance of log S per bin for a Welch average of n_segments."""
        return np.full(self.values.shape, float(self.n_segments))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_hz", "s_value", "weight"])
        for f, s, wt in zip(self.frequencies, self.values, self.weights):
            w.writerow([f"{f:.12g}", f"{s:.12g}", f"{wt:.6g}"])
        return buf.getvalue()


def periodogram(trace, segment_len: int = DEFAULT_SEGMENT, overlap: float = 0.5,
                dt: Optional[float] = None) -> Psd:
    """Welch average of rectangular-window periodograms, per-segment mean removed.

    ``trace`` is a :class:`ParityTrace` (dt in µs) or a raw array with ``dt``
    given in seconds. The DC bin is dropped.
    """
    if isinstance(trace, ParityTrace):
        x = trace.samples.astype(np.float64)
        dt_s = trace.dt * 1e-6
    else:
        x = np.asarray(trace, dtype=np.float64)
        if dt is None:
            raise ValueError("dt (seconds) is required for raw arrays")
        dt_s = float(dt)
    n = x.size
    segment_len = int(min(segment_len, n))
    if segment_len < MIN_SEGMENT:
        raise ValueError(f"segment length {segment_len} is shorter than {MIN_SEGMENT} samples")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    step = max(1, int(round(segment_len * (1 - overlap))))
    starts = np.arange(0, n - segment_len + 1, step)
    acc = np.zeros(segment_len // 2 + 1)
    # chunk the segments to bound memory on long traces
    chunk = max(1, (1 << 22) // segment_len)
    for i in range(0, starts.size, chunk):
        idx = starts[i:i + chunk, None] + np.arange(segment_len)[None, :]
        seg = x[idx]
        seg = seg - seg.mean(axis=1, keepdims=True)
        spec = np.fft.rfft(seg, axis=1)
        acc += np.sum(spec.real**2 + spec.imag**2, axis=0)
    values = acc / starts.size * dt_s / segment_len
    freqs = np.fft.rfftfreq(segment_len, dt_s)
    return Psd(freqs[1:], values[1:], dt_s, int(starts.size), segment_len)


def model_psd(f_eff: float, gamma: float, fid: Optional[FidelityModel], dt: float, f,
              floor: Optional[float] = None):
    """F_eff^2 4 Gamma / ((2 Gamma)^2 + (2 pi f)^2) + floor.

    ``gamma`` in 1/s, ``dt`` in s, ``f`` in Hz. The floor defaults to
    [1 - F_eff^2 - (F_e - F_g)^2] dt from ``fid``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    f = np.asarray(f, dtype=float)
    if floor is None:
        if fid is None:
            raise ValueError("either fid or floor is required")
        floor = (1.0 - f_eff**2 - (fid.f_e - fid.f_g) ** 2) * dt
    return f_eff**2 * 4.0 * gamma / ((2.0 * gamma) ** 2 + (2.0 * math.pi * f) ** 2) + floor


def segment_expected_psd(f_eff: float, gamma: float, floor: float, dt: float, segment_len: int, f):
    """Expected rectangular-window periodogram of the sampled RTS.

    Exact for autocovariance F_eff^2 exp(-2 Gamma |k dt|) plus a white floor,
    at the Fourier frequencies of an N-sample segment, where mean removal
    has no effect. Tends to :func:`model_psd` for N -> inf, Gamma dt -> 0.
    """
    n = int(segment_len)
    f = np.asarray(f, dtype=float)
    r = math.exp(-2.0 * gamma * dt)
    z = r * np.exp(-2j * math.pi * f * dt)
    one_m = 1.0 - z
    zn1 = z ** (n - 1)
    s1 = z * (1.0 - zn1) / one_m
    s2 = z * (1.0 - n * zn1 + (n - 1) * zn1 * z) / one_m**2
    fejer = 1.0 + 2.0 * (s1 - s2 / n).real
    return dt * f_eff**2 * fejer + floor


@dataclass
class LorentzianFit:
    f_eff_hat: float
    gamma_hat: float  # 1/s
    floor_hat: float  # 1/Hz
    covariance: np.ndarray = field(repr=False)
    residual_norm: float
    f_m_hat: Optional[float] = None

    @property
    def tau_hat(self) -> float:
        """Mean switching time in s."""
        return 1.0 / self.gamma_hat

    @property
    def errors(self) -> dict:
        e = np.sqrt(np.abs(np.diag(self.covariance)))
        return {"f_eff": float(e[0]), "gamma": float(e[1]), "floor": float(e[2])}

    @property
    def tau_err(self) -> float:
        return self.errors["gamma"] / self.gamma_hat**2

    def report(self) -> dict:
        e = self.errors
        out = {
            "f_eff_hat": self.f_eff_hat, "f_eff_err": e["f_eff"],
            "gamma_hat_per_s": self.gamma_hat, "gamma_err": e["gamma"],
            "tau_hat_ms": self.tau_hat * 1e3, "tau_err_ms": self.tau_err * 1e3,
            "floor_hat": self.floor_hat, "floor_err": e["floor"],
            "residual_norm": self.residual_norm,
        }
        if self.f_m_hat is not None:
            out["f_m_hat"] = self.f_m_hat
        return out


def _initial_guess(f, s):
    lo = f <= f[0] * 10.0
    hi = f >= f[-1] / 10.0
    plateau = float(np.median(s[lo]))
    floor = float(np.median(s[hi]))
    if plateau <= floor:
        raise FitError("no Lorentzian excess above the floor in the band")
    half = floor + 0.5 * (plateau - floor)
    below = np.nonzero(s < half)[0]
    f_half = f[below[0]] if below.size else f[-1]
    gamma = math.pi * max(f_half, f[0])
    f_eff = math.sqrt(max((plateau - floor) * gamma, 1e-12))
    return min(f_eff, 0.999), gamma, floor


def fit_lorentzian(psd: Psd, known_fid: Optional[FidelityModel] = None, log_space: bool = True) -> LorentzianFit:
    """Weighted least squares for (F_eff, Gamma, floor).

    When ``psd.segment_len`` is known the model is the finite-segment
    expectation of the same process (:func:`segment_expected_psd`);
    otherwise the bare Lorentzian :func:`model_psd`. In log space the
    expected log of a Welch average over K segments sits psi(K) - log K
    below log S; that offset is included in the model.
    """
    f = np.asarray(psd.frequencies, dtype=float)
    s = np.asarray(psd.values, dtype=float)
    keep = s > 0
    f, s = f[keep], s[keep]
    if f.size < 4:
        raise FitError("too few positive PSD bins to fit")
    f_eff0, gamma0, floor0 = _initial_guess(f, s)
    k = psd.n_segments
    bias = digamma(k) - math.log(k) if log_space else 0.0
    w = np.sqrt(psd.weights[keep]) if log_space else None

    def unpack(x):
        return x[0], math.exp(x[1]), math.exp(x[2])

    def resid(x):
        fe, g, fl = unpack(x)
        if psd.segment_len:
            m = segment_expected_psd(fe, g, fl, psd.dt, psd.segment_len, f)
        else:
            m = model_psd(fe, g, None, psd.dt, f, floor=fl)
        if log_space:
            return w * (np.log(s) - np.log(m) - bias)
        return (s - m) / m * math.sqrt(k)

    x0 = np.array([f_eff0, math.log(gamma0), math.log(floor0)])
    try:
        res = least_squares(resid, x0, bounds=([0.0, -np.inf, -np.inf], [1.0, np.inf, np.inf]),
                            method="trf", x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    except ValueError as exc:
        raise FitError(f"least squares failed: {exc}") from exc
    if not res.success:
        raise FitError(f"least squares did not converge: {res.message}")
    fe, g, fl = unpack(res.x)
    j = res.jac
    dof = max(1, f.size - 3)
    s2 = 2.0 * res.cost / dof
    jtj = j.T @ j
    if np.linalg.cond(jtj) > 1e14:
        raise FitError("fit covariance is singular")
    cov_x = np.linalg.inv(jtj) * s2
    # back to (f_eff, gamma, floor)
    jac = np.diag([1.0, g, fl])
    cov = jac @ cov_x @ jac
    err = np.sqrt(np.abs(np.diag(cov)))
    if not (err[0] < fe and err[1] < g):
        raise FitError(f"Lorentzian not resolved: F_eff {fe:.3g} +- {err[0]:.2g}, Gamma {g:.3g} +- {err[1]:.2g} /s")
    corner = g / math.pi
    if corner < f[0] or corner > f[-1]:
        raise FitError(f"corner frequency {corner:.3g} Hz lies outside the band [{f[0]:.3g}, {f[-1]:.3g}] Hz")
    f_m_hat = None
    if known_fid is not None:
        denom = known_fid.f_g + known_fid.f_e - 1.0
        f_m_hat = fe / denom if denom != 0 else None
    return LorentzianFit(float(fe), float(g), float(fl), cov, float(np.linalg.norm(res.fun)), f_m_hat)
