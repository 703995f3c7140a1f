"""Truncated transmon algebra, Hamiltonian assembly and Lindblad integration.

Units: time in ns, frequencies in GHz, Hamiltonians in rad/ns. Coherence
times on :class:`TransmonParams` are stored in µs and converted on use.
Charge-dispersion amplitudes are in MHz.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from qpd_sim import kernels

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Parameters of the reference device.
DEVICE_F01 = 3.51589
DEVICE_ETA = 0.33
DEVICE_EPS10 = 1.192
DEVICE_T1 = 80.0
DEVICE_T2_ECHO = 47.0
DEVICE_T2_RAMSEY = 8.7

DEFAULT_DT = 0.01


class IntegrationError(RuntimeError):
    """Raised when an integration drifts outside the density-matrix invariants."""


class ParityLabel(enum.IntEnum):
    EVEN = -1
    ODD = 1

    def flipped(self) -> "ParityLabel":
        return ParityLabel(-int(self))


def koch_dispersion_ratios(f01: float, eta: float, levels: int) -> np.ndarray:
    """Relative charge-dispersion amplitudes eps_k / eps_1 from the
    asymptotic transmon expression, with E_C ~ eta and E_J from f01."""
    if eta <= 0:
        ratios = np.zeros(levels)
        ratios[1] = 1.0
        return ratios
    ec = eta
    ej = (f01 + ec) ** 2 / (8.0 * ec)
    x = ej / (2.0 * ec)
    ks = np.arange(levels)
    log_amp = (
        ks * math.log(2.0**4)
        - np.array([math.lgamma(k + 1) for k in ks])
        + (ks / 2.0) * math.log(x)
    )
    ratios = np.exp(log_amp - log_amp[1])
    # alternating sign of the band curvature
    return ratios * (-1.0) ** (ks - 1)


@dataclass(frozen=True)
class TransmonParams:
    """Device constants.

    ``epsilon`` is the per-level charge-dispersion list in MHz. When left
    empty it is filled from :func:`koch_dispersion_ratios` scaled so that
    ``epsilon[1] - epsilon[0] == eps10_sign * eps10``.
    """

    f01: float = DEVICE_F01
    eta: float = DEVICE_ETA
    eps10: float = DEVICE_EPS10
    eps10_sign: int = -1
    t1: float = DEVICE_T1
    t2_echo: float = DEVICE_T2_ECHO
    t2_ramsey: float = DEVICE_T2_RAMSEY
    levels: int = 3
    epsilon: tuple = field(default=())

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.eps10_sign not in (-1, 1):
            raise ValueError("eps10_sign must be +1 or -1")
        if not self.epsilon:
            ratios = koch_dispersion_ratios(self.f01, self.eta, self.levels)
            eps = ratios / (ratios[1] - ratios[0]) * self.eps10_sign * abs(self.eps10)
            object.__setattr__(self, "epsilon", tuple(float(e) for e in eps))
        else:
            object.__setattr__(self, "epsilon", tuple(float(e) for e in self.epsilon))
        self.validate()

    def validate(self) -> None:
        if not self.f01 > 0:
            raise ValueError("f01 must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not self.t1 > 0:
            raise ValueError("t1 must be positive")
        if not 0 < self.t2_echo <= 2 * self.t1:
            raise ValueError("t2_echo must satisfy 0 < t2_echo <= 2*t1")
        if not 0 < self.t2_ramsey <= self.t2_echo:
            raise ValueError("t2_ramsey must satisfy 0 < t2_ramsey <= t2_echo")
        if len(self.epsilon) != self.levels:
            raise ValueError(f"epsilon needs {self.levels} entries, got {len(self.epsilon)}")
        if not all(math.isfinite(e) for e in self.epsilon):
            raise ValueError("epsilon entries must be finite")
        d10 = abs(self.epsilon[1] - self.epsilon[0])
        if not math.isclose(d10, abs(self.eps10), rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"|eps_1 - eps_0| = {d10} does not match eps10 = {self.eps10}")

    @property
    def eps10_signed(self) -> float:
        return self.epsilon[1] - self.epsilon[0]

    def with_levels(self, levels: int) -> "TransmonParams":
        return TransmonParams(
            f01=self.f01, eta=self.eta, eps10=self.eps10, eps10_sign=self.eps10_sign,
            t1=self.t1, t2_echo=self.t2_echo, t2_ramsey=self.t2_ramsey, levels=levels,
        )

    def replace(self, **changes) -> "TransmonParams":
        d = dict(
            f01=self.f01, eta=self.eta, eps10=self.eps10, eps10_sign=self.eps10_sign,
            t1=self.t1, t2_echo=self.t2_echo, t2_ramsey=self.t2_ramsey, levels=self.levels,
        )
        d.update(changes)
        if "epsilon" not in changes and not ({"levels", "eps10", "eps10_sign", "f01", "eta"} & set(changes)):
            d["epsilon"] = self.epsilon
        return TransmonParams(**d)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def destroy(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


def number(levels: int) -> np.ndarray:
    return np.diag(np.arange(levels, dtype=float)).astype(complex)


def basis(levels: int, k: int) -> np.ndarray:
    v = np.zeros(levels, dtype=complex)
    v[k] = 1.0
    return v


def level_energies(params: TransmonParams) -> np.ndarray:
    """Bare level frequencies in GHz: k*f01 - (eta/2) k(k-1)."""
    k = np.arange(params.levels, dtype=float)
    return k * params.f01 - 0.5 * params.eta * k * (k - 1)


def build_static_hamiltonian(params: TransmonParams, frame_frequency: float = 0.0) -> np.ndarray:
    """Diagonal static Hamiltonian in rad/ns.

    ``frame_frequency`` (GHz) moves to the frame rotating at that frequency,
    subtracting k*frame_frequency from level k.
    """
    if params.levels < 2:
        raise ValueError("need at least two levels")
    k = np.arange(params.levels, dtype=float)
    return np.diag(TWO_PI * (level_energies(params) - k * frame_frequency)).astype(complex)


def parity_factor(ng, parity) -> np.ndarray:
    """cos(2 pi (ng + (P - 1)/4)); vectorised over ng."""
    return np.cos(TWO_PI * (np.asarray(ng, dtype=float) + (int(parity) - 1) / 4.0))


def dispersion_term(params: TransmonParams, ng: float, parity: ParityLabel) -> np.ndarray:
    eps_ghz = np.asarray(params.epsilon) * 1e-3
    return np.diag(-0.5 * TWO_PI * eps_ghz * parity_factor(ng, parity)).astype(complex)


def parity_frequency(params: TransmonParams, ng, parity: ParityLabel):
    """0-1 transition frequency (GHz) for the given offset charge and parity."""
    shift = -0.5 * params.eps10_signed * 1e-3 * parity_factor(ng, parity)
    return params.f01 + shift


def parity_detuning(params: TransmonParams, ng, parity: ParityLabel):
    """Parity-dependent shift of the 0-1 frequency from f01, in GHz."""
    return -0.5 * params.eps10_signed * 1e-3 * parity_factor(ng, parity)


def dephasing_rate(params: TransmonParams, dephasing_source: str = "echo") -> float:
    """Pure-dephasing rate 1/T2 - 1/(2 T1) in 1/µs."""
    t2 = _select_t2(params, dephasing_source)
    gphi = 1.0 / t2 - 1.0 / (2.0 * params.t1)
    if gphi < -1e-15:
        raise ValueError(f"T2 = {t2} us exceeds 2*T1 = {2 * params.t1} us")
    return max(gphi, 0.0)


def _select_t2(params, source):
    if source == "echo":
        return params.t2_echo
    if source == "ramsey":
        return params.t2_ramsey
    raise ValueError(f"unknown dephasing source {source!r}")


def collapse_operators(params: TransmonParams, dephasing_source: str = "echo") -> list:
    """Relaxation sqrt(1/T1) a and dephasing sqrt(2 Gamma_phi) a^dag a, in ns^-1/2."""
    gphi = dephasing_rate(params, dephasing_source) * 1e-3
    gamma1 = 0.0 if math.isinf(params.t1) else 1.0 / (params.t1 * 1e3)
    a = destroy(params.levels)
    return [math.sqrt(gamma1) * a, math.sqrt(2.0 * gphi) * number(params.levels)]


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-9) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -pos_tol:
        raise ValueError("density matrix is not positive semidefinite")


def state_fidelity(rho, target_pure) -> float:
    """<psi|rho|psi> for a normalized pure target."""
    rho = np.asarray(rho)
    psi = np.asarray(target_pure, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs target {psi.size}")
    if not math.isclose(np.vdot(psi, psi).real, 1.0, abs_tol=1e-9):
        raise ValueError("target state is not normalized")
    f = np.vdot(psi, rho @ psi).real
    return float(min(max(f, 0.0), 1.0))


def bloch_vector(rho) -> np.ndarray:
    """(x, y, z) of the 0-1 block, with z = P0 - P1."""
    r = np.asarray(rho)
    return np.array([2 * r[0, 1].real, -2 * r[0, 1].imag, (r[0, 0] - r[1, 1]).real])


# ---------------------------------------------------------------------------
# Time evolution
# ---------------------------------------------------------------------------


def _n_steps(t_span, dt):
    t0, t1 = t_span
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    n = int(round((t1 - t0) / dt))
    if not math.isclose(n * dt, t1 - t0, rel_tol=1e-9, abs_tol=1e-9):
        n = int(math.ceil((t1 - t0) / dt))
    return max(n, 0)


def sample_hamiltonian(h_of_t: Callable, t_span, dt: float) -> np.ndarray:
    """Evaluate H on the RK4 half-step grid; returns (2N+1, K, K).

    ``h_of_t`` may be vectorised (array of times -> (n, K, K)); scalar
    callables are evaluated point by point.
    """
    n = _n_steps(t_span, dt)
    step = (t_span[1] - t_span[0]) / n if n else dt
    times = t_span[0] + 0.5 * step * np.arange(2 * n + 1)
    try:
        hs = np.asarray(h_of_t(times))
        if hs.ndim == 3 and hs.shape[0] == times.size:
            return hs.astype(complex), step
    except (TypeError, ValueError):
        pass
    return np.array([h_of_t(float(t)) for t in times], dtype=complex), step


def lindblad_evolve(
    h_of_t: Callable,
    collapse: Sequence,
    rho0,
    t_span,
    dt: float = DEFAULT_DT,
    checkpoints: Sequence[float] = (),
    drift_tol: float = 1e-6,
):
    """Fixed-step RK4 integration of the Lindblad master equation.

    ``h_of_t`` returns H(t) in rad/ns. ``rho0`` may be a single K x K matrix
    or a batch (B, K, K). If ``checkpoints`` (times in ns) are given, returns
    ``(rho_final, rho_at_checkpoints)``; otherwise just ``rho_final``.
    """
    hs, step = sample_hamiltonian(h_of_t, t_span, dt)
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    rhos = rho0[None] if single else rho0
    ck_idx = np.array(
        [int(round((t - t_span[0]) / step)) if step > 0 else 0 for t in checkpoints], dtype=np.int64
    )
    order = np.argsort(ck_idx, kind="stable")
    final, rec = kernels.lindblad_rk4(hs, list(collapse), rhos, step, ck_idx[order])
    unsorted = np.empty_like(rec)
    unsorted[order] = rec

    traces = np.einsum("bii->b", final)
    in_traces = np.einsum("bii->b", rhos)
    drift = np.max(np.abs(traces - in_traces)) if traces.size else 0.0
    if not np.isfinite(drift) or drift > drift_tol:
        raise IntegrationError(
            f"trace drift {drift:.3e} exceeds {drift_tol:.1e}; reduce dt (currently {step} ns)"
        )
    if single:
        final = final[0]
        unsorted = unsorted[:, 0]
    if len(checkpoints):
        return final, unsorted
    return final


def unitary_evolve_piecewise(h_values, step: float) -> np.ndarray:
    """Product of exp(-i H_j step) for piecewise-constant H_j (matrix-exponential oracle)."""
    u = np.eye(h_values[0].shape[0], dtype=complex)
    for h in h_values:
        u = expm(-1j * h * step) @ u
    return u


def superoperator(h_of_t, collapse, t_span, levels, dt=DEFAULT_DT) -> np.ndarray:
    """Column-stacked superoperator S with vec(rho_out) = S vec(rho_in)."""
    k = levels
    basis_ops = np.zeros((k * k, k, k), dtype=complex)
    for col in range(k * k):
        i, j = col % k, col // k
        basis_ops[col, i, j] = 1.0
    hs, step = sample_hamiltonian(h_of_t, t_span, dt)
    out, _ = kernels.lindblad_rk4(hs, list(collapse), basis_ops, step)
    return np.stack([o.reshape(-1, order="F") for o in out], axis=1)
