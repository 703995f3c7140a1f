"""Single-qubit Clifford group, (interleaved) randomized benchmarking and
the pseudo-Z composition.

Channels are carried as real 4x4 Pauli transfer matrices (PTMs) in the
(I, X, Y, Z)/sqrt(2) basis; sequences are propagated with
:func:`qpd_sim.kernels.ptm_chain`.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from qpd_sim import kernels
from qpd_sim.pulses import rotation

logger = logging.getLogger(__name__)

PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

PHYSICAL_GATES = {
    "X/2": rotation(math.pi / 2, 0.0),
    "-X/2": rotation(-math.pi / 2, 0.0),
    "Y/2": rotation(math.pi / 2, math.pi / 2),
    "-Y/2": rotation(-math.pi / 2, math.pi / 2),
    "X": rotation(math.pi, 0.0),
    "Y": rotation(math.pi, math.pi / 2),
}


class ChannelError(ValueError):
    """A channel failed the complete-positivity / trace-preservation check."""


# ---------------------------------------------------------------------------
# Unitary / PTM helpers
# ---------------------------------------------------------------------------


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rx(theta: float) -> np.ndarray:
    return rotation(theta, 0.0)


def phase_distance(u, v) -> float:
    """min over phi of ||u - e^{i phi} v||_F."""
    u = np.asarray(u)
    v = np.asarray(v)
    ov = np.trace(v.conj().T @ u)
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.linalg.norm(u - ph * v))


def _canonical_key(u, decimals=8):
    flat = u.reshape(-1)
    k = int(np.argmax(np.abs(flat) > 1e-6))
    v = flat * (abs(flat[k]) / flat[k])
    v = np.round(v, decimals) + 0.0
    return tuple(np.round(v.real, decimals)) + tuple(np.round(v.imag, decimals))


def unitary_to_ptm(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    r = np.empty((4, 4))
    for i, pi in enumerate(PAULIS):
        for j, pj in enumerate(PAULIS):
            r[i, j] = 0.5 * np.trace(pi @ u @ pj @ u.conj().T).real
    return r


def superop_to_ptm(s, levels: int = 2) -> np.ndarray:
    """PTM of the qubit block of a column-stacked K-level superoperator.

    Population leaking out of the 0/1 block is dropped, so the result may be
    slightly trace-decreasing.
    """
    s = np.asarray(s)
    k = levels
    r = np.empty((4, 4))
    for j, pj in enumerate(PAULIS):
        rho_in = np.zeros((k, k), dtype=complex)
        rho_in[:2, :2] = pj
        out = (s @ rho_in.reshape(-1, order="F")).reshape(k, k, order="F")[:2, :2]
        for i, pi in enumerate(PAULIS):
            r[i, j] = 0.5 * np.trace(pi @ out).real
    return r


def ptm_to_choi(r) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) Lambda(|i><j|) of a qubit PTM."""
    r = np.asarray(r)
    choi = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[a, b] = 1.0
            coeffs = np.array([np.trace(p @ e) for p in PAULIS]) / 2.0
            out_c = r @ coeffs  # Pauli coefficients are complex for non-Hermitian e
            out = sum(c * p for c, p in zip(out_c, PAULIS))
            choi[2 * a:2 * a + 2, 2 * b:2 * b + 2] = out
    return choi


def check_channel(r, tp_tol: float = 1e-6, cp_tol: float = 1e-9) -> None:
    """Raise :class:`ChannelError` unless ``r`` is CP and trace-preserving
    (trace-decreasing by less than ``tp_tol``)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (4, 4):
        raise ChannelError(f"PTM must be 4x4, got {r.shape}")
    if abs(r[0, 0] - 1.0) > tp_tol or np.max(np.abs(r[0, 1:])) > tp_tol:
        raise ChannelError(f"channel is not trace preserving (first row {r[0]})")
    ev = np.linalg.eigvalsh(ptm_to_choi(r))
    if ev.min() < -cp_tol:
        raise ChannelError(f"channel is not completely positive (min Choi eigenvalue {ev.min():.3e})")


def depolarizing_ptm(p: float) -> np.ndarray:
    return np.diag([1.0, p, p, p])


def damping_ptm(duration: float, t1: float, t2: float) -> np.ndarray:
    """Amplitude + phase damping for ``duration`` (same units as t1, t2)."""
    g1 = 0.0 if math.isinf(t1) else duration / t1
    e1 = math.exp(-g1)
    e2 = math.exp(-duration / t2) if not math.isinf(t2) else 1.0
    r = np.diag([1.0, e2, e2, e1])
    r[3, 0] = 1.0 - e1
    return r


def average_gate_fidelity_ptm(r, target_u=None) -> float:
    """Average gate fidelity of PTM ``r`` against unitary ``target_u``."""
    r = np.asarray(r)
    if target_u is not None:
        r = unitary_to_ptm(target_u).T @ r
    f_pro = np.trace(r) / 4.0
    return float((2.0 * f_pro + 1.0) / 3.0)


# ---------------------------------------------------------------------------
# The group
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CliffordElement:
    index: int
    unitary: np.ndarray = field(repr=False)
    decomposition: tuple

    @property
    def n_gates(self) -> int:
        return len(self.decomposition)


class CliffordGroup:
    """The 24 single-qubit Cliffords with minimal {±X/2, ±Y/2, X, Y}
    decompositions and a precomputed multiplication table.

    ``table[a, b]`` is the index of ``U_a @ U_b`` (apply b first).
    """

    def __init__(self):
        elements = []
        keys = {}
        start = np.eye(2, dtype=complex)
        keys[_canonical_key(start)] = 0
        elements.append((start, ()))
        queue = deque([(start, ())])
        names = list(PHYSICAL_GATES)
        while queue:
            u, word = queue.popleft()
            if len(word) >= 5:
                continue
            for g in names:
                v = PHYSICAL_GATES[g] @ u
                key = _canonical_key(v)
                if key not in keys:
                    keys[key] = len(elements)
                    elements.append((v, word + (g,)))
                    queue.append((v, word + (g,)))
        if len(elements) != 24:
            raise RuntimeError(f"expected 24 Cliffords, generated {len(elements)}")
        self._keys = keys
        self.elements = [CliffordElement(i, u, w) for i, (u, w) in enumerate(elements)]
        n = len(self.elements)
        self.table = np.empty((n, n), dtype=np.int64)
        for a in range(n):
            for b in range(n):
                self.table[a, b] = self.index_of(self.elements[a].unitary @ self.elements[b].unitary)
        self.inverse = np.array([int(np.where(self.table[a] == 0)[0][0]) for a in range(n)])
        self.ptms = np.array([unitary_to_ptm(e.unitary) for e in self.elements])

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, i) -> CliffordElement:
        return self.elements[i]

    def index_of(self, u) -> int:
        try:
            return self._keys[_canonical_key(np.asarray(u, dtype=complex))]
        except KeyError:
            raise ValueError("unitary is not a Clifford") from None

    def compose(self, indices: Sequence[int]) -> int:
        """Index of the product applying ``indices`` in order."""
        acc = 0
        for i in indices:
            acc = self.table[i, acc]
        return int(acc)

    def average_gate_count(self) -> float:
        return float(np.mean([e.n_gates for e in self.elements]))


@lru_cache(maxsize=1)
def clifford_group() -> CliffordGroup:
    return CliffordGroup()


NAMED_CLIFFORDS = {
    "X/2": PHYSICAL_GATES["X/2"],
    "Y/2": PHYSICAL_GATES["Y/2"],
    "pseudo-Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def random_rb_sequence(depth: int, rng: np.random.Generator, interleaved: Optional[int] = None):
    """``depth`` uniformly random Clifford indices and the recovery index.

    With ``interleaved`` (a Clifford index) the recovery also inverts the
    interleaved element inserted after each random Clifford.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    group = clifford_group()
    elements = rng.integers(0, len(group), size=depth)
    acc = 0
    for e in elements:
        acc = group.table[e, acc]
        if interleaved is not None:
            acc = group.table[interleaved, acc]
    return [int(e) for e in elements], int(group.inverse[acc])


# ---------------------------------------------------------------------------
# Channel models
# ---------------------------------------------------------------------------


class ChannelModel:
    """Supplies a PTM for every Clifford and for named interleaved gates.

    Models whose channels depend on the charge parity return a parity index
    from ``sample_parity``; the same index is passed to both lookups so a
    sequence sees one parity throughout.
    """

    noisy_recovery = True

    def sample_parity(self, rng=None) -> Optional[int]:
        return None

    def clifford_ptms(self, parity: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError

    def interleaved_ptm(self, name: str, parity: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError


class IdealChannels(ChannelModel):
    def clifford_ptms(self, parity=None):
        return clifford_group().ptms

    def interleaved_ptm(self, name, parity=None):
        return unitary_to_ptm(NAMED_CLIFFORDS[name])


class DepolarizingChannels(ChannelModel):
    """Each Clifford is followed by a depolarizing channel that keeps a
    fraction ``depolarizing`` of the Bloch vector.

    ``interleaved_depolarizing`` maps gate names to their own parameter
    (default: ideal interleaved gates).
    """

    def __init__(self, depolarizing: float, interleaved_depolarizing: Optional[dict] = None,
                 noisy_recovery: bool = True):
        if not 0.0 <= depolarizing <= 1.0:
            raise ValueError("depolarizing parameter must lie in [0, 1]")
        self.depolarizing = depolarizing
        self.interleaved_depolarizing = dict(interleaved_depolarizing or {})
        self.noisy_recovery = noisy_recovery
        self._ptms = np.array([depolarizing_ptm(depolarizing) @ r for r in clifford_group().ptms])

    def clifford_ptms(self, parity=None):
        return self._ptms

    def interleaved_ptm(self, name, parity=None):
        keep = self.interleaved_depolarizing.get(name, 1.0)
        return depolarizing_ptm(keep) @ unitary_to_ptm(NAMED_CLIFFORDS[name])


class PhysicalGateChannels(ChannelModel):
    """Cliffords compiled into physical gates, each with its own PTM.

    ``gate_ptms`` maps physical gate names to a PTM or to a pair of PTMs
    (even, odd parity). ``interleaved`` maps interleaved gate names the same
    way. When any pair is present each sequence draws a parity uniformly.
    """

    def __init__(self, gate_ptms: dict, interleaved: Optional[dict] = None, check: bool = True,
                 tp_tol: float = 1e-4):
        def load(v):
            arr = np.asarray(v, dtype=float)
            if check:
                for r in arr.reshape(-1, 4, 4):
                    check_channel(r, tp_tol=tp_tol)
            return arr

        self.gate_ptms = {k: load(v) for k, v in gate_ptms.items()}
        self.interleaved = {k: load(v) for k, v in (interleaved or {}).items()}
        self.parity_dependent = any(a.ndim == 3 for a in (*self.gate_ptms.values(), *self.interleaved.values()))
        group = clifford_group()
        sets = []
        for k in range(2 if self.parity_dependent else 1):
            ptms = []
            for e in group.elements:
                r = np.eye(4)
                for g in e.decomposition:
                    r = self._pick(self.gate_ptms[g], k) @ r
                ptms.append(r)
            sets.append(np.array(ptms))
        self._ptms = sets

    @staticmethod
    def _pick(arr, parity):
        if arr.ndim == 3:
            return arr[0 if parity is None else parity]
        return arr

    def sample_parity(self, rng=None):
        if not self.parity_dependent:
            return None
        return 0 if rng is None else int(rng.integers(0, 2))

    def clifford_ptms(self, parity=None):
        return self._ptms[parity or 0] if self.parity_dependent else self._ptms[0]

    def interleaved_ptm(self, name, parity=None):
        if name in self.interleaved:
            return self._pick(self.interleaved[name], parity)
        if name in self.gate_ptms:
            return self._pick(self.gate_ptms[name], parity)
        return unitary_to_ptm(NAMED_CLIFFORDS[name])

    @classmethod
    def analytic(cls, gate_time: float, t1: float, t2: float, interleaved: Optional[dict] = None):
        """Ideal rotations followed by T1/T2 damping over ``gate_time``."""
        damp = damping_ptm(gate_time, t1, t2)
        gates = {g: damp @ unitary_to_ptm(u) for g, u in PHYSICAL_GATES.items()}
        return cls(gates, interleaved)

    @classmethod
    def lindblad(cls, params, mw=None, gate=None, ng: Optional[float] = None, dt: float = 0.01,
                 dephasing_source: str = "echo") -> "PhysicalGateChannels":
        """Per-gate PTMs from the pulse-level master equation.

        Physical gates run at ``ng`` (default: the degeneracy point, where
        they are parity independent; elsewhere a per-parity pair is kept).
        With ``gate`` a :class:`~qpd_sim.pulses.GatePulseNetZero`, the
        pseudo-Z block is added as a per-parity interleaved channel.
        """
        from qpd_sim import pulses, qdyn
        from qpd_sim.qdyn import ParityLabel

        mw = mw or pulses.MicrowavePulse(eta=params.eta)
        collapse = qdyn.collapse_operators(params, dephasing_source)
        parities = (ParityLabel.EVEN, ParityLabel.ODD)

        def ptm_of(seq, parity, ng_override=None):
            h = pulses.DrivenHamiltonian(params, seq, parity, ng_override=ng_override)
            s = qdyn.superoperator(h, collapse, (0.0, seq.duration), params.levels, dt)
            return superop_to_ptm(s, params.levels)

        gates = {}
        for name in PHYSICAL_GATES:
            seq = pulses.single_gate_sequence(name, mw)
            if ng is None or math.isclose(math.cos(2 * math.pi * ng), 0.0, abs_tol=1e-12):
                gates[name] = ptm_of(seq, ParityLabel.EVEN, ng)
            else:
                gates[name] = np.array([ptm_of(seq, p, ng) for p in parities])
        inter = {}
        if gate is not None:
            seq = pulses.compile_pseudo_z(gate, mw)
            inter["pseudo-Z"] = np.array([ptm_of(seq, p) for p in parities])
        return cls(gates, inter)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

_R0 = np.array([1.0, 0.0, 0.0, 1.0])  # |0><0| in the normalized Pauli basis (times sqrt 2)


def simulate_sequence(elements: Sequence[int], recovery: int, channel_model: ChannelModel,
                      interleaved: Optional[str] = None, rng=None, shots: Optional[int] = None) -> float:
    """Probability of returning to |0> after the sequence."""
    parity = channel_model.sample_parity(rng)
    ptms = channel_model.clifford_ptms(parity)
    if interleaved is not None:
        inter = channel_model.interleaved_ptm(interleaved, parity)
        ptms = np.concatenate([ptms, inter[None]], axis=0)
        slot = len(ptms) - 1
    idx = []
    for e in elements:
        idx.append(e)
        if interleaved is not None:
            idx.append(slot)
    if channel_model.noisy_recovery:
        idx.append(recovery)
        r = kernels.ptm_chain(ptms, np.asarray(idx), _R0)
    else:
        r = kernels.ptm_chain(ptms, np.asarray(idx), _R0)
        r = clifford_group().ptms[recovery] @ r
    survival = float(np.clip(0.5 * (r[0] + r[3]), 0.0, 1.0))
    if shots:
        rng = rng if rng is not None else np.random.default_rng()
        survival = rng.binomial(shots, survival) / shots
    return survival


@dataclass
class RbConfig:
    depths: Sequence[int]
    n_sequences: int = 30
    seed: int = 0
    interleaved: Optional[str] = None
    shots: Optional[int] = None

    def __post_init__(self):
        d = list(self.depths)
        if not d or any(x < 1 for x in d):
            raise ValueError("depths must be positive integers")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("depths must be strictly increasing")
        if self.n_sequences < 1:
            raise ValueError("n_sequences must be >= 1")
        if self.interleaved is not None and self.interleaved not in NAMED_CLIFFORDS:
            raise ValueError(f"unknown interleaved gate {self.interleaved!r}")


def sequence_rng(seed: int, *key) -> np.random.Generator:
    """Independent stream for (master seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass
class RbResult:
    depths: np.ndarray
    survivals: np.ndarray  # (n_depths, n_sequences)
    fit: "DecayFit"
    interleaved: Optional[str] = None

    @property
    def mean(self):
        return self.survivals.mean(axis=1)

    @property
    def std(self):
        return self.survivals.std(axis=1, ddof=1) if self.survivals.shape[1] > 1 else np.zeros(len(self.depths))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "mean_survival", "std", "n"])
        for d, m, s in zip(self.depths, self.mean, self.std):
            w.writerow([int(d), f"{m:.12g}", f"{s:.12g}", self.survivals.shape[1]])
        return buf.getvalue()


def run_rb(config: RbConfig, channel_model: ChannelModel, threads: int = 1) -> RbResult:
    """Reference or interleaved RB; survivals are exact channel probabilities
    unless ``config.shots`` is set. Results do not depend on ``threads``."""
    group = clifford_group()
    inter_idx = group.index_of(NAMED_CLIFFORDS[config.interleaved]) if config.interleaved else None
    jobs = [(i, j, depth) for i, depth in enumerate(config.depths) for j in range(config.n_sequences)]

    def one(job):
        i, j, depth = job
        rng = sequence_rng(config.seed, i, j)
        elems, rec = random_rb_sequence(depth, rng, inter_idx)
        return simulate_sequence(elems, rec, channel_model, config.interleaved, rng, config.shots)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(one, jobs))
    else:
        vals = [one(job) for job in jobs]
    surv = np.array(vals).reshape(len(config.depths), config.n_sequences)
    depths = np.asarray(config.depths)
    fit = fit_decay(depths, surv)
    return RbResult(depths, surv, fit, config.interleaved)


# ---------------------------------------------------------------------------
# Fitting and fidelities
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    """Survival model amplitude * decay**depth + offset."""

    amplitude: float
    decay: float
    offset: float
    amplitude_err: float
    decay_err: float
    offset_err: float
    residual_norm: float
    converged: bool = True
    covariance: Optional[np.ndarray] = field(default=None, repr=False)

    def ci(self, name: str, z: float = 1.96):
        v, e = getattr(self, name), getattr(self, name + "_err")
        return (v - z * e, v + z * e)

    def report(self) -> dict:
        return {
            "amplitude": self.amplitude, "decay": self.decay, "offset": self.offset,
            "amplitude_ci": self.ci("amplitude"), "decay_ci": self.ci("decay"), "offset_ci": self.ci("offset"),
            "residual_norm": self.residual_norm, "converged": self.converged,
        }


def _decay(depth, amplitude, decay, offset):
    return amplitude * decay**depth + offset


def fit_decay(depths, survivals, sigma=None) -> DecayFit:
    """Least-squares fit of amplitude * decay**depth + offset.

    ``survivals`` is either one value per depth or an (n_depths, n_seq)
    array, in which case the per-depth means are fitted with standard errors
    as weights.
    """
    depths = np.asarray(depths, dtype=float)
    y = np.asarray(survivals, dtype=float)
    if y.ndim == 2:
        if sigma is None and y.shape[1] > 1:
            sem = y.std(axis=1, ddof=1) / math.sqrt(y.shape[1])
            sigma = sem if np.all(sem > 0) else None
        y = y.mean(axis=1)
    if len(np.unique(depths)) < 3:
        raise ValueError("need at least three distinct depths")
    offset0 = 0.5
    amp0 = y[0] - offset0
    shifted = y - offset0
    ok = shifted > 1e-12
    if ok.sum() >= 2:
        slope = np.polyfit(depths[ok], np.log(shifted[ok]), 1)[0]
        decay0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
    else:
        decay0 = 0.99
    if amp0 <= 0:
        amp0 = 0.5
    converged = True
    try:
        popt, pcov = curve_fit(
            _decay, depths, y, p0=(amp0, decay0, offset0), sigma=sigma, absolute_sigma=sigma is not None,
            bounds=([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf]), maxfev=20000,
            xtol=1e-15, ftol=1e-15, gtol=1e-15,
        )
    except RuntimeError as exc:
        logger.warning("decay fit did not converge: %s", exc)
        popt, pcov, converged = np.array([amp0, decay0, offset0]), np.full((3, 3), np.inf), False
    resid = y - _decay(depths, *popt)
    with np.errstate(invalid="ignore"):
        errs = np.sqrt(np.abs(np.diag(pcov)))
    if not np.all(np.isfinite(errs)):
        errs = np.where(np.isfinite(errs), errs, 0.0)
    return DecayFit(
        float(popt[0]), float(popt[1]), float(popt[2]),
        float(errs[0]), float(errs[1]), float(errs[2]),
        float(np.linalg.norm(resid)), converged, pcov,
    )


def rb_fidelity(decay_ref: float) -> float:
    """Average gate fidelity per Clifford from the reference decay."""
    if not 0 < decay_ref <= 1:
        raise ValueError("decay must lie in (0, 1]")
    return 1.0 - (1.0 - decay_ref) / 2.0


def irb_fidelity(decay_int: float, decay_ref: float) -> float:
    """Fidelity of the interleaved gate from the two decays."""
    if not (0 < decay_int <= 1 and 0 < decay_ref <= 1):
        raise ValueError("decay must lie in (0, 1]")
    if decay_int > decay_ref:
        warnings.warn("interleaved decay exceeds the reference: fidelity above 1 is unphysical",
                      RuntimeWarning, stacklevel=2)
    return 1.0 - (1.0 - decay_int / decay_ref) / 2.0


# ---------------------------------------------------------------------------
# echoPA / pseudo-Z
# ---------------------------------------------------------------------------


def echo_pa(delta: float, parity, prime: bool = False) -> np.ndarray:
    """R_Z(±delta/4) R_X(pi) R_Z(∓delta/4); '+' for even parity, flipped for
    the primed block (opposite gate-pulse sign)."""
    s = 1.0 if int(parity) < 0 else -1.0
    if prime:
        s = -s
    return rz(s * delta / 4) @ rx(math.pi) @ rz(-s * delta / 4)


@dataclass
class PseudoZCertificate:
    even: np.ndarray
    odd: np.ndarray
    distance_even: float  # to Z
    distance_odd: float
    parity_distance: float
    tol: float

    @property
    def parity_independent(self) -> bool:
        return self.parity_distance < self.tol

    @property
    def is_z(self) -> bool:
        return max(self.distance_even, self.distance_odd) < self.tol


def _compose(first, second):
    first = np.asarray(first)
    second = np.asarray(second)
    return second @ first


def _distance(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape == (2, 2):
        return phase_distance(a, b)
    return float(np.linalg.norm(a - b))


def pseudo_z(echo_pa_even, echo_pa_odd, tol: float = 1e-10) -> PseudoZCertificate:
    """Compose (echoPA, echoPA') pairs for each parity, echoPA applied first.

    Each argument is a pair of 2x2 unitaries or of 4x4 PTMs. The certificate
    reports the distance of each composition to Z and between parities.
    """
    even = _compose(*echo_pa_even)
    odd = _compose(*echo_pa_odd)
    z = NAMED_CLIFFORDS["Z"] if even.shape == (2, 2) else unitary_to_ptm(NAMED_CLIFFORDS["Z"])
    cert = PseudoZCertificate(even, odd, _distance(even, z), _distance(odd, z), _distance(even, odd), tol)
    if not cert.is_z:
        logger.info("pseudo-Z deviates from Z: distances %.3e / %.3e", cert.distance_even, cert.distance_odd)
    return cert


def ideal_pseudo_z(delta: float, tol: float = 1e-10) -> PseudoZCertificate:
    from qpd_sim.qdyn import ParityLabel

    pairs = [(echo_pa(delta, p), echo_pa(delta, p, prime=True)) for p in (ParityLabel.EVEN, ParityLabel.ODD)]
    return pseudo_z(pairs[0], pairs[1], tol)
