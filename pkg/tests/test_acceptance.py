"""Acceptance suite: one test per criterion, each printing a single
``ACCEPTANCE n PASS/FAIL`` line (repeated in the pytest terminal summary).

    pytest -m acceptance -v tests/test_acceptance.py
"""

import math
import time

import numpy as np
import pytest

from qpd_sim import calib, cliffords, parity, pulses, qdyn, spectral
from qpd_sim.qdyn import ParityLabel, TransmonParams

pytestmark = pytest.mark.acceptance

# tolerances and targets
MAPPING_BAND = (0.992, 0.995)
MAPPING_RUNTIME_S = 60.0
PSD_SEEDS = 10
PSD_F_EFF, PSD_F_EFF_TOL = 0.940, 0.01
PSD_TAU_MS, PSD_TAU_REL = 30.2, 0.10
PSD_RUNTIME_S = 300.0
RB_DECAYS = (0.999, 0.9992, 0.998)
RB_SIGMAS = 3.0
PSEUDO_Z_TOL = 1e-10
RB_RUNTIME_S = 120.0
THEORY_NS = 209.7
ERF_WINDOW_NS = (210.0, 225.0)
DURATION_RUNTIME_S = 120.0
AUTOCORR_LAGS = (1, 10, 100)
AUTOCORR_SIGMAS = 3.0
WHITE_REL = 0.02
AUTOCORR_RUNTIME_S = 120.0
ECHO_SEEDS = 20
ECHO_WIN_FRACTION = 0.95
ECHO_OFF_SEEDS = 3
ECHO_RUNTIME_S = 300.0
HALVING_TOL = 1e-8
UNITARY_TOL = 1e-8


@pytest.fixture(scope="module")
def device():
    params = TransmonParams()
    return params, pulses.MicrowavePulse(eta=params.eta), pulses.GatePulseNetZero.build(0.2, 217.0, 5.0)


def test_1_mapping_fidelity(device, acceptance):
    params, mw, gate = device
    t0 = time.perf_counter()
    res = calib.simulate_mapping(params, gate, mw)
    elapsed = time.perf_counter() - t0
    ok = MAPPING_BAND[0] <= res.average <= MAPPING_BAND[1] and elapsed < MAPPING_RUNTIME_S
    acceptance(1, "mapping fidelity", ok,
               f"average {res.average:.5f} in [{MAPPING_BAND[0]}, {MAPPING_BAND[1]}], {elapsed:.1f} s")
    assert ok


def test_2_fidelity_arithmetic(acceptance):
    f_eff = parity.FidelityModel(0.995, 0.951, 0.9937).f_eff
    f_m = math.sqrt(0.9891) * 0.9995 * 0.9997
    ok = round(f_eff, 4) == 0.9400 and round(f_m, 4) == 0.9937
    acceptance(2, "fidelity arithmetic", ok, f"F_eff {f_eff:.6f} -> {round(f_eff, 4):.4f}, F_m {f_m:.6f} -> {round(f_m, 4):.4f}")
    assert ok


def test_3_psd_recovery(acceptance):
    fid = parity.FidelityModel(0.995, 0.951, 0.9937)
    model = parity.TunnelingModel.from_tau(PSD_TAU_MS)
    dt_us, n = 4.0, int(round(30.0 * 1e6 / 4.0))
    t0 = time.perf_counter()
    f_effs, taus = [], []
    for seed in range(PSD_SEEDS):
        ideal = parity.generate_ideal_segmented(model, dt_us, n, seed)
        meas = parity.measure_trace(ideal, fid, cliffords.sequence_rng(seed, 2))
        fit = spectral.fit_lorentzian(spectral.periodogram(meas), fid)
        f_effs.append(fit.f_eff_hat)
        taus.append(fit.tau_hat * 1e3)
    elapsed = time.perf_counter() - t0
    f_mean, tau_mean = float(np.mean(f_effs)), float(np.mean(taus))
    ok = (abs(f_mean - PSD_F_EFF) <= PSD_F_EFF_TOL and abs(tau_mean - PSD_TAU_MS) <= PSD_TAU_REL * PSD_TAU_MS
          and elapsed < PSD_RUNTIME_S)
    acceptance(3, "PSD recovery", ok,
               f"{PSD_SEEDS} seeds: F_eff {f_mean:.4f} (target {PSD_F_EFF} +- {PSD_F_EFF_TOL}), "
               f"tau {tau_mean:.2f} ms (target {PSD_TAU_MS} +- {PSD_TAU_REL:.0%}), {elapsed:.0f} s")
    assert ok


def test_4_rb_oracle(acceptance):
    t0 = time.perf_counter()
    depths = [1, 10, 25, 50, 100, 200, 400, 800]
    parts, ok = [], True
    for k, keep in enumerate(RB_DECAYS):
        res = cliffords.run_rb(cliffords.RbConfig(depths, 30, seed=100 + k, shots=1000),
                               cliffords.DepolarizingChannels(keep))
        z = abs(res.fit.decay - keep) / res.fit.decay_err
        ok &= z <= RB_SIGMAS
        parts.append(f"injected {keep}: fitted {res.fit.decay:.6f} ({z:.2f} sigma)")
    irb_same = cliffords.irb_fidelity(0.9992, 0.9992)
    cert = cliffords.ideal_pseudo_z(math.pi)
    dist = max(cert.distance_even, cert.distance_odd, cert.parity_distance)
    elapsed = time.perf_counter() - t0
    ok = ok and irb_same == 1.0 and dist < PSEUDO_Z_TOL and elapsed < RB_RUNTIME_S
    acceptance(4, "RB oracle", ok,
               "; ".join(parts) + f"; irb_fidelity(x, x)={irb_same!r}; pseudo-Z distance {dist:.1e}; {elapsed:.1f} s")
    assert ok


def test_5_duration_theory(device, acceptance):
    params, mw, _ = device
    t0 = time.perf_counter()
    theory = pulses.theoretical_duration(params)
    res = calib.calibrate_duration(params, np.arange(195.0, 235.0, 1.0), amplitude=0.2, sigma=5.0, mw=mw)
    elapsed = time.perf_counter() - t0
    cross = res.located[0]
    ok = (round(theory, 1) == THEORY_NS and len(res.located) == 1
          and ERF_WINDOW_NS[0] <= cross <= ERF_WINDOW_NS[1] and elapsed < DURATION_RUNTIME_S)
    acceptance(5, "duration theory", ok,
               f"analytic {theory:.2f} ns (target {THEORY_NS}), erf-edge crossing {cross:.2f} ns "
               f"in [{ERF_WINDOW_NS[0]:.0f}, {ERF_WINDOW_NS[1]:.0f}], {elapsed:.1f} s")
    assert ok


def test_6_autocorrelation_model(acceptance):
    t0 = time.perf_counter()
    settings = np.random.default_rng(2024)
    model = parity.TunnelingModel.from_tau(PSD_TAU_MS)
    dt_us, n, reps = 4.0, 1_000_000, 20
    lags = np.array(AUTOCORR_LAGS)
    parts, ok = [], True
    for k in range(3):
        fid = parity.FidelityModel(settings.uniform(0.9, 1.0), settings.uniform(0.85, 1.0), settings.uniform(0.9, 1.0))
        est = []
        for r in range(reps):
            rng = cliffords.sequence_rng(k, r)
            ideal = parity.generate_ideal(model, dt_us, n, rng)
            est.append(parity.empirical_autocorr(parity.measure_trace(ideal, fid, rng).samples, lags))
        est = np.array(est)
        se = est.std(axis=0, ddof=1) / math.sqrt(reps)
        expect = parity.analytic_autocorr(fid, model, lags * dt_us * 1e-3)
        z = np.abs(est.mean(axis=0) - expect) / se
        ok &= bool(np.all(z <= AUTOCORR_SIGMAS))
        parts.append(f"(F_g {fid.f_g:.3f}, F_e {fid.f_e:.3f}, F_m {fid.f_m:.3f}) max {z.max():.2f} sigma")
    white = np.random.default_rng(7).choice([-1.0, 1.0], size=1 << 21)
    dt_s = dt_us * 1e-6
    level = float(np.mean(spectral.periodogram(white, dt=dt_s).values))
    rel = abs(level / dt_s - 1)
    elapsed = time.perf_counter() - t0
    ok = ok and rel <= WHITE_REL and elapsed < AUTOCORR_RUNTIME_S
    acceptance(6, "autocorrelation model", ok,
               "; ".join(parts) + f"; white level off by {rel:.2%} (limit {WHITE_REL:.0%}); {elapsed:.0f} s")
    assert ok


def test_7_echo_beats_ramsey(device, acceptance):
    params, mw, gate = device
    t0 = time.perf_counter()
    wins = 0
    for seed in range(ECHO_SEEDS):
        r = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(True), calib.TraceConfig(seed=seed), gate, mw)
        wins += r.f_eff_echo > r.f_eff_ramsey
    agree = True
    worst = 0.0
    for seed in range(ECHO_OFF_SEEDS):
        r = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(False), calib.TraceConfig(seed=seed), gate, mw)
        err = math.hypot(r.fit_ramsey.errors["f_eff"], r.fit_echo.errors["f_eff"])
        z = abs(r.f_eff_echo - r.f_eff_ramsey) / err
        worst = max(worst, z)
        agree &= z <= 3.0
    elapsed = time.perf_counter() - t0
    ok = wins >= ECHO_WIN_FRACTION * ECHO_SEEDS and agree and elapsed < ECHO_RUNTIME_S
    acceptance(7, "echo beats Ramsey", ok,
               f"echo higher in {wins}/{ECHO_SEEDS} noisy runs (need {ECHO_WIN_FRACTION:.0%}); "
               f"noise-off difference at most {worst:.2f} sigma over {ECHO_OFF_SEEDS} seeds; {elapsed:.0f} s")
    assert ok


def test_8_numerical_hygiene(device, acceptance):
    params, mw, gate = device
    seq = pulses.compile_echo_cpm(params, gate, mw)
    collapse = qdyn.collapse_operators(params)
    times = np.linspace(0.0, seq.duration, 25)
    rho0 = qdyn.pure_state(qdyn.basis(params.levels, 0))
    # invariants at every checkpoint of both parities, with and without decoherence
    n_checked = 0
    invariants = True
    for p in ParityLabel:
        h = pulses.DrivenHamiltonian(params, seq, p)
        for cops in (collapse, []):
            _, states = qdyn.lindblad_evolve(h, cops, rho0, (0.0, seq.duration), checkpoints=times)
            for rho in states:
                try:
                    qdyn.check_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, pos_tol=1e-10)
                except ValueError:
                    invariants = False
                n_checked += 1
    h = pulses.DrivenHamiltonian(params, seq, ParityLabel.ODD)
    r1 = qdyn.lindblad_evolve(h, collapse, rho0, (0.0, seq.duration), qdyn.DEFAULT_DT)
    r2 = qdyn.lindblad_evolve(h, collapse, rho0, (0.0, seq.duration), qdyn.DEFAULT_DT / 2)
    halving = float(np.max(np.abs(r1 - r2)))
    t_end, step = 60.0, 0.002
    he = pulses.DrivenHamiltonian(params, seq, ParityLabel.EVEN)
    rho = qdyn.lindblad_evolve(he, [], rho0, (0.0, t_end))
    mids = (np.arange(int(round(t_end / step))) + 0.5) * step
    psi = qdyn.unitary_evolve_piecewise(he(mids), step) @ qdyn.basis(params.levels, 0)
    infid = 1 - qdyn.state_fidelity(rho, psi)
    ok = invariants and halving < HALVING_TOL and infid <= UNITARY_TOL
    acceptance(8, "numerical hygiene", ok,
               f"{n_checked} states valid={invariants}; dt-halving {halving:.1e} (< {HALVING_TOL:.0e}); "
               f"unitary-oracle infidelity {infid:.1e} (<= {UNITARY_TOL:.0e})")
    assert ok
