import math

import numpy as np
import pytest

from qpd_sim import calib, cliffords, pulses
from qpd_sim.parity import FidelityModel
from qpd_sim.qdyn import ParityLabel

GRID = np.linspace(0.0, 3.35, 101)


def _monitor_oracle(params, ng, delay):
    """Ramsey fringe of the charge monitor: precession at half the parity
    splitting between the centres of the two 30 ns pi/2 slots."""
    split = params.eps10 * 1e-3 * math.cos(2 * math.pi * ng)
    return 0.5 * (1 + math.cos(2 * math.pi * 0.5 * split * (delay + 30.0)))


# ---------------------------------------------------------------------------
# Sweep container and helpers
# ---------------------------------------------------------------------------


def test_sweep_result_validation():
    with pytest.raises(ValueError):
        calib.SweepResult([0, 1, 1], [0, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        calib.SweepResult([0, 1], [0, 1.5], [0, 0])
    with pytest.raises(ValueError):
        calib.SweepResult([0, 1], [0, 0, 0], [0, 0])
    r = calib.SweepResult([0, 1], [0.2, 0.4], [0.6, 0.8])
    assert np.allclose(r.population_mean, [0.4, 0.6])
    assert r.to_csv().splitlines() == ["axis,population_even,population_odd,population_mean",
                                       "0,0.2,0.6,0.4", "1,0.4,0.8,0.6"]


def test_crossings_and_maxima_helpers():
    x = np.linspace(0, 2 * math.pi, 201)
    assert calib.linear_crossings(x, np.cos(x)) == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-3)
    assert calib.local_maxima(x, np.sin(x) ** 2) == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-4)
    assert calib.local_maxima(x, np.zeros_like(x)) == []


# ---------------------------------------------------------------------------
# Degeneracy point
# ---------------------------------------------------------------------------


def test_charge_monitor_matches_oracle(params, mw):
    for ng in (0.0, 0.1, 0.2, 0.4, 0.63):
        seq = pulses.compile_charge_monitor(params, 800.0, ng0=ng, mw=mw)
        for p in calib.PARITIES:
            assert calib.excited_population(params, seq, p) == pytest.approx(
                _monitor_oracle(params, ng, 800.0), abs=1e-9)


def test_degeneracy_maxima(params):
    res = calib.find_degeneracy(params, GRID)
    assert res.extra["maxima_ng"] == pytest.approx([0.25, 0.75], abs=2e-3)
    assert res.population_mean.min() < 1e-3
    assert res.population_mean.max() > 0.999
    assert len(res.to_csv().splitlines()) == GRID.size + 1


def test_degeneracy_independent_of_delay(params):
    a = calib.find_degeneracy(params, GRID, delay=400.0).extra["maxima_ng"]
    b = calib.find_degeneracy(params, GRID, delay=1200.0).extra["maxima_ng"]
    assert a == pytest.approx(b, abs=2e-3)


def test_degeneracy_grid_precondition(params):
    with pytest.raises(ValueError):
        calib.find_degeneracy(params, np.linspace(0.0, 1.0, 21))


def test_offset_drift_filter(params):
    assert calib.check_offset_drift(params, GRID, 0.0, 0.05).accepted
    bad = calib.check_offset_drift(params, GRID, 0.0, 0.15)
    assert not bad.accepted
    assert abs(bad.shift_v) == pytest.approx(0.15, abs=0.01)


# ---------------------------------------------------------------------------
# Gate-pulse duration
# ---------------------------------------------------------------------------


def test_hard_edge_crossing_matches_theory(params):
    res = calib.calibrate_duration(params, np.arange(200.0, 220.0, 1.0), amplitude=0.25, sigma=1e-4)
    assert res.located[0] == pytest.approx(pulses.theoretical_duration(params), abs=0.1)


def test_erf_crossing_in_range(params):
    res = calib.calibrate_duration(params, np.arange(195.0, 235.0, 1.0))
    assert len(res.located) == 1
    cross = res.located[0]
    assert 210.0 <= cross <= 225.0
    # at the crossing both finals leave the parity-averaged population at one half
    i = int(np.argmin(np.abs(res.axis - cross)))
    assert res.population_mean[i] == pytest.approx([0.5, 0.5], abs=0.02)
    # with an equatorial final gate the parities are indistinguishable, and
    # the X/2 and -X/2 finals are mirror images of each other
    assert np.allclose(res.population_even, res.population_odd, atol=1e-9)
    assert np.allclose(res.population_mean.sum(axis=1), 1.0, atol=1e-9)
    header = res.to_csv().splitlines()[0]
    assert header.startswith("axis,population_even[X/2],population_odd[X/2]")


def test_duration_without_crossing_raises(params):
    with pytest.raises(calib.CalibrationError):
        calib.calibrate_duration(params, np.arange(150.0, 160.0, 2.0))


def test_duration_threads_match(params):
    grid = np.arange(210.0, 222.0, 2.0)
    a = calib.calibrate_duration(params, grid, threads=1)
    b = calib.calibrate_duration(params, grid, threads=3)
    assert a.to_csv() == b.to_csv()


# ---------------------------------------------------------------------------
# Interleaved-RB duration optimum
# ---------------------------------------------------------------------------


def test_pseudo_z_channels_ideal_at_crossing(params):
    cross = calib.calibrate_duration(params, np.arange(212.0, 224.0, 1.0)).located[0]
    pz = calib.pseudo_z_channels(params, cross, decoherence=False)
    z = cliffords.NAMED_CLIFFORDS["pseudo-Z"]
    for r in pz:
        assert cliffords.average_gate_fidelity_ptm(r, z) == pytest.approx(1.0, abs=1e-6)
    # away from delta = pi the two parities rotate in opposite directions
    off = calib.pseudo_z_channels(params, 190.0, decoherence=False)
    assert cliffords.average_gate_fidelity_ptm(off[0], z) < 0.99
    assert cliffords.average_gate_fidelity_ptm(off[0], z) == pytest.approx(
        cliffords.average_gate_fidelity_ptm(off[1], z), abs=1e-12)


def test_irb_duration_optimum_near_crossing(params):
    grid = np.arange(205.0, 231.0, 2.0)
    cross = calib.calibrate_duration(params, np.arange(205.0, 231.0, 1.0)).located[0]
    res = calib.optimize_duration_irb(params, grid, depth=50, n_sequences=10)
    assert abs(res.located[0] - cross) < 5.0
    clean = calib.optimize_duration_irb(params, grid, depth=50, n_sequences=10, decoherence=False)
    assert abs(clean.located[0] - cross) < 1.0
    assert clean.population_mean.max() > res.population_mean.max()


def test_irb_duration_reproducible(params):
    grid = np.array([211.0, 215.0, 219.0, 223.0])
    a = calib.optimize_duration_irb(params, grid, depth=10, n_sequences=4, seed=3, threads=1)
    b = calib.optimize_duration_irb(params, grid, depth=10, n_sequences=4, seed=3, threads=2)
    assert a.to_csv() == b.to_csv()


# ---------------------------------------------------------------------------
# Ramsey versus echo
# ---------------------------------------------------------------------------


def test_default_detuning_sigma(params):
    sigma = calib.default_detuning_sigma(params)
    # Gaussian free-induction decay exp(-(2 pi sigma t)^2 / 2) reaches 1/e at T2*
    t2_ns = params.t2_ramsey * 1e3
    assert math.exp(-0.5 * (2 * math.pi * sigma * t2_ns) ** 2) == pytest.approx(math.exp(-1))
    assert calib.QuasiStaticNoise(False).resolve(params) == 0.0
    with pytest.raises(ValueError):
        calib.QuasiStaticNoise(True, -1.0).resolve(params)


def test_mapping_contrast(params, gate, mw):
    echo = pulses.compile_echo_cpm(params, gate, mw)
    ram = pulses.compile_ramsey_cpm(params, gate, mw)
    det = np.array([0.0, 2e-4, -2e-4])
    ce = calib.mapping_contrast(params, echo, det)
    cr = calib.mapping_contrast(params, ram, det)
    assert ce.shape == (2, 3)
    assert ce[0, 0] > 0.9999 and ce[1, 0] < -0.9999
    # the echo is insensitive to a static detuning; Ramsey is not
    assert np.allclose(ce[:, 1:], ce[:, :1], atol=1e-9)
    assert np.all(np.abs(cr[:, 1:]) < np.abs(cr[:, :1]) - 1e-3)


SHORT = dict(tau_ms=0.4, dt_us=4.0, duration_s=2.0, segment_len=4096)


def test_ramsey_echo_identical_without_noise(params):
    r = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(False), calib.TraceConfig(seed=1, **SHORT))
    assert r.f_eff_ramsey == r.f_eff_echo
    assert r.detuning_sigma == 0.0


def test_echo_beats_ramsey_with_noise(params):
    cfg = calib.TraceConfig(seed=2, **SHORT)
    off = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(False), cfg)
    on = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(True, 2e-4), cfg)
    assert on.f_eff_echo == pytest.approx(off.f_eff_echo, abs=1e-6)
    assert on.f_eff_echo > on.f_eff_ramsey + 0.01
    rep = on.report()
    assert set(rep) >= {"f_eff_ramsey", "f_eff_echo", "tau_echo_ms"}


def test_ramsey_echo_deterministic(params):
    cfg = calib.TraceConfig(seed=5, fidelity=FidelityModel(0.99, 0.95, 0.99), **SHORT)
    a = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(True), cfg)
    b = calib.compare_ramsey_echo(params, calib.QuasiStaticNoise(True), cfg)
    assert a.report() == b.report()


# ---------------------------------------------------------------------------
# Parity mapping
# ---------------------------------------------------------------------------


def test_mapping_targets_and_checkpoints(params):
    res = calib.simulate_mapping(params)
    assert res.targets[ParityLabel.EVEN] == 0 and res.targets[ParityLabel.ODD] == 1
    rows = res.checkpoints_csv().splitlines()
    assert rows[0] == "parity,checkpoint,t_ns,x,y,z,x_ideal,y_ideal,z_ideal"
    assert len(rows) == 13
    for p in calib.PARITIES:
        assert np.allclose(res.bloch[p][0], [0, 0, 1])


def test_mapping_without_parity_phase_fails(params):
    res = calib.simulate_mapping(params, gate=pulses.GatePulseNetZero.build(amplitude=0.0),
                                 target_gate=pulses.GatePulseNetZero.build(), decoherence=False)
    assert res.average == pytest.approx(0.5, abs=0.01)
