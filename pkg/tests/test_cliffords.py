import itertools
import math
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpd_sim import cliffords as C
from qpd_sim.qdyn import ParityLabel


def _same_up_to_phase(u, v, tol=1e-10):
    return abs(abs(np.trace(u.conj().T @ v)) - 2.0) < tol


@pytest.fixture(scope="module")
def group():
    return C.clifford_group()


# ---------------------------------------------------------------------------
# Group structure
# ---------------------------------------------------------------------------


def test_group_size_and_identity(group):
    assert len(group) == 24
    assert any(_same_up_to_phase(e.unitary, np.eye(2)) for e in group.elements)


def test_closure_and_table(group):
    for a, b in itertools.product(range(24), repeat=2):
        prod = group[a].unitary @ group[b].unitary
        c = group.table[a, b]
        assert _same_up_to_phase(prod, group[c].unitary)


def test_inverses(group):
    ident = group.index_of(np.eye(2))
    for a in range(24):
        assert group.table[a, group.inverse[a]] == ident
        assert group.table[group.inverse[a], a] == ident


def test_decompositions_match(group):
    for e in group.elements:
        u = np.eye(2)
        for g in e.decomposition:
            u = C.PHYSICAL_GATES[g] @ u
        assert C.phase_distance(u, e.unitary) < 1e-10


def test_average_gate_count_against_brute_force(group):
    # independent oracle: shortest words over the physical gate set, by exhaustive enumeration
    names = list(C.PHYSICAL_GATES)
    best = {}
    for length in range(0, 4):
        for word in itertools.product(names, repeat=length):
            u = np.eye(2)
            for g in word:
                u = C.PHYSICAL_GATES[g] @ u
            for k, e in enumerate(group.elements):
                if _same_up_to_phase(u, e.unitary):
                    best.setdefault(k, length)
    assert len(best) == 24
    assert group.average_gate_count() == pytest.approx(sum(best.values()) / 24)
    assert group.average_gate_count() == pytest.approx(44 / 24)


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


@given(depth=st.integers(1, 60), seed=st.integers(0, 2**32 - 1))
def test_random_sequence_inverts(depth, seed):
    g = C.clifford_group()
    elems, rec = C.random_rb_sequence(depth, np.random.default_rng(seed))
    assert len(elems) == depth
    u = np.eye(2)
    for e in list(elems) + [rec]:
        u = g[e].unitary @ u
    assert _same_up_to_phase(u, np.eye(2))


@given(depth=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_interleaved_sequence_inverts(depth, seed):
    g = C.clifford_group()
    z = g.index_of(C.NAMED_CLIFFORDS["pseudo-Z"])
    elems, rec = C.random_rb_sequence(depth, np.random.default_rng(seed), interleaved=z)
    u = np.eye(2)
    for e in elems:
        u = g[z].unitary @ g[e].unitary @ u
    u = g[rec].unitary @ u
    assert _same_up_to_phase(u, np.eye(2))


def test_sequence_reproducible():
    a = C.random_rb_sequence(20, C.sequence_rng(5, 1, 2))
    b = C.random_rb_sequence(20, C.sequence_rng(5, 1, 2))
    assert list(a[0]) == list(b[0]) and a[1] == b[1]
    with pytest.raises(ValueError):
        C.random_rb_sequence(0, np.random.default_rng(0))


def test_single_element_recovery(group):
    elems, rec = C.random_rb_sequence(1, np.random.default_rng(3))
    assert rec == group.inverse[elems[0]]


# ---------------------------------------------------------------------------
# Channels and simulation
# ---------------------------------------------------------------------------


def test_ideal_survival_is_one():
    rng = np.random.default_rng(1)
    for m in (1, 10, 100):
        elems, rec = C.random_rb_sequence(m, rng)
        assert C.simulate_sequence(elems, rec, C.IdealChannels()) == pytest.approx(1.0, abs=1e-12)
    g = C.clifford_group()
    z = g.index_of(C.NAMED_CLIFFORDS["Z"])
    elems, rec = C.random_rb_sequence(25, rng, interleaved=z)
    assert C.simulate_sequence(elems, rec, C.IdealChannels(), "Z") == pytest.approx(1.0, abs=1e-12)


@given(keep=st.floats(0.9, 1.0), depth=st.integers(1, 200), seed=st.integers(0, 1000))
def test_depolarizing_closed_form(keep, depth, seed):
    elems, rec = C.random_rb_sequence(depth, np.random.default_rng(seed))
    ideal_rec = C.DepolarizingChannels(keep, noisy_recovery=False)
    assert C.simulate_sequence(elems, rec, ideal_rec) == pytest.approx(0.5 + 0.5 * keep**depth, abs=1e-12)
    noisy_rec = C.DepolarizingChannels(keep)
    assert C.simulate_sequence(elems, rec, noisy_rec) == pytest.approx(0.5 + 0.5 * keep ** (depth + 1), abs=1e-12)


def test_non_cptp_channel_rejected():
    with pytest.raises(C.ChannelError):
        C.check_channel(C.depolarizing_ptm(1.2))
    with pytest.raises(C.ChannelError):
        C.check_channel(np.diag([0.9, 1, 1, 1]))
    bad = {g: C.unitary_to_ptm(u) for g, u in C.PHYSICAL_GATES.items()}
    bad["X"] = C.depolarizing_ptm(-0.5) @ bad["X"]
    with pytest.raises(C.ChannelError):
        C.PhysicalGateChannels(bad)


def test_damping_channel_properties():
    r = C.damping_ptm(1.0, 80.0, 47.0)
    C.check_channel(r)
    # closed form for idling under T1/T2: (3 + 2 exp(-t/T2) + exp(-t/T1)) / 6
    f = C.average_gate_fidelity_ptm(r)
    assert f == pytest.approx((3 + 2 * math.exp(-1 / 47) + math.exp(-1 / 80)) / 6, abs=1e-14)


def test_ptm_round_trip():
    u = C.PHYSICAL_GATES["Y/2"]
    r = C.unitary_to_ptm(u)
    assert np.allclose(r @ r.T, np.eye(4))
    assert C.average_gate_fidelity_ptm(r, u) == pytest.approx(1.0)
    assert np.linalg.eigvalsh(C.ptm_to_choi(r)).min() > -1e-12


def test_rb_config_validation():
    with pytest.raises(ValueError):
        C.RbConfig([5, 3, 10])
    with pytest.raises(ValueError):
        C.RbConfig([1, 2, 3], n_sequences=0)
    with pytest.raises(ValueError):
        C.RbConfig([1, 2, 3], interleaved="T")


def test_run_rb_thread_independent():
    model = C.PhysicalGateChannels.analytic(0.03, 80.0, 47.0)
    cfg = C.RbConfig([1, 10, 50, 100], n_sequences=8, seed=11, shots=200)
    a = C.run_rb(cfg, model, threads=1)
    b = C.run_rb(cfg, model, threads=3)
    assert np.array_equal(a.survivals, b.survivals)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "depth,mean_survival,std,n"


def test_parity_pairs_share_one_draw():
    even = C.unitary_to_ptm(C.rz(0.3))
    odd = C.unitary_to_ptm(C.rz(-0.3))
    gates = {g: C.unitary_to_ptm(u) for g, u in C.PHYSICAL_GATES.items()}
    model = C.PhysicalGateChannels(gates, {"pseudo-Z": np.array([even, odd])})
    rng = np.random.default_rng(0)
    draws = [model.sample_parity(rng) for _ in range(200)]
    assert set(draws) == {0, 1}
    assert np.allclose(model.interleaved_ptm("pseudo-Z", 1), odd)


# ---------------------------------------------------------------------------
# Fitting and fidelities
# ---------------------------------------------------------------------------


def test_fit_exact_recovery():
    depths = np.array([1, 5, 10, 20, 50, 100, 200, 400])
    y = 0.5 * 0.998**depths + 0.5
    fit = C.fit_decay(depths, y)
    assert fit.decay == pytest.approx(0.998, abs=1e-9)
    assert fit.amplitude == pytest.approx(0.5, abs=1e-9)
    assert fit.offset == pytest.approx(0.5, abs=1e-9)
    lo, hi = fit.ci("decay")
    assert lo <= fit.decay <= hi
    with pytest.raises(ValueError):
        C.fit_decay([1, 1, 2], [0.9, 0.9, 0.8])


def test_fit_depolarizing_monte_carlo():
    cfg = C.RbConfig([1, 10, 25, 50, 100, 200, 400, 800], n_sequences=30, seed=2, shots=500)
    res = C.run_rb(cfg, C.DepolarizingChannels(0.9992))
    assert res.fit.decay == pytest.approx(0.9992, abs=2e-4)


def test_interleaving_ideal_gate_leaves_p_unchanged():
    model = C.DepolarizingChannels(0.998)
    depths = [1, 10, 50, 100, 200]
    ref = C.run_rb(C.RbConfig(depths, 5, 0), model)
    inter = C.run_rb(C.RbConfig(depths, 5, 0, "X/2"), model)
    assert inter.fit.decay == pytest.approx(ref.fit.decay, abs=1e-9)
    assert C.irb_fidelity(inter.fit.decay, ref.fit.decay) == pytest.approx(1.0, abs=1e-9)


def test_fidelity_arithmetic():
    assert C.rb_fidelity(0.9992) == pytest.approx(0.9996)
    assert C.irb_fidelity(0.99, 0.99) == 1.0
    with pytest.warns(RuntimeWarning):
        C.irb_fidelity(0.999, 0.99)
    with pytest.raises(ValueError):
        C.rb_fidelity(0.0)
    # echoPA is half a pseudo-Z; the mapping chains echoPA with the two pi/2 pulses
    assert math.sqrt(0.9891) == pytest.approx(0.9945, abs=5e-5)
    assert round(math.sqrt(0.9891) * 0.9995 * 0.9997, 4) == 0.9937


# ---------------------------------------------------------------------------
# Pseudo-Z
# ---------------------------------------------------------------------------


def test_pseudo_z_at_pi():
    cert = C.ideal_pseudo_z(math.pi)
    assert cert.is_z and cert.parity_independent
    assert max(cert.distance_even, cert.distance_odd) < 1e-10


def test_pseudo_z_at_zero_is_identity():
    cert = C.ideal_pseudo_z(0.0)
    assert C.phase_distance(cert.even, np.eye(2)) < 1e-12
    assert C.phase_distance(cert.odd, np.eye(2)) < 1e-12


def test_pseudo_z_quarter_turn_is_parity_dependent():
    cert = C.ideal_pseudo_z(math.pi / 2)
    assert not cert.parity_independent
    assert C.phase_distance(cert.even, C.rz(-math.pi / 2)) < 1e-12
    assert C.phase_distance(cert.odd, C.rz(math.pi / 2)) < 1e-12


@given(delta=st.floats(-2 * math.pi, 2 * math.pi))
def test_echo_pa_pair_composes_to_rz(delta):
    for parity, sign in ((ParityLabel.EVEN, -1), (ParityLabel.ODD, 1)):
        u = C.echo_pa(delta, parity, prime=True) @ C.echo_pa(delta, parity)
        assert C.phase_distance(u, C.rz(sign * delta)) < 1e-10


def test_pseudo_z_with_ptms():
    pairs = []
    for parity in ParityLabel:
        pairs.append((C.unitary_to_ptm(C.echo_pa(math.pi, parity)),
                      C.unitary_to_ptm(C.echo_pa(math.pi, parity, prime=True))))
    cert = C.pseudo_z(*pairs)
    assert cert.is_z and cert.parity_independent


@pytest.mark.slow
def test_lindblad_pseudo_z_irb(params, mw, gate):
    model = C.PhysicalGateChannels.lindblad(params, mw, gate)
    assert "pseudo-Z" in model.interleaved
    depths = [1, 5, 10, 20, 40, 60, 80, 100]
    ref = C.run_rb(C.RbConfig(depths, 30, 1), model)
    inter = C.run_rb(C.RbConfig(depths, 30, 1, "pseudo-Z"), model)
    assert C.rb_fidelity(ref.fit.decay) > 0.999
    assert 0.986 <= C.irb_fidelity(inter.fit.decay, ref.fit.decay) <= 0.992
