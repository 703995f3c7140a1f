"""Compare the numba and numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both paths are called directly (the env flag only picks the default), so a
single process times both. The first numba call compiles (or loads the
on-disk cache) and is excluded from the timings.
"""

import argparse
import time

import numpy as np

from qpd_sim import kernels, pulses, qdyn
from qpd_sim._accel import HAS_NUMBA
from qpd_sim.cliffords import clifford_group


def lindblad_case():
    params = qdyn.TransmonParams()
    gate = pulses.GatePulseNetZero.build()
    seq = pulses.compile_echo_cpm(params, gate, pulses.MicrowavePulse(eta=params.eta))
    h = pulses.DrivenHamiltonian(params, seq, qdyn.ParityLabel.EVEN)
    hs, step = qdyn.sample_hamiltonian(h, (0.0, seq.duration), qdyn.DEFAULT_DT)
    cops = np.array(qdyn.collapse_operators(params), dtype=complex)
    rho = qdyn.pure_state(qdyn.basis(params.levels, 0))[None]
    ck = np.zeros(0, dtype=np.int64)
    return (np.ascontiguousarray(hs), cops, np.ascontiguousarray(rho), step, ck)


def ptm_case(depth=2000, seed=0):
    rng = np.random.default_rng(seed)
    ptms = np.ascontiguousarray(clifford_group().ptms)
    idx = rng.integers(0, 24, size=depth).astype(np.int64)
    return ptms, idx, np.array([1.0, 0.0, 0.0, 1.0])


def best_of(fn, args, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    cases = [
        ("lindblad_rk4 (EchoCPM, K=3, 28k steps)", kernels.lindblad_rk4_jit, kernels.lindblad_rk4_numpy,
         lindblad_case(), lambda o: o[0]),
        ("ptm_chain (depth 2000)", kernels.ptm_chain_jit, kernels.ptm_chain_numpy, ptm_case(), lambda o: o),
    ]
    print(f"{'kernel':44s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, jit, ref, case, pick in cases:
        t_np, o_np = best_of(ref, case, args.repeat)
        if HAS_NUMBA:
            jit(*case)  # compile / load cache
            t_nb, o_nb = best_of(jit, case, args.repeat)
            diff = float(np.max(np.abs(pick(o_nb) - pick(o_np))))
            print(f"{name:44s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:11.2e}")
        else:
            print(f"{name:44s} {t_np:10.4f} {'n/a':>10s}")


if __name__ == "__main__":
    main()
