"""Hot inner loops: fixed-step RK4 Lindblad propagation and Pauli-transfer
matrix chains.

Each kernel has a numba version (``*_jit``) and a numpy version
(``*_numpy``). The public name points at whichever one
:data:`qpd_sim._accel.USE_NUMBA` selects.
"""

import numpy as np

from qpd_sim._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Lindblad RK4
# ---------------------------------------------------------------------------


@njit
def _lindblad_rhs_jit(h, cops, cdag, gsum, rho, out):
    k = rho.shape[0]
    for i in range(k):
        for j in range(k):
            acc = 0j
            for m in range(k):
                # -i[H, rho] - 1/2 {G, rho}
                acc += (-1j * h[i, m] - 0.5 * gsum[i, m]) * rho[m, j]
                acc += rho[i, m] * (1j * h[m, j] - 0.5 * gsum[m, j])
            out[i, j] = acc
    tmp = np.empty((k, k), dtype=np.complex128)
    for c in range(cops.shape[0]):
        for i in range(k):
            for j in range(k):
                acc = 0j
                for m in range(k):
                    acc += cops[c, i, m] * rho[m, j]
                tmp[i, j] = acc
        for i in range(k):
            for j in range(k):
                acc = 0j
                for m in range(k):
                    acc += tmp[i, m] * cdag[c, m, j]
                out[i, j] += acc


@njit
def lindblad_rk4_jit(hs, cops, rhos, dt, checkpoints):
    """Propagate a batch of density matrices.

    ``hs`` holds H sampled on the half-step grid, shape (2N+1, K, K);
    step n uses hs[2n], hs[2n+1], hs[2n+2]. ``checkpoints`` are step
    indices (0..N) at which the batch is recorded.
    """
    n_steps = (hs.shape[0] - 1) // 2
    nb, k = rhos.shape[0], rhos.shape[1]
    nc = cops.shape[0]
    cdag = np.empty_like(cops)
    gsum = np.zeros((k, k), dtype=np.complex128)
    for c in range(nc):
        for i in range(k):
            for j in range(k):
                cdag[c, i, j] = np.conj(cops[c, j, i])
        for i in range(k):
            for j in range(k):
                acc = 0j
                for m in range(k):
                    acc += cdag[c, i, m] * cops[c, m, j]
                gsum[i, j] += acc

    out = rhos.copy()
    rec = np.zeros((checkpoints.shape[0], nb, k, k), dtype=np.complex128)
    k1 = np.empty((k, k), dtype=np.complex128)
    k2 = np.empty((k, k), dtype=np.complex128)
    k3 = np.empty((k, k), dtype=np.complex128)
    k4 = np.empty((k, k), dtype=np.complex128)
    y = np.empty((k, k), dtype=np.complex128)
    half = 0.5 * dt
    sixth = dt / 6.0
    for b in range(nb):
        rho = out[b]
        ck = 0
        while ck < checkpoints.shape[0] and checkpoints[ck] == 0:
            rec[ck, b] = rho
            ck += 1
        for n in range(n_steps):
            h0 = hs[2 * n]
            h1 = hs[2 * n + 1]
            h2 = hs[2 * n + 2]
            _lindblad_rhs_jit(h0, cops, cdag, gsum, rho, k1)
            for i in range(k):
                for j in range(k):
                    y[i, j] = rho[i, j] + half * k1[i, j]
            _lindblad_rhs_jit(h1, cops, cdag, gsum, y, k2)
            for i in range(k):
                for j in range(k):
                    y[i, j] = rho[i, j] + half * k2[i, j]
            _lindblad_rhs_jit(h1, cops, cdag, gsum, y, k3)
            for i in range(k):
                for j in range(k):
                    y[i, j] = rho[i, j] + dt * k3[i, j]
            _lindblad_rhs_jit(h2, cops, cdag, gsum, y, k4)
            for i in range(k):
                for j in range(k):
                    rho[i, j] += sixth * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            while ck < checkpoints.shape[0] and checkpoints[ck] == n + 1:
                rec[ck, b] = rho
                ck += 1
    return out, rec


def lindblad_rk4_numpy(hs, cops, rhos, dt, checkpoints):
    n_steps = (hs.shape[0] - 1) // 2
    cdag = np.conj(np.transpose(cops, (0, 2, 1)))
    k = hs.shape[1]
    gsum = np.einsum("cij,cjk->ik", cdag, cops) if cops.shape[0] else np.zeros((k, k), complex)
    has_c = cops.shape[0] > 0

    def rhs(h, rho):
        a = -1j * h - 0.5 * gsum
        d = a @ rho + rho @ np.conj(a.T)
        if has_c:
            d = d + np.einsum("cij,bjk,ckl->bil", cops, rho, cdag, optimize=True)
        return d

    rho = np.array(rhos, dtype=np.complex128, copy=True)
    rec = np.zeros((len(checkpoints),) + rho.shape, dtype=np.complex128)
    ck = 0
    while ck < len(checkpoints) and checkpoints[ck] == 0:
        rec[ck] = rho
        ck += 1
    for n in range(n_steps):
        h0, h1, h2 = hs[2 * n], hs[2 * n + 1], hs[2 * n + 2]
        a1 = rhs(h0, rho)
        a2 = rhs(h1, rho + 0.5 * dt * a1)
        a3 = rhs(h1, rho + 0.5 * dt * a2)
        a4 = rhs(h2, rho + dt * a3)
        rho = rho + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        while ck < len(checkpoints) and checkpoints[ck] == n + 1:
            rec[ck] = rho
            ck += 1
    return rho, rec


def lindblad_rk4(hs, cops, rhos, dt, checkpoints=None):
    """Dispatching front end; see :func:`lindblad_rk4_jit` for the layout."""
    hs = np.ascontiguousarray(hs, dtype=np.complex128)
    k = hs.shape[1]
    cops = np.ascontiguousarray(
        np.reshape(cops, (-1, k, k)) if len(cops) else np.zeros((0, k, k)), dtype=np.complex128
    )
    rhos = np.ascontiguousarray(rhos, dtype=np.complex128)
    if checkpoints is None:
        checkpoints = np.zeros(0, dtype=np.int64)
    checkpoints = np.ascontiguousarray(np.sort(checkpoints), dtype=np.int64)
    if USE_NUMBA:
        return lindblad_rk4_jit(hs, cops, rhos, float(dt), checkpoints)
    return lindblad_rk4_numpy(hs, cops, rhos, float(dt), checkpoints)


# ---------------------------------------------------------------------------
# Pauli-transfer-matrix chains (RB)
# ---------------------------------------------------------------------------


@njit
def ptm_chain_jit(ptms, idx, r0):
    """Apply ptms[idx[0]], ptms[idx[1]], ... to the Pauli vector ``r0``."""
    r = r0.copy()
    tmp = np.empty(4)
    for n in range(idx.shape[0]):
        g = ptms[idx[n]]
        for i in range(4):
            acc = 0.0
            for j in range(4):
                acc += g[i, j] * r[j]
            tmp[i] = acc
        for i in range(4):
            r[i] = tmp[i]
    return r


def ptm_chain_numpy(ptms, idx, r0):
    r = np.array(r0, dtype=np.float64, copy=True)
    for i in idx:
        r = ptms[i] @ r
    return r


def ptm_chain(ptms, idx, r0):
    ptms = np.ascontiguousarray(ptms, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    r0 = np.ascontiguousarray(r0, dtype=np.float64)
    if USE_NUMBA:
        return ptm_chain_jit(ptms, idx, r0)
    return ptm_chain_numpy(ptms, idx, r0)
