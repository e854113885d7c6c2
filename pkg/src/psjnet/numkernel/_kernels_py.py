"""Pure-numpy reference for the hot recurrent kernels.

Same contract as the compiled ``_kernels_ext`` module; used when the
extension is missing or ``PSJNET_BACKEND=python`` is set.
"""

import numpy as np
from scipy.special import expit

NAME = "python"


def _split(w_z, w_r, w_h, n):
    # row-convention blocks: x-part (n, 3d), h-part of z|r (d, 2d), h-part of candidate (d, d)
    w_x = np.ascontiguousarray(np.concatenate([w_z[:, :n], w_r[:, :n], w_h[:, :n]], axis=0).T)
    w_zr = np.ascontiguousarray(np.concatenate([w_z[:, n:], w_r[:, n:]], axis=0).T)
    w_hh = np.ascontiguousarray(w_h[:, n:].T)
    return w_x, w_zr, w_hh


def gru_forward(x, h0, w_z, w_r, w_h):
    T, B, n = x.shape
    d = w_z.shape[0]
    w_x, w_zr, w_hh = _split(w_z, w_r, w_h, n)
    # one projection per step: a flattened (T*B) gemm lets row results
    # depend on T, which breaks bit-exact causality
    px = np.empty((T, B, 3 * d))
    for t in range(T):
        px[t] = x[t] @ w_x
    H = np.empty((T, B, d))
    Z = np.empty((T, B, d))
    R = np.empty((T, B, d))
    C = np.empty((T, B, d))
    h = h0
    for t in range(T):
        zr = expit(px[t, :, : 2 * d] + h @ w_zr)
        z = zr[:, :d]
        r = zr[:, d:]
        c = np.tanh(px[t, :, 2 * d :] + (r * h) @ w_hh)
        h = (1.0 - z) * h + z * c
        H[t], Z[t], R[t], C[t] = h, z, r, c
    return H, (x, h0, w_x, w_zr, w_hh, H, Z, R, C)


def gru_backward(dH, cache):
    x, h0, w_x, w_zr, w_hh, H, Z, R, C = cache
    T, B, n = x.shape
    d = h0.shape[1]
    dpx = np.empty((T, B, 3 * d))
    dw_zr = np.zeros((d, 2 * d))
    dw_hh = np.zeros((d, d))
    carry = np.zeros((B, d))
    for t in range(T - 1, -1, -1):
        hp = H[t - 1] if t > 0 else h0
        z, r, c = Z[t], R[t], C[t]
        dh = dH[t] + carry
        dz = dh * (c - hp)
        dpc = dh * z * (1.0 - c * c)
        carry = dh * (1.0 - z)
        drh = dpc @ w_hh.T
        dw_hh += (r * hp).T @ dpc
        dpz = dz * z * (1.0 - z)
        dpr = drh * hp * r * (1.0 - r)
        carry += drh * r
        dpzr = np.concatenate([dpz, dpr], axis=1)
        carry += dpzr @ w_zr.T
        dw_zr += hp.T @ dpzr
        dpx[t, :, : 2 * d] = dpzr
        dpx[t, :, 2 * d :] = dpc
    flat = dpx.reshape(T * B, 3 * d)
    dx = (flat @ w_x.T).reshape(T, B, n)
    dw_x = x.reshape(T * B, n).T @ flat
    dw_z = np.concatenate([dw_x[:, :d], dw_zr[:, :d]], axis=0).T
    dw_r = np.concatenate([dw_x[:, d : 2 * d], dw_zr[:, d:]], axis=0).T
    dw_h = np.concatenate([dw_x[:, 2 * d :], dw_hh], axis=0).T
    return dx, carry, dw_z, dw_r, dw_h


# --------------------------------------------------------------------------
# gated split scans
#
# Shared inputs: bf, bh (L, B, d) recurrence-free gate/candidate terms;
# rf, rh (K, d) role terms; uf, uh (d, d) recurrent weights (column
# orientation, applied as prev @ u.T).


def sbj_forward(bf, bh, rf, rh, uf, uh):
    """Averaged split-by-join scan; returns outputs (L, B, d) and a cache."""
    L, B, d = bf.shape
    K = rf.shape[0]
    O = np.empty((L, B, d))
    F = np.empty((L, K, B, d))
    C = np.empty((L, K, B, d))
    prev = np.zeros((B, d))
    for i in range(L):
        f = expit((bf[i] + prev @ uf.T)[None] + rf[:, None])
        c = np.tanh((bh[i] + prev @ uh.T)[None] + rh[:, None])
        prev = (f * c + (1.0 - f) * prev).mean(axis=0)
        O[i], F[i], C[i] = prev, f, c
    return O, (O, F, C, uf, uh, K)


def sbj_backward(dO, cache):
    O, F, C, uf, uh, K = cache
    L, B, d = O.shape
    dbf = np.empty((L, B, d))
    dbh = np.empty((L, B, d))
    drf = np.zeros((K, d))
    drh = np.zeros((K, d))
    duf = np.zeros((d, d))
    duh = np.zeros((d, d))
    carry = np.zeros((B, d))
    for i in range(L - 1, -1, -1):
        p = O[i - 1] if i > 0 else np.zeros((B, d))
        f, c = F[i], C[i]
        g = (dO[i] + carry) / K
        dpf = g * (c - p) * f * (1.0 - f)
        dph = g * f * (1.0 - c * c)
        sf = dpf.sum(axis=0)
        sh = dph.sum(axis=0)
        dbf[i], dbh[i] = sf, sh
        drf += dpf.sum(axis=1)
        drh += dph.sum(axis=1)
        duf += sf.T @ p
        duh += sh.T @ p
        carry = g * (1.0 - f).sum(axis=0) + sf @ uf + sh @ uh
    return dbf, dbh, drf, drh, duf, duh


def split_forward(bf, bh, rf, rh, uf, uh):
    """Normalised per-role split scan; returns outputs (K, L, B, d) and a cache."""
    L, B, d = bf.shape
    K = rf.shape[0]
    P = np.empty((L, K, B, d))
    F = np.empty((L, K, B, d))
    C = np.empty((L, K, B, d))
    Fn = np.empty((L, B, d))
    S = np.empty((L, B, d))
    prev = np.zeros((K, B, d))
    for i in range(L):
        f = expit(bf[i][None] + prev @ uf.T + rf[:, None])
        fn = expit(bf[i] + prev.mean(axis=0) @ uf.T)
        s = f.sum(axis=0) + fn
        if np.any(s == 0.0):
            return None, None
        c = np.tanh(bh[i][None] + prev @ uh.T + rh[:, None])
        prev = (f / s) * c + (fn / s) * prev
        P[i], F[i], C[i], Fn[i], S[i] = prev, f, c, fn, s
    out = np.ascontiguousarray(P.transpose(1, 0, 2, 3))
    return out, (P, F, C, Fn, S, uf, uh)


def split_backward(dOut, cache):
    P, F, C, Fn, S, uf, uh = cache
    L, K, B, d = P.shape
    dP_all = np.ascontiguousarray(np.transpose(dOut, (1, 0, 2, 3)))
    dbf = np.empty((L, B, d))
    dbh = np.empty((L, B, d))
    drf = np.zeros((K, d))
    drh = np.zeros((K, d))
    duf = np.zeros((d, d))
    duh = np.zeros((d, d))
    carry = np.zeros((K, B, d))
    for i in range(L - 1, -1, -1):
        p = P[i - 1] if i > 0 else np.zeros((K, B, d))
        f, c, fn, s = F[i], C[i], Fn[i], S[i]
        g, gn = f / s, fn / s
        dn = dP_all[i] + carry
        dg = dn * c
        dgn = (dn * p).sum(axis=0)
        t = (dg * g).sum(axis=0) + dgn * gn
        dpf = (dg - t) / s * f * (1.0 - f)
        dpn = (dgn - t) / s * fn * (1.0 - fn)
        dph = dn * g * (1.0 - c * c)
        dbf[i] = dpf.sum(axis=0) + dpn
        dbh[i] = dph.sum(axis=0)
        drf += dpf.sum(axis=1)
        drh += dph.sum(axis=1)
        pm = p.mean(axis=0)
        duf += np.einsum("kbi,kbj->ij", dpf, p) + dpn.T @ pm
        duh += np.einsum("kbi,kbj->ij", dph, p)
        carry = dn * gn + dpf @ uf + (dpn @ uf)[None] / K + dph @ uh
    return dbf, dbh, drf, drh, duf, duh
