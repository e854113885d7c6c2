# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled GRU sequence kernels (forward and BPTT) on top of BLAS dgemm.

Contract is identical to ``_kernels_py``; the time loop and all
elementwise gate arithmetic run without touching the interpreter.
"""

import numpy as np
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

from ._kernels_py import _split

NAME = "compiled"


cdef inline void gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                      const double* A, int lda, const double* B, int ldb,
                      double beta, double* C, int ldc) noexcept nogil:
    # row-major C[m, n] = alpha * op(A) @ op(B) + beta * C
    cdef char ca = b'T' if ta else b'N'
    cdef char cb = b'T' if tb else b'N'
    if m == 0 or n == 0:
        return
    dgemm(&cb, &ca, &n, &m, &k, &alpha, <double*>B, &ldb, <double*>A, &lda, &beta, C, &ldc)


cdef inline double _sigmoid(double v) noexcept nogil:
    cdef double e
    if v >= 0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def gru_forward(x, h0, w_z, w_r, w_h):
    x = np.ascontiguousarray(x, dtype=np.float64)
    h0 = np.ascontiguousarray(h0, dtype=np.float64)
    cdef int T = x.shape[0], B = x.shape[1], n = x.shape[2]
    cdef int d = w_z.shape[0]
    w_x, w_zr, w_hh = _split(w_z, w_r, w_h, n)
    px_arr = np.empty((T, B, 3 * d))
    H_arr = np.empty((T, B, d))
    Z_arr = np.empty((T, B, d))
    R_arr = np.empty((T, B, d))
    C_arr = np.empty((T, B, d))
    bzr_arr = np.empty((B, 2 * d))
    bc_arr = np.empty((B, d))
    rh_arr = np.empty((B, d))
    if T == 0 or B == 0 or d == 0:
        return H_arr, (x, h0, w_x, w_zr, w_hh, H_arr, Z_arr, R_arr, C_arr)

    cdef double[:, :, ::1] px = px_arr
    cdef double[:, :, ::1] xv = x
    cdef double[:, ::1] wx = w_x
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, ::1] Z = Z_arr
    cdef double[:, :, ::1] R = R_arr
    cdef double[:, :, ::1] C = C_arr
    cdef double[:, ::1] bzr = bzr_arr
    cdef double[:, ::1] bc = bc_arr
    cdef double[:, ::1] rh = rh_arr
    cdef double[:, ::1] h0v = h0
    cdef double[:, ::1] wzr = w_zr
    cdef double[:, ::1] whh = w_hh
    cdef const double* hp
    cdef int t, b, k
    cdef double z, c, hv

    with nogil:
        for t in range(T):
            # per-step projection keeps each row independent of T
            if n > 0:
                gemm(False, False, B, 3 * d, n, 1.0, &xv[t, 0, 0], n, &wx[0, 0], 3 * d, 0.0, &px[t, 0, 0], 3 * d)
            else:
                for b in range(B):
                    for k in range(3 * d):
                        px[t, b, k] = 0.0
            hp = &h0v[0, 0] if t == 0 else &H[t - 1, 0, 0]
            for b in range(B):
                for k in range(2 * d):
                    bzr[b, k] = px[t, b, k]
            gemm(False, False, B, 2 * d, d, 1.0, hp, d, &wzr[0, 0], 2 * d, 1.0, &bzr[0, 0], 2 * d)
            for b in range(B):
                for k in range(d):
                    Z[t, b, k] = _sigmoid(bzr[b, k])
                    R[t, b, k] = _sigmoid(bzr[b, d + k])
                    rh[b, k] = R[t, b, k] * hp[b * d + k]
                    bc[b, k] = px[t, b, 2 * d + k]
            gemm(False, False, B, d, d, 1.0, &rh[0, 0], d, &whh[0, 0], d, 1.0, &bc[0, 0], d)
            for b in range(B):
                for k in range(d):
                    c = tanh(bc[b, k])
                    z = Z[t, b, k]
                    hv = hp[b * d + k]
                    C[t, b, k] = c
                    H[t, b, k] = (1.0 - z) * hv + z * c
    return H_arr, (x, h0, w_x, w_zr, w_hh, H_arr, Z_arr, R_arr, C_arr)


def gru_backward(dH_in, cache):
    x, h0, w_x, w_zr, w_hh, H_arr, Z_arr, R_arr, C_arr = cache
    cdef int T = x.shape[0], B = x.shape[1], n = x.shape[2]
    cdef int d = h0.shape[1]
    dH_arr = np.ascontiguousarray(dH_in, dtype=np.float64)
    dpx_arr = np.zeros((T, B, 3 * d))
    dwzr_arr = np.zeros((d, 2 * d))
    dwhh_arr = np.zeros((d, d))
    carry_arr = np.zeros((B, d))
    dh_arr = np.empty((B, d))
    dpzr_arr = np.empty((B, 2 * d))
    dpc_arr = np.empty((B, d))
    drh_arr = np.empty((B, d))
    rh_arr = np.empty((B, d))

    cdef double[:, :, ::1] dH = dH_arr
    cdef double[:, :, ::1] dpx = dpx_arr
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, ::1] Z = Z_arr
    cdef double[:, :, ::1] R = R_arr
    cdef double[:, :, ::1] C = C_arr
    cdef double[:, ::1] h0v = h0
    cdef double[:, ::1] wzr = w_zr
    cdef double[:, ::1] whh = w_hh
    cdef double[:, ::1] dwzr = dwzr_arr
    cdef double[:, ::1] dwhh = dwhh_arr
    cdef double[:, ::1] carry = carry_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dpzr = dpzr_arr
    cdef double[:, ::1] dpc = dpc_arr
    cdef double[:, ::1] drh = drh_arr
    cdef double[:, ::1] rh = rh_arr
    cdef const double* hp
    cdef int t, b, k
    cdef double z, r, c, g, hv

    if T > 0 and B > 0 and d > 0:
        with nogil:
            for t in range(T - 1, -1, -1):
                hp = &h0v[0, 0] if t == 0 else &H[t - 1, 0, 0]
                for b in range(B):
                    for k in range(d):
                        g = dH[t, b, k] + carry[b, k]
                        z = Z[t, b, k]
                        c = C[t, b, k]
                        hv = hp[b * d + k]
                        dh[b, k] = g
                        dpzr[b, k] = g * (c - hv) * z * (1.0 - z)
                        dpc[b, k] = g * z * (1.0 - c * c)
                        carry[b, k] = g * (1.0 - z)
                        rh[b, k] = R[t, b, k] * hv
                # drh = dpc @ whh.T ; dwhh += rh.T @ dpc
                gemm(False, True, B, d, d, 1.0, &dpc[0, 0], d, &whh[0, 0], d, 0.0, &drh[0, 0], d)
                gemm(True, False, d, d, B, 1.0, &rh[0, 0], d, &dpc[0, 0], d, 1.0, &dwhh[0, 0], d)
                for b in range(B):
                    for k in range(d):
                        r = R[t, b, k]
                        hv = hp[b * d + k]
                        dpzr[b, d + k] = drh[b, k] * hv * r * (1.0 - r)
                        carry[b, k] += drh[b, k] * r
                # carry += dpzr @ wzr.T ; dwzr += hp.T @ dpzr
                gemm(False, True, B, d, 2 * d, 1.0, &dpzr[0, 0], 2 * d, &wzr[0, 0], 2 * d, 1.0, &carry[0, 0], d)
                gemm(True, False, d, 2 * d, B, 1.0, hp, d, &dpzr[0, 0], 2 * d, 1.0, &dwzr[0, 0], 2 * d)
                for b in range(B):
                    for k in range(2 * d):
                        dpx[t, b, k] = dpzr[b, k]
                    for k in range(d):
                        dpx[t, b, 2 * d + k] = dpc[b, k]

    flat = dpx_arr.reshape(T * B, 3 * d)
    dx = (flat @ w_x.T).reshape(T, B, n)
    dw_x = x.reshape(T * B, n).T @ flat
    dw_z = np.concatenate([dw_x[:, :d], dwzr_arr[:, :d]], axis=0).T
    dw_r = np.concatenate([dw_x[:, d:2 * d], dwzr_arr[:, d:]], axis=0).T
    dw_h = np.concatenate([dw_x[:, 2 * d:], dwhh_arr], axis=0).T
    return dx, carry_arr, dw_z, dw_r, dw_h


# --------------------------------------------------------------------------
# gated split scans (see _kernels_py for the reference formulation)


def sbj_forward(bf_in, bh_in, rf_in, rh_in, uf_in, uh_in):
    cdef double[:, :, ::1] bf = np.ascontiguousarray(bf_in, dtype=np.float64)
    cdef double[:, :, ::1] bh = np.ascontiguousarray(bh_in, dtype=np.float64)
    cdef double[:, ::1] rf = np.ascontiguousarray(rf_in, dtype=np.float64)
    cdef double[:, ::1] rh = np.ascontiguousarray(rh_in, dtype=np.float64)
    uf_arr = np.ascontiguousarray(uf_in, dtype=np.float64)
    uh_arr = np.ascontiguousarray(uh_in, dtype=np.float64)
    cdef double[:, ::1] uf = uf_arr
    cdef double[:, ::1] uh = uh_arr
    cdef int L = bf.shape[0], B = bf.shape[1], d = bf.shape[2], K = rf.shape[0]
    O_arr = np.empty((L, B, d))
    F_arr = np.empty((L, K, B, d))
    C_arr = np.empty((L, K, B, d))
    cache = (O_arr, F_arr, C_arr, uf_arr, uh_arr, K)
    if L == 0 or B == 0 or d == 0:
        return O_arr, cache
    zero_arr = np.zeros((B, d))
    pf_arr = np.empty((B, d))
    ph_arr = np.empty((B, d))
    cdef double[:, :, ::1] O = O_arr
    cdef double[:, :, :, ::1] F = F_arr
    cdef double[:, :, :, ::1] C = C_arr
    cdef double[:, ::1] zero = zero_arr
    cdef double[:, ::1] pf = pf_arr
    cdef double[:, ::1] ph = ph_arr
    cdef const double* prev
    cdef int i, k, b, j
    cdef double f, c, p, acc, inv_k = 1.0 / K

    with nogil:
        for i in range(L):
            prev = &zero[0, 0] if i == 0 else &O[i - 1, 0, 0]
            gemm(False, True, B, d, d, 1.0, prev, d, &uf[0, 0], d, 0.0, &pf[0, 0], d)
            gemm(False, True, B, d, d, 1.0, prev, d, &uh[0, 0], d, 0.0, &ph[0, 0], d)
            for b in range(B):
                for j in range(d):
                    p = prev[b * d + j]
                    acc = 0.0
                    for k in range(K):
                        f = _sigmoid(bf[i, b, j] + pf[b, j] + rf[k, j])
                        c = tanh(bh[i, b, j] + ph[b, j] + rh[k, j])
                        F[i, k, b, j] = f
                        C[i, k, b, j] = c
                        acc += f * c + (1.0 - f) * p
                    O[i, b, j] = acc * inv_k
    return O_arr, cache


def sbj_backward(dO_in, cache):
    O_arr, F_arr, C_arr, uf_arr, uh_arr, K_obj = cache
    cdef int K = K_obj
    cdef int L = O_arr.shape[0], B = O_arr.shape[1], d = O_arr.shape[2]
    dbf_arr = np.zeros((L, B, d))
    dbh_arr = np.zeros((L, B, d))
    drf_arr = np.zeros((K, d))
    drh_arr = np.zeros((K, d))
    duf_arr = np.zeros((d, d))
    duh_arr = np.zeros((d, d))
    if L == 0 or B == 0 or d == 0:
        return dbf_arr, dbh_arr, drf_arr, drh_arr, duf_arr, duh_arr
    cdef double[:, :, ::1] dO = np.ascontiguousarray(dO_in, dtype=np.float64)
    cdef double[:, :, ::1] O = O_arr
    cdef double[:, :, :, ::1] F = F_arr
    cdef double[:, :, :, ::1] C = C_arr
    cdef double[:, ::1] uf = uf_arr
    cdef double[:, ::1] uh = uh_arr
    cdef double[:, :, ::1] dbf = dbf_arr
    cdef double[:, :, ::1] dbh = dbh_arr
    cdef double[:, ::1] drf = drf_arr
    cdef double[:, ::1] drh = drh_arr
    cdef double[:, ::1] duf = duf_arr
    cdef double[:, ::1] duh = duh_arr
    zero_arr = np.zeros((B, d))
    carry_arr = np.zeros((B, d))
    cdef double[:, ::1] zero = zero_arr
    cdef double[:, ::1] carry = carry_arr
    cdef const double* prev
    cdef int i, k, b, j
    cdef double g, f, c, p, dpf, dph, sf, sh, keep, inv_k = 1.0 / K

    with nogil:
        for i in range(L - 1, -1, -1):
            prev = &zero[0, 0] if i == 0 else &O[i - 1, 0, 0]
            for b in range(B):
                for j in range(d):
                    g = (dO[i, b, j] + carry[b, j]) * inv_k
                    p = prev[b * d + j]
                    sf = 0.0
                    sh = 0.0
                    keep = 0.0
                    for k in range(K):
                        f = F[i, k, b, j]
                        c = C[i, k, b, j]
                        dpf = g * (c - p) * f * (1.0 - f)
                        dph = g * f * (1.0 - c * c)
                        sf += dpf
                        sh += dph
                        drf[k, j] += dpf
                        drh[k, j] += dph
                        keep += 1.0 - f
                    dbf[i, b, j] = sf
                    dbh[i, b, j] = sh
                    carry[b, j] = g * keep
            gemm(False, False, B, d, d, 1.0, &dbf[i, 0, 0], d, &uf[0, 0], d, 1.0, &carry[0, 0], d)
            gemm(False, False, B, d, d, 1.0, &dbh[i, 0, 0], d, &uh[0, 0], d, 1.0, &carry[0, 0], d)
            gemm(True, False, d, d, B, 1.0, &dbf[i, 0, 0], d, prev, d, 1.0, &duf[0, 0], d)
            gemm(True, False, d, d, B, 1.0, &dbh[i, 0, 0], d, prev, d, 1.0, &duh[0, 0], d)
    return dbf_arr, dbh_arr, drf_arr, drh_arr, duf_arr, duh_arr


def split_forward(bf_in, bh_in, rf_in, rh_in, uf_in, uh_in):
    cdef double[:, :, ::1] bf = np.ascontiguousarray(bf_in, dtype=np.float64)
    cdef double[:, :, ::1] bh = np.ascontiguousarray(bh_in, dtype=np.float64)
    cdef double[:, ::1] rf = np.ascontiguousarray(rf_in, dtype=np.float64)
    cdef double[:, ::1] rh = np.ascontiguousarray(rh_in, dtype=np.float64)
    uf_arr = np.ascontiguousarray(uf_in, dtype=np.float64)
    uh_arr = np.ascontiguousarray(uh_in, dtype=np.float64)
    cdef double[:, ::1] uf = uf_arr
    cdef double[:, ::1] uh = uh_arr
    cdef int L = bf.shape[0], B = bf.shape[1], d = bf.shape[2], K = rf.shape[0]
    P_arr = np.empty((L, K, B, d))
    F_arr = np.empty((L, K, B, d))
    C_arr = np.empty((L, K, B, d))
    Fn_arr = np.empty((L, B, d))
    S_arr = np.empty((L, B, d))
    cache = (P_arr, F_arr, C_arr, Fn_arr, S_arr, uf_arr, uh_arr)
    if L == 0 or B == 0 or d == 0:
        return np.ascontiguousarray(P_arr.transpose(1, 0, 2, 3)), cache
    zero_arr = np.zeros((K, B, d))
    pf_arr = np.empty((K, B, d))
    ph_arr = np.empty((K, B, d))
    pm_arr = np.empty((B, d))
    pn_arr = np.empty((B, d))
    cdef double[:, :, :, ::1] P = P_arr
    cdef double[:, :, :, ::1] F = F_arr
    cdef double[:, :, :, ::1] C = C_arr
    cdef double[:, :, ::1] Fn = Fn_arr
    cdef double[:, :, ::1] S = S_arr
    cdef double[:, :, ::1] zero = zero_arr
    cdef double[:, :, ::1] pf = pf_arr
    cdef double[:, :, ::1] ph = ph_arr
    cdef double[:, ::1] pm = pm_arr
    cdef double[:, ::1] pn = pn_arr
    cdef const double* prev
    cdef int i, k, b, j, KB = K * B, BD = B * d
    cdef double f, fn, s, c, acc, inv_k = 1.0 / K
    cdef bint vanished = False

    with nogil:
        for i in range(L):
            prev = &zero[0, 0, 0] if i == 0 else &P[i - 1, 0, 0, 0]
            gemm(False, True, KB, d, d, 1.0, prev, d, &uf[0, 0], d, 0.0, &pf[0, 0, 0], d)
            gemm(False, True, KB, d, d, 1.0, prev, d, &uh[0, 0], d, 0.0, &ph[0, 0, 0], d)
            for b in range(B):
                for j in range(d):
                    acc = 0.0
                    for k in range(K):
                        acc += prev[k * BD + b * d + j]
                    pm[b, j] = acc * inv_k
            gemm(False, True, B, d, d, 1.0, &pm[0, 0], d, &uf[0, 0], d, 0.0, &pn[0, 0], d)
            for b in range(B):
                for j in range(d):
                    fn = _sigmoid(bf[i, b, j] + pn[b, j])
                    s = fn
                    for k in range(K):
                        f = _sigmoid(bf[i, b, j] + pf[k, b, j] + rf[k, j])
                        F[i, k, b, j] = f
                        s += f
                    if s == 0.0:
                        vanished = True
                    Fn[i, b, j] = fn
                    S[i, b, j] = s
                    for k in range(K):
                        c = tanh(bh[i, b, j] + ph[k, b, j] + rh[k, j])
                        C[i, k, b, j] = c
                        P[i, k, b, j] = (F[i, k, b, j] / s) * c + (fn / s) * prev[k * BD + b * d + j]
            if vanished:
                break
    if vanished:
        return None, None
    return np.ascontiguousarray(P_arr.transpose(1, 0, 2, 3)), cache


def split_backward(dOut_in, cache):
    P_arr, F_arr, C_arr, Fn_arr, S_arr, uf_arr, uh_arr = cache
    cdef int L = P_arr.shape[0], K = P_arr.shape[1], B = P_arr.shape[2], d = P_arr.shape[3]
    dbf_arr = np.zeros((L, B, d))
    dbh_arr = np.zeros((L, B, d))
    drf_arr = np.zeros((K, d))
    drh_arr = np.zeros((K, d))
    duf_arr = np.zeros((d, d))
    duh_arr = np.zeros((d, d))
    if L == 0 or B == 0 or d == 0:
        return dbf_arr, dbh_arr, drf_arr, drh_arr, duf_arr, duh_arr
    cdef double[:, :, :, ::1] dP = np.ascontiguousarray(np.transpose(dOut_in, (1, 0, 2, 3)), dtype=np.float64)
    cdef double[:, :, :, ::1] P = P_arr
    cdef double[:, :, :, ::1] F = F_arr
    cdef double[:, :, :, ::1] C = C_arr
    cdef double[:, :, ::1] Fn = Fn_arr
    cdef double[:, :, ::1] S = S_arr
    cdef double[:, ::1] uf = uf_arr
    cdef double[:, ::1] uh = uh_arr
    cdef double[:, :, ::1] dbf = dbf_arr
    cdef double[:, :, ::1] dbh = dbh_arr
    cdef double[:, ::1] drf = drf_arr
    cdef double[:, ::1] drh = drh_arr
    cdef double[:, ::1] duf = duf_arr
    cdef double[:, ::1] duh = duh_arr
    zero_arr = np.zeros((K, B, d))
    carry_arr = np.zeros((K, B, d))
    dn_arr = np.empty((K, B, d))
    dpf_arr = np.empty((K, B, d))
    dph_arr = np.empty((K, B, d))
    dpn_arr = np.empty((B, d))
    pm_arr = np.empty((B, d))
    tmp_arr = np.empty((B, d))
    cdef double[:, :, ::1] zero = zero_arr
    cdef double[:, :, ::1] carry = carry_arr
    cdef double[:, :, ::1] dn = dn_arr
    cdef double[:, :, ::1] dpf = dpf_arr
    cdef double[:, :, ::1] dph = dph_arr
    cdef double[:, ::1] dpn = dpn_arr
    cdef double[:, ::1] pm = pm_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef const double* prev
    cdef int i, k, b, j, KB = K * B, BD = B * d
    cdef double s, f, fn, c, p, gn, dgn, t, sf, sh, acc, v, inv_k = 1.0 / K

    with nogil:
        for i in range(L - 1, -1, -1):
            prev = &zero[0, 0, 0] if i == 0 else &P[i - 1, 0, 0, 0]
            for b in range(B):
                for j in range(d):
                    s = S[i, b, j]
                    fn = Fn[i, b, j]
                    gn = fn / s
                    dgn = 0.0
                    t = 0.0
                    acc = 0.0
                    for k in range(K):
                        v = dP[i, k, b, j] + carry[k, b, j]
                        dn[k, b, j] = v
                        p = prev[k * BD + b * d + j]
                        dgn += v * p
                        t += v * C[i, k, b, j] * F[i, k, b, j] / s
                        acc += p
                    pm[b, j] = acc * inv_k
                    t += dgn * gn
                    sf = 0.0
                    sh = 0.0
                    for k in range(K):
                        f = F[i, k, b, j]
                        c = C[i, k, b, j]
                        v = dn[k, b, j]
                        dpf[k, b, j] = (v * c - t) / s * f * (1.0 - f)
                        dph[k, b, j] = v * (f / s) * (1.0 - c * c)
                        sf += dpf[k, b, j]
                        sh += dph[k, b, j]
                        drf[k, j] += dpf[k, b, j]
                        drh[k, j] += dph[k, b, j]
                        carry[k, b, j] = v * gn
                    dpn[b, j] = (dgn - t) / s * fn * (1.0 - fn)
                    dbf[i, b, j] = sf + dpn[b, j]
                    dbh[i, b, j] = sh
            gemm(False, False, KB, d, d, 1.0, &dpf[0, 0, 0], d, &uf[0, 0], d, 1.0, &carry[0, 0, 0], d)
            gemm(False, False, KB, d, d, 1.0, &dph[0, 0, 0], d, &uh[0, 0], d, 1.0, &carry[0, 0, 0], d)
            gemm(False, False, B, d, d, inv_k, &dpn[0, 0], d, &uf[0, 0], d, 0.0, &tmp[0, 0], d)
            for k in range(K):
                for b in range(B):
                    for j in range(d):
                        carry[k, b, j] += tmp[b, j]
            gemm(True, False, d, d, KB, 1.0, &dpf[0, 0, 0], d, prev, d, 1.0, &duf[0, 0], d)
            gemm(True, False, d, d, B, 1.0, &dpn[0, 0], d, &pm[0, 0], d, 1.0, &duf[0, 0], d)
            gemm(True, False, d, d, KB, 1.0, &dph[0, 0, 0], d, prev, d, 1.0, &duh[0, 0], d)
    return dbf_arr, dbh_arr, drf_arr, drh_arr, duf_arr, duh_arr
