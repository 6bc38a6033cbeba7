# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LSTM layer kernels.

Same contract as ``_lstm_py``: row-major float64 arrays, gates ordered
(input, forget, cell candidate, output), ``gates`` post-activation. Matrix
products go through BLAS dgemm on the row-major buffers by swapping operand
order (row-major C = A @ B is column-major C^T = B^T A^T).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    return 1.0 / (1.0 + exp(-z))


cdef inline void _gemm_rm(char* ta, char* tb, int m, int n, int k,
                          double* A, int lda, double* B, int ldb,
                          double beta, double* C, int ldc) noexcept nogil:
    # column-major call; callers pass operands already swapped
    cdef double one = 1.0
    dgemm(ta, tb, &m, &n, &k, &one, A, &lda, B, &ldb, &beta, C, &ldc)


def lstm_forward(const double[:, :, ::1] x, const double[:, ::1] h0,
                 const double[:, ::1] c0, const double[:, ::1] Wx,
                 const double[:, ::1] Wh, const double[::1] b):
    cdef int L = x.shape[0], B = x.shape[1], D = x.shape[2]
    cdef int H = h0.shape[1], G = 4 * H
    if Wx.shape[0] != D or Wx.shape[1] != G or Wh.shape[0] != H or Wh.shape[1] != G or b.shape[0] != G:
        raise ValueError("LSTM weight shapes do not match input/hidden sizes")
    hs_a = np.empty((L, B, H))
    cs_a = np.empty((L, B, H))
    gates_a = np.empty((L, B, G))
    cdef double[:, :, ::1] hs = hs_a
    cdef double[:, :, ::1] cs = cs_a
    cdef double[:, :, ::1] gates = gates_a
    cdef int t, n, j
    cdef double *hp
    cdef double *cp
    cdef double *z
    cdef double ig, fg, gg, og, c
    cdef char* NN = b"N"
    with nogil:
        for t in range(L):
            z = &gates[t, 0, 0]
            if t == 0:
                hp = <double*> &h0[0, 0]
                cp = <double*> &c0[0, 0]
            else:
                hp = &hs[t - 1, 0, 0]
                cp = &cs[t - 1, 0, 0]
            # z = x_t @ Wx; z += h_prev @ Wh
            _gemm_rm(NN, NN, G, B, D, <double*> &Wx[0, 0], G, <double*> &x[t, 0, 0], D, 0.0, z, G)
            _gemm_rm(NN, NN, G, B, H, <double*> &Wh[0, 0], G, hp, H, 1.0, z, G)
            for n in range(B):
                for j in range(H):
                    ig = _sigmoid(z[n * G + j] + b[j])
                    fg = _sigmoid(z[n * G + H + j] + b[H + j])
                    gg = tanh(z[n * G + 2 * H + j] + b[2 * H + j])
                    og = _sigmoid(z[n * G + 3 * H + j] + b[3 * H + j])
                    c = fg * cp[n * H + j] + ig * gg
                    cs[t, n, j] = c
                    hs[t, n, j] = og * tanh(c)
                    z[n * G + j] = ig
                    z[n * G + H + j] = fg
                    z[n * G + 2 * H + j] = gg
                    z[n * G + 3 * H + j] = og
    return hs_a, cs_a, gates_a


def lstm_backward(const double[:, :, ::1] x, const double[:, ::1] h0,
                  const double[:, ::1] c0, const double[:, ::1] Wx,
                  const double[:, ::1] Wh, const double[:, :, ::1] hs,
                  const double[:, :, ::1] cs, const double[:, :, ::1] gates,
                  const double[:, :, ::1] dhs):
    cdef int L = x.shape[0], B = x.shape[1], D = x.shape[2]
    cdef int H = h0.shape[1], G = 4 * H, LB = L * B
    dx_a = np.empty((L, B, D))
    dWx_a = np.zeros((D, G))
    dWh_a = np.zeros((H, G))
    dh_next_a = np.zeros((B, H))
    dc_next_a = np.zeros((B, H))
    dz_a = np.empty((L, B, G))
    hprev_a = np.empty((L, B, H))
    cdef double[:, :, ::1] dx = dx_a
    cdef double[:, ::1] dWx = dWx_a
    cdef double[:, ::1] dWh = dWh_a
    cdef double[:, ::1] dh_next = dh_next_a
    cdef double[:, ::1] dc_next = dc_next_a
    cdef double[:, :, ::1] dz = dz_a
    cdef double[:, :, ::1] hprev = hprev_a
    cdef int t, n, j
    cdef const double *cp
    cdef const double *gt
    cdef double ig, fg, gg, og, tc, dh, dc
    cdef char* NN = b"N"
    cdef char* TR = b"T"
    if L == 0:
        return dx_a, dWx_a, dWh_a, np.zeros(G)
    with nogil:
        for t in range(L - 1, -1, -1):
            if t == 0:
                cp = &c0[0, 0]
            else:
                cp = &cs[t - 1, 0, 0]
            gt = &gates[t, 0, 0]
            for n in range(B):
                for j in range(H):
                    ig = gt[n * G + j]
                    fg = gt[n * G + H + j]
                    gg = gt[n * G + 2 * H + j]
                    og = gt[n * G + 3 * H + j]
                    dh = dhs[t, n, j] + dh_next[n, j]
                    tc = tanh(cs[t, n, j])
                    dc = dc_next[n, j] + dh * og * (1.0 - tc * tc)
                    dz[t, n, j] = dc * gg * ig * (1.0 - ig)
                    dz[t, n, H + j] = dc * cp[n * H + j] * fg * (1.0 - fg)
                    dz[t, n, 2 * H + j] = dc * ig * (1.0 - gg * gg)
                    dz[t, n, 3 * H + j] = dh * tc * og * (1.0 - og)
                    dc_next[n, j] = dc * fg
            # dh_next = dz_t @ Wh^T
            _gemm_rm(TR, NN, H, B, G, <double*> &Wh[0, 0], G, &dz[t, 0, 0], G, 0.0, &dh_next[0, 0], H)
        for n in range(B):
            for j in range(H):
                hprev[0, n, j] = h0[n, j]
        for t in range(1, L):
            for n in range(B):
                for j in range(H):
                    hprev[t, n, j] = hs[t - 1, n, j]
        # weight gradients and dx over all steps at once:
        # dWx = X^T DZ ; dWh = Hprev^T DZ ; dx = DZ Wx^T
        _gemm_rm(NN, TR, G, D, LB, &dz[0, 0, 0], G, <double*> &x[0, 0, 0], D, 0.0, &dWx[0, 0], G)
        _gemm_rm(NN, TR, G, H, LB, &dz[0, 0, 0], G, &hprev[0, 0, 0], H, 0.0, &dWh[0, 0], G)
        _gemm_rm(TR, NN, D, LB, G, <double*> &Wx[0, 0], G, &dz[0, 0, 0], G, 0.0, &dx[0, 0, 0], D)
    db_a = dz_a.reshape(LB, G).sum(axis=0)
    return dx_a, dWx_a, dWh_a, db_a
