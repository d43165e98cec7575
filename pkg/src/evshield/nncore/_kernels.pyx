# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled LSTM recurrence kernels.

Same call signatures and return layouts as :mod:`evshield.nncore._fallback`.
Gate buffers are kept contiguous per (t, n) row so the activation loops
vectorize against libmvec.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _gemm(const double* A, const double* B, double* C,
                       int m, int k, int n, double beta,
                       bint trans_a, bint trans_b) noexcept nogil:
    # Row-major C(m,n) = op(A) @ op(B) + beta*C, mapped onto column-major dgemm
    # as C^T = op(B)^T @ op(A)^T.
    cdef char ta = b'T' if trans_b else b'N'
    cdef char tb = b'T' if trans_a else b'N'
    cdef double one = 1.0
    cdef int lda = k if trans_b else n
    cdef int ldb = m if trans_a else k
    cdef int ldc = n
    dgemm(&ta, &tb, &n, &m, &k, &one, <double*>B, &lda, <double*>A, &ldb, &beta, C, &ldc)


cdef inline void _sigmoid(double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(n):
        z[k] = 1.0 / (1.0 + exp(-z[k]))


cdef inline void _tanh(double* z, Py_ssize_t n) noexcept nogil:
    # glibc's vector tanh is far slower than its vector exp; the logistic
    # identity keeps the loop on the fast path (absolute error ~1e-16).
    cdef Py_ssize_t k
    for k in range(n):
        z[k] = 2.0 / (1.0 + exp(-2.0 * z[k])) - 1.0


def lstm_forward(double[:, :, ::1] x, double[:, ::1] W, double[:, ::1] U, double[::1] b):
    cdef int B = x.shape[0], T = x.shape[1], I = x.shape[2]
    cdef int G = U.shape[0], H = U.shape[1]
    xt_arr = np.ascontiguousarray(np.transpose(np.asarray(x), (1, 0, 2)))
    hs_arr = np.zeros((T + 1, B, H))
    cs_arr = np.zeros((T + 1, B, H))
    tc_arr = np.empty((T, B, H))
    acts_arr = np.empty((T, B, G))
    cdef double[:, :, ::1] xt = xt_arr
    cdef double[:, :, ::1] hs = hs_arr
    cdef double[:, :, ::1] cs = cs_arr
    cdef double[:, :, ::1] tc = tc_arr
    cdef double[:, :, ::1] acts = acts_arr
    cdef int t, n, j
    cdef double* z
    cdef double* cp
    cdef double* cn
    cdef double* hn
    cdef double* th
    with nogil:
        for t in range(T):
            for n in range(B):
                for j in range(G):
                    acts[t, n, j] = b[j]
            _gemm(&xt[t, 0, 0], &W[0, 0], &acts[t, 0, 0], B, I, G, 1.0, False, True)
            _gemm(&hs[t, 0, 0], &U[0, 0], &acts[t, 0, 0], B, H, G, 1.0, False, True)
            for n in range(B):
                z = &acts[t, n, 0]
                _sigmoid(z, 2 * H)
                _tanh(z + 2 * H, H)
                _sigmoid(z + 3 * H, H)
                cp = &cs[t, n, 0]
                cn = &cs[t + 1, n, 0]
                th = &tc[t, n, 0]
                hn = &hs[t + 1, n, 0]
                for j in range(H):
                    cn[j] = z[H + j] * cp[j] + z[j] * z[2 * H + j]
                    th[j] = cn[j]
                _tanh(th, H)
                for j in range(H):
                    hn[j] = z[3 * H + j] * th[j]
    return hs_arr, cs_arr, tc_arr, acts_arr


def lstm_backward(double[:, :, ::1] dhs, double[:, :, ::1] x, double[:, ::1] W,
                  double[:, ::1] U, double[:, :, ::1] hs, double[:, :, ::1] cs,
                  double[:, :, ::1] tc, double[:, :, ::1] acts):
    cdef int T = acts.shape[0], B = acts.shape[1], G = acts.shape[2]
    cdef int H = G // 4, I = W.shape[1]
    dz_arr = np.empty((T, B, G))
    dh_arr = np.zeros((B, H))
    dc_arr = np.zeros((B, H))
    cdef double[:, :, ::1] dz = dz_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dc = dc_arr
    cdef int t, n, j
    cdef double ig, fg, gg, og, th, dht, dct
    cdef double* z
    cdef double* d
    with nogil:
        for t in range(T - 1, -1, -1):
            for n in range(B):
                z = &acts[t, n, 0]
                d = &dz[t, n, 0]
                for j in range(H):
                    ig = z[j]
                    fg = z[H + j]
                    gg = z[2 * H + j]
                    og = z[3 * H + j]
                    th = tc[t, n, j]
                    dht = dh[n, j] + dhs[t, n, j]
                    dct = dc[n, j] + dht * og * (1.0 - th * th)
                    d[j] = dct * gg * ig * (1.0 - ig)
                    d[H + j] = dct * cs[t, n, j] * fg * (1.0 - fg)
                    d[2 * H + j] = dct * ig * (1.0 - gg * gg)
                    d[3 * H + j] = dht * th * og * (1.0 - og)
                    dc[n, j] = dct * fg
            _gemm(&dz[t, 0, 0], &U[0, 0], &dh[0, 0], B, G, H, 0.0, False, False)
    xt = np.transpose(np.asarray(x), (1, 0, 2)).reshape(T * B, I)
    dz2 = dz_arr.reshape(T * B, G)
    dW = dz2.T @ xt
    dU = dz2.T @ np.asarray(hs)[:T].reshape(T * B, H)
    db = dz2.sum(axis=0)
    dx = np.transpose((dz2 @ np.asarray(W)).reshape(T, B, I), (1, 0, 2))
    return dW, dU, db, np.ascontiguousarray(dx)

