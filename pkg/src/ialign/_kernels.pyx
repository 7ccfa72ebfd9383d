# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled inner loops for the alternating solvers.

Same call contract as the pure-NumPy ``_kernels_py`` module.  Channels,
precoders and filters are packed once per call into Fortran-ordered
slabs so every update step is a direct BLAS/LAPACK call (zgemm/zherk
for the covariance accumulation, zheevd for the leakage eigenproblems,
zgesv for the per-stream SINR solves, zgesvd for the rank guard)
without intermediate Python allocations.

Stop codes (shared with the python backend):
    0  objective fell below the absolute threshold
    1  relative change per full iteration fell below the threshold
    2  iteration cap reached
   -1  a stream direction collapsed to zero
   -2  a precoder lost full column rank (condition limit exceeded)
"""

import numpy as np

from libc.float cimport DBL_MIN
from libc.math cimport log2, sqrt
from scipy.linalg.cython_blas cimport zgemm, zgemv, zherk
from scipy.linalg.cython_lapack cimport zgesv, zgesvd, zheevd

BACKEND_NAME = "compiled"

STOP_THRESHOLD = 0
STOP_RELATIVE = 1
STOP_MAX_ITER = 2
ERR_ZERO_DIRECTION = -1
ERR_RANK_COLLAPSE = -2

cdef char* _N = b"N"
cdef char* _C = b"C"
cdef char* _L = b"L"
cdef char* _V = b"V"

cdef double complex _CONE = 1.0
cdef double complex _CZERO = 0.0
cdef double _DONE = 1.0
cdef int _IONE = 1


cdef inline void _zero_block(double complex* a, int ld, int n) noexcept:
    cdef int i, j
    for j in range(n):
        for i in range(n):
            a[i + j * ld] = 0.0


cdef inline void _pin_copy(double complex* src, int lds, double complex* dst,
                           int ldd, int n, int d) noexcept:
    # copy the first d columns, rotating each so its largest entry is
    # real nonnegative (first maximal index wins, matching argmax)
    cdef int i, l, piv
    cdef double best, mag
    cdef double complex p, phase
    for l in range(d):
        piv = 0
        best = -1.0
        for i in range(n):
            p = src[i + l * lds]
            mag = p.real * p.real + p.imag * p.imag
            if mag > best:
                best = mag
                piv = i
        p = src[piv + l * lds]
        mag = sqrt(p.real * p.real + p.imag * p.imag)
        if mag > 0.0:
            phase = p.conjugate() / mag
            for i in range(n):
                dst[i + l * ldd] = src[i + l * lds] * phase
        else:
            for i in range(n):
                dst[i + l * ldd] = src[i + l * lds]


cdef class _Work:
    """Packed problem state plus LAPACK scratch, sized once per call."""

    cdef int K, nmax, mmax, dmax, pmax
    cdef int lwork_ev, lrwork_ev, liwork_ev, lwork_svd
    cdef object n_arr, m_arr, d_arr
    cdef object hbuf, vbuf, ubuf
    cdef object q_arr, t_arr, b_arr, evals_arr, hv_arr, y_arr, s_arr
    cdef object work_arr, rwork_arr, iwork_arr, ipiv_arr
    cdef int[::1] n, m, d
    cdef double complex[::1, :, :] H, Vb, Ub
    cdef double complex[::1, :] Q, T, B
    cdef double complex[::1] work, hv, y
    cdef double[::1] evals, rwork, s
    cdef int[::1] iwork, ipiv

    def __init__(self, h, v0):
        cdef int K = len(h)
        cdef int k, j
        n_list = [h[k][0].shape[0] for k in range(K)]
        m_list = [h[0][l].shape[1] for l in range(K)]
        d_list = [v0[k].shape[1] for k in range(K)]
        cdef int nmax = max(n_list)
        cdef int mmax = max(m_list)
        cdef int dmax = max(d_list)
        cdef int pmax = nmax if nmax > mmax else mmax

        self.K = K
        self.nmax, self.mmax, self.dmax, self.pmax = nmax, mmax, dmax, pmax
        self.n_arr = np.array(n_list, dtype=np.intc)
        self.m_arr = np.array(m_list, dtype=np.intc)
        self.d_arr = np.array(d_list, dtype=np.intc)
        self.n = self.n_arr
        self.m = self.m_arr
        self.d = self.d_arr

        self.hbuf = np.zeros((nmax, mmax, K * K), dtype=np.complex128, order="F")
        self.vbuf = np.zeros((mmax, dmax, K), dtype=np.complex128, order="F")
        self.ubuf = np.zeros((nmax, dmax, K), dtype=np.complex128, order="F")
        for k in range(K):
            for j in range(K):
                self.hbuf[: n_list[k], : m_list[j], k * K + j] = h[k][j]
            self.vbuf[: m_list[k], : d_list[k], k] = v0[k]
        self.H = self.hbuf
        self.Vb = self.vbuf
        self.Ub = self.ubuf

        self.q_arr = np.empty((pmax, pmax), dtype=np.complex128, order="F")
        self.t_arr = np.empty((pmax, dmax), dtype=np.complex128, order="F")
        self.b_arr = np.empty((pmax, pmax), dtype=np.complex128, order="F")
        self.evals_arr = np.empty(pmax, dtype=np.float64)
        self.hv_arr = np.empty(pmax, dtype=np.complex128)
        self.y_arr = np.empty(pmax, dtype=np.complex128)
        self.s_arr = np.empty(pmax, dtype=np.float64)
        self.Q = self.q_arr
        self.T = self.t_arr
        self.B = self.b_arr
        self.evals = self.evals_arr
        self.hv = self.hv_arr
        self.y = self.y_arr
        self.s = self.s_arr
        self.ipiv_arr = np.empty(pmax, dtype=np.intc)
        self.ipiv = self.ipiv_arr

        # workspace queries (eigensolver and singular values at the
        # largest dimensions this call can reach)
        cdef int info = 0, lq = -1, lrq = -1, liq = -1
        cdef double complex wq
        cdef double rwq
        cdef int iwq
        zheevd(_V, _L, &pmax, &self.Q[0, 0], &pmax, &self.evals[0],
               &wq, &lq, &rwq, &lrq, &iwq, &liq, &info)
        if info != 0:
            raise np.linalg.LinAlgError("eigensolver workspace query failed")
        self.lwork_ev = <int> wq.real
        self.lrwork_ev = <int> rwq
        self.liwork_ev = iwq

        cdef double complex dummy
        lq = -1
        zgesvd(_N, _N, &pmax, &dmax, &self.Q[0, 0], &pmax, &self.s[0],
               &dummy, &_IONE, &dummy, &_IONE, &wq, &lq, &rwq, &info)
        if info != 0:
            raise np.linalg.LinAlgError("svd workspace query failed")
        self.lwork_svd = <int> wq.real

        cdef int lwork = self.lwork_ev if self.lwork_ev > self.lwork_svd else self.lwork_svd
        cdef int lrwork = self.lrwork_ev
        if lrwork < 5 * pmax:
            lrwork = 5 * pmax
        self.work_arr = np.empty(lwork, dtype=np.complex128)
        self.rwork_arr = np.empty(lrwork, dtype=np.float64)
        self.iwork_arr = np.empty(max(self.liwork_ev, 1), dtype=np.intc)
        self.work = self.work_arr
        self.rwork = self.rwork_arr
        self.iwork = self.iwork_arr

    cdef double _smallest_into(self, double complex* dst, int ldd, int nk, int dk) except? -1.0:
        # eigendecompose Q (lower triangle, nk x nk), write the dk
        # smallest eigenvectors into dst, return their eigenvalue sum
        cdef int info = 0
        cdef int lw = self.lwork_ev, lrw = self.lrwork_ev, liw = self.liwork_ev
        cdef int ldq = self.pmax
        cdef double total = 0.0
        cdef int i
        zheevd(_V, _L, &nk, &self.Q[0, 0], &ldq, &self.evals[0],
               &self.work[0], &lw, &self.rwork[0], &lrw,
               &self.iwork[0], &liw, &info)
        if info != 0:
            raise np.linalg.LinAlgError("eigendecomposition did not converge")
        _pin_copy(&self.Q[0, 0], ldq, dst, ldd, nk, dk)
        for i in range(dk):
            total += self.evals[i]
        return total

    cdef int _sinr_streams(self, double complex* hd, int trans_direct, int nk,
                           int mk, double w_self, double complex* vcols, int ldv,
                           int dk, double complex* ucols, int ldu,
                           double* rate_out) except -3:
        # per-stream SINR-maximizing filters; Q holds the total
        # covariance (lower triangle).  Returns 0, or -1 on collapse.
        cdef int ldq = self.pmax, ldb = self.pmax, ldh = self.nmax
        cdef int info, i, j, l
        cdef double sinr, norm
        cdef double complex acc
        cdef double rate = 0.0
        for l in range(dk):
            # hv = direct channel (or its adjoint) times the stream column
            if trans_direct:
                zgemv(_C, &mk, &nk, &_CONE, hd, &ldh, vcols + l * ldv,
                      &_IONE, &_CZERO, &self.hv[0], &_IONE)
            else:
                zgemv(_N, &nk, &mk, &_CONE, hd, &ldh, vcols + l * ldv,
                      &_IONE, &_CZERO, &self.hv[0], &_IONE)
            # b = covariance minus this stream's own term, full storage
            for j in range(nk):
                for i in range(j, nk):
                    self.B[i, j] = self.Q[i, j] - w_self * self.hv[i] * self.hv[j].conjugate()
                for i in range(j):
                    self.B[i, j] = self.B[j, i].conjugate()
                self.y[j] = self.hv[j]
            zgesv(&nk, &_IONE, &self.B[0, 0], &ldb, &self.ipiv[0],
                  &self.y[0], &ldb, &info)
            if info != 0:
                raise np.linalg.LinAlgError("singular interference covariance")
            sinr = 0.0
            norm = 0.0
            for i in range(nk):
                acc = self.hv[i].conjugate() * self.y[i]
                sinr += acc.real
                norm += self.y[i].real * self.y[i].real + self.y[i].imag * self.y[i].imag
            sinr *= w_self
            norm = sqrt(norm)
            if norm <= 0.0:
                return -1
            for i in range(nk):
                ucols[i + l * ldu] = self.y[i] / norm
            rate += log2(1.0 + sinr)
        rate_out[0] = rate
        return 0

    cdef object _unpack(self, bint tx):
        cdef int k
        out = []
        for k in range(self.K):
            if tx:
                out.append(np.ascontiguousarray(self.vbuf[: self.m[k], : self.d[k], k]))
            else:
                out.append(np.ascontiguousarray(self.ubuf[: self.n[k], : self.d[k], k]))
        return out


def min_leakage_run(h, w_fwd, w_rev, v0, max_iter, wli_stop, rel_stop):
    """Alternating leakage minimization.

    Each full iteration updates every receive filter against the current
    precoders, then every precoder against the fresh filters through the
    reciprocal network.  The recorded objective is the total weighted
    leakage, measured after each half (twice per iteration); it is
    non-increasing along the run.

    Returns ``(v, u, trace, iterations, stop_code)``.
    """
    cdef _Work w = _Work(h, v0)
    cdef int K = w.K, ldh = w.nmax, ldv = w.mmax, ldu = w.nmax, ldq = w.pmax
    cdef int ldt = w.pmax
    cdef double[::1] wf = np.ascontiguousarray(w_fwd, dtype=np.float64)
    cdef double[::1] wr = np.ascontiguousarray(w_rev, dtype=np.float64)
    cdef int cap = int(max_iter)
    cdef double stop_abs = float(wli_stop), stop_rel = float(rel_stop)

    trace_np = np.empty(2 * cap, dtype=np.float64)
    cdef double[::1] trace = trace_np
    cdef double prev_full = -1.0, wli, eigsum, diff
    cdef int halves = 0, stop = STOP_MAX_ITER, iterations = cap
    cdef int it, k, j, nk, mj, dj

    for it in range(cap):
        # filters absorb as little interference as possible
        wli = 0.0
        for k in range(K):
            nk = w.n[k]
            _zero_block(&w.Q[0, 0], ldq, nk)
            for j in range(K):
                if j == k:
                    continue
                mj = w.m[j]
                dj = w.d[j]
                zgemm(_N, _N, &nk, &dj, &mj, &_CONE, &w.H[0, 0, k * K + j],
                      &ldh, &w.Vb[0, 0, j], &ldv, &_CZERO, &w.T[0, 0], &ldt)
                zherk(_L, _N, &nk, &dj, &wf[j], &w.T[0, 0], &ldt,
                      &_DONE, &w.Q[0, 0], &ldq)
            eigsum = w._smallest_into(&w.Ub[0, 0, k], ldu, nk, w.d[k])
            wli += wr[k] * eigsum
        trace[halves] = wli
        halves += 1
        if wli <= stop_abs:
            stop = STOP_THRESHOLD
            iterations = it + 1
            break

        # precoders play the same role in the reciprocal network
        wli = 0.0
        for j in range(K):
            mj = w.m[j]
            _zero_block(&w.Q[0, 0], ldq, mj)
            for k in range(K):
                if k == j:
                    continue
                nk = w.n[k]
                zgemm(_C, _N, &mj, &w.d[k], &nk, &_CONE, &w.H[0, 0, k * K + j],
                      &ldh, &w.Ub[0, 0, k], &ldu, &_CZERO, &w.T[0, 0], &ldt)
                zherk(_L, _N, &mj, &w.d[k], &wr[k], &w.T[0, 0], &ldt,
                      &_DONE, &w.Q[0, 0], &ldq)
            eigsum = w._smallest_into(&w.Vb[0, 0, j], ldv, mj, w.d[j])
            wli += wf[j] * eigsum
        trace[halves] = wli
        halves += 1
        if wli <= stop_abs:
            stop = STOP_THRESHOLD
            iterations = it + 1
            break
        if it > 0:
            diff = prev_full - wli
            if diff < 0.0:
                diff = -diff
            if diff <= stop_rel * (prev_full if prev_full > DBL_MIN else DBL_MIN):
                stop = STOP_RELATIVE
                iterations = it + 1
                break
        prev_full = wli

    return (w._unpack(True), w._unpack(False),
            trace_np[:halves].copy(), iterations, stop)


def max_sinr_run(h, w_fwd, w_rev, v0, max_iter, rel_stop, cond_limit):
    """Alternating per-stream SINR maximization.

    Forward halves update receive filters and record the network sum
    rate; reverse halves update precoders through the reciprocal
    network.  There is no monotone objective here, so the run stops on
    small relative rate change or at the iteration cap.  Precoder
    condition numbers are checked every iteration.

    Returns ``(v, u, trace, iterations, stop_code)``.
    """
    cdef _Work w = _Work(h, v0)
    cdef int K = w.K, ldh = w.nmax, ldv = w.mmax, ldu = w.nmax, ldq = w.pmax
    cdef int ldt = w.pmax
    cdef double[::1] wf = np.ascontiguousarray(w_fwd, dtype=np.float64)
    cdef double[::1] wr = np.ascontiguousarray(w_rev, dtype=np.float64)
    cdef int cap = int(max_iter)
    cdef double stop_rel = float(rel_stop), cond = float(cond_limit)

    trace_np = np.empty(cap, dtype=np.float64)
    cdef double[::1] trace = trace_np
    cdef int it_done = 0, stop = STOP_MAX_ITER, iterations = cap
    cdef int it, k, j, i, nk, mj, dj, got, info, nsv
    cdef double rate, part, smin, diff, ref

    for it in range(cap):
        rate = 0.0
        for k in range(K):
            nk = w.n[k]
            _zero_block(&w.Q[0, 0], ldq, nk)
            for i in range(nk):
                w.Q[i, i] = 1.0
            for j in range(K):
                mj = w.m[j]
                dj = w.d[j]
                zgemm(_N, _N, &nk, &dj, &mj, &_CONE, &w.H[0, 0, k * K + j],
                      &ldh, &w.Vb[0, 0, j], &ldv, &_CZERO, &w.T[0, 0], &ldt)
                zherk(_L, _N, &nk, &dj, &wf[j], &w.T[0, 0], &ldt,
                      &_DONE, &w.Q[0, 0], &ldq)
            got = w._sinr_streams(&w.H[0, 0, k * K + k], 0, nk, w.m[k], wf[k],
                                  &w.Vb[0, 0, k], ldv, w.d[k],
                                  &w.Ub[0, 0, k], ldu, &part)
            if got < 0:
                return (w._unpack(True), w._unpack(False),
                        trace_np[:it_done].copy(), it + 1, ERR_ZERO_DIRECTION)
            rate += part
        trace[it] = rate
        it_done = it + 1

        for j in range(K):
            mj = w.m[j]
            _zero_block(&w.Q[0, 0], ldq, mj)
            for i in range(mj):
                w.Q[i, i] = 1.0
            for k in range(K):
                nk = w.n[k]
                zgemm(_C, _N, &mj, &w.d[k], &nk, &_CONE, &w.H[0, 0, k * K + j],
                      &ldh, &w.Ub[0, 0, k], &ldu, &_CZERO, &w.T[0, 0], &ldt)
                zherk(_L, _N, &mj, &w.d[k], &wr[k], &w.T[0, 0], &ldt,
                      &_DONE, &w.Q[0, 0], &ldq)
            got = w._sinr_streams(&w.H[0, 0, j * K + j], 1, mj, w.n[j], wr[j],
                                  &w.Ub[0, 0, j], ldu, w.d[j],
                                  &w.Vb[0, 0, j], ldv, &part)
            if got < 0:
                return (w._unpack(True), w._unpack(False),
                        trace_np[:it_done].copy(), it + 1, ERR_ZERO_DIRECTION)

        for j in range(K):
            mj = w.m[j]
            dj = w.d[j]
            for i in range(dj):
                for k in range(mj):
                    w.B[k, i] = w.Vb[k, i, j]
            nsv = w.lwork_svd
            zgesvd(_N, _N, &mj, &dj, &w.B[0, 0], &w.pmax, &w.s[0],
                   &w.T[0, 0], &_IONE, &w.T[0, 0], &_IONE,
                   &w.work[0], &nsv, &w.rwork[0], &info)
            if info != 0:
                raise np.linalg.LinAlgError("singular value computation failed")
            smin = w.s[dj - 1] if dj <= mj else w.s[mj - 1]
            if smin <= 0.0 or w.s[0] > cond * smin:
                return (w._unpack(True), w._unpack(False),
                        trace_np[:it_done].copy(), it + 1, ERR_RANK_COLLAPSE)

        if it > 0:
            diff = trace[it] - trace[it - 1]
            if diff < 0.0:
                diff = -diff
            ref = trace[it - 1]
            if ref < 0.0:
                ref = -ref
            if ref < DBL_MIN:
                ref = DBL_MIN
            if diff <= stop_rel * ref:
                stop = STOP_RELATIVE
                iterations = it + 1
                break

    return (w._unpack(True), w._unpack(False),
            trace_np[:it_done].copy(), iterations, stop)
