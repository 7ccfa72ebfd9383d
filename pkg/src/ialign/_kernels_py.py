"""Pure-NumPy inner loops for the alternating solvers.

Same call contract as the compiled ``_kernels`` extension; this module
is the fallback when that extension is unavailable.  Both backends take
channels as a K x K nested list of complex matrices, per-user stream
weights (power over streams) for the forward and reverse directions,
and initial precoders, and return updated precoders/filters plus the
recorded objective trace.

Stop codes (shared with the compiled backend):
    0  objective fell below the absolute threshold
    1  relative change per full iteration fell below the threshold
    2  iteration cap reached
   -1  a stream direction collapsed to zero
   -2  a precoder lost full column rank (condition limit exceeded)
"""

import numpy as np

BACKEND_NAME = "python"

STOP_THRESHOLD = 0
STOP_RELATIVE = 1
STOP_MAX_ITER = 2
ERR_ZERO_DIRECTION = -1
ERR_RANK_COLLAPSE = -2

# Guards the relative-change test when the objective sits at exact zero.
_REL_FLOOR = np.finfo(np.float64).tiny


def _fix_phases_inplace(v):
    for i in range(v.shape[1]):
        j = int(np.argmax(np.abs(v[:, i])))
        pivot = v[j, i]
        mag = abs(pivot)
        if mag > 0.0:
            v[:, i] *= pivot.conj() / mag


def _smallest_eigvecs(q, d):
    """Eigenvectors of the d smallest eigenvalues, phases pinned.

    Returns (vectors, eigenvalue sum).  ``q`` is exactly Hermitian by
    construction here, so no symmetrization pass is needed.
    """
    values, vectors = np.linalg.eigh(q)
    out = vectors[:, :d].copy()
    _fix_phases_inplace(out)
    return out, float(np.sum(values[:d]))


def min_leakage_run(h, w_fwd, w_rev, v0, max_iter, wli_stop, rel_stop):
    """Alternating leakage minimization.

    Each full iteration updates every receive filter against the current
    precoders, then every precoder against the fresh filters through the
    reciprocal network.  The recorded objective is the total weighted
    leakage, measured after each half (twice per iteration); it is
    non-increasing along the run.

    Returns ``(v, u, trace, iterations, stop_code)``.
    """
    k_users = len(h)
    n_rx = [h[k][0].shape[0] for k in range(k_users)]
    v = [np.array(vk, dtype=np.complex128) for vk in v0]
    d = [vk.shape[1] for vk in v]
    u = [np.zeros((n_rx[k], d[k]), dtype=np.complex128) for k in range(k_users)]
    trace = np.empty(2 * max_iter, dtype=np.float64)
    prev_full = -1.0
    halves = 0
    stop = STOP_MAX_ITER
    iterations = max_iter

    for it in range(max_iter):
        # Filters absorb as little interference as possible.
        wli_fwd = 0.0
        for k in range(k_users):
            q = np.zeros((n_rx[k], n_rx[k]), dtype=np.complex128)
            for j in range(k_users):
                if j == k:
                    continue
                t = h[k][j] @ v[j]
                q += w_fwd[j] * (t @ t.conj().T)
            u[k], eigsum = _smallest_eigvecs(q, d[k])
            wli_fwd += w_rev[k] * eigsum
        trace[halves] = wli_fwd
        halves += 1
        if wli_fwd <= wli_stop:
            stop = STOP_THRESHOLD
            iterations = it + 1
            break

        # Precoders play the same role in the reciprocal network.
        wli_rev = 0.0
        for j in range(k_users):
            q = np.zeros((v[j].shape[0], v[j].shape[0]), dtype=np.complex128)
            for k in range(k_users):
                if k == j:
                    continue
                t = h[k][j].conj().T @ u[k]
                q += w_rev[k] * (t @ t.conj().T)
            v[j], eigsum = _smallest_eigvecs(q, d[j])
            wli_rev += w_fwd[j] * eigsum
        trace[halves] = wli_rev
        halves += 1
        if wli_rev <= wli_stop:
            stop = STOP_THRESHOLD
            iterations = it + 1
            break
        if it > 0 and abs(prev_full - wli_rev) <= rel_stop * max(prev_full, _REL_FLOOR):
            stop = STOP_RELATIVE
            iterations = it + 1
            break
        prev_full = wli_rev

    return v, u, trace[:halves].copy(), iterations, stop


def _sinr_filter_update(f, w_self, h_direct, v_cols, u_out):
    """Per-stream SINR-maximizing filters given the total covariance ``f``.

    For stream l the interference-plus-noise covariance is ``f`` minus
    that stream's own contribution; the maximizer is the solve of that
    matrix against the stream's direct channel vector.  Returns the sum
    of ``log2(1 + sinr)`` over streams, or None when a direction
    collapses.
    """
    rate = 0.0
    for l in range(v_cols.shape[1]):
        hv = h_direct @ v_cols[:, l]
        b = f - w_self * np.outer(hv, hv.conj())
        y = np.linalg.solve(b, hv)
        sinr = w_self * float(np.real(np.vdot(hv, y)))
        norm = float(np.linalg.norm(y))
        if norm <= 0.0:
            return None
        u_out[:, l] = y / norm
        rate += np.log2(1.0 + sinr)
    return rate


def max_sinr_run(h, w_fwd, w_rev, v0, max_iter, rel_stop, cond_limit):
    """Alternating per-stream SINR maximization.

    Forward halves update receive filters and record the network sum
    rate; reverse halves update precoders through the reciprocal
    network.  There is no monotone objective here, so the run stops on
    small relative rate change or at the iteration cap.  Precoder
    condition numbers are checked every iteration.

    Returns ``(v, u, trace, iterations, stop_code)``.
    """
    k_users = len(h)
    n_rx = [h[k][0].shape[0] for k in range(k_users)]
    n_tx = [h[0][l].shape[1] for l in range(k_users)]
    v = [np.array(vk, dtype=np.complex128) for vk in v0]
    d = [vk.shape[1] for vk in v]
    u = [np.zeros((n_rx[k], d[k]), dtype=np.complex128) for k in range(k_users)]
    trace = np.empty(max_iter, dtype=np.float64)
    it_done = 0
    stop = STOP_MAX_ITER
    iterations = max_iter

    for it in range(max_iter):
        rate = 0.0
        for k in range(k_users):
            f = np.eye(n_rx[k], dtype=np.complex128)
            for j in range(k_users):
                t = h[k][j] @ v[j]
                f += w_fwd[j] * (t @ t.conj().T)
            got = _sinr_filter_update(f, w_fwd[k], h[k][k], v[k], u[k])
            if got is None:
                return v, u, trace[:it_done].copy(), it + 1, ERR_ZERO_DIRECTION
            rate += got
        trace[it] = rate
        it_done = it + 1

        for j in range(k_users):
            f = np.eye(n_tx[j], dtype=np.complex128)
            for k in range(k_users):
                t = h[k][j].conj().T @ u[k]
                f += w_rev[k] * (t @ t.conj().T)
            got = _sinr_filter_update(f, w_rev[j], h[j][j].conj().T, u[j], v[j])
            if got is None:
                return v, u, trace[:it_done].copy(), it + 1, ERR_ZERO_DIRECTION

        for j in range(k_users):
            s = np.linalg.svd(v[j], compute_uv=False)
            if s[-1] <= 0.0 or s[0] > cond_limit * s[-1]:
                return v, u, trace[:it_done].copy(), it + 1, ERR_RANK_COLLAPSE

        if it > 0 and abs(trace[it] - trace[it - 1]) <= rel_stop * max(
            abs(trace[it - 1]), _REL_FLOOR
        ):
            stop = STOP_RELATIVE
            iterations = it + 1
            break

    return v, u, trace[:it_done].copy(), iterations, stop
