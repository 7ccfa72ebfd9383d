"""Beamformer design algorithms for the K-user interference channel.

Two iterative algorithms do the heavy lifting, both exploiting channel
reciprocity by alternating between the forward network and its
reciprocal: leakage minimization (:func:`run_min_leakage`), whose
weighted-leakage objective decreases monotonically, and per-stream SINR
maximization (:func:`run_max_sinr`), which gives up the monotone
objective to chase rate directly.  Alongside them sit the closed-form
3-user aligned solution, a selfish interference-avoidance baseline, and
the covariance/leakage algebra they all share.

The iterative inner loops run on a backend selected at import time: a
compiled extension when available, otherwise the pure-NumPy twin (see
``_backend``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from ._backend import kernels
from .channel import ChannelSet, complex_gaussian, require_consistent

_MASK64 = (1 << 64) - 1

_STOP_NAMES = {
    kernels.STOP_THRESHOLD: "wli_threshold",
    kernels.STOP_RELATIVE: "relative_change",
    kernels.STOP_MAX_ITER: "max_iterations",
}

_ERROR_MESSAGES = {
    kernels.ERR_ZERO_DIRECTION: "a stream direction collapsed to zero",
    kernels.ERR_RANK_COLLAPSE: "a precoder lost full column rank",
}


def mix_seed(seed, salt):
    """Derive an independent 64-bit stream seed from (seed, salt)."""
    x = (int(seed) + 0x9E3779B97F4A7C15 * (int(salt) + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


@dataclass(frozen=True)
class SolverOptions:
    """Iteration and restart controls shared by the iterative solvers.

    ``wli_stop`` is an absolute threshold on the weighted leakage (the
    leakage solver only); ``rel_stop`` bounds the relative change of the
    objective per full iteration.  With ``restarts > 1`` the run repeats
    from fresh random precoders and the best final objective wins.  A
    provided ``init`` solution seeds the first restart; the rest draw
    from ``init_seed``.
    """

    max_iterations: int = 5000
    wli_stop: float = 1e-10
    rel_stop: float = 1e-8
    restarts: int = 1
    init_seed: int = 0
    init: "Solution | None" = None
    cond_limit: float = 1e8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.wli_stop < 0 or self.rel_stop < 0:
            raise ValueError("stop thresholds must be nonnegative")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.cond_limit <= 1:
            raise ValueError("cond_limit must exceed 1")


def _freeze(a):
    out = np.array(a, dtype=np.complex128)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Solution:
    """Per-user transmit precoders and receive filters.

    ``precoders[k]`` has one unit-norm column per stream in transmitter
    ``k``'s antenna space; ``filters[k]`` lives in receiver ``k``'s.
    """

    precoders: tuple[np.ndarray, ...]
    filters: tuple[np.ndarray, ...]

    def __post_init__(self):
        v = tuple(_freeze(x) for x in self.precoders)
        u = tuple(_freeze(x) for x in self.filters)
        if len(v) != len(u) or not v:
            raise ValueError("need matching precoder/filter tuples")
        for k, (vk, uk) in enumerate(zip(v, u)):
            if vk.ndim != 2 or uk.ndim != 2 or vk.shape[1] != uk.shape[1]:
                raise ValueError(f"user {k}: precoder/filter stream counts differ")
            if vk.shape[1] < 1:
                raise ValueError(f"user {k}: need at least one stream")
        object.__setattr__(self, "precoders", v)
        object.__setattr__(self, "filters", u)

    @property
    def streams(self):
        return tuple(vk.shape[1] for vk in self.precoders)


@dataclass(frozen=True)
class IterationTrace:
    """Record of one solver run.

    ``wli`` holds the weighted leakage after each half iteration (the
    leakage solver); ``sum_rate`` holds the network sum rate per
    iteration (the SINR-driven solvers).  Exactly one of the two is
    present.  ``per_rx_leakage[k]`` is the final interference power left
    in receiver ``k``'s filtered subspace.
    """

    iterations: int
    converged: bool
    stop_reason: str
    per_rx_leakage: np.ndarray
    wli: np.ndarray | None = None
    sum_rate: np.ndarray | None = None


def _stream_weights(config):
    p = np.asarray(config.tx_power, dtype=np.float64)
    p_rev = np.asarray(config.reverse_tx_power, dtype=np.float64)
    d = np.asarray(config.streams, dtype=np.float64)
    return p / d, p_rev / d


def _require_white(ch):
    if ch.noise_cov is not None:
        raise ValueError("solvers assume white noise; call whiten_noise first")


def interference_covariance(k, ch, solution, config):
    """Covariance of all interference arriving at receiver ``k``.

    Sum over co-channel transmitters of per-stream power times the
    transmitted-then-propagated precoder outer products; Hermitian PSD.
    """
    w_fwd, _ = _stream_weights(config)
    n = config.rx_antennas[k]
    q = np.zeros((n, n), dtype=np.complex128)
    for j in range(config.num_users):
        if j == k:
            continue
        t = ch.matrices[k][j] @ solution.precoders[j]
        q += w_fwd[j] * (t @ t.conj().T)
    return q


def leakage(u, q):
    """Interference power leaking into the subspace spanned by ``u``."""
    return float(np.real(np.trace(u.conj().T @ q @ u)))


def weighted_leakage(ch, solution, config):
    """Total weighted interference leakage across all receivers.

    Each receiver's leakage is weighted by its reverse-link stream
    power, which makes the quantity identical in the forward and
    reciprocal networks and therefore a valid objective for the
    alternating minimization.
    """
    _, w_rev = _stream_weights(config)
    total = 0.0
    for k in range(config.num_users):
        q = interference_covariance(k, ch, solution, config)
        total += w_rev[k] * leakage(solution.filters[k], q)
    return total


def stream_covariance(k, l, ch, solution, config):
    """Interference-plus-noise covariance seen by stream ``l`` of user ``k``.

    Everything the receiver hears except that one stream: co-channel
    interference, the user's other streams, and unit-variance noise.
    """
    w_fwd, _ = _stream_weights(config)
    n = config.rx_antennas[k]
    b = np.eye(n, dtype=np.complex128)
    for j in range(config.num_users):
        t = ch.matrices[k][j] @ solution.precoders[j]
        b += w_fwd[j] * (t @ t.conj().T)
    hv = ch.matrices[k][k] @ solution.precoders[k][:, l]
    b -= w_fwd[k] * np.outer(hv, hv.conj())
    return b


def max_sinr_vector(b, h):
    """Unit-norm filter maximizing ``|u^H h|^2 / (u^H b u)``.

    The maximizer of the generalized Rayleigh quotient is ``b^{-1} h``
    up to scale; ``b`` must be Hermitian positive definite and ``h``
    nonzero.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = linalg.solve_pd(b, h)
    norm = float(np.linalg.norm(y))
    if norm <= 0.0:
        raise ValueError("direction undefined: channel vector is zero")
    return y / norm


def initial_precoders(config, seed):
    """Independent random orthonormal precoders, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return [
        linalg.orthonormalize(complex_gaussian(rng, m, d))
        for m, d in zip(config.tx_antennas, config.streams)
    ]


def _check_init(init, config):
    shapes = [vk.shape for vk in init.precoders]
    wanted = [(m, d) for m, d in zip(config.tx_antennas, config.streams)]
    if shapes != wanted:
        raise ValueError(f"init precoder shapes {shapes} do not match config {wanted}")
    return [np.array(vk) for vk in init.precoders]


def _restart_inits(config, opts):
    for r in range(opts.restarts):
        if r == 0 and opts.init is not None:
            yield _check_init(opts.init, config)
        else:
            yield initial_precoders(config, mix_seed(opts.init_seed, r))


def _finish(ch, config, v, u, trace_values, iterations, stop_code, kind):
    if stop_code < 0:
        raise RuntimeError(f"solver failed: {_ERROR_MESSAGES[stop_code]}")
    solution = Solution(precoders=tuple(v), filters=tuple(u))
    per_rx = np.array(
        [
            leakage(solution.filters[k], interference_covariance(k, ch, solution, config))
            for k in range(config.num_users)
        ]
    )
    stop_reason = _STOP_NAMES[stop_code]
    trace = IterationTrace(
        iterations=int(iterations),
        converged=stop_reason != "max_iterations",
        stop_reason=stop_reason,
        per_rx_leakage=per_rx,
        wli=np.asarray(trace_values) if kind == "wli" else None,
        sum_rate=np.asarray(trace_values) if kind == "sum_rate" else None,
    )
    return solution, trace


def _channel_grid(ch):
    return [[np.asarray(h) for h in row] for row in ch.matrices]


def run_min_leakage(ch, config, opts=None):
    """Alternating minimization of the total weighted leakage.

    Every iteration picks each receive filter as the basis of the least
    interfered subspace, then does the same for the precoders in the
    reciprocal network.  The recorded half-iteration objective never
    increases, so the run stops once it crosses ``opts.wli_stop``,
    stalls in relative terms, or hits the iteration cap.

    Returns ``(solution, trace)``; with restarts, the run with the
    lowest final objective.
    """
    opts = opts if opts is not None else SolverOptions()
    require_consistent(ch, config)
    _require_white(ch)
    w_fwd, w_rev = _stream_weights(config)
    grid = _channel_grid(ch)
    best = None
    for v0 in _restart_inits(config, opts):
        out = kernels.min_leakage_run(
            grid, w_fwd, w_rev, v0, opts.max_iterations, opts.wli_stop, opts.rel_stop
        )
        if out[4] < 0:
            raise RuntimeError(f"solver failed: {_ERROR_MESSAGES[out[4]]}")
        if best is None or out[2][-1] < best[2][-1]:
            best = out
    return _finish(ch, config, best[0], best[1], best[2], best[3], best[4], "wli")


def run_max_sinr(ch, config, opts=None):
    """Alternating per-stream SINR maximization.

    Each filter solves its stream's interference-plus-noise covariance
    against the direct channel; precoders do the same in the reciprocal
    network.  No monotone objective exists, so the trace records the
    network sum rate per iteration and the run stops on small relative
    change or at the cap.

    Returns ``(solution, trace)``; with restarts, the run with the
    highest final sum rate.
    """
    opts = opts if opts is not None else SolverOptions()
    require_consistent(ch, config)
    _require_white(ch)
    w_fwd, w_rev = _stream_weights(config)
    grid = _channel_grid(ch)
    best = None
    for v0 in _restart_inits(config, opts):
        out = kernels.max_sinr_run(
            grid, w_fwd, w_rev, v0, opts.max_iterations, opts.rel_stop, opts.cond_limit
        )
        if out[4] < 0:
            raise RuntimeError(f"solver failed: {_ERROR_MESSAGES[out[4]]}")
        if best is None or out[2][-1] > best[2][-1]:
            best = out
    return _finish(ch, config, best[0], best[1], best[2], best[3], best[4], "sum_rate")


def _unit(x):
    return x / np.linalg.norm(x)


def _perp2(x):
    # unit vector orthogonal (in the Hermitian sense) to a nonzero x in C^2
    return _unit(np.array([-np.conj(x[1]), np.conj(x[0])], dtype=np.complex128))


def closed_form_ia_3user(ch):
    """Exact interference alignment for three 2x2 users, one stream each.

    The first precoder is an eigenvector of the cross-channel cycle
    matrix; the other two follow by matching interference subspaces
    pairwise, and each filter is the orthogonal complement of the (now
    one-dimensional) interference at its receiver.  Every eigenvector
    aligns the interference, so among the candidates the one keeping the
    largest direct-link margin min_k |u_k' H_kk v_k| is returned: on
    structured channels (e.g. two-slot relay cascades) one eigenvector
    can null the desired links along with the interference, and the
    margin rules it out.  Deterministic: candidates are scanned in
    lexicographically decreasing (re, im) eigenvalue order with ties
    broken by that order, and all column phases are pinned.
    """
    if ch.num_users != 3 or any(
        h.shape != (2, 2) for row in ch.matrices for h in row
    ):
        raise ValueError("closed form needs 3 users with 2x2 channels")
    _require_white(ch)
    h = ch.matrices
    try:
        cycle = (
            np.linalg.inv(h[2][0])
            @ h[2][1]
            @ np.linalg.inv(h[0][1])
            @ h[0][2]
            @ np.linalg.inv(h[1][2])
            @ h[1][0]
        )
        values, vectors = np.linalg.eig(cycle)
        order = np.lexsort((-values.imag, -values.real))
        best = None
        best_margin = -1.0
        for idx in order:
            v1 = vectors[:, idx].reshape(2, 1)
            v2 = np.linalg.solve(h[2][1], h[2][0] @ v1)
            v3 = np.linalg.solve(h[1][2], h[1][0] @ v1)
            v = [linalg.fix_column_phases(_unit(x)) for x in (v1, v2, v3)]
            # Interference at each receiver is aligned into one direction.
            u = [
                linalg.fix_column_phases(_perp2((h[0][1] @ v[1]).ravel()).reshape(2, 1)),
                linalg.fix_column_phases(_perp2((h[1][0] @ v[0]).ravel()).reshape(2, 1)),
                linalg.fix_column_phases(_perp2((h[2][0] @ v[0]).ravel()).reshape(2, 1)),
            ]
            margin = min(
                float(np.abs(u[k].conj().T @ h[k][k] @ v[k])[0, 0]) for k in range(3)
            )
            if margin > best_margin:
                best = Solution(precoders=tuple(v), filters=tuple(u))
                best_margin = margin
    except np.linalg.LinAlgError as exc:
        raise ValueError("closed form needs invertible cross channels") from exc
    return best


def _network_rate(grid, w_fwd, v, u):
    """Sum rate with per-stream filters; also refreshes ``u`` and SINRs."""
    k_users = len(grid)
    rate = 0.0
    for k in range(k_users):
        n = grid[k][0].shape[0]
        f = np.eye(n, dtype=np.complex128)
        for j in range(k_users):
            t = grid[k][j] @ v[j]
            f += w_fwd[j] * (t @ t.conj().T)
        for l in range(v[k].shape[1]):
            hv = grid[k][k] @ v[k][:, l]
            b = f - w_fwd[k] * np.outer(hv, hv.conj())
            y = np.linalg.solve(b, hv)
            norm = np.linalg.norm(y)
            if norm <= 0.0:
                raise RuntimeError("solver failed: a stream direction collapsed to zero")
            u[k][:, l] = y / norm
            rate += np.log2(1.0 + w_fwd[k] * float(np.real(np.vdot(hv, y))))
    return rate


def run_interference_avoidance(ch, config, opts=None):
    """Selfish baseline: each user steers around the interference it sees.

    Round-robin sweeps; on its turn a user whitens its own
    interference-plus-noise, beamforms along the top right singular
    vectors of the whitened direct channel (equal power per stream), and
    picks per-stream SINR-maximizing filters.  Nobody coordinates, so
    the sweep converges to a mutual best-response point rather than an
    aligned one.  Stops on small relative sum-rate change or at the cap.
    """
    opts = opts if opts is not None else SolverOptions()
    require_consistent(ch, config)
    _require_white(ch)
    w_fwd, _ = _stream_weights(config)
    grid = _channel_grid(ch)
    k_users = config.num_users
    if opts.init is not None:
        v = _check_init(opts.init, config)
    else:
        v = initial_precoders(config, mix_seed(opts.init_seed, 0))
    u = [
        np.zeros((config.rx_antennas[k], config.streams[k]), dtype=np.complex128)
        for k in range(k_users)
    ]
    trace = np.empty(opts.max_iterations, dtype=np.float64)
    iterations = opts.max_iterations
    stop_reason = "max_iterations"
    for it in range(opts.max_iterations):
        for k in range(k_users):
            n = config.rx_antennas[k]
            q = np.zeros((n, n), dtype=np.complex128)
            for j in range(k_users):
                if j == k:
                    continue
                t = grid[k][j] @ v[j]
                q += w_fwd[j] * (t @ t.conj().T)
            whitener = linalg.inv_sqrt_pd(np.eye(n) + q)
            _, _, vh = np.linalg.svd(whitener @ grid[k][k])
            vk = vh.conj().T[:, : config.streams[k]]
            v[k] = linalg.fix_column_phases(vk)
        trace[it] = _network_rate(grid, w_fwd, v, u)
        if it > 0 and abs(trace[it] - trace[it - 1]) <= opts.rel_stop * max(
            abs(trace[it - 1]), np.finfo(np.float64).tiny
        ):
            iterations = it + 1
            stop_reason = "relative_change"
            break
    solution = Solution(precoders=tuple(v), filters=tuple(u))
    per_rx = np.array(
        [
            leakage(solution.filters[k], interference_covariance(k, ch, solution, config))
            for k in range(k_users)
        ]
    )
    trace_obj = IterationTrace(
        iterations=iterations,
        converged=stop_reason != "max_iterations",
        stop_reason=stop_reason,
        per_rx_leakage=per_rx,
        sum_rate=trace[:iterations].copy(),
    )
    return solution, trace_obj


def solution_to_json(solution, path=None):
    """Serialize precoders and filters to a JSON document (bit exact)."""
    from .channel import _encode_matrix

    doc = {
        "precoders": [_encode_matrix(vk) for vk in solution.precoders],
        "filter_shapes": [list(uk.shape) for uk in solution.filters],
        "precoder_shapes": [list(vk.shape) for vk in solution.precoders],
        "filters": [_encode_matrix(uk) for uk in solution.filters],
    }
    if path is not None:
        import json

        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    return doc


def solution_from_json(doc):
    """Inverse of :func:`solution_to_json`; accepts a dict or a file path."""
    from .channel import _decode_matrix

    if not isinstance(doc, dict):
        import json

        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    v = tuple(
        _decode_matrix(entries, rows, cols)
        for entries, (rows, cols) in zip(doc["precoders"], doc["precoder_shapes"])
    )
    u = tuple(
        _decode_matrix(entries, rows, cols)
        for entries, (rows, cols) in zip(doc["filters"], doc["filter_shapes"])
    )
    return Solution(precoders=v, filters=u)
