"""Rate, SINR, and alignment-quality metrics.

All rates are in bits per channel use (base-2 logs).  Solvers assume
whitened unit-variance noise, and so does everything here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channel import require_consistent
from .solvers import interference_covariance, stream_covariance, _stream_weights


@dataclass(frozen=True)
class RateReport:
    """Per-stream SINRs and the rates they induce.

    ``slots`` is the per-slot normalizer: 1 for plain MIMO, the slot
    count for symbol-extended topologies, so rates are always per
    channel use of the underlying medium.
    """

    per_stream_sinr: tuple[np.ndarray, ...]
    per_user_rate: np.ndarray
    sum_rate: float
    slots: float


def stream_sinr(k, l, ch, solution, config):
    """SINR of stream ``l`` at receiver ``k`` under per-stream filtering.

    Signal power is the stream's share of the transmit power through
    filter, direct channel, and precoder; the denominator is the
    filter's response to everything else (other streams, other users,
    noise).
    """
    w_fwd, _ = _stream_weights(config)
    u = solution.filters[k][:, l]
    hv = ch.matrices[k][k] @ solution.precoders[k][:, l]
    b = stream_covariance(k, l, ch, solution, config)
    signal = w_fwd[k] * abs(np.vdot(u, hv)) ** 2
    return float(signal / np.real(np.vdot(u, b @ u)))


def sum_rate(ch, solution, config, slots=1.0):
    """Network sum rate and its per-user/per-stream breakdown."""
    require_consistent(ch, config)
    sinrs = []
    per_user = np.zeros(config.num_users)
    for k in range(config.num_users):
        vals = np.array(
            [stream_sinr(k, l, ch, solution, config) for l in range(config.streams[k])]
        )
        sinrs.append(vals)
        per_user[k] = float(np.sum(np.log2(1.0 + vals))) / slots
    return RateReport(
        per_stream_sinr=tuple(sinrs),
        per_user_rate=per_user,
        sum_rate=float(np.sum(per_user)),
        slots=float(slots),
    )


def aligned_rate(h_eff, power, streams):
    """Log-det rate of an interference-free effective channel.

    ``h_eff`` is the ``streams x streams`` channel left after filtering;
    power splits equally across streams.
    """
    h_eff = np.asarray(h_eff, dtype=np.complex128)
    d = int(streams)
    if h_eff.shape != (d, d):
        raise ValueError(f"effective channel must be {d}x{d}, got {h_eff.shape}")
    gram = (power / d) * (h_eff @ h_eff.conj().T)
    return linalg.logdet_pd(np.eye(d) + gram)


def interference_fraction(k, ch, solution, config):
    """Fraction of receiver ``k``'s interference that alignment cannot remove.

    Ratio of the interference covariance's ``streams[k]`` smallest
    eigenvalues to its trace: 0 when the interference fits in an
    ``rx_antennas[k] - streams[k]`` dimensional subspace, approaching 1
    as it fills the whole space.  Defined as 0 when there is essentially
    no interference at all (trace below 1e-15).
    """
    q = interference_covariance(k, ch, solution, config)
    total = float(np.real(np.trace(q)))
    if total <= 1e-15:
        return 0.0
    values = np.linalg.eigvalsh(q)
    frac = float(np.sum(values[: config.streams[k]])) / total
    return float(min(max(frac, 0.0), 1.0))


def dof_slope(points):
    """Least-squares slope of sum rate against log2(power).

    ``points`` is a sequence of ``(power, sum_rate)`` pairs with powers
    in linear scale; at least two distinct powers are required.  The
    slope estimates the network's degrees of freedom.
    """
    pts = [(float(p), float(r)) for p, r in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    x = np.log2([p for p, _ in pts])
    if np.ptp(x) == 0.0:
        raise ValueError("need at least two distinct powers")
    y = np.array([r for _, r in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def tdma_rates(ch, config):
    """Per-user rates under equal time sharing.

    Each user transmits alone for a 1/K fraction of the time, spending
    ``K`` times its power budget spread equally over its antennas.
    """
    require_consistent(ch, config)
    k_users = config.num_users
    out = np.zeros(k_users)
    for k in range(k_users):
        h = ch.matrices[k][k]
        scale = k_users * config.tx_power[k] / config.tx_antennas[k]
        gram = np.eye(config.rx_antennas[k]) + scale * (h @ h.conj().T)
        out[k] = linalg.logdet_pd(gram) / k_users
    return out


def tdma_sum_rate(ch, config):
    """Network sum rate under equal time sharing."""
    return float(np.sum(tdma_rates(ch, config)))


def isotropic_rates(ch, config):
    """Per-user rates when everyone transmits isotropically.

    Each transmitter spreads its power equally over all antennas with no
    precoding; each receiver treats the resulting co-channel
    interference as colored noise.
    """
    require_consistent(ch, config)
    k_users = config.num_users
    out = np.zeros(k_users)
    for k in range(k_users):
        n = config.rx_antennas[k]
        r = np.eye(n, dtype=np.complex128)
        for j in range(k_users):
            if j == k:
                continue
            h = ch.matrices[k][j]
            r += (config.tx_power[j] / config.tx_antennas[j]) * (h @ h.conj().T)
        h = ch.matrices[k][k]
        s = (config.tx_power[k] / config.tx_antennas[k]) * (h @ h.conj().T)
        out[k] = linalg.logdet_pd(r + s) - linalg.logdet_pd(r)
    return out


def isotropic_sum_rate(ch, config):
    """Network sum rate with isotropic transmission, interference as noise."""
    return float(np.sum(isotropic_rates(ch, config)))


def db_to_linear(db):
    """Power in linear scale from decibels."""
    return float(10.0 ** (float(db) / 10.0))
