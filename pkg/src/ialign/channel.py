"""Network parameters and channel realizations.

A network is ``num_users`` transmitter/receiver pairs; the channel from
transmitter ``l`` to receiver ``k`` is an ``rx_antennas[k] x
tx_antennas[l]`` complex matrix.  Generated entries are i.i.d. circular
complex Gaussian with unit variance (variance 1/2 per real component),
and every draw is reproducible from an integer seed.

Beyond plain generation this module builds the two derived topologies
used elsewhere: block-diagonal symbol extensions over multiple slots,
and the two-slot effective channels induced by a shared amplifying
relay.  Colored receiver noise is carried explicitly (``noise_cov``) and
removed by :func:`whiten_noise` before any solver runs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import linalg


def complex_gaussian(rng, rows, cols=None):
    """Matrix of i.i.d. CN(0, 1) entries drawn from ``rng``.

    Real and imaginary parts are independent N(0, 1/2), so each entry
    has unit second moment.  With ``cols=None`` returns a vector.
    """
    shape = (rows,) if cols is None else (rows, cols)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(0.5) * (re + 1j * im)


def _freeze(a):
    out = np.array(a, dtype=np.complex128)
    out.setflags(write=False)
    return out


def _int_tuple(value, k, name):
    if np.isscalar(value):
        value = (value,) * k
    out = tuple(int(v) for v in value)
    if len(out) != k:
        raise ValueError(f"{name} must have one entry per user, got {len(out)}")
    return out


def _float_tuple(value, k, name):
    if np.isscalar(value):
        value = (value,) * k
    out = tuple(float(v) for v in value)
    if len(out) != k:
        raise ValueError(f"{name} must have one entry per user, got {len(out)}")
    return out


@dataclass(frozen=True)
class NetworkConfig:
    """Immutable description of a K-user interference network.

    ``streams[k]`` is the number of independent data streams user ``k``
    sends; it never exceeds ``min(tx_antennas[k], rx_antennas[k])``.
    ``tx_power`` applies on the forward links, ``reverse_tx_power`` on
    the reciprocal ones (equal by default).
    """

    num_users: int
    tx_antennas: tuple[int, ...]
    rx_antennas: tuple[int, ...]
    streams: tuple[int, ...]
    tx_power: tuple[float, ...]
    reverse_tx_power: tuple[float, ...]

    def __post_init__(self):
        k = int(self.num_users)
        if k < 1:
            raise ValueError("need at least one user")
        object.__setattr__(self, "num_users", k)
        object.__setattr__(self, "tx_antennas", _int_tuple(self.tx_antennas, k, "tx_antennas"))
        object.__setattr__(self, "rx_antennas", _int_tuple(self.rx_antennas, k, "rx_antennas"))
        object.__setattr__(self, "streams", _int_tuple(self.streams, k, "streams"))
        object.__setattr__(self, "tx_power", _float_tuple(self.tx_power, k, "tx_power"))
        object.__setattr__(
            self, "reverse_tx_power", _float_tuple(self.reverse_tx_power, k, "reverse_tx_power")
        )
        for m, n, d in zip(self.tx_antennas, self.rx_antennas, self.streams):
            if m < 1 or n < 1:
                raise ValueError("antenna counts must be positive")
            if not 1 <= d <= min(m, n):
                raise ValueError(
                    f"stream count {d} outside [1, min({m}, {n})]"
                )
        if any(p <= 0 for p in self.tx_power + self.reverse_tx_power):
            raise ValueError("powers must be positive")

    @classmethod
    def uniform(cls, num_users, tx_antennas, rx_antennas, streams, power=1.0, reverse_power=None):
        """Config with identical antenna/stream/power numbers for all users."""
        if reverse_power is None:
            reverse_power = power
        return cls(num_users, tx_antennas, rx_antennas, streams, power, reverse_power)

    def with_power(self, power, reverse_power=None):
        """Copy of this config with every user's power set to ``power``."""
        if reverse_power is None:
            reverse_power = power
        return dataclasses.replace(
            self,
            tx_power=_float_tuple(power, self.num_users, "tx_power"),
            reverse_tx_power=_float_tuple(reverse_power, self.num_users, "reverse_tx_power"),
        )

    def reciprocal(self):
        """Config of the reciprocal network: antenna roles and powers swap."""
        return dataclasses.replace(
            self,
            tx_antennas=self.rx_antennas,
            rx_antennas=self.tx_antennas,
            tx_power=self.reverse_tx_power,
            reverse_tx_power=self.tx_power,
        )


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all cross and direct channels.

    ``matrices[k][l]`` maps transmitter ``l`` into receiver ``k``'s
    antenna space.  ``noise_cov[k]``, when present, is the Hermitian
    positive definite covariance of receiver ``k``'s noise; absent means
    white unit-variance noise everywhere.
    """

    matrices: tuple[tuple[np.ndarray, ...], ...]
    noise_cov: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        rows = tuple(tuple(_freeze(h) for h in row) for row in self.matrices)
        k = len(rows)
        if k < 1 or any(len(row) != k for row in rows):
            raise ValueError("matrices must form a full K x K grid")
        rx = tuple(row[0].shape[0] for row in rows)
        tx = tuple(rows[0][l].shape[1] for l in range(k))
        for i, row in enumerate(rows):
            for j, h in enumerate(row):
                if h.ndim != 2 or h.shape != (rx[i], tx[j]):
                    raise ValueError(
                        f"channel ({i}, {j}) has shape {h.shape}, expected {(rx[i], tx[j])}"
                    )
        object.__setattr__(self, "matrices", rows)
        if self.noise_cov is not None:
            cov = tuple(_freeze(c) for c in self.noise_cov)
            if len(cov) != k:
                raise ValueError("need one noise covariance per receiver")
            for i, c in enumerate(cov):
                if c.shape != (rx[i], rx[i]):
                    raise ValueError(f"noise covariance {i} has shape {c.shape}")
                herm = linalg.hermitian_part(c)
                try:
                    np.linalg.cholesky(herm)
                except np.linalg.LinAlgError as exc:
                    raise ValueError(f"noise covariance {i} is not positive definite") from exc
            object.__setattr__(self, "noise_cov", cov)

    @property
    def num_users(self):
        return len(self.matrices)

    def matches(self, config):
        """True when shapes agree with ``config``."""
        if config.num_users != self.num_users:
            return False
        return all(
            self.matrices[k][l].shape == (config.rx_antennas[k], config.tx_antennas[l])
            for k in range(self.num_users)
            for l in range(self.num_users)
        )


def require_consistent(ch, config):
    """Raise unless ``ch`` shapes match ``config``."""
    if not ch.matches(config):
        raise ValueError("channel shapes do not match the network config")


def generate_network(config, seed):
    """Draw one i.i.d. CN(0,1) realization of every channel in ``config``.

    The draw order is fixed (receivers outer, transmitters inner, real
    before imaginary), so a given ``seed`` always yields the same set.
    """
    rng = np.random.default_rng(seed)
    k = config.num_users
    rows = tuple(
        tuple(
            complex_gaussian(rng, config.rx_antennas[i], config.tx_antennas[j])
            for j in range(k)
        )
        for i in range(k)
    )
    return ChannelSet(rows)


def reciprocal_channels(ch):
    """Channel set of the reciprocal network: entry (k, l) becomes H[l][k]^H.

    Applying the map twice returns the original set exactly (conjugate
    transposition is lossless).  Only white-noise sets are reciprocal;
    whiten first if ``noise_cov`` is present.
    """
    if ch.noise_cov is not None:
        raise ValueError("reciprocity is defined for white noise; call whiten_noise first")
    k = ch.num_users
    rows = tuple(
        tuple(ch.matrices[l][i].conj().T for l in range(k)) for i in range(k)
    )
    return ChannelSet(rows)


def extend_diagonal(scalar_slots, slots):
    """Block-diagonal extension of per-slot scalar networks.

    ``scalar_slots[t][k][l]`` is the scalar channel from transmitter
    ``l`` to receiver ``k`` in slot ``t``.  The result is a ChannelSet
    whose (k, l) entry is ``diag(scalar_slots[0][k][l], ...,
    scalar_slots[slots-1][k][l])``, i.e. each link becomes a diagonal
    ``slots x slots`` matrix.
    """
    if slots < 1:
        raise ValueError("need at least one slot")
    arr = np.asarray(scalar_slots, dtype=np.complex128)
    if arr.ndim != 3 or arr.shape[0] != slots or arr.shape[1] != arr.shape[2]:
        raise ValueError(
            f"expected scalars of shape (slots, K, K) with slots={slots}, got {arr.shape}"
        )
    k = arr.shape[1]
    rows = tuple(
        tuple(np.diag(arr[:, i, j]) for j in range(k)) for i in range(k)
    )
    return ChannelSet(rows)


def matched_relay_gain(power):
    """Relay amplification that spends the same power budget as a source.

    The relay hears the three unit-power sources plus unit noise, so a
    gain of ``sqrt(power / (1 + 3 power))`` makes its average transmit
    power equal to ``power``.
    """
    if power <= 0:
        raise ValueError("power must be positive")
    return float(np.sqrt(power / (1.0 + 3.0 * power)))


@dataclass(frozen=True)
class RelayParams:
    """Scalar coefficients of the 3-user two-slot relay topology.

    ``direct1`` and ``direct2`` are the 3x3 source-to-destination
    coefficient grids for the two slots (entry (j, i): source i heard at
    destination j).  ``to_relay[i]`` carries source i into the relay
    during slot 1; ``from_relay[j]`` carries the relay's slot-2
    broadcast into destination j, scaled by the amplification ``gain``.
    """

    direct1: np.ndarray
    direct2: np.ndarray
    to_relay: np.ndarray
    from_relay: np.ndarray
    gain: float

    def __post_init__(self):
        d1 = _freeze(self.direct1)
        d2 = _freeze(self.direct2)
        gin = _freeze(self.to_relay)
        gout = _freeze(self.from_relay)
        if d1.shape != (3, 3) or d2.shape != (3, 3):
            raise ValueError("direct coefficient grids must be 3x3")
        if gin.shape != (3,) or gout.shape != (3,):
            raise ValueError("relay coefficient vectors must have length 3")
        gain = float(self.gain)
        if not gain >= 0.0:
            raise ValueError("gain must be a nonnegative real")
        object.__setattr__(self, "direct1", d1)
        object.__setattr__(self, "direct2", d2)
        object.__setattr__(self, "to_relay", gin)
        object.__setattr__(self, "from_relay", gout)
        object.__setattr__(self, "gain", gain)


def random_relay_params(seed, gain):
    """Draw i.i.d. CN(0,1) relay topology coefficients for one trial."""
    rng = np.random.default_rng(seed)
    return RelayParams(
        direct1=complex_gaussian(rng, 3, 3),
        direct2=complex_gaussian(rng, 3, 3),
        to_relay=complex_gaussian(rng, 3),
        from_relay=complex_gaussian(rng, 3),
        gain=gain,
    )


def relay_effective_channels(params):
    """Two-slot virtual MIMO channels induced by an amplifying relay.

    Stacking the two received slots at destination ``j`` gives, for each
    source ``i``, the effective 2x2 channel

        [ direct1[j][i]                          0              ]
        [ gain * from_relay[j] * to_relay[i]     direct2[j][i]  ]

    The relay also forwards its own slot-1 noise, so slot 2 is noisier:
    ``noise_cov[j] = diag(1, 1 + gain^2 |from_relay[j]|^2)``.
    """
    beta = params.gain
    k = 3
    rows = []
    for j in range(k):
        row = []
        for i in range(k):
            h = np.zeros((2, 2), dtype=np.complex128)
            h[0, 0] = params.direct1[j, i]
            h[1, 0] = beta * params.from_relay[j] * params.to_relay[i]
            h[1, 1] = params.direct2[j, i]
            row.append(h)
        rows.append(tuple(row))
    cov = tuple(
        np.diag([1.0, 1.0 + beta**2 * abs(params.from_relay[j]) ** 2]).astype(np.complex128)
        for j in range(k)
    )
    return ChannelSet(tuple(rows), noise_cov=cov)


def whiten_noise(ch):
    """Absorb colored noise into the channels.

    Left-multiplies every row of channels by the Hermitian principal
    inverse square root of that receiver's noise covariance, after which
    the noise is white:  achievable log-det rates are preserved exactly.
    Returns ``ch`` unchanged when the noise is already white.
    """
    if ch.noise_cov is None:
        return ch
    k = ch.num_users
    whiteners = [linalg.inv_sqrt_pd(c) for c in ch.noise_cov]
    rows = tuple(
        tuple(whiteners[i] @ ch.matrices[i][j] for j in range(k)) for i in range(k)
    )
    return ChannelSet(rows)


def _encode_matrix(a):
    # row-major [re, im] pairs; repr round-trips every float exactly
    return [[float(x.real), float(x.imag)] for x in np.asarray(a).ravel(order="C")]


def _decode_matrix(entries, rows, cols):
    flat = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    if flat.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {flat.size}")
    return flat.reshape(rows, cols)


def channels_to_json(config, ch, path=None):
    """Serialize a config + channel set to a JSON document (bit exact).

    Returns the document as a dict; writes it to ``path`` when given.
    """
    require_consistent(ch, config)
    doc = {
        "config": {
            "users": config.num_users,
            "tx_antennas": list(config.tx_antennas),
            "rx_antennas": list(config.rx_antennas),
            "streams": list(config.streams),
            "tx_power": list(config.tx_power),
            "reverse_tx_power": list(config.reverse_tx_power),
        },
        "channels": [
            [_encode_matrix(ch.matrices[k][l]) for l in range(config.num_users)]
            for k in range(config.num_users)
        ],
        "noise_cov": None
        if ch.noise_cov is None
        else [_encode_matrix(c) for c in ch.noise_cov],
    }
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    return doc


def channels_from_json(doc):
    """Inverse of :func:`channels_to_json`; accepts a dict or a file path."""
    if not isinstance(doc, dict):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    cfg_doc = doc["config"]
    config = NetworkConfig(
        num_users=cfg_doc["users"],
        tx_antennas=cfg_doc["tx_antennas"],
        rx_antennas=cfg_doc["rx_antennas"],
        streams=cfg_doc["streams"],
        tx_power=cfg_doc["tx_power"],
        reverse_tx_power=cfg_doc["reverse_tx_power"],
    )
    k = config.num_users
    rows = tuple(
        tuple(
            _decode_matrix(doc["channels"][i][j], config.rx_antennas[i], config.tx_antennas[j])
            for j in range(k)
        )
        for i in range(k)
    )
    cov = None
    if doc.get("noise_cov") is not None:
        cov = tuple(
            _decode_matrix(doc["noise_cov"][i], config.rx_antennas[i], config.rx_antennas[i])
            for i in range(k)
        )
    return config, ChannelSet(rows, noise_cov=cov)
