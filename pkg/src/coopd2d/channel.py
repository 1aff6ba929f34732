"""Link gains and achievable rates for the cooperative uplink model.

Powers are linear watts, distances meters, rates natural-log units
(nats/s/Hz). Fast fading is unit-mean exponential (Rayleigh power),
drawn independently per link and per subframe. A relay-assisted uplink
uses half-duplex decode-and-forward: half the subframe on the CU-to-relay
hop, half on the combined relay-plus-direct hop, and the CU falls back to
its direct link whenever that is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Gains below this floor are clamped up to it before entering a log.
GAIN_FLOOR = 1e-30


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("position coordinates must be finite")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class RadioParams:
    """Transmit powers, noise floor and pathloss exponent."""

    p_c: float
    p_d: float
    n0: float
    gamma: float = 4.0

    def __post_init__(self) -> None:
        if min(self.p_c, self.p_d, self.n0) <= 0:
            raise ValueError("powers and noise must be strictly positive")
        if self.gamma < 2:
            raise ValueError("pathloss exponent must be >= 2")


@dataclass(frozen=True)
class PairGains:
    """Per-subframe channel gains seen by one CU / D2D-pair combination."""

    h_mb: float  # CU to base station
    h_mn: float  # CU to D2D transmitter
    h_nb: float  # D2D transmitter to base station
    h_nn: float  # D2D transmitter to D2D receiver

    def __post_init__(self) -> None:
        for g in (self.h_mb, self.h_mn, self.h_nb, self.h_nn):
            if not (math.isfinite(g) and g >= 0):
                raise ValueError("channel gains must be finite and nonnegative")


@dataclass(frozen=True)
class RateState:
    """One joint draw of the cellular-side and D2D-side rates."""

    r_c: float
    r_d: float

    def __post_init__(self) -> None:
        for r in (self.r_c, self.r_d):
            if not (math.isfinite(r) and r >= 0):
                raise ValueError("rates must be finite and nonnegative")


class EmpiricalStateSet:
    """Weighted finite set of rate states, e.g. a Monte-Carlo training sample.

    Weights are probabilities: strictly positive, summing to one.
    """

    def __init__(self, r_c, r_d, weights=None):
        self.r_c = np.atleast_1d(np.asarray(r_c, dtype=float))
        self.r_d = np.atleast_1d(np.asarray(r_d, dtype=float))
        k = self.r_c.size
        if k == 0 or self.r_d.size != k:
            raise ValueError("state arrays must be nonempty and equal length")
        if weights is None:
            self.weights = np.full(k, 1.0 / k)
        else:
            self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        if self.weights.size != k:
            raise ValueError("weights length must match the state count")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to one")
        for arr in (self.r_c, self.r_d):
            if np.any(~np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError("rates must be finite and nonnegative")

    @classmethod
    def from_states(cls, states, weights=None) -> "EmpiricalStateSet":
        r_c = [s.r_c for s in states]
        r_d = [s.r_d for s in states]
        return cls(r_c, r_d, weights)

    @property
    def states(self) -> list[RateState]:
        return [RateState(float(c), float(d)) for c, d in zip(self.r_c, self.r_d)]

    def __len__(self) -> int:
        return self.r_c.size


@dataclass(frozen=True)
class PairGeometry:
    """The four link distances that fix a pair's average gains."""

    d_mb: float
    d_mn: float
    d_nb: float
    d_nn: float

    def __post_init__(self) -> None:
        for d in (self.d_mb, self.d_mn, self.d_nb, self.d_nn):
            if not (math.isfinite(d) and d > 0):
                raise ValueError("link distances must be finite and positive")

    @classmethod
    def from_positions(cls, cu: Position, dt: Position, dr: Position,
                       bs: Position = Position(0.0, 0.0)) -> "PairGeometry":
        return cls(
            d_mb=cu.distance_to(bs),
            d_mn=cu.distance_to(dt),
            d_nb=dt.distance_to(bs),
            d_nn=dt.distance_to(dr),
        )


def link_gain(distance: float, gamma: float, fading: float) -> float:
    """Channel gain: fading times the distance**-gamma pathloss."""
    if not (math.isfinite(distance) and distance > 0):
        raise ValueError("distance must be finite and positive")
    if fading < 0:
        raise ValueError("fading must be nonnegative")
    return fading * distance ** (-gamma)


def direct_rate(snr):
    """Rate of a plain point-to-point link, in nats."""
    return np.log1p(snr)


def relay_rate(snr_mn, snr_combined):
    """Decode-and-forward rate: half of the weaker hop, in nats.

    The second hop combines the direct CU signal with the relayed one, so
    ``snr_combined`` is the sum of both received SNRs.
    """
    return 0.5 * np.minimum(np.log1p(snr_mn), np.log1p(snr_combined))


def instantaneous_rates(gains: PairGains, params: RadioParams) -> RateState:
    """Cellular-side and D2D-side rates for one set of channel gains.

    The cellular rate takes the better of the direct uplink and the
    relayed uplink through the D2D transmitter.
    """
    h_mb = max(gains.h_mb, GAIN_FLOOR)
    h_mn = max(gains.h_mn, GAIN_FLOOR)
    h_nb = max(gains.h_nb, GAIN_FLOOR)
    h_nn = max(gains.h_nn, GAIN_FLOOR)
    snr_mb = params.p_c * h_mb / params.n0
    snr_mn = params.p_c * h_mn / params.n0
    snr_nb = params.p_d * h_nb / params.n0
    snr_nn = params.p_d * h_nn / params.n0
    r_direct = float(direct_rate(snr_mb))
    r_relay = float(relay_rate(snr_mn, snr_mb + snr_nb))
    return RateState(max(r_direct, r_relay), float(direct_rate(snr_nn)))


def state_set_from_fading(geom: PairGeometry, params: RadioParams,
                          fading: np.ndarray) -> EmpiricalStateSet:
    """Build a uniform-weight state set from explicit fading draws.

    ``fading`` has shape (count, 4) with columns in link order
    (CU-BS, CU-DT, DT-BS, DT-DR).
    """
    xi = np.asarray(fading, dtype=float)
    if xi.ndim != 2 or xi.shape[1] != 4 or xi.shape[0] < 1:
        raise ValueError("fading must have shape (count, 4)")
    if np.any(xi < 0):
        raise ValueError("fading draws must be nonnegative")
    g_mb = np.maximum(xi[:, 0] * geom.d_mb ** -params.gamma, GAIN_FLOOR)
    g_mn = np.maximum(xi[:, 1] * geom.d_mn ** -params.gamma, GAIN_FLOOR)
    g_nb = np.maximum(xi[:, 2] * geom.d_nb ** -params.gamma, GAIN_FLOOR)
    g_nn = np.maximum(xi[:, 3] * geom.d_nn ** -params.gamma, GAIN_FLOOR)
    snr_mb = params.p_c * g_mb / params.n0
    snr_mn = params.p_c * g_mn / params.n0
    snr_nb = params.p_d * g_nb / params.n0
    snr_nn = params.p_d * g_nn / params.n0
    r_c = np.maximum(direct_rate(snr_mb), relay_rate(snr_mn, snr_mb + snr_nb))
    r_d = direct_rate(snr_nn)
    return EmpiricalStateSet(r_c, r_d)


def sample_state_set(geom: PairGeometry, params: RadioParams, count: int,
                     rng: np.random.Generator) -> EmpiricalStateSet:
    """Draw ``count`` i.i.d. fading states for one pair's four links."""
    if count < 1:
        raise ValueError("count must be at least 1")
    xi = rng.exponential(1.0, size=(count, 4))
    return state_set_from_fading(geom, params, xi)
