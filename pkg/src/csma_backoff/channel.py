"""Four-state channel chain of slotted 1-persistent CSMA.

The channel alternates between pure idle mini-slots and transmission periods
of ``1 + a`` slots.  A period is *Type I* when it follows a pure idle
mini-slot and *Type II* when it starts right after another period.  With the
aggregate attempt stream of HOL packets modelled as Poisson with rate ``G``
per slot, the embedded chain over ``(Idle, Suc1, Suc2, Col)`` has closed-form
transition and limiting probabilities, from which the throughput curve
follows.

All functions are pure and operate on scalar floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

STATES = ("idle", "suc1", "suc2", "col")


@dataclass(frozen=True)
class ChannelParams:
    """Mini-slot ratio ``a`` and aggregate attempt rate ``G`` (attempts/slot)."""

    a: float
    G: float

    def __post_init__(self):
        a, G = self.a, self.G
        if not (math.isfinite(a) and a > 0):
            raise DomainError(f"a must be a positive finite number, got {a!r}")
        M = round(1.0 / a)
        if M < 1 or abs(M * a - 1.0) > 1e-9:
            raise DomainError(f"1/a must be a positive integer, got a={a!r}")
        if math.isnan(G) or G < 0:
            raise DomainError(f"G must be non-negative, got {G!r}")

    @property
    def M(self) -> int:
        """Mini-slots per packet slot."""
        return round(1.0 / self.a)


@dataclass(frozen=True)
class ChannelTransitions:
    """Arc probabilities of the channel chain.

    The three busy states (Suc1, Suc2, Col) share one outgoing row, so only
    the ``busy_*`` arcs are stored for them.
    """

    idle_idle: float
    idle_suc1: float
    idle_col: float
    busy_idle: float
    busy_suc2: float
    busy_col: float

    def matrix(self) -> np.ndarray:
        """Row-stochastic 4x4 matrix in ``STATES`` order."""
        busy = [self.busy_idle, 0.0, self.busy_suc2, self.busy_col]
        return np.array(
            [
                [self.idle_idle, self.idle_suc1, 0.0, self.idle_col],
                busy,
                busy,
                busy,
            ]
        )


@dataclass(frozen=True)
class ChannelStationary:
    """Embedded-chain limiting probabilities and state sojourn times (slots)."""

    pi_idle: float
    pi_suc1: float
    pi_suc2: float
    pi_col: float
    a: float

    @property
    def t_idle(self) -> float:
        return self.a

    @property
    def t_suc1(self) -> float:
        return 1.0 + self.a

    t_suc2 = t_suc1
    t_col = t_suc1

    def as_array(self) -> np.ndarray:
        return np.array([self.pi_idle, self.pi_suc1, self.pi_suc2, self.pi_col])


def _exps(params: ChannelParams):
    a, G = params.a, params.G
    e1 = math.exp(-a * G)
    e2 = math.exp(-(1.0 + a) * G)
    # 1 - e^{-aG} without cancellation for small aG
    one_minus_e1 = -math.expm1(-a * G)
    return a, G, e1, e2, one_minus_e1


def channel_transitions(params: ChannelParams) -> ChannelTransitions:
    """Transition probabilities of the channel chain for attempt rate ``G``."""
    a, G, e1, e2, one_minus_e1 = _exps(params)
    if math.isinf(G):
        return ChannelTransitions(0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
    idle_suc1 = a * G * e1
    busy_suc2 = (1.0 + a) * G * e2
    return ChannelTransitions(
        idle_idle=e1,
        idle_suc1=idle_suc1,
        idle_col=max(one_minus_e1 - idle_suc1, 0.0),
        busy_idle=e2,
        busy_suc2=busy_suc2,
        busy_col=max(-math.expm1(-(1.0 + a) * G) - busy_suc2, 0.0),
    )


def channel_stationary(params: ChannelParams) -> ChannelStationary:
    """Closed-form limiting probabilities of the channel chain.

    At ``G = 0`` the chain is absorbed in Idle and ``pi_idle = 1``.
    """
    a, G, e1, e2, one_minus_e1 = _exps(params)
    if G == 0.0:
        return ChannelStationary(1.0, 0.0, 0.0, 0.0, a)
    if math.isinf(G):
        return ChannelStationary(0.0, 0.0, 0.0, 1.0, a)
    den = one_minus_e1 + e2
    pi_idle = e2 / den
    pi_suc1 = a * G * e1 * e2 / den
    pi_suc2 = (1.0 + a) * G * e2 * one_minus_e1 / den
    pi_col = (one_minus_e1 - (1.0 + a) * G * e2 + G * e1 * e2) / den
    return ChannelStationary(pi_idle, pi_suc1, pi_suc2, max(pi_col, 0.0), a)


def _busy_den(a, e2, one_minus_e1):
    return (1.0 + a) * one_minus_e1 + a * e2


def time_avg_success(params: ChannelParams) -> float:
    """Fraction of time the channel spends in Suc1 or Suc2."""
    a, G, e1, e2, one_minus_e1 = _exps(params)
    if G == 0.0 or math.isinf(G):
        return 0.0
    return (1.0 + a) * G * e2 * (1.0 + a - e1) / _busy_den(a, e2, one_minus_e1)


def throughput(params: ChannelParams) -> float:
    """Network throughput (packets/slot) as a function of the attempt rate.

    This is the productive fraction of channel time: a successful period of
    ``1 + a`` slots carries one slot of payload.
    """
    a, G, e1, e2, one_minus_e1 = _exps(params)
    if G == 0.0 or math.isinf(G):
        return 0.0
    return G * e2 * (1.0 + a - e1) / _busy_den(a, e2, one_minus_e1)
