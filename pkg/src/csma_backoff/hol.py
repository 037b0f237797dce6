"""Head-of-line packet model under K-exponential backoff.

A HOL packet in phase ``i`` (``i`` collisions so far) moves between sensing
``S_i``, waiting ``W_i`` and the two transmission states ``F_i`` (Type I) and
``F'_i`` (Type II).  Sojourn times are ``a`` slots for sensing and one slot
for the others.  Everything here is evaluated in closed form in slots; the
Monte-Carlo counterparts live in :mod:`csma_backoff.montecarlo`.

``K`` is either a positive integer cut-off phase or :data:`INFINITE`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, throughput
from .errors import DomainError, Divergent, NotPositiveRecurrent, Unstable

INFINITE = math.inf


def is_infinite(K) -> bool:
    return math.isinf(K)


def parse_K(value) -> float | int:
    """Parse a cut-off phase from an int, a float infinity or ``"inf"``."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinite", "infinity"):
            return INFINITE
        value = int(value)
    if isinstance(value, float) and math.isinf(value):
        return INFINITE
    if int(value) != value or value < 1:
        raise DomainError(f"K must be a positive integer or 'inf', got {value!r}")
    return int(value)


@dataclass(frozen=True)
class BackoffParams:
    """Retransmission factor, cut-off phase, per-node arrival rate and node count."""

    q: float
    K: float | int = INFINITE
    lam: float = 0.0
    n: int = 1

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"q must lie in (0, 1), got {self.q!r}")
        object.__setattr__(self, "K", parse_K(self.K))
        if not (0.0 <= self.lam <= 1.0):
            raise DomainError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")


@dataclass(frozen=True)
class SuccessProbs:
    """Success probabilities of Type I/II transmissions and the pure-idle probability."""

    p1: float
    p2: float
    p: float
    alpha: float


def pure_idle_prob(params: ChannelParams) -> float:
    """Probability that the channel is in a pure idle period."""
    a, G = params.a, params.G
    if math.isinf(G):
        return 0.0
    if G == 0.0:
        return 1.0
    e2 = math.exp(-(1.0 + a) * G)
    return a * e2 / ((1.0 + a) * -math.expm1(-a * G) + a * e2)


def success_probs(params: ChannelParams) -> SuccessProbs:
    a, G = params.a, params.G
    if math.isinf(G):
        return SuccessProbs(0.0, 0.0, 0.0, 0.0)
    if G == 0.0:
        return SuccessProbs(1.0, 1.0, 1.0, 1.0)
    p1 = math.exp(-a * G)
    p2 = math.exp(-(1.0 + a) * G)
    den = (1.0 + a) * -math.expm1(-a * G) + a * p2
    alpha = a * p2 / den
    p = p2 * (1.0 + a - p1) / den
    return SuccessProbs(p1=p1, p2=p2, p=p, alpha=alpha)


def _check_recurrent(sp: SuccessProbs, bp: BackoffParams):
    # With a finite cut-off the chain has finitely many states and is always
    # positive recurrent; only the unbounded chain needs (1 - p)/q < 1.
    if is_infinite(bp.K) and sp.p + bp.q <= 1.0:
        raise NotPositiveRecurrent(
            f"p + q = {sp.p + bp.q:.6g} <= 1: phase probabilities do not decay"
        )


def _geometric_partial(x: float, K: int) -> float:
    """sum_{i<K} x**i, stable for x close to 1."""
    if x == 1.0:
        return float(K)
    if x == 0.0:
        return 1.0
    lx = math.log(x)
    return math.expm1(K * lx) / math.expm1(lx)


@dataclass(frozen=True)
class HolStationary:
    """Time-average probabilities of the HOL states.

    The probabilities are geometric in the phase, with an extra ``1/p``
    factor at the cut-off phase ``K``.  For ``K = INFINITE`` the boundary
    terms vanish.  Use :meth:`table` for arrays over phases.
    """

    p: float
    q: float
    alpha: float
    a: float
    K: float | int
    D: float

    def _weight(self, i, base):
        i = np.asarray(i)
        w = np.power(base, i.astype(float))
        if not is_infinite(self.K):
            if np.any((i < 0) | (i > self.K)):
                raise IndexError(f"phase outside 0..{self.K}")
            w = np.where(i == self.K, w / self.p, w)
        return w / self.D

    def _x(self):
        return (1.0 - self.p) / self.q

    def s_tilde(self, i):
        return self.a * self._weight(i, self._x())

    def w_tilde(self, i):
        return (1.0 - self.alpha) * self._weight(i, self._x())

    def f_tilde(self, i):
        return self.alpha * self._weight(i, 1.0 - self.p)

    def f_prime_tilde(self, i):
        return (1.0 - self.alpha) * self._weight(i, 1.0 - self.p)

    def table(self, max_phase: int | None = None) -> dict[str, np.ndarray]:
        """Arrays ``s``, ``w``, ``f``, ``f_prime`` for phases ``0..max_phase``."""
        if max_phase is None:
            if is_infinite(self.K):
                raise ValueError("max_phase is required for an unbounded cut-off")
            max_phase = int(self.K)
        i = np.arange(max_phase + 1)
        return {
            "s": self.s_tilde(i),
            "w": self.w_tilde(i),
            "f": self.f_tilde(i),
            "f_prime": self.f_prime_tilde(i),
        }


def normalizer(sp: SuccessProbs, bp: BackoffParams, a: float) -> float:
    """The normalizer D, which equals the mean service time in slots."""
    _check_recurrent(sp, bp)
    p, q, alpha = sp.p, bp.q, sp.alpha
    c = 1.0 + a - alpha
    if is_infinite(bp.K):
        return q * c / (p + q - 1.0) + 1.0 / p
    K = int(bp.K)
    x = (1.0 - p) / q
    # sensing and waiting mass per unit of s_0, plus the transmission mass 1/p
    return c * (_geometric_partial(x, K) + x**K / p) + 1.0 / p


def hol_stationary(sp: SuccessProbs, bp: BackoffParams, a: float) -> HolStationary:
    if sp.p <= 0.0:
        raise DomainError("success probability is zero; the HOL chain never completes")
    D = normalizer(sp, bp, a)
    return HolStationary(p=sp.p, q=bp.q, alpha=sp.alpha, a=a, K=bp.K, D=D)


def offered_load(bp: BackoffParams, sp: SuccessProbs, a: float) -> float:
    """Probability that a node's queue is non-empty, ``lambda / (f~_0 + f~'_0)``.

    The raw value is returned even when it exceeds one.
    """
    if bp.lam == 0.0:
        _check_recurrent(sp, bp)
        return 0.0
    return bp.lam * normalizer(sp, bp, a)


@dataclass(frozen=True)
class ServiceMoments:
    """First and second moments of the HOL service time in slots.

    ``ex2`` is ``inf`` and ``converged`` is False when the second moment
    diverges.
    """

    ex: float
    ex2: float
    converged: bool

    @property
    def variance(self) -> float:
        return self.ex2 - self.ex**2


def second_moment_terms(sp: SuccessProbs, bp: BackoffParams, a: float):
    """Split ``E[X^2] = B * sum_{j>=1} r**j + C`` with ``r = (1 - p)/q**2``.

    Returns ``(B, C, r)``.  ``B`` and ``C`` are finite whenever ``p + q > 1``
    and ``p + q**2 != 1``; the sum converges only for ``r < 1``.

    Derivation: a phase-``i`` packet spends a geometric number (success
    probability ``q**i``) of sensing cycles, each lasting ``a`` slots if the
    channel was idle (probability alpha) or ``1 + a`` slots otherwise; the
    last cycle fixes the transmission type and therefore the failure
    probability.  First-step analysis over phases then gives power sums of
    ``q**-i`` and ``q**-2i`` weighted by ``(1 - p)**i``.
    """
    p, q, alpha, p1, p2 = sp.p, bp.q, sp.alpha, sp.p1, sp.p2
    u = 1.0 - p
    s = p + q - 1.0
    m = 1.0 + a - alpha                        # mean sensing cycle
    ey2 = alpha * a**2 + (1.0 - alpha) * (1.0 + a) ** 2
    var_y = ey2 - m * m
    e_last2 = alpha * (1.0 + a) ** 2 + (1.0 - alpha) * (2.0 + a) ** 2
    kappa = alpha * (1.0 - p1) * a + (1.0 - alpha) * (1.0 - p2) * (1.0 + a)
    tail = kappa + u * (1.0 - m)

    k2 = 2.0 * m * m * q / s
    k1 = var_y - 3.0 * m * m + 2.0 * m * (m + 1.0) + 2.0 * (u * m / p + m / s * tail)
    k0 = -var_y + m * m - 2.0 * m * (m + 1.0) + e_last2 + 2.0 * tail / p

    C = k2 + k1 * q / s + k0 / p
    return k2, C, u / (q * q)


def service_moments(sp: SuccessProbs, bp: BackoffParams, a: float) -> ServiceMoments:
    """Service-time moments for the unbounded cut-off (``K = INFINITE``)."""
    if not is_infinite(bp.K):
        raise DomainError("closed-form moments are available only for K = INFINITE")
    _check_recurrent(sp, bp)
    ex = normalizer(sp, bp, a)
    B, C, r = second_moment_terms(sp, bp, a)
    if r >= 1.0:
        return ServiceMoments(ex=ex, ex2=math.inf, converged=False)
    return ServiceMoments(ex=ex, ex2=B * r / (1.0 - r) + C, converged=True)


def mean_delay(lam: float, m: ServiceMoments) -> float:
    """Pollaczek-Khinchin mean sojourn time of the Geo/G/1 input queue (slots)."""
    if not m.converged:
        raise Divergent("second moment of the service time is unbounded")
    load = lam * m.ex
    if load >= 1.0:
        raise Unstable(f"lambda * E[X] = {load:.6g} >= 1")
    return m.ex + (lam * m.ex2 - lam * m.ex**2) / (2.0 * (1.0 - load))


def theorem1_identity(params: ChannelParams, sp: SuccessProbs) -> float:
    """Residual ``|p1 - exp(-a * lambda_hat / p)|`` of the equilibrium fixed point."""
    if params.G <= 0:
        raise DomainError("the fixed-point identity needs G > 0")
    lam_hat = throughput(params)
    return abs(sp.p1 - math.exp(-params.a * lam_hat / sp.p))
