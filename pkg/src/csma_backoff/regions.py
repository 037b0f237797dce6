"""Stable-throughput and bounded-delay regions of the retransmission factor.

The throughput curve ``lambda_hat(G)`` rises and then falls.  For a load
below its maximum there are two roots ``G_S <= G_L``, and stable throughput
requires ``G`` in between.  The attempt-rate equation links ``G`` to the
retransmission factor ``q`` through ``q = h(G)``, which is increasing, so the
attempt-rate interval maps to an interval of ``q``.  The bounded-delay region
further requires a finite second moment of the service time, i.e.
``q > sqrt(1 - p)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

from .channel import ChannelParams, throughput
from .errors import DomainError, Infeasible, NoBracket, NoSolution
from .hol import INFINITE, BackoffParams, is_infinite, offered_load, parse_K, success_probs
from .hol import _geometric_partial
from .numerics import find_root, maximize_unimodal

log = logging.getLogger(__name__)

#: Largest tolerated gap between the closed-form and numeric q(G) maps.
CLOSED_FORM_TOL = 1e-6


@dataclass(frozen=True)
class NetworkLoad:
    """Aggregate input rate ``lambda_hat = n * lambda`` and the network shape."""

    lambda_hat: float
    n: int
    a: float
    K: float | int = INFINITE

    def __post_init__(self):
        if not self.lambda_hat >= 0:
            raise DomainError(f"lambda_hat must be non-negative, got {self.lambda_hat!r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if self.lambda_hat / self.n > 1:
            raise DomainError("per-node rate lambda_hat / n exceeds 1")
        ChannelParams(self.a, 0.0)
        object.__setattr__(self, "K", parse_K(self.K))

    @property
    def lam(self) -> float:
        return self.lambda_hat / self.n


@dataclass(frozen=True)
class ThroughputRoots:
    g_small: float
    g_large: float
    lambda_max: float
    g_peak: float


@dataclass(frozen=True)
class QRegion:
    """Interval of retransmission factors with endpoint inclusivity flags."""

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    @classmethod
    def empty(cls) -> "QRegion":
        return cls(math.nan, math.nan, False, False)

    @property
    def is_empty(self) -> bool:
        if math.isnan(self.lo) or math.isnan(self.hi):
            return True
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def __contains__(self, q: float) -> bool:
        if self.is_empty:
            return False
        above = q >= self.lo if self.lo_closed else q > self.lo
        below = q <= self.hi if self.hi_closed else q < self.hi
        return above and below

    def issubset(self, other: "QRegion", tol: float = 0.0) -> bool:
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        return self.lo >= other.lo - tol and self.hi <= other.hi + tol


def _thr(a):
    return lambda G: throughput(ChannelParams(a, G))


def _p(G, a):
    return success_probs(ChannelParams(a, G)).p


@lru_cache(maxsize=None)
def max_throughput(a: float) -> tuple[float, float]:
    """``(g_peak, lambda_max)`` of the throughput curve for mini-slot ratio ``a``."""
    ChannelParams(a, 0.0)
    f = _thr(a)
    hi = 1.0
    # the peak sits well below the point where the curve has fallen under 1e-3
    while f(hi) > 1e-3:
        hi *= 2.0
    return maximize_unimodal(f, (0.0, hi), tol=1e-12)


def throughput_roots(load: NetworkLoad) -> ThroughputRoots:
    """Smaller and larger attempt rates at which the throughput equals ``lambda_hat``."""
    a, target = load.a, load.lambda_hat
    g_peak, lam_max = max_throughput(a)
    if target <= 0:
        raise DomainError("lambda_hat must be positive to define attempt-rate roots")
    if target > lam_max * (1 + 1e-12):
        raise Infeasible(f"lambda_hat = {target:.6g} exceeds the maximum {lam_max:.6g}")
    if target >= lam_max:
        return ThroughputRoots(g_peak, g_peak, lam_max, g_peak)
    f = _thr(a)

    def gap(G):
        return f(G) - target

    g_small = find_root(gap, (1e-9, g_peak), tol=1e-13)
    g_hi = 2.0 * g_peak
    while f(g_hi) >= target:
        g_hi *= 2.0
    g_large = find_root(gap, (g_peak, g_hi), tol=1e-13)
    return ThroughputRoots(g_small, g_large, lam_max, g_peak)


def _fixed_point_context(G, load, q=0.5):
    sp = success_probs(ChannelParams(load.a, G))
    bp = BackoffParams(q=q, K=load.K, lam=load.lam, n=load.n)
    return sp, bp


def attempt_equation_residual(q: float, G: float, load: NetworkLoad) -> float:
    """Right side minus left side of the per-mini-slot attempt-rate balance.

    The attempt rate per mini-slot ``a*G`` is made of fresh arrivals at empty
    nodes, ``a * lambda_hat * (1 - rho)``, plus backlogged sensing HOL packets
    firing with probability ``q**i``.  ``rho`` is the offered load at ``(G, q)``.
    """
    sp, bp = _fixed_point_context(G, load, q)
    p, a = sp.p, load.a
    rho = offered_load(bp, sp, a)
    if is_infinite(load.K):
        share = (p + q - 1.0) / (p * q)
    else:
        K = int(load.K)
        x = (1.0 - p) / q
        share = (1.0 / p) / (_geometric_partial(x, K) + x**K / p)
    return a * load.lambda_hat * (1.0 - rho) + load.n * rho * share - a * G


def attempt_rate_to_q_finiteK(G: float, load: NetworkLoad) -> float:
    """Retransmission factor that produces attempt rate ``G`` under a finite cut-off."""
    if is_infinite(load.K):
        raise DomainError("use attempt_rate_to_q_exp for K = INFINITE")
    try:
        return find_root(
            lambda q: attempt_equation_residual(q, G, load), (1e-12, 1.0 - 1e-12), tol=1e-16
        )
    except NoBracket as exc:
        raise NoSolution(f"no q in (0, 1) yields G = {G:.6g} at n = {load.n}") from exc


def attempt_rate_to_q_exp_closed(G: float, load: NetworkLoad) -> float:
    """Closed-form ``h(G)`` for the unbounded cut-off (may be NaN off-domain)."""
    sp = success_probs(ChannelParams(load.a, G))
    p, alpha, a, n, L = sp.p, sp.alpha, load.a, load.n, load.lambda_hat
    c = 1.0 + a - alpha
    A = L * c * p - a * (G - L) * p**2 - a * p * L**2 / n
    disc = A * A + 4.0 * a * L**3 * c * p**2 / n
    den = 2.0 * (A + L - a * L**2 * c * p**2 / n)
    if disc < 0 or den == 0:
        return math.nan
    return (1.0 - p) * (A + 2.0 * L + math.sqrt(disc)) / den


def attempt_rate_to_q_exp_numeric(G: float, load: NetworkLoad) -> float:
    """Solve the implicit attempt-rate equation for ``q`` in ``(1 - p, 1)``."""
    sp = success_probs(ChannelParams(load.a, G))
    p, alpha, a, n, L = sp.p, sp.alpha, load.a, load.n, load.lambda_hat
    lam = L / n
    c = 1.0 + a - alpha

    u = 1.0 - p

    def f(q):
        s = q - u
        if s <= 0.0:
            return -math.inf
        return a * L + lam * (q * c / s + 1.0 / p) * (n * s / (p * q) - a * L) - a * G

    lo = u + max(1e-12 * u, 1e-15)
    try:
        return find_root(f, (lo, 1.0), tol=1e-15)
    except NoBracket as exc:
        raise NoSolution(f"no q in (1 - p, 1) yields G = {G:.6g}") from exc


def attempt_rate_to_q_exp(G: float, load: NetworkLoad) -> float:
    """``q = h(G)`` for exponential backoff with an unbounded cut-off.

    The closed form is used when it agrees with the numeric solution of the
    implicit equation to :data:`CLOSED_FORM_TOL`; otherwise the numeric
    value is returned and the discrepancy logged.
    """
    if not is_infinite(load.K):
        raise DomainError("attempt_rate_to_q_exp requires K = INFINITE")
    q_closed = attempt_rate_to_q_exp_closed(G, load)
    try:
        q_num = attempt_rate_to_q_exp_numeric(G, load)
    except NoSolution:
        q_num = math.nan
    if math.isnan(q_num):
        if 0.0 < q_closed < 1.0:
            log.warning("closed-form q(G=%g) = %g has no numeric counterpart", G, q_closed)
        raise NoSolution(f"no q in (0, 1) yields G = {G:.6g}")
    if not abs(q_closed - q_num) <= CLOSED_FORM_TOL:
        log.warning("closed-form q(G=%g) = %r differs from numeric %r; using numeric",
                    G, q_closed, q_num)
        return q_num
    if not 0.0 < q_closed < 1.0:
        raise NoSolution(f"q = {q_closed:.6g} outside (0, 1)")
    return q_closed


def attempt_rate_to_q(G: float, load: NetworkLoad) -> float:
    if is_infinite(load.K):
        return attempt_rate_to_q_exp(G, load)
    return attempt_rate_to_q_finiteK(G, load)


def q_to_attempt_rate(q: float, load: NetworkLoad, bracket=None) -> float:
    """Invert ``q = h(G)``; the default bracket is ``[G_S, G_L]``."""
    if bracket is None:
        roots = throughput_roots(load)
        bracket = (roots.g_small, roots.g_large)
    return find_root(lambda G: attempt_rate_to_q(G, load) - q, bracket, tol=1e-13)


def stable_region_exp(load: NetworkLoad) -> QRegion:
    """Closed interval ``[h(G_S), h(G_L)]`` of retransmission factors."""
    if not is_infinite(load.K):
        raise DomainError("stable_region_exp requires K = INFINITE")
    roots = throughput_roots(load)
    lo = attempt_rate_to_q_exp(roots.g_small, load)
    hi = lo if roots.g_large == roots.g_small else attempt_rate_to_q_exp(roots.g_large, load)
    return QRegion(lo, hi, True, True)


def bounded_delay_region_exp(load: NetworkLoad) -> QRegion:
    """Half-open interval ``[sqrt(1 - p(G_S)), h(G_L))``; empty if it collapses."""
    if not is_infinite(load.K):
        raise DomainError("bounded_delay_region_exp requires K = INFINITE")
    roots = throughput_roots(load)
    lo = math.sqrt(1.0 - _p(roots.g_small, load.a))
    hi = attempt_rate_to_q_exp(roots.g_large, load)
    if lo >= hi:
        return QRegion.empty()
    return QRegion(lo, hi, True, False)


def _large_n_bounds(lambda_hat: float, a: float) -> tuple[float, float]:
    roots = throughput_roots(NetworkLoad(lambda_hat, 1, a))
    return math.sqrt(1.0 - _p(roots.g_small, a)), 1.0 - _p(roots.g_large, a)


def max_throughput_bounded(a: float) -> tuple[float, float]:
    """Largest load whose large-population bounded-delay interval is non-empty.

    Solves ``sqrt(1 - p(G_S)) = 1 - p(G_L)`` for ``lambda_hat`` and returns
    ``(lambda_hat, q)`` with ``q`` the common endpoint.
    """
    _, lam_max = max_throughput(a)

    def gap(L):
        lo, hi = _large_n_bounds(L, a)
        return lo - hi

    L = find_root(gap, (1e-6 * lam_max, lam_max), tol=1e-13)
    return L, _large_n_bounds(L, a)[0]


def saturated_success_probs(n: int, q: float, a: float) -> tuple[float, float]:
    """Type I/II success probabilities when all ``n`` nodes are backlogged under
    geometric retransmission (``K = 1``), i.e. at attempt rate ``G = n*q``.
    """
    G = n * q
    return math.exp(-a * G), math.exp(-(1.0 + a) * G)
