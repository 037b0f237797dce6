"""Monte-Carlo realisations of the channel chain and the HOL-packet chain.

These walks are independent of the closed forms in :mod:`channel` and
:mod:`hol` and serve as their oracles.  Every entry point takes either an
integer seed or a :class:`numpy.random.Generator`; no global random state is
touched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .channel import ChannelParams, channel_transitions
from .errors import WalkCapExceeded
from .hol import BackoffParams, SuccessProbs, is_infinite

#: Default cap on a single service-time walk, in mini-slots.
WALK_CAP = 10**9

# HOL state kinds, used as row index in the occupancy tables
S, W, F, FP = 0, 1, 2, 3


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class ChainEstimate:
    """Batch-means estimate of per-state occupancy fractions."""

    mean: np.ndarray
    stderr: np.ndarray
    n_steps: int


def _batch_estimate(num: np.ndarray, den: np.ndarray, n_steps: int) -> ChainEstimate:
    # ratio-of-sums for the point estimate; spread of batch ratios for the error
    total = num.sum(axis=0) / den.sum()
    ratios = num / den.reshape((-1,) + (1,) * (num.ndim - 1))
    stderr = ratios.std(axis=0, ddof=1) / math.sqrt(num.shape[0])
    return ChainEstimate(total, stderr, n_steps)


@numba.njit(nogil=True, cache=True)
def _channel_walk(rng, n_steps, n_batches, P, sojourn):
    visits = np.zeros((n_batches, 4))
    times = np.zeros((n_batches, 4))
    per_batch = n_steps // n_batches
    state = 0
    for b in range(n_batches):
        for _ in range(per_batch):
            u = rng.random()
            acc = 0.0
            nxt = 3
            for j in range(4):
                acc += P[state, j]
                if u < acc:
                    nxt = j
                    break
            state = nxt
            visits[b, state] += 1.0
            times[b, state] += sojourn[state]
    return visits, times


def channel_walk(params: ChannelParams, n_steps: int, seed=None, n_batches: int = 50):
    """Random walk on the channel chain.

    Returns ``(visit_fractions, time_fractions)``, each a :class:`ChainEstimate`
    over states ``(idle, suc1, suc2, col)``; time fractions weight each visit by
    its sojourn (``a`` for Idle, ``1 + a`` otherwise).
    """
    P = channel_transitions(params).matrix()
    a = params.a
    sojourn = np.array([a, 1 + a, 1 + a, 1 + a])
    visits, times = _channel_walk(_rng(seed), int(n_steps), int(n_batches), P, sojourn)
    steps = visits.sum(axis=1)
    return (
        _batch_estimate(visits, steps, int(n_steps)),
        _batch_estimate(times, times.sum(axis=1), int(n_steps)),
    )


@numba.njit(nogil=True, cache=True)
def _hol_walk(rng, n_steps, n_batches, K, qpow, alpha, p1, p2, a):
    times = np.zeros((n_batches, 4, K + 1))
    per_batch = n_steps // n_batches
    kind = S
    phase = 0
    for b in range(n_batches):
        for _ in range(per_batch):
            if kind == S:
                times[b, S, phase] += a
                u = rng.random()
                if u < alpha * qpow[phase]:
                    kind = F
                elif u < alpha:
                    kind = S
                else:
                    kind = W
            elif kind == W:
                times[b, W, phase] += 1.0
                if rng.random() < qpow[phase]:
                    kind = FP
                else:
                    kind = S
            else:
                times[b, kind, phase] += 1.0
                ok = p1 if kind == F else p2
                if rng.random() < ok:
                    phase = 0
                else:
                    phase = min(phase + 1, K)
                kind = S
    return times


def hol_walk(sp: SuccessProbs, bp: BackoffParams, a: float, n_steps: int, seed=None,
             n_batches: int = 50, phase_cap: int = 30) -> ChainEstimate:
    """Sojourn-weighted random walk on the HOL-packet chain.

    The estimate's arrays have shape ``(4, K + 1)`` indexed by state kind
    (``S, W, F, FP``) and phase.  An unbounded cut-off is truncated at
    ``phase_cap``.
    """
    K = phase_cap if is_infinite(bp.K) else int(bp.K)
    qpow = bp.q ** np.arange(K + 1, dtype=float)
    times = _hol_walk(_rng(seed), int(n_steps), int(n_batches), K, qpow,
                      sp.alpha, sp.p1, sp.p2, a)
    return _batch_estimate(times, times.sum(axis=(1, 2)), int(n_steps))


@numba.njit(nogil=True, cache=True)
def _service_walks(rng, size, M, K, q, alpha, p1, p2, cap, out):
    """Fill ``out`` with absorbing-walk durations; return -1 or the index that hit the cap."""
    for k in range(size):
        t = 0
        phase = 0
        qi = 1.0
        while True:
            # one sensing mini-slot
            t += 1
            u = rng.random()
            if u < alpha:
                if u < alpha * qi:
                    t += M
                    ok = p1
                else:
                    ok = -1.0
            else:
                t += M
                if rng.random() < qi:
                    t += M
                    ok = p2
                else:
                    ok = -1.0
            if ok >= 0.0:
                if rng.random() < ok:
                    break
                if phase < K:
                    phase += 1
                    qi *= q
            if t > cap:
                return k
        out[k] = t
    return -1


def sample_service_times(sp: SuccessProbs, bp: BackoffParams, a: float, size: int,
                         rng_seed=None, cap: int = WALK_CAP) -> np.ndarray:
    """Durations (mini-slots) of ``size`` independent HOL service walks from ``S_0``.

    Sensing lasts one mini-slot and waiting or transmitting lasts ``M = 1/a``
    mini-slots.  Raises :class:`WalkCapExceeded` if any walk exceeds ``cap``.
    """
    M = round(1.0 / a)
    K = np.iinfo(np.int64).max if is_infinite(bp.K) else int(bp.K)
    out = np.empty(int(size), dtype=np.int64)
    hit = _service_walks(_rng(rng_seed), int(size), M, K, bp.q, sp.alpha, sp.p1, sp.p2,
                         int(cap), out)
    if hit >= 0:
        raise WalkCapExceeded(f"walk {hit} exceeded {cap} mini-slots")
    return out


def sample_service_time(sp: SuccessProbs, bp: BackoffParams, a: float, rng_seed=None,
                        cap: int = WALK_CAP) -> int:
    """One service-time draw in mini-slots; see :func:`sample_service_times`."""
    return int(sample_service_times(sp, bp, a, 1, rng_seed, cap)[0])
