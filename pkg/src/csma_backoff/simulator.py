"""Mini-slot discrete-event simulator of n buffered 1-persistent CSMA nodes.

Each mini-slot ``t`` is processed in four steps:

1. arrivals: every node enqueues a packet with probability ``a * lambda``;
2. sensing: if no transmission period covers ``t`` (the channel was idle at
   ``t - 1``, or the period ended with ``t - 1``), every node holding a HOL
   packet in phase ``i`` starts transmitting with probability ``q**i``.  Nodes
   that sensed a busy channel therefore all fire together in the first
   mini-slot after the period, and a failed draw leaves them sensing;
3. channel resolution: a single starter opens a successful period of
   ``M + 1`` mini-slots, two or more open a collision period of the same
   length.  A period is Type I if ``t - 1`` was idle and Type II otherwise;
4. completion: in the last mini-slot of a period the successful node
   dequeues its packet, and collided nodes advance to phase
   ``min(i + 1, K)``.

Random draws come from one independent stream per node, spawned from the
configured seed with :class:`numpy.random.SeedSequence`, so a run is fully
determined by its :class:`SimConfig`.  The mini-slot loop is compiled with
numba and releases the GIL, so :func:`replicate` runs replications on
threads.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numba
import numpy as np
from scipy import stats

from .errors import DomainError
from .hol import INFINITE, is_infinite, parse_K

CHUNK = 1 << 15
# Phases at or beyond this index share the retransmission probability of the
# last table entry; q**4095 is below double precision for any practical q.
PHASE_TABLE = 4096

# channel-state vector layout
_BUSY, _START, _TYPE, _NTX, _SUCCESS, _PREV_IDLE = range(6)
# counter vector layout
(_ARRIVALS, _DEPARTURES, _DROPS, _SUC1, _SUC2, _COL1, _COL2) = range(7)


class Mode(Enum):
    EMPTY = "empty"
    SENSING = "sensing"
    WAITING = "waiting"
    TRANSMITTING = "transmitting"


class PeriodType(Enum):
    TYPE_I = 1
    TYPE_II = 2


@dataclass(frozen=True)
class SimConfig:
    n: int
    a: float
    lam: float
    q: float
    K: float | int = INFINITE
    horizon: int = 10**6
    warmup: int | None = None
    seed: int = 0
    batches: int = 20
    queue_cap: int | None = None
    backdate_busy_arrivals: bool = False

    def __post_init__(self):
        M = round(1.0 / self.a) if self.a > 0 else 0
        if M < 1 or abs(M * self.a - 1.0) > 1e-9:
            raise DomainError(f"1/a must be a positive integer, got a={self.a!r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError("lambda must lie in [0, 1]")
        if not 0.0 < self.q < 1.0:
            raise DomainError("q must lie in (0, 1)")
        object.__setattr__(self, "K", parse_K(self.K))
        if self.warmup is None:
            object.__setattr__(self, "warmup", int(self.horizon) // 10)
        if not 0 <= self.warmup < self.horizon:
            raise DomainError("warmup must satisfy 0 <= warmup < horizon")
        if self.batches < 2:
            raise DomainError("at least two batches are needed for a confidence interval")
        if self.queue_cap is not None and self.queue_cap < 1:
            raise DomainError("queue_cap must be positive")

    @property
    def M(self) -> int:
        return round(1.0 / self.a)

    @property
    def lambda_hat(self) -> float:
        return self.n * self.lam


@dataclass(frozen=True)
class NodeState:
    queue: tuple[int, ...]
    hol_phase: int
    mode: Mode
    tx_remaining: int


@dataclass(frozen=True)
class ChannelState:
    busy_remaining: int
    current_transmitters: frozenset[int]
    period_type: PeriodType | None


@dataclass(frozen=True)
class Estimate:
    """Point estimate with the half-width of its 95% confidence interval."""

    mean: float
    half_width: float

    @property
    def lo(self) -> float:
        return self.mean - self.half_width

    @property
    def hi(self) -> float:
        return self.mean + self.half_width

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def t_interval(samples, confidence: float = 0.95) -> Estimate:
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return Estimate(math.nan, math.nan)
    if x.size < 2:
        return Estimate(float(x[0]), math.nan)
    tcrit = stats.t.ppf(0.5 + confidence / 2.0, df=x.size - 1)
    return Estimate(float(x.mean()), float(tcrit * x.std(ddof=1) / math.sqrt(x.size)))


@dataclass
class SimStats:
    """Post-warmup statistics of one run (or pooled replications).

    Rates are per slot, delays in slots.  ``arrivals``, ``departures``,
    ``drops`` and ``in_system`` cover the whole run including warmup, so they
    satisfy ``arrivals == departures + in_system + drops`` exactly.
    """

    throughput: Estimate
    mean_queue: Estimate
    mean_delay: Estimate
    success_type1: int
    success_type2: int
    collisions_type1: int
    collisions_type2: int
    delay_variance: float
    node_delay_variance: np.ndarray
    arrivals: int
    departures: int
    drops: int
    in_system: int
    seeds: tuple[int, ...]
    config: SimConfig | None = None
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def collision_count(self) -> int:
        return self.collisions_type1 + self.collisions_type2

    @property
    def success_count(self) -> int:
        return self.success_type1 + self.success_type2

    @property
    def periods(self) -> int:
        return self.success_count + self.collision_count


class World:
    """Mutable state of a simulation: node queues, phases and the channel.

    Queues are ring buffers of arrival mini-slots, one row per node, grown on
    demand.
    """

    def __init__(self, config: SimConfig, queue_capacity: int = 256):
        n = config.n
        self.config = config
        self.t = 0
        self.qbuf = np.zeros((n, queue_capacity), dtype=np.int64)
        self.qhead = np.zeros(n, dtype=np.int64)
        self.qlen = np.zeros(n, dtype=np.int64)
        self.phase = np.zeros(n, dtype=np.int64)
        self.tx = np.zeros(n, dtype=np.int8)
        self.chan = np.zeros(6, dtype=np.int64)
        self.chan[_PREV_IDLE] = 1
        self.counters = np.zeros(7, dtype=np.int64)
        B = config.batches
        # per batch: queue-length sum, successes, delay sum, delay count
        self.batch = np.zeros((B, 4))
        # per node Welford accumulators of post-warmup delays: count, mean, M2
        self.node_delay = np.zeros((n, 3))
        self.qpow = config.q ** np.arange(_phase_limit(config.K), dtype=float)
        self.K = np.iinfo(np.int64).max if is_infinite(config.K) else int(config.K)
        self.qcap = -1 if config.queue_cap is None else int(config.queue_cap)

    def grow(self):
        n, cap = self.qbuf.shape
        new = np.zeros((n, 2 * cap), dtype=np.int64)
        for i in range(n):
            idx = (self.qhead[i] + np.arange(self.qlen[i])) % cap
            new[i, : self.qlen[i]] = self.qbuf[i, idx]
        self.qbuf = new
        self.qhead[:] = 0

    def enqueue(self, node: int, arrival: int):
        """Place a packet at the tail of ``node``'s queue (for hand-built worlds)."""
        if self.qlen[node] == self.qbuf.shape[1]:
            self.grow()
        cap = self.qbuf.shape[1]
        self.qbuf[node, (self.qhead[node] + self.qlen[node]) % cap] = arrival
        self.qlen[node] += 1
        self.counters[_ARRIVALS] += 1

    def node_state(self, i: int) -> NodeState:
        cap = self.qbuf.shape[1]
        idx = (self.qhead[i] + np.arange(self.qlen[i])) % cap
        queue = tuple(int(v) for v in self.qbuf[i, idx])
        busy = int(self.chan[_BUSY])
        if self.qlen[i] == 0:
            mode = Mode.EMPTY
        elif self.tx[i]:
            mode = Mode.TRANSMITTING
        elif busy > 0:
            mode = Mode.WAITING
        else:
            mode = Mode.SENSING
        return NodeState(queue, int(self.phase[i]), mode, busy if self.tx[i] else 0)

    def channel_state(self) -> ChannelState:
        busy = int(self.chan[_BUSY])
        ptype = PeriodType(int(self.chan[_TYPE])) if busy > 0 else None
        return ChannelState(busy, frozenset(np.flatnonzero(self.tx).tolist()), ptype)

    @property
    def in_system(self) -> int:
        return int(self.qlen.sum())


def _phase_limit(K) -> int:
    return PHASE_TABLE if is_infinite(K) else int(K) + 1


@numba.njit(nogil=True, cache=True)
def _advance(u_arr, u_att, t0, length, p_arr, qpow, K, M, warmup, horizon, backdate, qcap,
             qbuf, qhead, qlen, phase, tx, chan, counters, batch, node_delay,
             trace, trace_len):
    """Advance ``length`` mini-slots from ``t0``.

    Returns ``(k, ntrace)``: ``k < length`` means a queue buffer filled up before
    mini-slot ``t0 + k`` and must be grown.  ``ntrace`` period records were
    written to ``trace``.
    """
    n = qlen.shape[0]
    cap = qbuf.shape[1]
    nq = qpow.shape[0]
    n_batches = batch.shape[0]
    window = horizon - warmup
    ntr = 0
    for k in range(length):
        t = t0 + k
        for i in range(n):
            if qlen[i] == cap:
                return k, ntr

        # 1. arrivals
        for i in range(n):
            if u_arr[i, k] < p_arr:
                counters[0] += 1
                if qcap >= 0 and qlen[i] >= qcap:
                    counters[2] += 1
                    continue
                stamp = t
                if backdate and qlen[i] == 0 and chan[0] > 0:
                    stamp = chan[1]
                qbuf[i, (qhead[i] + qlen[i]) % cap] = stamp
                qlen[i] += 1

        # 2./3. sensing and channel resolution
        if chan[0] == 0:
            starters = 0
            for i in range(n):
                if qlen[i] > 0:
                    ph = phase[i] if phase[i] < nq else nq - 1
                    if u_att[i, k] < qpow[ph]:
                        tx[i] = 1
                        starters += 1
            if starters > 0:
                chan[0] = M + 1
                chan[1] = t
                chan[2] = 1 if chan[5] == 1 else 2
                chan[3] = starters
                chan[4] = 1 if starters == 1 else 0
                if ntr < trace_len:
                    trace[ntr, 0] = t
                    trace[ntr, 1] = chan[2]
                    trace[ntr, 2] = chan[4]
                    trace[ntr, 3] = starters
                    ntr += 1
            else:
                chan[5] = 1

        b = -1
        if t >= warmup:
            b = ((t - warmup) * n_batches) // window
            tot = 0
            for i in range(n):
                tot += qlen[i]
            batch[b, 0] += tot

        # 4. completion in the last mini-slot of a period
        if chan[0] > 0:
            chan[0] -= 1
            if chan[0] == 0:
                chan[5] = 0
                success = chan[4] == 1
                if b >= 0:
                    if success:
                        counters[3 if chan[2] == 1 else 4] += 1
                    else:
                        counters[5 if chan[2] == 1 else 6] += 1
                for i in range(n):
                    if tx[i] == 0:
                        continue
                    tx[i] = 0
                    if success:
                        arrived = qbuf[i, qhead[i]]
                        qhead[i] = (qhead[i] + 1) % cap
                        qlen[i] -= 1
                        phase[i] = 0
                        counters[1] += 1
                        if b >= 0:
                            d = t + 1 - arrived
                            batch[b, 1] += 1.0
                            batch[b, 2] += d
                            batch[b, 3] += 1.0
                            node_delay[i, 0] += 1.0
                            delta = d - node_delay[i, 1]
                            node_delay[i, 1] += delta / node_delay[i, 0]
                            node_delay[i, 2] += delta * (d - node_delay[i, 1])
                    elif phase[i] < K:
                        phase[i] += 1
    return length, ntr


def _streams(config: SimConfig):
    children = np.random.SeedSequence(config.seed).spawn(config.n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _draws(gens, length):
    u = np.empty((2, len(gens), length))
    for i, g in enumerate(gens):
        u[:, i, :] = g.random((2, length))
    return u[0], u[1]


def advance(world: World, u_arr: np.ndarray, u_att: np.ndarray, trace=None) -> int:
    """Advance ``world`` by ``u_arr.shape[1]`` mini-slots using the given draws.

    ``u_arr[i, k]`` and ``u_att[i, k]`` are node ``i``'s uniforms for its
    arrival and attempt decisions in the ``k``-th mini-slot.  Returns the
    number of transmission periods opened.
    """
    cfg = world.config
    length = u_arr.shape[1]
    if trace is None:
        trace_buf = np.zeros((0, 4), dtype=np.int64)
    else:
        trace_buf = np.zeros((length // (cfg.M + 1) + 2, 4), dtype=np.int64)
    done, opened = 0, 0
    while done < length:
        k, ntr = _advance(
            u_arr[:, done:], u_att[:, done:], world.t, length - done, cfg.a * cfg.lam,
            world.qpow, world.K, cfg.M, cfg.warmup, cfg.horizon,
            cfg.backdate_busy_arrivals, world.qcap,
            world.qbuf, world.qhead, world.qlen, world.phase, world.tx, world.chan,
            world.counters, world.batch, world.node_delay,
            trace_buf[opened:], trace_buf.shape[0] - opened,
        )
        opened += ntr
        done += k
        world.t += k
        if done < length:
            world.grow()
    if trace is not None:
        trace.append(trace_buf[:opened].copy())
    return opened


def step(world: World, rng: np.random.Generator) -> World:
    """Advance ``world`` by exactly one mini-slot, drawing from ``rng``."""
    n = world.config.n
    u = rng.random((2, n, 1))
    advance(world, u[0], u[1])
    return world


def _summarise(world: World, trace=None) -> SimStats:
    cfg = world.config
    window = cfg.horizon - cfg.warmup
    edges = cfg.warmup + (np.arange(cfg.batches + 1) * window) // cfg.batches
    slots = np.diff(edges) * cfg.a
    qsum, succ, dsum, dcnt = world.batch.T
    with np.errstate(invalid="ignore", divide="ignore"):
        delay_batches = np.where(dcnt > 0, dsum / dcnt, np.nan) * cfg.a
    tput = t_interval(succ / slots)
    queue = t_interval(qsum / np.diff(edges))
    delay_ci = t_interval(delay_batches)
    total_d = dcnt.sum()
    delay_mean = dsum.sum() / total_d * cfg.a if total_d > 0 else math.nan
    count, _, m2 = world.node_delay.T
    with np.errstate(invalid="ignore", divide="ignore"):
        node_var = np.where(count > 1, m2 / (count - 1), np.nan) * cfg.a**2
    c = world.counters
    return SimStats(
        throughput=Estimate(float(succ.sum() / slots.sum()), tput.half_width),
        mean_queue=Estimate(float(qsum.sum() / window), queue.half_width),
        mean_delay=Estimate(float(delay_mean), delay_ci.half_width),
        success_type1=int(c[_SUC1]),
        success_type2=int(c[_SUC2]),
        collisions_type1=int(c[_COL1]),
        collisions_type2=int(c[_COL2]),
        delay_variance=float(np.nanmean(node_var)) if np.any(count > 1) else math.nan,
        node_delay_variance=node_var,
        arrivals=int(c[_ARRIVALS]),
        departures=int(c[_DEPARTURES]),
        drops=int(c[_DROPS]),
        in_system=world.in_system,
        seeds=(cfg.seed,),
        config=cfg,
        trace=None if trace is None else np.concatenate(trace) if trace else
        np.zeros((0, 4), dtype=np.int64),
    )


def run(config: SimConfig, trace: bool = False) -> SimStats:
    """Simulate ``config.horizon`` mini-slots and summarise the post-warmup window.

    Confidence intervals use batch means with ``config.batches`` batches and
    Student-t at 95%.  With ``trace=True`` the returned stats carry one
    ``(start, type, success, transmitters)`` row per transmission period.
    """
    world = World(config)
    gens = _streams(config)
    records = [] if trace else None
    t = 0
    while t < config.horizon:
        length = min(CHUNK, config.horizon - t)
        u_arr, u_att = _draws(gens, length)
        advance(world, u_arr, u_att, records)
        t += length
    return _summarise(world, records)


def pool(runs: list[SimStats]) -> SimStats:
    """Combine independent replications; intervals are across-replication t-intervals."""
    if len(runs) == 1:
        return runs[0]
    tput = t_interval([r.throughput.mean for r in runs])
    queue = t_interval([r.mean_queue.mean for r in runs])
    delay = t_interval([r.mean_delay.mean for r in runs])
    stacked = np.vstack([r.node_delay_variance for r in runs])
    with warnings.catch_warnings():
        # nodes that never completed two packets stay NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        node_var = np.nanmean(stacked, axis=0)
        pooled_var = float(np.nanmean([r.delay_variance for r in runs]))
    first = runs[0]
    return SimStats(
        throughput=tput,
        mean_queue=queue,
        mean_delay=delay,
        success_type1=sum(r.success_type1 for r in runs),
        success_type2=sum(r.success_type2 for r in runs),
        collisions_type1=sum(r.collisions_type1 for r in runs),
        collisions_type2=sum(r.collisions_type2 for r in runs),
        delay_variance=pooled_var,
        node_delay_variance=node_var,
        arrivals=sum(r.arrivals for r in runs),
        departures=sum(r.departures for r in runs),
        drops=sum(r.drops for r in runs),
        in_system=sum(r.in_system for r in runs),
        seeds=tuple(s for r in runs for s in r.seeds),
        config=first.config,
    )


def replicate(config: SimConfig, n_seeds: int, workers: int | None = None) -> SimStats:
    """Run seeds ``config.seed + 0 .. n_seeds - 1`` (concurrently) and pool them."""
    if n_seeds < 1:
        raise DomainError("n_seeds must be positive")
    configs = [replace(config, seed=config.seed + k) for k in range(n_seeds)]
    if n_seeds == 1:
        return run(configs[0])
    with ThreadPoolExecutor(max_workers=workers) as ex:
        runs = list(ex.map(run, configs))
    return pool(runs)


def write_trace(path, trace: np.ndarray):
    """Write period records as CSV: start mini-slot, type, outcome, transmitter count."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_minislot", "type", "outcome", "transmitters"])
        for start, ptype, ok, ntx in trace:
            w.writerow([int(start), "I" if ptype == 1 else "II",
                        "success" if ok else "collision", int(ntx)])
