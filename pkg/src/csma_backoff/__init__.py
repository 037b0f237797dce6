"""Slotted 1-persistent CSMA/CA with K-exponential backoff.

Analytic channel and HOL-packet chains, stability and bounded-delay regions
of the retransmission factor, Monte-Carlo oracles and a mini-slot simulator.
"""
from .channel import (ChannelParams, ChannelStationary, ChannelTransitions, channel_stationary,
                      channel_transitions, throughput, time_avg_success)
from .errors import (Divergent, DomainError, Infeasible, NoBracket, NoSolution,
                     NotPositiveRecurrent, Unstable, WalkCapExceeded)
from .hol import (INFINITE, BackoffParams, HolStationary, ServiceMoments, SuccessProbs,
                  hol_stationary, mean_delay, normalizer, offered_load, pure_idle_prob,
                  second_moment_terms, service_moments, success_probs, theorem1_identity)
from .montecarlo import channel_walk, hol_walk, sample_service_time, sample_service_times
from .numerics import find_root, maximize_unimodal
from .regions import (NetworkLoad, QRegion, ThroughputRoots, attempt_equation_residual,
                      attempt_rate_to_q, attempt_rate_to_q_exp, attempt_rate_to_q_finiteK,
                      bounded_delay_region_exp, max_throughput, max_throughput_bounded,
                      q_to_attempt_rate, saturated_success_probs, stable_region_exp,
                      throughput_roots)
from .simulator import SimConfig, SimStats, replicate, run, step

import types as _types

__all__ = [name for name, obj in dict(globals()).items()
           if not name.startswith("_") and not isinstance(obj, _types.ModuleType)]
