"""Service-time moments of the head-of-line packet and where the variance blows up.

Run with ``python demos/service_moments.py``.
"""
import math

import numpy as np

from csma_backoff import (BackoffParams, ChannelParams, NetworkLoad, mean_delay,
                          sample_service_times, service_moments, success_probs, throughput_roots)

a = 0.1
ld = NetworkLoad(0.3, 10, a)
G_S = throughput_roots(ld).g_small
sp = success_probs(ChannelParams(a, G_S))
print(f"G_S={G_S:.4f}: success probability p={sp.p:.4f}; "
      f"the second moment is finite for q > sqrt(1-p) = {math.sqrt(1 - sp.p):.4f}")

for q in (0.3, 0.35, 0.4, 0.5, 0.7, 0.9):
    m = service_moments(sp, BackoffParams(q), a)
    print(f"  q={q:.2f}  E[X]={m.ex:.3f}  E[X^2]={m.ex2:.3f}  finite={m.converged}")

bp = BackoffParams(0.5, lam=ld.lam)
x = sample_service_times(sp, bp, a, 200_000, rng_seed=7) * a
m = service_moments(sp, bp, a)
print(f"q=0.5: analytic E[X]={m.ex:.4f}, sampled {x.mean():.4f}; "
      f"E[X^2]={m.ex2:.4f}, sampled {np.mean(x * x):.4f}")
print(f"q=0.5: mean sojourn time {mean_delay(ld.lam, m):.4f} slots")
