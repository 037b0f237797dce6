"""Simulated throughput inside and outside the stable backoff range.

Outside the range the simulated throughput drops only slightly below the
offered load, because a node that senses the channel busy defers to
whichever node grabs it first.  Run with ``python demos/simulation_check.py``.
"""
from csma_backoff import NetworkLoad, SimConfig, replicate, stable_region_exp

n, a, lam = 10, 0.1, 0.03
R = stable_region_exp(NetworkLoad(n * lam, n, a))
print(f"stable q range for load {n * lam:.2f}: [{R.lo:.3f}, {R.hi:.3f}]")
for q in (0.05, 0.2, 0.5, 0.8, 0.95):
    s = replicate(SimConfig(n=n, a=a, lam=lam, q=q, horizon=500_000, seed=1), 4)
    tag = "inside" if q in R else "outside"
    print(f"  q={q:.2f} ({tag:7}) throughput {s.throughput.mean:.4f} "
          f"+- {s.throughput.half_width:.4f}, mean queue {s.mean_queue.mean:.2f}, "
          f"delay variance {s.delay_variance:.1f}")
