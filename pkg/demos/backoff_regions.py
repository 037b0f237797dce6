"""Ranges of the backoff parameter that keep the network stable or delay bounded.

Run with ``python demos/backoff_regions.py``.
"""
import numpy as np

from csma_backoff import (NetworkLoad, bounded_delay_region_exp, max_throughput,
                          max_throughput_bounded, stable_region_exp)

a, n = 0.1, 10
_, top = max_throughput(a)
print(f"{'load':>6} {'stable q range':>20} {'bounded-delay q range':>24}")
for L in np.linspace(0.05, top, 9):
    ld = NetworkLoad(L, n, a)
    T, D = stable_region_exp(ld), bounded_delay_region_exp(ld)
    d = "empty" if D.is_empty else f"[{D.lo:.3f}, {D.hi:.3f})"
    print(f"{L:6.3f} {f'[{T.lo:.3f}, {T.hi:.3f}]':>20} {d:>24}")

for a in (0.01, 0.05, 0.1):
    L, q = max_throughput_bounded(a)
    print(f"a={a}: largest load with bounded delay {L:.4f} (at q={q:.3f}), "
          f"unconstrained peak {max_throughput(a)[1]:.4f}")
