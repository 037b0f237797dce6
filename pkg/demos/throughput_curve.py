"""Throughput versus attempt rate, its peak, and the two operating points.

Run with ``python demos/throughput_curve.py``.
"""
import numpy as np

from csma_backoff import ChannelParams, NetworkLoad, max_throughput, throughput, throughput_roots

a = 0.1
G_peak, top = max_throughput(a)
print(f"a={a}: peak throughput {top:.4f} at G={G_peak:.4f}")

for G in np.round(np.geomspace(0.05, 10, 12), 3):
    y = throughput(ChannelParams(a, G))
    print(f"  G={G:7.3f}  throughput={y:.4f}  " + "#" * int(60 * y))

r = throughput_roots(NetworkLoad(0.3, 10, a))
print(f"load 0.3 is carried at G_S={r.g_small:.4f} (stable) and G_L={r.g_large:.4f}")
