"""Independent reference computations used by the tests.

Nothing here imports the package's closed forms.  Each oracle builds the
relevant Markov chain explicitly and solves it with dense linear algebra.
"""
import math

import numpy as np


def channel_matrix(a, G):
    """Transition matrix over (idle, suc1, suc2, col), built arc by arc."""
    e1, e2 = math.exp(-a * G), math.exp(-(1 + a) * G)
    idle = [e1, a * G * e1, 0.0, 1 - e1 - a * G * e1]
    busy = [e2, 0.0, (1 + a) * G * e2, 1 - e2 - (1 + a) * G * e2]
    return np.array([idle, busy, busy, busy])


def channel_solve(a, G):
    """Stationary vector of the channel chain from a least-squares balance solve."""
    P = channel_matrix(a, G)
    A = np.vstack([P.T - np.eye(4), np.ones(4)])
    b = np.r_[np.zeros(4), 1.0]
    return np.linalg.lstsq(A, b, rcond=None)[0]


def success_inputs(a, G):
    """(p1, p2, p, alpha) from the channel chain solve rather than closed forms."""
    pi = channel_solve(a, G)
    busy = (1 + a) * (pi[1] + pi[2] + pi[3])
    alpha = a * pi[0] / (a * pi[0] + busy)
    p1, p2 = math.exp(-a * G), math.exp(-(1 + a) * G)
    # successes per slot divided by attempts per slot
    p = (pi[1] + pi[2]) / (a * pi[0] + busy) / G
    return p1, p2, p, alpha


def _hol_kernel(a, G, q, K):
    M = int(round(1 / a))
    p1, p2, _, alpha = success_inputs(a, G)
    # states S_i, W_i, F_i, F'_i at 4i .. 4i+3
    N = 4 * (K + 1)
    P = np.zeros((N, N))
    dur = np.zeros(N)
    for i in range(K + 1):
        S, W, F, Fp = 4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3
        qi = q**i
        up = 4 * min(i + 1, K)
        dur[S], dur[W], dur[F], dur[Fp] = 1, M, M, M
        P[S, S] = alpha * (1 - qi)
        P[S, F] = alpha * qi
        P[S, W] = 1 - alpha
        P[W, Fp] = qi
        P[W, S] = 1 - qi
        P[F, up] = 1 - p1
        P[Fp, up] = 1 - p2
    return P, dur, p1, p2


def service_moments_exact(a, G, q, K=None):
    """First and second moments (slots) of the absorbing walk from S_0.

    ``K=None`` truncates the unbounded chain once ``q**K`` drops below 1e-13,
    beyond which deeper phases carry no representable mass.
    """
    if K is None:
        K = min(400, int(math.log(1e-13) / math.log(q)))
    P, d, _, _ = _hol_kernel(a, G, q, K)
    I = np.eye(len(d))
    m1 = np.linalg.solve(I - P, d)
    m2 = np.linalg.solve(I - P, d * d + 2 * d * (P @ m1))
    return a * m1[0], a * a * m2[0]


def hol_time_average(a, G, q, K):
    """Sojourn-weighted stationary probabilities of the recurrent HOL chain.

    After a success the walk restarts at S_0.  Returns an array of shape
    ``(4, K + 1)`` in the order S, W, F, F'.
    """
    P, d, p1, p2 = _hol_kernel(a, G, q, K)
    N = len(d)
    for i in range(K + 1):
        F, Fp = 4 * i + 2, 4 * i + 3
        P[F, 0] += p1
        P[Fp, 0] += p2
    A = np.vstack([P.T - np.eye(N), np.ones(N)])
    pi = np.linalg.lstsq(A, np.r_[np.zeros(N), 1.0], rcond=None)[0]
    t = pi * d * a
    return (t / t.sum()).reshape(K + 1, 4).T


def hol_embedded(a, G, q, K):
    """Embedded-chain stationary vector and transition matrix of the recurrent chain."""
    P, _, p1, p2 = _hol_kernel(a, G, q, K)
    for i in range(K + 1):
        P[4 * i + 2, 0] += p1
        P[4 * i + 3, 0] += p2
    N = P.shape[0]
    A = np.vstack([P.T - np.eye(N), np.ones(N)])
    pi = np.linalg.lstsq(A, np.r_[np.zeros(N), 1.0], rcond=None)[0]
    return pi, P
