"""Cross-checks of the closed forms against their independent oracles.

:func:`run_validation` returns one :class:`Check` per oracle comparison.
Every check is deterministic given the master seed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelParams, channel_stationary
from .errors import NoSolution
from .hol import (INFINITE, BackoffParams, hol_stationary, offered_load, service_moments,
                  success_probs, theorem1_identity)
from .montecarlo import channel_walk, hol_walk, sample_service_times
from .regions import (NetworkLoad, attempt_rate_to_q_exp_closed,
                      attempt_rate_to_q_exp_numeric, max_throughput, throughput_roots)
from .simulator import SimConfig, replicate


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    bound: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<22} residual={self.residual:.3e} bound={self.bound:.1e}  {self.detail}"


def _sp(a, G, perturb_p2):
    sp = success_probs(ChannelParams(a, G))
    return replace(sp, p2=sp.p2 + perturb_p2) if perturb_p2 else sp


def check_channel_chain(seed, a=0.1, G=1.0, n_steps=10**7) -> Check:
    params = ChannelParams(a, G)
    visits, _ = channel_walk(params, n_steps, seed)
    err = float(np.abs(visits.mean - channel_stationary(params).as_array()).max())
    return Check("channel_chain_mc", err < 1e-3, err, 1e-3, f"{n_steps} steps")


def check_success_identity(perturb_p2=0.0, a=0.1) -> Check:
    worst = 0.0
    for G in np.linspace(0.05, 10.0, 200):
        sp = _sp(a, G, perturb_p2)
        worst = max(worst, abs(sp.p - (sp.alpha * sp.p1 + (1 - sp.alpha) * sp.p2)))
    return Check("success_mixture", worst < 1e-12, worst, 1e-12, "p = alpha p1 + (1-alpha) p2")


def check_fixed_point(a=0.1) -> Check:
    worst = max(theorem1_identity(ChannelParams(a, G), success_probs(ChannelParams(a, G)))
                for G in np.linspace(0.05, 10.0, 200))
    return Check("throughput_fixed_point", worst < 1e-12, worst, 1e-12)


def check_hol_chain(seed, perturb_p2=0.0, a=0.1, G=1.0, q=0.9, n_steps=10**7) -> Check:
    sp = _sp(a, G, perturb_p2)
    worst = 0.0
    for K, rng_seed in zip((2, 5, 30), np.random.SeedSequence(seed).spawn(3)):
        bp = BackoffParams(q, K)
        est = hol_walk(sp, bp, a, n_steps, np.random.default_rng(rng_seed))
        top = min(3, K)
        table = hol_stationary(sp, bp, a).table(top)
        expected = np.array([table["s"], table["w"], table["f"], table["f_prime"]])
        z = np.abs(est.mean[:, : top + 1] - expected) / est.stderr[:, : top + 1]
        worst = max(worst, float(z.max()))
    return Check("hol_chain_mc", worst <= 3.0, worst, 3.0, "max |z| over phases 0-3, K in 2,5,30")


def check_service_moments(seed, perturb_p2=0.0, a=0.1, G=1.0, q=0.9, size=10**6) -> Check:
    sp = _sp(a, G, perturb_p2)
    bp = BackoffParams(q, INFINITE)
    x = sample_service_times(sp, bp, a, size, seed) * a
    m = service_moments(sp, bp, a)
    z1 = abs(x.mean() - m.ex) / (x.std(ddof=1) / math.sqrt(size))
    x2 = x * x
    z2 = abs(x2.mean() - m.ex2) / (x2.std(ddof=1) / math.sqrt(size))
    worst = float(max(z1, z2))
    return Check("service_moments_mc", worst <= 3.0, worst, 3.0, f"{size} walks")


def check_offered_load_identity(a_values=(0.01, 0.05, 0.1)) -> Check:
    worst = 0.0
    for a, G, q, lam in itertools.product(a_values, (0.3, 1.0, 2.5), (0.8, 0.95), (0.01, 0.05)):
        sp = success_probs(ChannelParams(a, G))
        if q * q <= 1 - sp.p:
            continue
        bp = BackoffParams(q, INFINITE, lam=lam)
        rho = offered_load(bp, sp, a)
        worst = max(worst, abs(rho - lam * service_moments(sp, bp, a).ex))
    return Check("offered_load_vs_mean", worst < 1e-10, worst, 1e-10)


def check_closed_form_q(n_values=(10, 50), a=0.1) -> Check:
    worst = 0.0
    _, lam_max = max_throughput(a)
    for n, L in itertools.product(n_values, np.linspace(0.05, 0.95 * lam_max, 8)):
        load = NetworkLoad(L, n, a)
        roots = throughput_roots(load)
        for G in np.linspace(roots.g_small, roots.g_large, 9):
            closed = attempt_rate_to_q_exp_closed(G, load)
            try:
                diff = abs(closed - attempt_rate_to_q_exp_numeric(G, load))
            except NoSolution:
                # agreement means the closed form is inadmissible too
                diff = math.inf if 0.0 < closed < 1.0 else 0.0
            worst = max(worst, diff)
    return Check("closed_form_q", worst < 1e-6, worst, 1e-6)


def check_simulation(seed, q=0.5, reps=5, horizon=10**6) -> Check:
    cfg = SimConfig(n=10, a=0.1, lam=0.03, q=q, horizon=horizon, seed=seed)
    stats = replicate(cfg, reps)
    miss = abs(stats.throughput.mean - 0.3)
    return Check("simulated_throughput", stats.throughput.contains(0.3), miss,
                 stats.throughput.half_width, f"q={q}, {reps} x {horizon} mini-slots")


def run_validation(seed: int = 2024, perturb_p2: float = 0.0) -> list[Check]:
    """All oracle cross-checks; ``perturb_p2`` shifts p2 to exercise the failure path."""
    ss = np.random.SeedSequence(seed)
    s = [int(c.generate_state(1)[0]) for c in ss.spawn(4)]
    return [
        check_channel_chain(s[0]),
        check_success_identity(perturb_p2),
        check_fixed_point(),
        check_hol_chain(s[1], perturb_p2),
        check_service_moments(s[2], perturb_p2),
        check_offered_load_identity(),
        check_closed_form_q(),
        check_simulation(s[3]),
    ]
