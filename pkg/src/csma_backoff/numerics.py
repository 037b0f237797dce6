"""One-dimensional root finding and unimodal maximisation."""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from .errors import NoBracket


def find_root(f, bracket, tol: float = 1e-10) -> float:
    """Root of ``f`` inside ``bracket = (lo, hi)`` by Brent's method.

    Raises :class:`NoBracket` when ``f(lo)`` and ``f(hi)`` have the same sign.
    """
    lo, hi = map(float, bracket)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or flo * fhi > 0:
        raise NoBracket(f"no sign change on [{lo:.6g}, {hi:.6g}]: f = ({flo:.3g}, {fhi:.3g})")
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def maximize_unimodal(f, bracket, tol: float = 1e-9) -> tuple[float, float]:
    """Maximiser and maximum of a unimodal ``f`` on ``bracket``.

    Falls back to the better endpoint when ``f`` is monotone on the bracket.
    """
    lo, hi = map(float, bracket)
    res = optimize.minimize_scalar(
        lambda x: -f(x), bounds=(lo, hi), method="bounded", options={"xatol": tol}
    )
    best_x, best_f = float(res.x), -float(res.fun)
    for x in (lo, hi):
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f
