"""Independent reference implementations used only by the tests."""

import mpmath
import numpy as np
from scipy.integrate import quad


def _spow(x, p):
    return np.sign(x) * abs(x) ** p


def V_by_quadrature(e, r, ell, dV):
    """V as the sum of the defining integrals, each integrated numerically."""
    m = len(e)
    total = abs(e[m - 1]) ** dV / dV
    for i in range(m - 1):
        ri, rn = r[i], r[i + 1]
        lo = _spow(e[i + 1], ri / rn)
        hi = ell[i] * e[i]
        c = _spow(e[i + 1], (dV - ri) / rn)

        def f(x, ri=ri, c=c):
            return _spow(x, (dV - ri) / ri) - c

        pts = [0.0] if min(lo, hi) < 0.0 < max(lo, hi) else None
        val, _ = quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200, points=pts)
        total += val
    return total


def _mp_spow(x, p):
    if x == 0:
        return mpmath.mpf(0)
    return mpmath.sign(x) * abs(x) ** p


def central_gradient(e, r, ell, dV, rel_step=1e-6, dps=40):
    """Central differences of V at ``dps`` digits with one Richardson step.

    The step is rel_step * (1 + |e_i|); extrapolating from h and h/2 removes
    the O(h^2) term, which matters for components of size ~1e-3.
    """
    with mpmath.workdps(dps):
        x = [mpmath.mpf(float(v)) for v in e]
        g = np.empty(len(x))

        def diff(i, h):
            a, b = list(x), list(x)
            a[i] += h
            b[i] -= h
            return (V_mp_exact(a, r, ell, dV) - V_mp_exact(b, r, ell, dV)) / (2 * h)

        for i in range(len(x)):
            h = mpmath.mpf(rel_step) * (1 + abs(x[i]))
            g[i] = float((4 * diff(i, h / 2) - diff(i, h)) / 3)
    return g


def V_mp_exact(x, r, ell, dV):
    """V_mp on mpf inputs without rounding them back to doubles."""
    r = [mpmath.mpf(float(v)) for v in r]
    dV = mpmath.mpf(dV)
    m = len(x)
    total = abs(x[m - 1]) ** dV / dV
    for i in range(m - 1):
        ri, rn = r[i], r[i + 1]
        le = mpmath.mpf(float(ell[i])) * x[i]
        en = x[i + 1]
        a = _mp_spow(en, ri / rn)
        c = _mp_spow(en, (dV - ri) / rn)
        total += (ri / dV) * (abs(le) ** (dV / ri) - abs(en) ** (dV / rn)) - (le - a) * c
    return total


def sample_points(rng, n, m, lo=1e-3, hi=2.0):
    """Points with |e_i| log-uniform in [lo, hi] and random signs."""
    mag = 10.0 ** rng.uniform(np.log10(lo), np.log10(hi), size=(n, m))
    return mag * rng.choice([-1.0, 1.0], size=(n, m))
