"""Triangular-form plants, the three-state example and its canonical form, and
Hölder/Young tooling for the per-line nonlinearities.

A triangular system of dimension m reads

    z_i' = z_{i+1} + phi_i(u, z_1..z_i) + w_i,   i = 1..m   (z_{m+1} = 0)
    y    = z_1 + v

Each ``phi_i`` is a callable ``phi_i(u, z)`` where ``z`` holds exactly
``z_1..z_i``.  A line whose nonlinearity is not available is stored as
``None`` and handled by observers as an unknown bounded disturbance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import saturate, signed_power

PhiFunc = Callable[[float, Sequence[float]], float]


# --------------------------------------------------------------------------
# nonlinearity building blocks (module level so they pickle)


class Zero:
    """phi == 0."""

    def __call__(self, u, z):
        return 0.0

    def __repr__(self):
        return "Zero()"


class Linear:
    """phi(u, z) = slope * z_i (globally Lipschitz)."""

    def __init__(self, slope: float = 1.0):
        self.slope = float(slope)

    def __call__(self, u, z):
        return self.slope * z[-1]

    def __repr__(self):
        return f"Linear({self.slope})"


class Saturated:
    """sat(phi(u, z), bound)."""

    def __init__(self, func: PhiFunc, bound: float):
        if bound < 0:
            raise ValueError("saturation bound must be >= 0")
        self.func = func
        self.bound = float(bound)

    def __call__(self, u, z):
        return saturate(self.func(u, z), self.bound)

    def __repr__(self):
        return f"Saturated({self.func!r}, {self.bound:.6g})"


class InputAffineSaturated:
    """sat(g(z), bound) * u for a nonlinearity of the form g(z) * u."""

    def __init__(self, g: Callable[[Sequence[float]], float], bound: float):
        self.g = g
        self.bound = float(bound)

    def __call__(self, u, z):
        return saturate(self.g(z), self.bound) * u

    def __repr__(self):
        return f"InputAffineSaturated({self.g!r}, {self.bound:.6g})"


@dataclass(frozen=True)
class TriangularSystem:
    """Dimension, per-line nonlinearities (None = unknown) and optional bounds."""

    m: int
    phi: tuple
    phi_bounds: Optional[tuple] = None
    name: str = "triangular"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.phi) != self.m:
            raise ValueError(f"expected {self.m} nonlinearities, got {len(self.phi)}")
        if self.phi_bounds is not None and len(self.phi_bounds) != self.m:
            raise ValueError(f"expected {self.m} bounds, got {len(self.phi_bounds)}")

    def known(self, i: int) -> bool:
        """Whether line i (0-based) has an available nonlinearity."""
        return self.phi[i] is not None

    @property
    def all_known(self) -> bool:
        return all(p is not None for p in self.phi)

    def rhs(self, z: Sequence[float], u: float, w: Sequence[float] | None = None) -> list[float]:
        if not self.all_known:
            raise ValueError(f"system {self.name!r} has unknown lines and cannot be integrated in z")
        m = self.m
        out = []
        for i in range(m):
            d = z[i + 1] if i + 1 < m else 0.0
            # w before phi: the same summation order as the observer copy
            if w is not None:
                d += w[i]
            d += self.phi[i](u, z[: i + 1])
            out.append(d)
        return out

    def phi_hat(self, saturate_lines: bool = True) -> tuple:
        """Observer-side estimates: the true phi (saturated when bounds are set) or None."""
        out = []
        for i, p in enumerate(self.phi):
            if p is None:
                out.append(None)
            elif saturate_lines and self.phi_bounds is not None and self.phi_bounds[i] is not None:
                out.append(Saturated(p, self.phi_bounds[i]))
            else:
                out.append(p)
        return tuple(out)

    def with_bounds(self, bounds: Sequence[Optional[float]]) -> "TriangularSystem":
        return TriangularSystem(self.m, self.phi, tuple(bounds), self.name)


def integrator_chain(m: int) -> TriangularSystem:
    """Pure chain of integrators (every phi known and identically zero)."""
    return TriangularSystem(m, tuple(Zero() for _ in range(m)), name="chain")


def linear_chain(m: int, slope: float = 1.0) -> TriangularSystem:
    """Chain with phi_i(u, z) = slope * z_i on every line."""
    return TriangularSystem(m, tuple(Linear(slope) for _ in range(m)), name="linear")


# --------------------------------------------------------------------------
# three-state example


def example_dynamics(x: Sequence[float], u: float) -> np.ndarray:
    x1, x2, x3 = x
    return np.array([x2, -x1 + x3**5 * x1, -x1 * x2 + u])


def h4(x) -> np.ndarray:
    """Map from the example's x-coordinates to its 4-dimensional canonical form.

    Works on a single 3-vector or on an (N, 3) array.
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    x3_4 = x3**4
    x3_5 = x3_4 * x3
    return np.stack(
        [x1, x2, -x1 + x3_5 * x1, -x2 - 5.0 * x3_4 * x1**2 * x2 + x3_5 * x2],
        axis=-1,
    )


class SingularInputError(ValueError):
    pass


def h4_inverse(z) -> np.ndarray:
    """Left inverse of :func:`h4`, defined where z1**2 + z2**2 != 0."""
    z = np.asarray(z, dtype=float)
    z1, z2, z3, z4 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    den = z1**2 + z2**2
    if np.any(den == 0.0):
        raise SingularInputError("h4_inverse is undefined where z1 = z2 = 0")
    s = z3 + z1  # x3**5 * x1
    # |s * sign(z1)|z1|**1.5|**0.8 = x3**4 * x1**2
    q = np.abs(s * np.sign(z1) * np.abs(z1) ** 1.5) ** 0.8
    x3_5 = (s * z1 + ((z4 + z2) + 5.0 * q * z2) * z2) / den
    x3 = np.sign(x3_5) * np.abs(x3_5) ** 0.2
    return np.stack([z1, z2, x3], axis=-1)


def phi3(u: float, z1: float, z3: float) -> float:
    """Third-line nonlinearity of the canonical form: 5 u |z3+z1|^(4/5) sign(z1)|z1|^(1/5)."""
    return 5.0 * u * abs(z3 + z1) ** 0.8 * signed_power(z1, 0.2)


def g3(z: Sequence[float]) -> float:
    """phi3 without its input factor (phi3 = g3(z) * u)."""
    return 5.0 * abs(z[2] + z[0]) ** 0.8 * signed_power(z[0], 0.2)


class ExamplePhi3:
    """phi3 as a line nonlinearity, phi(u, (z1, z2, z3))."""

    g = staticmethod(g3)

    def __call__(self, u, z):
        return 5.0 * u * abs(z[2] + z[0]) ** 0.8 * signed_power(z[0], 0.2)

    def __repr__(self):
        return "ExamplePhi3()"


def example_system() -> TriangularSystem:
    """Canonical form of the example: phi1 = phi2 = 0, phi3 known, phi4 unknown."""
    return TriangularSystem(4, (Zero(), Zero(), ExamplePhi3(), None), name="example")


def example_z4_rate(x, u) -> np.ndarray:
    """Time derivative of the fourth canonical coordinate along the x-dynamics.

    Used as an oracle disturbance signal; it is the chain rule through h4,
    not an expression of phi4 in z.
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    u = np.asarray(u, dtype=float)
    d1 = -10.0 * x3**4 * x1 * x2
    d2 = -1.0 - 5.0 * x3**4 * x1**2 + x3**5
    d3 = -20.0 * x3**3 * x1**2 * x2 + 5.0 * x3**4 * x2
    return d1 * x2 + d2 * (-x1 + x3**5 * x1) + d3 * (-x1 * x2 + u)


def example_rates(x, u) -> np.ndarray:
    """(N, 4) time derivatives of h4(x) along the x-dynamics."""
    x = np.asarray(x, dtype=float)
    z = h4(x)
    u = np.asarray(u, dtype=float)
    z3dot = z[..., 3] + 5.0 * u * x[..., 2] ** 4 * x[..., 0]
    return np.stack([z[..., 1], z[..., 2], z3dot, example_z4_rate(x, u)], axis=-1)


def triangular_residual(x_traj, u_traj, dt: float, eps: float = 1e-6) -> np.ndarray:
    """Max |central-difference z_i' - (z_{i+1} + phi_i)| for lines 1..3 of the example.

    ``x_traj`` is an (N, 3) trajectory sampled every ``dt``.
    """
    x = np.asarray(x_traj, dtype=float)
    u = np.asarray(u_traj, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] < 3:
        raise ValueError("x_traj must have shape (N >= 3, 3)")
    if np.min(x[:, 0] ** 2 + x[:, 1] ** 2) < eps:
        raise SingularInputError("trajectory touches the set x1 = x2 = 0")
    z = h4(x)
    dz = (z[2:] - z[:-2]) / (2.0 * dt)
    zc = z[1:-1]
    uc = u[1:-1]
    p3 = 5.0 * uc * np.abs(zc[:, 2] + zc[:, 0]) ** 0.8 * np.sign(zc[:, 0]) * np.abs(zc[:, 0]) ** 0.2
    res = np.stack(
        [dz[:, 0] - zc[:, 1], dz[:, 1] - zc[:, 2], dz[:, 2] - (zc[:, 3] + p3)], axis=1
    )
    return np.max(np.abs(res), axis=0)


# --------------------------------------------------------------------------
# Young splitting and Hölder tooling


@dataclass(frozen=True)
class HolderSpec:
    """Lower-triangular Hölder orders alpha[i][j] (j <= i) and constant a."""

    alpha: tuple
    a: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("Hölder constant must be >= 0")
        for i, row in enumerate(self.alpha):
            if len(row) != i + 1:
                raise ValueError(f"row {i + 1} of alpha must have {i + 1} entries")
            for v in row:
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"Hölder order {v} outside [0, 1]")


@dataclass(frozen=True)
class YoungSplit:
    sigma: float
    a_lin: float
    b_off: float


def young_decompose(a: float, alpha: float, sigma: float) -> YoungSplit:
    """Split a|d|^alpha <= a_lin |d| + b_off (valid for every real d)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    if a < 0.0:
        raise ValueError("a must be >= 0")
    if alpha == 0.0:
        return YoungSplit(sigma, 0.0, a)
    if alpha == 1.0:
        return YoungSplit(sigma, a, 0.0)
    # exponents 1/alpha and 1/(1 - alpha) blow up near the ends; an
    # overflowing coefficient is a valid (infinite) bound
    a_lin = alpha * _pow_or_inf(a * sigma, 1.0 / alpha)
    b_off = (1.0 - alpha) * _pow_or_inf(1.0 / sigma, 1.0 / (1.0 - alpha))
    return YoungSplit(sigma, a_lin, b_off)


def _pow_or_inf(base: float, exp: float) -> float:
    try:
        return base**exp
    except OverflowError:
        return math.inf


def _as_box(box) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.ndim == 1:
        b = np.stack([-np.abs(b), np.abs(b)], axis=1)
    if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 1] <= b[:, 0]):
        raise ValueError("box must be half-widths or (lo, hi) pairs with lo < hi")
    return b


def _as_range(u_range) -> tuple[float, float]:
    if np.isscalar(u_range):
        return (-abs(float(u_range)), abs(float(u_range)))
    lo, hi = u_range
    return float(lo), float(hi)


def holder_estimate(phi_i: PhiFunc, alpha_row, box, u_range, n_samples: int, seed: int = 0) -> float:
    """Monte-Carlo lower bound of the Hölder constant of ``phi_i`` over a box.

    max over sampled pairs of |phi(u, za) - phi(u, zb)| / sum_j |za_j - zb_j|^alpha_j.
    Samples are drawn row by row, so a larger count extends the same stream.
    """
    alpha = np.asarray(alpha_row, dtype=float)
    n = alpha.size
    b = _as_box(box)[:n]
    if b.shape[0] != n:
        raise ValueError("box has fewer coordinates than alpha_row")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    lo_u, hi_u = _as_range(u_range)
    rng = np.random.default_rng(seed)
    raw = rng.random((int(n_samples), 2 * n + 1))
    za = b[:, 0] + raw[:, :n] * (b[:, 1] - b[:, 0])
    zb = b[:, 0] + raw[:, n : 2 * n] * (b[:, 1] - b[:, 0])
    uu = lo_u + raw[:, 2 * n] * (hi_u - lo_u)
    diff = np.abs(za - zb)
    den = np.where(diff > 0, diff**alpha, 0.0).sum(axis=1)
    keep = np.any(diff > 0, axis=1) & (den > 0)
    if not np.any(keep):
        raise ValueError("all sampled pairs coincide")
    best = 0.0
    for k in np.flatnonzero(keep):
        num = abs(phi_i(uu[k], za[k]) - phi_i(uu[k], zb[k]))
        best = max(best, num / den[k])
    return float(best)


def holder_exponents(
    phi_i: PhiFunc,
    n: int,
    box,
    u_range,
    scales=(1e-2, 1e-3, 1e-4),
    n_random: int = 2000,
    grid: int = 7,
    seed: int = 0,
) -> np.ndarray:
    """Estimate the worst-case Hölder order of ``phi_i`` in each of its n arguments.

    For every coordinate j the modulus of continuity
    w_j(h) = max |phi(z + h e_j) - phi(z)| is computed over random
    base points plus a symmetric grid (which contains the coordinate planes),
    and the exponent is the smallest log-log slope between consecutive scales.
    Coordinates the function does not depend on report 1.
    """
    b = _as_box(box)[:n]
    lo_u, hi_u = _as_range(u_range)
    rng = np.random.default_rng(seed)
    pts = b[:, 0] + rng.random((n_random, n)) * (b[:, 1] - b[:, 0])
    axes = [np.linspace(lo, hi, grid) for lo, hi in b]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    base = np.vstack([pts, mesh])
    us = np.concatenate([lo_u + rng.random(n_random) * (hi_u - lo_u), np.full(len(mesh), hi_u)])
    scales = sorted(scales, reverse=True)
    out = np.ones(n)
    for j in range(n):
        moduli = []
        for h in scales:
            w = 0.0
            for z, u in zip(base, us):
                # one-sided: a centred difference cancels at even kinks like |z|**0.8
                za = z.copy()
                za[j] += h
                w = max(w, abs(phi_i(u, za) - phi_i(u, z)))
            moduli.append(w)
        moduli = np.array(moduli)
        if np.all(moduli <= 1e-300):
            out[j] = 1.0
            continue
        slopes = []
        for k in range(len(scales) - 1):
            if moduli[k] > 0 and moduli[k + 1] > 0:
                slopes.append(math.log(moduli[k] / moduli[k + 1]) / math.log(scales[k] / scales[k + 1]))
            else:
                slopes.append(1.0)
        out[j] = min(1.0, min(slopes))
    return out


def highgain_thresholds(m: int) -> list[list[tuple[float, bool]]]:
    """Per-entry Hölder order requirement for the high-gain observer.

    Entry (i, j) is (threshold, strict): alpha_ij > threshold if strict,
    otherwise alpha_ij >= threshold.
    """
    rows = []
    for i in range(1, m + 1):
        if i < m:
            rows.append([((m - i - 1) / (m - i), True)] * i)
        else:
            rows.append([(0.0, False)] * i)
    return rows


def homogeneous_orders(m: int, d0: float) -> list[list[float]]:
    """Hölder orders r_{i+1}/r_j needed by the homogeneous observer of degree d0."""
    r = [1.0 - d0 * (m - i) for i in range(1, m + 2)]
    return [[r[i] / r[j - 1] for j in range(1, i + 1)] for i in range(1, m + 1)]


def sampled_bounds(
    system: TriangularSystem,
    box,
    u_range,
    n_samples: int = 100_000,
    seed: int = 0,
    inflation: float = 0.1,
) -> tuple:
    """Per-line max |phi_i| over seeded samples of the box, inflated by ``inflation``."""
    b = _as_box(box)
    if b.shape[0] < system.m:
        raise ValueError("box has fewer coordinates than the system")
    lo_u, hi_u = _as_range(u_range)
    rng = np.random.default_rng(seed)
    raw = rng.random((int(n_samples), system.m + 1))
    z = b[: system.m, 0] + raw[:, : system.m] * (b[: system.m, 1] - b[: system.m, 0])
    u = lo_u + raw[:, system.m] * (hi_u - lo_u)
    bounds = []
    for i, p in enumerate(system.phi):
        if p is None:
            bounds.append(None)
            continue
        mx = 0.0
        for k in range(len(u)):
            v = abs(p(u[k], z[k, : i + 1]))
            if v > mx:
                mx = v
        bounds.append(float(mx * (1.0 + inflation)))
    return tuple(bounds)


def sampled_g_bound(g, n: int, box, n_samples: int = 100_000, seed: int = 0, inflation: float = 0.1) -> float:
    """Max |g(z)| over seeded samples of the first n box coordinates, inflated."""
    b = _as_box(box)[:n]
    rng = np.random.default_rng(seed)
    z = b[:, 0] + rng.random((int(n_samples), n)) * (b[:, 1] - b[:, 0])
    return float(max(abs(g(zz)) for zz in z) * (1.0 + inflation))


def holder_report(
    system: TriangularSystem,
    box,
    u_range,
    d0: float = -1.0,
    tol: float = 0.02,
    n_constant_samples: int = 20_000,
    seed: int = 0,
) -> list[dict]:
    """Per known line: estimated orders and admissibility for each observer family."""
    if not any(system.known(i) for i in range(system.m)):
        raise ValueError("no known nonlinearities to check")
    m = system.m
    hg = highgain_thresholds(m)
    hom = homogeneous_orders(m, d0)
    report = []
    for i in range(m):
        entry = {"line": i + 1, "known": system.known(i)}
        if not system.known(i):
            entry.update(highgain=None, homogeneous=None, cascade=True)
            report.append(entry)
            continue
        p = system.phi[i]
        orders = holder_exponents(p, i + 1, box, u_range, seed=seed)
        # a sampled exponent cannot resolve strict from non-strict, so both get the tolerance
        ok_hg = all(orders[j] > th - tol if strict else orders[j] >= th - tol for j, (th, strict) in enumerate(hg[i]))
        ok_hg = ok_hg and all(orders[j] > 0.0 for j, (th, strict) in enumerate(hg[i]) if strict)
        ok_hom = all(orders[j] >= hom[i][j] - tol for j in range(i + 1))
        used = np.clip(orders, 0.0, 1.0)
        const = holder_estimate(p, used, box, u_range, n_constant_samples, seed=seed)
        entry.update(
            orders=[float(o) for o in orders],
            highgain_required=[th for th, _ in hg[i]],
            homogeneous_required=hom[i],
            constant=const,
            highgain=bool(ok_hg),
            homogeneous=bool(ok_hom),
            cascade=True,
        )
        report.append(entry)
    return report
