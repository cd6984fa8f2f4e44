"""Scalar and array primitives: signed powers, sign selections, saturation,
homogeneous weights and dilations.

All arithmetic is IEEE double precision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class SignRule(enum.Enum):
    """Single-valued selection of the set-valued sign at zero.

    Away from zero every rule returns ``sign(a)``.
    """

    ZERO_AT_ZERO = "zero"
    UPPER = "upper"
    LOWER = "lower"

    @classmethod
    def parse(cls, value: "SignRule | str") -> "SignRule":
        if isinstance(value, SignRule):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown sign rule {value!r} (expected one of {names})") from None


_AT_ZERO = {SignRule.ZERO_AT_ZERO: 0.0, SignRule.UPPER: 1.0, SignRule.LOWER: -1.0}


def sign_select(a: float, rule: SignRule = SignRule.ZERO_AT_ZERO) -> float:
    """Return an element of S(a): +1 for a > 0, -1 for a < 0, the rule's value at 0."""
    if a > 0.0:
        return 1.0
    if a < 0.0:
        return -1.0
    return _AT_ZERO[rule]


def sign_set(a: float) -> tuple[float, float]:
    """Closed interval S(a) as (low, high)."""
    if a > 0.0:
        return (1.0, 1.0)
    if a < 0.0:
        return (-1.0, -1.0)
    return (-1.0, 1.0)


def signed_power(a: float, b: float, rule: SignRule = SignRule.ZERO_AT_ZERO) -> float:
    """sign(a) * |a|**b.

    ``b == 0`` falls back to :func:`sign_select`; ``b == 1`` returns ``a``
    unchanged so that unit exponents are bitwise exact.
    """
    if b < 0.0:
        raise ValueError(f"signed_power exponent must be >= 0, got {b}")
    if b == 0.0:
        return sign_select(a, rule)
    if a == 0.0:
        return 0.0
    if b == 1.0:
        return a
    return math.copysign(abs(a) ** b, a)


def spow(x, p):
    """Vectorised signed power for p > 0 (returns 0 where x == 0)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("spow exponent must be >= 0")
    return np.sign(x) * np.abs(x) ** p


def saturate(x: float, bound: float) -> float:
    """Clip x to [-bound, bound]."""
    if bound < 0.0:
        raise ValueError(f"saturation bound must be >= 0, got {bound}")
    return max(min(x, bound), -bound)


@dataclass(frozen=True)
class WeightVector:
    """Homogeneity weights r_i = 1 - d0 (m - i), i = 1..m+1.

    ``r`` is stored 0-based: ``r[0]`` is r_1 and ``r[m]`` is r_{m+1} = 1 + d0.
    """

    m: int
    d0: float
    r: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.m}")
        if not -1.0 <= self.d0 <= 0.0:
            raise ValueError(f"degree d0 must lie in [-1, 0], got {self.d0}")
        m = int(self.m)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "r", tuple(1.0 - self.d0 * (m - i) for i in range(1, m + 2)))

    def __getitem__(self, i):
        return self.r[i]

    def __len__(self):
        return len(self.r)

    def as_array(self) -> np.ndarray:
        return np.array(self.r)

    def injection_exponents(self) -> tuple[float, ...]:
        """Powers r_{i+1}/r_1 applied to the output innovation, i = 1..m."""
        return tuple(self.r[i] / self.r[0] for i in range(1, self.m + 1))


def dilation(e, lam: float, weights) -> np.ndarray:
    """Weighted dilation: component i becomes lam**r_i * e_i."""
    if lam <= 0.0:
        raise ValueError(f"dilation factor must be > 0, got {lam}")
    e = np.asarray(e, dtype=float)
    r = np.asarray(weights.r if isinstance(weights, WeightVector) else weights, dtype=float)
    n = e.shape[-1]
    if n > r.size:
        raise ValueError(f"{n} components but only {r.size} weights")
    return e * lam ** r[:n]
