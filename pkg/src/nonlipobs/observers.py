"""Right-hand sides of the four observer families.

Every observer is a stack of blocks.  A block of dimension d with gain L
and gains k_1..k_d evolves

    zhat_j' = zhat_{j+1} + phi_j(u, src_1..src_j) + what_j - L^j k_j [zhat_1 - y]^(p_j)

where p_j = r_{j+1}/r_1 for the block's weights (p_j = 1 for high gain, and
the set-valued sign when p_j = 0).  The single observers are one block of
dimension m whose source is the block itself.  In a cascade, block b takes
the phi_j inputs from block b-1 (the first block from itself), and its last
line carries no phi term: only the disturbance estimate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

from .numerics import SignRule, WeightVector, sign_select


class Variant(enum.Enum):
    HIGH_GAIN = "highgain"
    CASCADE_HIGH_GAIN = "cascade-highgain"
    HOMOGENEOUS = "homogeneous"
    CASCADE_HOMOGENEOUS = "cascade-homogeneous"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown observer variant {value!r} (expected one of {names})") from None

    @property
    def is_cascade(self) -> bool:
        return self in (Variant.CASCADE_HIGH_GAIN, Variant.CASCADE_HOMOGENEOUS)

    @property
    def is_homogeneous(self) -> bool:
        return self in (Variant.HOMOGENEOUS, Variant.CASCADE_HOMOGENEOUS)


def default_highgain_k(m: int) -> tuple[float, ...]:
    """Binomial gains: s^m + k_1 s^(m-1) + ... + k_m = (s + 1)^m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return tuple(float(math.comb(m, i)) for i in range(1, m + 1))


def _check_gains(k, d, what):
    if len(k) != d:
        raise ValueError(f"{what}: expected {d} gains, got {len(k)}")
    if any(not (g > 0) for g in k):
        raise ValueError(f"{what}: gains must be > 0")


@dataclass(frozen=True)
class ObserverConfig:
    """Observer variant, gains and the per-line estimates it uses.

    Single observers use ``L`` and ``k``; cascades use ``L_blocks``,
    ``k_blocks`` and ``block_dims`` (default 1, 2, ..., m).  ``phi_hat``
    entries are callables phi(u, z) or None (estimate 0).  ``w_hat`` entries
    and ``block_w_hat`` (last line of each cascade block) are constants or
    callables of time.
    """

    variant: Variant
    m: int
    L: Optional[float] = None
    k: Optional[tuple] = None
    d0: float = 0.0
    L_blocks: Optional[tuple] = None
    k_blocks: Optional[tuple] = None
    block_dims: Optional[tuple] = None
    sign_rule: SignRule = SignRule.ZERO_AT_ZERO
    phi_hat: Optional[tuple] = None
    w_hat: Optional[tuple] = None
    block_w_hat: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "sign_rule", SignRule.parse(self.sign_rule))
        m = self.m
        if m < 1:
            raise ValueError("m must be >= 1")
        if not -1.0 <= self.d0 <= 0.0:
            raise ValueError(f"d0 must lie in [-1, 0], got {self.d0}")
        if not self.variant.is_homogeneous and self.d0 != 0.0:
            raise ValueError("high-gain variants require d0 = 0")
        if self.phi_hat is not None and len(self.phi_hat) != m:
            raise ValueError(f"phi_hat must have {m} entries")
        if self.w_hat is not None and len(self.w_hat) != m:
            raise ValueError(f"w_hat must have {m} entries")
        if self.variant.is_cascade:
            dims = tuple(range(1, m + 1)) if self.block_dims is None else tuple(int(d) for d in self.block_dims)
            if not dims or dims[-1] != m or any(b <= a for a, b in zip(dims, dims[1:])) or dims[0] < 1:
                raise ValueError(f"block_dims must increase strictly and end at m = {m}, got {dims}")
            object.__setattr__(self, "block_dims", dims)
            if self.L_blocks is None or self.k_blocks is None:
                raise ValueError("cascade observers need L_blocks and k_blocks")
            Lb = tuple(float(v) for v in self.L_blocks)
            if len(Lb) != len(dims):
                raise ValueError(f"expected {len(dims)} block gains L, got {len(Lb)}")
            kb = tuple(tuple(float(g) for g in row) for row in self.k_blocks)
            if len(kb) != len(dims):
                raise ValueError(f"expected {len(dims)} gain rows, got {len(kb)}")
            for b, (d, row) in enumerate(zip(dims, kb)):
                _check_gains(row, d, f"block {b + 1}")
            object.__setattr__(self, "L_blocks", Lb)
            object.__setattr__(self, "k_blocks", kb)
            for Lv in Lb:
                if Lv < 1.0:
                    raise ValueError(f"L must be >= 1, got {Lv}")
            if self.block_w_hat is not None and len(self.block_w_hat) != len(dims):
                raise ValueError(f"block_w_hat must have {len(dims)} entries")
        else:
            if self.L is None or self.k is None:
                raise ValueError("single observers need L and k")
            if self.L < 1.0:
                raise ValueError(f"L must be >= 1, got {self.L}")
            k = tuple(float(g) for g in self.k)
            _check_gains(k, m, "observer")
            object.__setattr__(self, "k", k)
            object.__setattr__(self, "L", float(self.L))

    @property
    def dim(self) -> int:
        if self.variant.is_cascade:
            return sum(self.block_dims)
        return self.m

    @property
    def block_offsets(self) -> tuple:
        if not self.variant.is_cascade:
            return (0,)
        offs, acc = [], 0
        for d in self.block_dims:
            offs.append(acc)
            acc += d
        return tuple(offs)

    def with_L(self, L) -> "ObserverConfig":
        """Copy with a new gain L (single) or L for every block (cascade)."""
        import dataclasses

        if self.variant.is_cascade:
            Ls = tuple(L) if isinstance(L, (tuple, list)) else (float(L),) * len(self.block_dims)
            return dataclasses.replace(self, L_blocks=Ls)
        return dataclasses.replace(self, L=float(L))

    @cached_property
    def compiled(self) -> "_Compiled":
        return _Compiled(self)


class _Block:
    __slots__ = ("off", "d", "lk", "exps", "phi", "src", "w", "last_phi")

    def __init__(self, off, d, lk, exps, phi, src, w, last_phi):
        self.off = off
        self.d = d
        self.lk = lk
        self.exps = exps
        self.phi = phi
        self.src = src
        self.w = w
        self.last_phi = last_phi


class _Compiled:
    """Pre-computed gains and exponents; ``rhs`` works on plain lists."""

    def __init__(self, cfg: ObserverConfig):
        self.cfg = cfg
        self.dim = cfg.dim
        self.rule = cfg.sign_rule
        self.at_zero = sign_select(0.0, cfg.sign_rule)
        phi = cfg.phi_hat if cfg.phi_hat is not None else (None,) * cfg.m
        w = cfg.w_hat if cfg.w_hat is not None else (0.0,) * cfg.m
        blocks = []
        if cfg.variant.is_cascade:
            dims, Ls, ks = cfg.block_dims, cfg.L_blocks, cfg.k_blocks
            offs = cfg.block_offsets
            for b, d in enumerate(dims):
                src = offs[b - 1] if b > 0 else offs[0]
                wl = list(w[:d])
                if cfg.block_w_hat is not None and cfg.block_w_hat[b] is not None:
                    wl[d - 1] = cfg.block_w_hat[b]
                blocks.append(self._block(offs[b], d, Ls[b], ks[b], phi[:d], src, wl, False, cfg))
        else:
            blocks.append(self._block(0, cfg.m, cfg.L, cfg.k, phi, 0, list(w), True, cfg))
        self.blocks = blocks
        self.time_varying = any(callable(v) for b in blocks for v in b.w)

    @staticmethod
    def _block(off, d, L, k, phi, src, w, last_phi, cfg):
        lk = [L ** (i + 1) * k[i] for i in range(d)]
        if cfg.variant.is_homogeneous:
            wv = WeightVector(d, cfg.d0)
            exps = list(wv.injection_exponents())
        else:
            exps = [1.0] * d
        return _Block(off, d, lk, exps, list(phi), src, w, last_phi)

    def rhs(self, state, y, u, t=0.0):
        out = [0.0] * self.dim
        at_zero = self.at_zero
        for blk in self.blocks:
            off, d, lk, exps = blk.off, blk.d, blk.lk, blk.exps
            e = state[off] - y
            ae = abs(e)
            src = state[blk.src : blk.src + d]
            for j in range(d):
                p = exps[j]
                if p == 1.0:
                    inj = e
                elif p == 0.0:
                    inj = 1.0 if e > 0.0 else (-1.0 if e < 0.0 else at_zero)
                elif e == 0.0:
                    inj = 0.0
                else:
                    inj = math.copysign(ae**p, e)
                wj = blk.w[j]
                if callable(wj):
                    wj = wj(t)
                if j < d - 1:
                    rate = state[off + j + 1] + wj
                    f = blk.phi[j]
                    if f is not None:
                        rate += f(u, src[: j + 1])
                else:
                    rate = wj
                    if blk.last_phi:
                        f = blk.phi[j]
                        if f is not None:
                            rate += f(u, src[: j + 1])
                out[off + j] = rate - lk[j] * inj
        return out


def _expect(cfg: ObserverConfig, variants):
    if cfg.variant not in variants:
        raise ValueError(f"config variant {cfg.variant.value!r} does not match this right-hand side")


def highgain_rhs(state, y: float, u: float, cfg: ObserverConfig, t: float = 0.0) -> list:
    _expect(cfg, (Variant.HIGH_GAIN,))
    return cfg.compiled.rhs(list(state), y, u, t)


def cascade_highgain_rhs(state, y: float, u: float, cfg: ObserverConfig, t: float = 0.0) -> list:
    _expect(cfg, (Variant.CASCADE_HIGH_GAIN,))
    return cfg.compiled.rhs(list(state), y, u, t)


def homogeneous_rhs(state, y: float, u: float, cfg: ObserverConfig, t: float = 0.0) -> list:
    _expect(cfg, (Variant.HOMOGENEOUS,))
    return cfg.compiled.rhs(list(state), y, u, t)


def cascade_homogeneous_rhs(state, y: float, u: float, cfg: ObserverConfig, t: float = 0.0) -> list:
    _expect(cfg, (Variant.CASCADE_HOMOGENEOUS,))
    return cfg.compiled.rhs(list(state), y, u, t)


def observer_rhs(state, y: float, u: float, cfg: ObserverConfig, t: float = 0.0) -> list:
    """Dispatch on the configured variant."""
    return cfg.compiled.rhs(list(state), y, u, t)


def coordinate_sources(cfg: ObserverConfig) -> list[int]:
    """State index reporting each z-coordinate: the first block that covers it."""
    if not cfg.variant.is_cascade:
        return list(range(cfg.m))
    out = []
    for i in range(cfg.m):
        for off, d in zip(cfg.block_offsets, cfg.block_dims):
            if i < d:
                out.append(off + i)
                break
    return out


def state_labels(cfg: ObserverConfig) -> list[str]:
    if not cfg.variant.is_cascade:
        return [f"zhat{i + 1}" for i in range(cfg.m)]
    return [f"zhat_{b + 1}_{j + 1}" for b, d in enumerate(cfg.block_dims) for j in range(d)]


def coordinate_of_state(cfg: ObserverConfig) -> list[int]:
    """z-coordinate (0-based) estimated by each state entry."""
    if not cfg.variant.is_cascade:
        return list(range(cfg.m))
    return [j for d in cfg.block_dims for j in range(d)]
