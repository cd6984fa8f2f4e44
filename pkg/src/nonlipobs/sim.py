"""Fixed-step explicit-Euler simulation of a plant and one or more observers,
filtered measurement noise, and the error metrics used to compare runs.

A run integrates the plant once, forms the measurement y_k = z1(t_k) + v_k
on the whole grid, then integrates each observer against that same y.  This
makes sweeps cheap (the plant and noise realization are shared) and keeps
every observer in a run exactly comparable.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.signal import lfilter

from .observers import ObserverConfig, coordinate_of_state, coordinate_sources, state_labels
from .plant import TriangularSystem, example_dynamics, example_rates, h4


class DivergenceError(RuntimeError):
    """A state became non-finite; ``time`` is the first recorded bad instant."""

    def __init__(self, time: float, what: str = "state"):
        super().__init__(f"{what} diverged at t = {time:.6g}")
        self.time = time


# --------------------------------------------------------------------------
# inputs and noise


@dataclass(frozen=True)
class InputSignal:
    """u(t): ``constant`` (value), ``sine`` (amplitude, frequency in rad/s,
    phase) or ``series`` (zero-order hold of ``values`` sampled every ``dt``)."""

    kind: str = "sine"
    value: float = 0.0
    amplitude: float = 5.0
    frequency: float = 10.0
    phase: float = 0.0
    values: Optional[tuple] = None
    dt: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "series"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind == "series" and (not self.values or not self.dt or self.dt <= 0):
            raise ValueError("series input needs values and dt > 0")

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, float(self.value))
        if self.kind == "sine":
            return self.amplitude * np.sin(self.frequency * t + self.phase)
        vals = np.asarray(self.values, dtype=float)
        idx = np.clip(np.floor(t / self.dt + 1e-9).astype(int), 0, len(vals) - 1)
        return vals[idx]

    def __call__(self, t: float) -> float:
        return float(self.sample(np.array([t]))[0])


class SampledSignal:
    """Zero-order hold of a grid signal, callable as f(t) (used for oracle estimates)."""

    def __init__(self, values, dt: float):
        self.values = np.asarray(values, dtype=float).tolist()
        self.dt = float(dt)

    def __call__(self, t: float) -> float:
        k = int(t / self.dt + 0.5)
        if k >= len(self.values):
            k = len(self.values) - 1
        return self.values[k]


@dataclass(frozen=True)
class NoiseConfig:
    """Gaussian source through a first-order low-pass with parameter ``filter_a``.

    ``scale = "output"`` makes ``sigma`` the stationary standard deviation of
    the filtered noise; ``scale = "source"`` makes it the white source's.
    """

    sigma: float = 0.03
    filter_a: float = 50.0
    seed: int = 0
    scale: str = "output"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if not self.filter_a > 0:
            raise ValueError("filter_a must be > 0")
        if self.scale not in ("output", "source"):
            raise ValueError(f"noise scale must be 'output' or 'source', got {self.scale!r}")


def gen_noise(n_steps: int, dt: float, cfg: NoiseConfig, return_source: bool = False):
    """v_{k+1} = v_k + dt a (n_k - v_k), v_0 = 0, with n_k i.i.d. Gaussian.

    Returns ``n_steps`` samples (and the source draws if requested).
    """
    c = dt * cfg.filter_a
    if not 0.0 < c < 1.0:
        raise ValueError(f"dt * filter_a must lie in (0, 1) for a stable filter, got {c}")
    std = cfg.sigma
    if cfg.scale == "output":
        std = cfg.sigma * math.sqrt((2.0 - c) / c)
    rng = np.random.default_rng(cfg.seed)
    src = rng.standard_normal(n_steps) * std
    v = np.zeros(n_steps)
    if n_steps > 1:
        v[1:] = lfilter([c], [1.0, -(1.0 - c)], src[: n_steps - 1])
    return (v, src) if return_source else v


# --------------------------------------------------------------------------
# scenario and results


EXAMPLE = "example"


@dataclass(frozen=True)
class Scenario:
    """Plant, observers, input, initial states, noise and grid.

    ``system`` is ``"example"`` (the three-state plant integrated in x and
    observed in its canonical coordinates) or a fully known TriangularSystem
    integrated directly in z.  ``zhat0`` gives one initial state per
    observer; if omitted, observers start from h4(xhat0) (example) or 0,
    each cascade block taking the leading entries.
    """

    system: Union[str, TriangularSystem] = EXAMPLE
    observers: tuple = ()
    u: InputSignal = InputSignal()
    x0: tuple = (1.0, 1.0, 0.0)
    z0: Optional[tuple] = None
    xhat0: tuple = (0.1, 0.1, 0.0)
    zhat0: Optional[tuple] = None
    w: Optional[tuple] = None
    noise: Optional[NoiseConfig] = None
    dt: float = 1e-5
    T: float = 10.0
    seed: int = 0
    record_every: int = 10
    tail_fraction: float = 0.5
    conv_threshold: float = 1e-2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T must be >= dt, got T = {self.T}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ValueError("tail_fraction must lie in (0, 1)")
        if self.system != EXAMPLE and not isinstance(self.system, TriangularSystem):
            raise ValueError(f"unknown system {self.system!r}")
        if isinstance(self.system, TriangularSystem):
            if self.z0 is None or len(self.z0) != self.system.m:
                raise ValueError(f"triangular plants need z0 with {self.system.m} entries")
            if self.w is not None and len(self.w) != self.system.m:
                raise ValueError(f"w must have {self.system.m} entries")
        for cfg in self.observers:
            if cfg.m != self.m:
                raise ValueError(f"observer dimension {cfg.m} does not match the plant ({self.m})")
        if self.zhat0 is not None and len(self.zhat0) != len(self.observers):
            raise ValueError("zhat0 needs one entry per observer")

    @property
    def m(self) -> int:
        return 4 if self.system == EXAMPLE else self.system.m

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class PlantRun:
    dt: float
    n_steps: int
    u: list
    y: list
    t_rec: np.ndarray
    z_rec: np.ndarray
    x_rec: Optional[np.ndarray]
    record_every: int
    rates_rec: Optional[np.ndarray] = None


@dataclass
class ObserverTrace:
    cfg: ObserverConfig
    zhat: np.ndarray
    errors: np.ndarray
    all_errors: np.ndarray
    final_errors: np.ndarray
    peaking: float
    convergence_time: Optional[float]

    @property
    def converged(self) -> bool:
        return self.convergence_time is not None


@dataclass
class ScenarioResult:
    t: np.ndarray
    z: np.ndarray
    x: Optional[np.ndarray]
    traces: list
    metadata: dict = field(default_factory=dict)


def _check_finite(vec, t, what):
    for v in vec:
        if not math.isfinite(v):
            raise DivergenceError(t, what)


def simulate_plant(sc: Scenario) -> PlantRun:
    n = sc.n_steps
    dt = sc.dt
    t = np.arange(n + 1) * dt
    u = sc.u.sample(t)
    stride = sc.record_every
    rec_idx = list(range(0, n + 1, stride))
    if rec_idx[-1] != n:
        rec_idx.append(n)
    y1 = np.empty(n + 1)
    ul = u.tolist()
    if sc.system == EXAMPLE:
        x1, x2, x3 = (float(v) for v in sc.x0)
        xs = np.empty((len(rec_idx), 3))
        ri = 0
        try:
            for k in range(n + 1):
                y1[k] = x1
                if ri < len(rec_idx) and rec_idx[ri] == k:
                    _check_finite((x1, x2, x3), k * dt, "plant")
                    xs[ri] = (x1, x2, x3)
                    ri += 1
                if k == n:
                    break
                x35 = x3**5
                d1 = x2
                d2 = -x1 + x35 * x1
                d3 = -x1 * x2 + ul[k]
                x1 += dt * d1
                x2 += dt * d2
                x3 += dt * d3
        except OverflowError:
            raise DivergenceError(k * dt, "plant") from None
        z = h4(xs)
        rates = example_rates(xs, u[rec_idx])
        x_rec = xs
    else:
        sys_ = sc.system
        zc = [float(v) for v in sc.z0]
        m = sys_.m
        z = np.empty((len(rec_idx), m))
        rates = np.empty((len(rec_idx), m))
        w = sc.w
        ri = 0
        try:
            for k in range(n + 1):
                y1[k] = zc[0]
                if ri < len(rec_idx) and rec_idx[ri] == k:
                    _check_finite(zc, k * dt, "plant")
                    z[ri] = zc
                    rec_now = True
                else:
                    rec_now = False
                wk = None if w is None else [wi(k * dt) if callable(wi) else wi for wi in w]
                d = sys_.rhs(zc, ul[k], wk)
                if rec_now:
                    rates[ri] = d
                    ri += 1
                if k == n:
                    break
                zc = [a + dt * b for a, b in zip(zc, d)]
        except OverflowError:
            raise DivergenceError(k * dt, "plant") from None
        x_rec = None
    v = np.zeros(n + 1)
    if sc.noise is not None and sc.noise.sigma > 0:
        v = gen_noise(n + 1, dt, sc.noise)
    y = (y1 + v).tolist()
    return PlantRun(dt, n, ul, y, t[rec_idx], z, x_rec, stride, rates)


def default_zhat0(sc: Scenario, cfg: ObserverConfig) -> list:
    if sc.system == EXAMPLE:
        base = h4(np.asarray(sc.xhat0, dtype=float)).tolist()
    else:
        base = [0.0] * sc.m
    return block_initial_state(cfg, base)


def block_initial_state(cfg: ObserverConfig, zvec: Sequence[float]) -> list:
    """Observer state whose every block starts from the leading entries of zvec."""
    if not cfg.variant.is_cascade:
        return [float(v) for v in zvec[: cfg.m]]
    out = []
    for d in cfg.block_dims:
        out.extend(float(v) for v in zvec[:d])
    return out


def integrate_observer(plant: PlantRun, cfg: ObserverConfig, zhat0: Sequence[float]) -> np.ndarray:
    """Explicit Euler of one observer on the plant's grid; returns recorded states."""
    comp = cfg.compiled
    rhs = comp.rhs
    dt = plant.dt
    n = plant.n_steps
    stride = plant.record_every
    y = plant.y
    u = plant.u
    x = [float(v) for v in zhat0]
    if len(x) != comp.dim:
        raise ValueError(f"initial observer state must have {comp.dim} entries, got {len(x)}")
    rec = np.empty((len(plant.t_rec), comp.dim))
    ri = 0
    k = 0
    try:
        for k in range(n + 1):
            if k % stride == 0 or k == n:
                _check_finite(x, k * dt, "observer")
                rec[ri] = x
                ri += 1
            if k == n:
                break
            d = rhs(x, y[k], u[k], k * dt)
            x = [a + dt * b for a, b in zip(x, d)]
    except (OverflowError, ZeroDivisionError):
        raise DivergenceError(k * dt, "observer") from None
    return rec


def metrics(t, errors, tail_fraction: float = 0.1, conv_threshold: float = 1e-2, peak_errors=None):
    """(final_errors, peaking, convergence_time) from recorded error series.

    final error i = max |e_i| over t >= t_end - tail_fraction * (t_end - t_0);
    peaking = max over all t and components of |e| (of ``peak_errors`` if
    given); convergence_time = first recorded instant after which
    max_i |e_i| stays <= conv_threshold, or None if it never settles.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail_fraction must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    E = np.abs(np.asarray(errors, dtype=float))
    if E.ndim == 1:
        E = E[:, None]
    t0, t1 = t[0], t[-1]
    tail = t >= t1 - tail_fraction * (t1 - t0) - 1e-12 * max(1.0, abs(t1))
    final = E[tail].max(axis=0)
    P = E if peak_errors is None else np.abs(np.asarray(peak_errors, dtype=float))
    peaking = float(P.max())
    norm = E.max(axis=1)
    above = np.flatnonzero(norm > conv_threshold)
    if above.size == 0:
        conv = float(t[0])
    elif above[-1] + 1 < len(t):
        conv = float(t[above[-1] + 1])
    else:
        conv = None
    return final, peaking, conv


def observe(plant: PlantRun, sc: Scenario, cfg: ObserverConfig, zhat0=None) -> ObserverTrace:
    if zhat0 is None:
        zhat0 = default_zhat0(sc, cfg)
    rec = integrate_observer(plant, cfg, zhat0)
    src = coordinate_sources(cfg)
    errors = rec[:, src] - plant.z_rec
    coords = coordinate_of_state(cfg)
    all_errors = rec - plant.z_rec[:, coords]
    final, peak, conv = metrics(plant.t_rec, errors, sc.tail_fraction, sc.conv_threshold, all_errors)
    return ObserverTrace(cfg, rec, errors, all_errors, final, peak, conv)


def run(sc: Scenario) -> ScenarioResult:
    """Integrate the plant, then every observer against the shared measurement."""
    plant = simulate_plant(sc)
    traces = []
    for i, cfg in enumerate(sc.observers):
        z0 = None if sc.zhat0 is None else sc.zhat0[i]
        traces.append(observe(plant, sc, cfg, z0))
    meta = {"seed": sc.seed, "dt": sc.dt, "T": sc.T, "noise_seed": None if sc.noise is None else sc.noise.seed}
    return ScenarioResult(plant.t_rec, plant.z_rec, plant.x_rec, traces, meta)


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    L: object
    final_errors: Optional[np.ndarray]
    peaking: Optional[float]
    converged: bool
    conv_time: Optional[float]
    seed: int
    diverged: bool = False
    blowup_time: Optional[float] = None


_WORKER_STATE = {}


def _sweep_init(plant, sc):
    _WORKER_STATE["plant"] = plant
    _WORKER_STATE["sc"] = sc


def _sweep_one(args):
    cfg, zhat0, label = args
    plant = _WORKER_STATE["plant"]
    sc = _WORKER_STATE["sc"]
    seed = sc.noise.seed if sc.noise is not None else sc.seed
    try:
        tr = observe(plant, sc, cfg, zhat0)
    except DivergenceError as exc:
        return SweepRow(label, None, None, False, None, seed, True, exc.time)
    return SweepRow(label, tr.final_errors, tr.peaking, tr.converged, tr.convergence_time, seed)


def sweep(sc: Scenario, L_values=None, configs=None, workers: int = 1) -> list[SweepRow]:
    """One run per gain against a single plant/noise realization.

    The template observer is ``sc.observers[0]``; ``L_values`` replaces its
    L (every block L for cascades), or ``configs`` gives explicit observers.
    Divergent runs become rows with ``diverged = True``.
    """
    if configs is None:
        if not sc.observers:
            raise ValueError("sweep needs a template observer")
        if not L_values:
            L_values = [sc.observers[0].L if not sc.observers[0].variant.is_cascade else sc.observers[0].L_blocks]
        configs = [sc.observers[0].with_L(L) for L in L_values]
        labels = list(L_values)
    else:
        labels = [c.L if not c.variant.is_cascade else c.L_blocks for c in configs]
    if not configs:
        raise ValueError("sweep needs at least one gain set")
    plant = simulate_plant(sc)
    z0 = None if sc.zhat0 is None else sc.zhat0[0]
    jobs = [(cfg, z0, lab) for cfg, lab in zip(configs, labels)]
    if workers <= 1:
        _sweep_init(plant, sc)
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_sweep_init, initargs=(plant, sc)) as ex:
        return list(ex.map(_sweep_one, jobs))


# --------------------------------------------------------------------------
# CSV


def fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def write_trajectory_csv(result: ScenarioResult, path, observer: int = 0, stride: int = 1) -> None:
    """Columns t, z1..zm, then the observer states and e_z1..e_zm (if any)."""
    m = result.z.shape[1]
    header = ["t"] + [f"z{i + 1}" for i in range(m)]
    tr = result.traces[observer] if result.traces else None
    if tr is not None:
        header += state_labels(tr.cfg) + [f"e_z{i + 1}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(0, len(result.t), stride):
            row = [fmt(result.t[r])] + [fmt(v) for v in result.z[r]]
            if tr is not None:
                row += [fmt(v) for v in tr.zhat[r]] + [fmt(v) for v in tr.errors[r]]
            w.writerow(row)


def _label(L) -> str:
    if isinstance(L, (tuple, list)):
        return ";".join(fmt(v) for v in L)
    return fmt(L)


def write_sweep_csv(rows: Sequence[SweepRow], path, m: int = 4) -> None:
    header = ["L"] + [f"e_z{i + 1}" for i in range(m)] + ["peaking", "converged", "conv_time", "seed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            errs = [None] * m if row.final_errors is None else list(row.final_errors)
            w.writerow(
                [_label(row.L)]
                + [fmt(v) for v in errs]
                + [fmt(row.peaking), "diverged" if row.diverged else str(bool(row.converged)).lower(), fmt(row.conv_time), str(row.seed)]
            )
