"""TOML experiment configuration: schema, validation, presets and the
translation into Scenario and ObserverConfig objects."""

from __future__ import annotations

import copy
from typing import Any

import tomli
import tomli_w

from .numerics import SignRule
from .observers import ObserverConfig, Variant, default_highgain_k
from .plant import (
    ExamplePhi3,
    InputAffineSaturated,
    TriangularSystem,
    example_system,
    g3,
    integrator_chain,
    linear_chain,
    sampled_bounds,
    sampled_g_bound,
)
from .sim import EXAMPLE, InputSignal, NoiseConfig, Scenario


class ConfigError(ValueError):
    pass


NUM = (int, float)

# section -> key -> (accepted types, default); None default means optional
SCHEMA: dict[str, dict[str, tuple]] = {
    "system": {
        "kind": (str, "example"),
        "m": (int, 4),
        "slope": (NUM, 1.0),
        "box": (list, [3.0, 3.0, 3.0, 3.0]),
        "u_box": (NUM, 5.0),
        "bound_samples": (int, 100_000),
        "bound_seed": (int, 0),
        "bound_inflation": (NUM, 0.1),
    },
    "observer": {
        "enabled": (bool, True),
        "variant": (str, "highgain"),
        "L": (NUM, 1.0),
        "k": (list, None),
        "d0": (NUM, 0.0),
        "sign_rule": (str, "zero"),
        "L_blocks": (list, None),
        "k_blocks": (list, None),
        "block_dims": (list, None),
        "phi_mode": (str, "saturated"),
        "saturate_gain_lines": (list, []),
        "w_hat": (list, None),
    },
    "scenario": {
        "dt": (NUM, 1e-5),
        "T": (NUM, 10.0),
        "seed": (int, 0),
        "record_every": (int, 10),
        "tail_fraction": (NUM, 0.5),
        "conv_threshold": (NUM, 1e-2),
        "input": (str, "sine"),
        "amplitude": (NUM, 5.0),
        "frequency": (NUM, 10.0),
        "phase": (NUM, 0.0),
        "value": (NUM, 0.0),
        "x0": (list, [1.0, 1.0, 0.0]),
        "z0": (list, None),
        "xhat0": (list, [0.1, 0.1, 0.0]),
    },
    "noise": {
        "enabled": (bool, False),
        "sigma": (NUM, 0.03),
        "filter_a": (NUM, 50.0),
        "seed": (int, 0),
        "scale": (str, "output"),
    },
    "sweep": {
        "L": (list, []),
        "workers": (int, 1),
    },
}

PHI_MODES = ("saturated", "exact", "zero")
SYSTEM_KINDS = ("example", "chain", "linear")


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items() if v[1] is not None} for sec, keys in SCHEMA.items()}


def _type_ok(value, types) -> bool:
    if isinstance(value, bool) and types is not bool:
        return False
    return isinstance(value, types)


def validate(doc: dict) -> dict:
    """Fill defaults, reject unknown sections/keys and wrong types."""
    out = defaults()
    for sec, body in doc.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        for key, value in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]")
            types = SCHEMA[sec][key][0]
            if not _type_ok(value, types):
                raise ConfigError(f"[{sec}] {key}: expected {getattr(types, '__name__', 'number')}, got {value!r}")
            out[sec][key] = value
    s = out["scenario"]
    if not s["dt"] > 0:
        raise ConfigError(f"[scenario] dt must be > 0, got {s['dt']}")
    if not s["T"] >= s["dt"]:
        raise ConfigError(f"[scenario] T must be >= dt, got {s['T']}")
    if out["system"]["kind"] not in SYSTEM_KINDS:
        raise ConfigError(f"[system] kind must be one of {', '.join(SYSTEM_KINDS)}")
    if out["observer"]["phi_mode"] not in PHI_MODES:
        raise ConfigError(f"[observer] phi_mode must be one of {', '.join(PHI_MODES)}")
    try:
        Variant.parse(out["observer"]["variant"])
        SignRule.parse(out["observer"]["sign_rule"])
    except ValueError as exc:
        raise ConfigError(f"[observer] {exc}") from None
    return out


def parse(text: str) -> dict:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return validate(doc)


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def serialize(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


# --------------------------------------------------------------------------
# presets


def _preset(**sections) -> dict:
    doc = defaults()
    for sec, body in sections.items():
        doc[sec].update(body)
    return validate(doc)


PRESETS = {
    "example-plant": lambda: _preset(observer={"enabled": False}),
    "table3": lambda: _preset(
        observer={"variant": "highgain", "L": 5.0, "k": [14.0, 99.0, 408.0, 833.0]},
        sweep={"L": [2.0, 5.0, 8.0, 10.0, 15.0]},
    ),
    "table4": lambda: _preset(
        observer={"variant": "homogeneous", "L": 3.0, "d0": -1.0, "k": [5.0, 8.77, 4.44, 1.1]},
        noise={"enabled": True},
        sweep={"L": [2.5, 3.0, 4.0, 5.0, 6.0]},
    ),
    "cascade-hg": lambda: _preset(
        observer={
            "variant": "cascade-highgain",
            "block_dims": [1, 2, 3, 4],
            "L_blocks": [5.0, 5.0, 5.0, 5.0],
            "k_blocks": [list(default_highgain_k(d)) for d in (1, 2, 3, 4)],
        },
    ),
    "cascade-hom": lambda: _preset(
        observer={
            "variant": "cascade-homogeneous",
            "d0": -1.0,
            "block_dims": [3, 4],
            "L_blocks": [2.5, 3.0],
            "k_blocks": [[3.0, 2.6, 1.1], [5.0, 8.77, 4.44, 1.1]],
            "saturate_gain_lines": [3],
        },
        noise={"enabled": True},
    ),
}


def preset(name: str) -> dict:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (expected one of {', '.join(PRESETS)})") from None


# --------------------------------------------------------------------------
# building objects


def build_system(cfg: dict):
    s = cfg["system"]
    kind = s["kind"]
    if kind == "example":
        return example_system()
    if kind == "chain":
        return integrator_chain(s["m"])
    return linear_chain(s["m"], s["slope"])


def build_phi_hat(cfg: dict, system: TriangularSystem) -> tuple:
    s, o = cfg["system"], cfg["observer"]
    mode = o["phi_mode"]
    if mode == "zero":
        return (None,) * system.m
    if mode == "exact":
        return system.phi_hat(saturate_lines=False)
    box = s["box"]
    if len(box) < system.m:
        raise ConfigError(f"[system] box needs {system.m} entries")
    gain_lines = set(int(v) for v in o["saturate_gain_lines"])
    bounds = sampled_bounds(system, box, s["u_box"], s["bound_samples"], s["bound_seed"], s["bound_inflation"])
    out = list(system.with_bounds(bounds).phi_hat())
    for line in gain_lines:
        i = line - 1
        if not 0 <= i < system.m or not isinstance(system.phi[i], ExamplePhi3):
            raise ConfigError(f"[observer] saturate_gain_lines: line {line} is not of the form g(z) u")
        gb = sampled_g_bound(g3, line, box, s["bound_samples"], s["bound_seed"], s["bound_inflation"])
        out[i] = InputAffineSaturated(g3, gb)
    return tuple(out)


def build_observer(cfg: dict, system=None) -> ObserverConfig:
    o = cfg["observer"]
    system = system or build_system(cfg)
    m = system.m
    variant = Variant.parse(o["variant"])
    phi = build_phi_hat(cfg, system)
    w_hat = tuple(float(v) for v in o["w_hat"]) if o.get("w_hat") is not None else None
    try:
        if variant.is_cascade:
            dims = tuple(o["block_dims"]) if o.get("block_dims") is not None else tuple(range(1, m + 1))
            kb = o.get("k_blocks")
            if kb is None:
                kb = [list(default_highgain_k(d)) for d in dims]
            Lb = o.get("L_blocks")
            if Lb is None:
                Lb = [o["L"]] * len(dims)
            return ObserverConfig(
                variant, m, d0=float(o["d0"]), L_blocks=tuple(Lb), k_blocks=tuple(tuple(r) for r in kb),
                block_dims=dims, sign_rule=o["sign_rule"], phi_hat=phi, w_hat=w_hat,
            )
        k = tuple(o["k"]) if o.get("k") is not None else default_highgain_k(m)
        return ObserverConfig(
            variant, m, L=float(o["L"]), k=k, d0=float(o["d0"]), sign_rule=o["sign_rule"], phi_hat=phi, w_hat=w_hat
        )
    except ValueError as exc:
        raise ConfigError(f"[observer] {exc}") from None


def build_scenario(cfg: dict) -> Scenario:
    s = cfg["scenario"]
    system = build_system(cfg)
    observers = (build_observer(cfg, system),) if cfg["observer"]["enabled"] else ()
    n = cfg["noise"]
    noise = NoiseConfig(n["sigma"], n["filter_a"], n["seed"], n["scale"]) if n["enabled"] else None
    try:
        u = InputSignal(s["input"], value=s["value"], amplitude=s["amplitude"], frequency=s["frequency"], phase=s["phase"])
        plant = EXAMPLE if cfg["system"]["kind"] == "example" else system
        z0 = tuple(s["z0"]) if s.get("z0") is not None else (None if plant == EXAMPLE else (0.0,) * system.m)
        return Scenario(
            system=plant,
            observers=observers,
            u=u,
            x0=tuple(s["x0"]),
            z0=z0,
            xhat0=tuple(s["xhat0"]),
            noise=noise,
            dt=float(s["dt"]),
            T=float(s["T"]),
            seed=s["seed"],
            record_every=s["record_every"],
            tail_fraction=float(s["tail_fraction"]),
            conv_threshold=float(s["conv_threshold"]),
        )
    except ValueError as exc:
        raise ConfigError(f"[scenario] {exc}") from None


def apply_overrides(cfg: dict, **kw: Any) -> dict:
    """Return a copy with CLI overrides applied (None values are ignored)."""
    out = copy.deepcopy(cfg)
    if kw.get("seed") is not None:
        out["scenario"]["seed"] = kw["seed"]
        out["noise"]["seed"] = kw["seed"]
    if kw.get("dt") is not None:
        out["scenario"]["dt"] = kw["dt"]
    if kw.get("T") is not None:
        out["scenario"]["T"] = kw["T"]
    if kw.get("no_noise"):
        out["noise"]["enabled"] = False
    if kw.get("L") is not None:
        Ls = list(kw["L"])
        out["sweep"]["L"] = Ls
        if Variant.parse(out["observer"]["variant"]).is_cascade:
            n_blocks = len(out["observer"]["block_dims"] or range(build_system(out).m))
            out["observer"]["L_blocks"] = [Ls[0]] * n_blocks
        else:
            out["observer"]["L"] = Ls[0]
    return validate(out)
