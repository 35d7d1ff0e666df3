"""Run configuration: dataclasses, strict JSON loading, and the preset catalog."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .anisotropy import (AnisotropyModel, StabilityCase, StabilityMode,
                         StabilityPolicy)
from .curve import GeneratingCurve, Topology
from .evolve import EventConfig, NewtonConfig
from .forms import PhysicsParams

__all__ = [
    "ConfigError",
    "ModelConfig",
    "PhysicsConfig",
    "DiscretizationConfig",
    "InitialConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "preset",
    "PRESET_NAMES",
    "build_model",
    "build_params",
    "build_initial_curve",
    "config_to_dict",
    "CURVE_FORMS",
]


class ConfigError(ValueError):
    """Raised for malformed or invalid run configuration."""


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "fourfold"
    beta: float = 0.0
    q: int = 1
    stability_mode: str = "auto_minimal"
    stability_value: float = 0.0
    stability_case: str = "II"
    stability_grid: int = 512


@dataclass(frozen=True)
class PhysicsConfig:
    sigma: float = -0.6
    eta: float = 100.0
    eps: float = 0.01


@dataclass(frozen=True)
class DiscretizationConfig:
    J: int = 32
    dt: float = 1.0 / 16.0
    t_end: float = 2.0


@dataclass(frozen=True)
class InitialConfig:
    form: Optional[str] = None                  # name in CURVE_FORMS
    nodes: Optional[tuple] = None               # explicit ((r, z), ...)
    topology: Optional[str] = None              # required with explicit nodes


@dataclass(frozen=True)
class NewtonSection:
    tol: float = 1e-8
    max_iters: int = 50


@dataclass(frozen=True)
class EventsSection:
    z_pinch_rel: float = 1e-3
    r_close_rel: float = 1e-3
    v_eq: float = 1e-6
    split: bool = True


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_every: int = 0                     # 0 disables intermediate snapshots
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    model: ModelConfig = field(default_factory=ModelConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    newton: NewtonSection = field(default_factory=NewtonSection)
    events: EventsSection = field(default_factory=EventsSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        if self.discretization.J < 4:
            raise ConfigError("J >= 4")
        if self.discretization.dt <= 0.0:
            raise ConfigError("dt > 0")
        if self.physics.eps < 0.0:
            raise ConfigError("eps >= 0")
        if self.physics.eta <= 0.0:
            raise ConfigError("eta > 0")
        if self.newton.tol <= 0.0:
            raise ConfigError("tol > 0")
        if self.initial.form is None and self.initial.nodes is None:
            raise ConfigError("initial curve missing: give 'form' or 'nodes'")
        if self.initial.form is not None and self.initial.form not in CURVE_FORMS:
            raise ConfigError(f"unknown initial curve form {self.initial.form!r}")
        if self.initial.nodes is not None and self.initial.topology is None:
            raise ConfigError("explicit nodes need a topology")


# Closed-form initial generating curves. Each entry maps rho in [0, 1] to
# (r, z); curves are sampled at rho_j = 1 - j/J so nodes run inner to outer.
CURVE_FORMS: dict = {
    "torus10": (lambda p: (10.0 + math.cos(math.pi * p), math.sin(math.pi * p)),
                Topology.TWO_CONTACT_LINES),
    "torus4": (lambda p: (4.0 + math.cos(math.pi * p), math.sin(math.pi * p)),
               Topology.TWO_CONTACT_LINES),
    "hemisphere": (lambda p: (math.cos(math.pi * p / 2.0), math.sin(math.pi * p / 2.0)),
                   Topology.ISLAND),
    "torus_flat": (lambda p: (20.0 + 8.0 * math.cos(math.pi * p),
                              0.14 * math.sin(math.pi * p)),
                   Topology.TWO_CONTACT_LINES),
    "island_flat": (lambda p: (6.0 * math.cos(math.pi * p / 2.0),
                               0.2 * math.sin(math.pi * p / 2.0)),
                    Topology.ISLAND),
}


def build_initial_curve(cfg: RunConfig) -> GeneratingCurve:
    cfg.validate()
    if cfg.initial.nodes is not None:
        topo = Topology(cfg.initial.topology)
        curve = GeneratingCurve(np.asarray(cfg.initial.nodes, dtype=float), topo)
    else:
        fn, topo = CURVE_FORMS[cfg.initial.form]
        J = cfg.discretization.J
        rho = 1.0 - np.arange(J + 1) / J
        nodes = np.array([fn(p) for p in rho])
        nodes[np.abs(nodes) < 1e-15] = 0.0
        curve = GeneratingCurve(nodes, topo)
    curve.validate()
    return curve


def build_model(cfg: RunConfig) -> AnisotropyModel:
    m = cfg.model
    try:
        policy = StabilityPolicy(mode=StabilityMode(m.stability_mode),
                                 value=m.stability_value,
                                 case=StabilityCase(m.stability_case),
                                 grid_size=m.stability_grid)
        return AnisotropyModel(kind=m.kind, beta=m.beta, q=m.q, stability=policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_params(cfg: RunConfig) -> PhysicsParams:
    return PhysicsParams(sigma=cfg.physics.sigma, eta=cfg.physics.eta,
                         eps=cfg.physics.eps)


def build_newton(cfg: RunConfig) -> NewtonConfig:
    return NewtonConfig(tol=cfg.newton.tol, max_iters=cfg.newton.max_iters)


def build_events(cfg: RunConfig) -> EventConfig:
    e = cfg.events
    return EventConfig(z_pinch_rel=e.z_pinch_rel, r_close_rel=e.r_close_rel,
                       v_eq=e.v_eq, split=e.split)


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


_SECTION_TYPES = {
    "model": ModelConfig,
    "physics": PhysicsConfig,
    "discretization": DiscretizationConfig,
    "initial": InitialConfig,
    "newton": NewtonSection,
    "events": EventsSection,
    "output": OutputConfig,
}


def _build_section(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be an object")
    allowed = cls.__dataclass_fields__
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in section {where!r}")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid section {where!r}: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    """Build a validated RunConfig from a parsed JSON document (fail-closed)."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    base = None
    sections: dict = {}
    name = None
    for key, value in data.items():
        if key == "preset":
            base = preset(value)
        elif key == "name":
            name = value
        elif key in _SECTION_TYPES:
            sections[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    if base is None:
        base = RunConfig()
    cfg = base
    if name is not None:
        cfg = replace(cfg, name=name)
    for key, value in sections.items():
        current = getattr(cfg, key)
        merged = dict_merge(asdict(current), value, key)
        cfg = replace(cfg, **{key: _build_section(_SECTION_TYPES[key], merged, key)})
    cfg.validate()
    return cfg


def dict_merge(base: dict, override: dict, where: str) -> dict:
    if not isinstance(override, dict):
        raise ConfigError(f"section {where!r} must be an object")
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key {key!r} in section {where!r}")
        out[key] = value
    return out


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration; unknown keys are rejected."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(data)


def _mk(name: str, form: str, beta: float, eps: float, sigma: float, J: int,
        dt: float, t_end: float, v_eq: float = 1e-6) -> RunConfig:
    return RunConfig(
        name=name,
        model=ModelConfig(kind="fourfold", beta=beta, q=1,
                          stability_mode="auto_minimal", stability_case="II"),
        physics=PhysicsConfig(sigma=sigma, eta=100.0, eps=eps),
        discretization=DiscretizationConfig(J=J, dt=dt, t_end=t_end),
        initial=InitialConfig(form=form),
        events=EventsSection(v_eq=v_eq),
    )


def _presets() -> dict:
    cat: dict = {}
    cat["ex1"] = _mk("ex1", "torus10", 0.07, 0.01, -0.6, 32, 1.0 / 16.0, 2.0)
    cat["ex1_convergence"] = cat["ex1"]
    for beta, tag in ((0.07, "007"), (0.1, "01")):
        cat[f"fig3_beta{tag}"] = _mk(f"fig3_beta{tag}", "torus10", beta, 0.01, -0.6,
                                     64, 1.0 / 256.0, 2.0)
        cat[f"fig4_beta{tag}"] = _mk(f"fig4_beta{tag}", "hemisphere", beta, 0.005,
                                     -0.6, 64, 1.0 / 256.0, 2.0)
    for beta, tag in ((0.07, "007"), (0.08, "008"), (0.09, "009"), (0.1, "010")):
        cat[f"fig5_beta{tag}"] = _mk(f"fig5_beta{tag}", "torus10", beta, 0.01, -0.6,
                                     128, 1.0 / 256.0, 2.0)
    for beta, tag in ((0.35, "035"), (0.4, "040"), (0.45, "045"), (0.5, "050")):
        cat[f"fig6_beta{tag}"] = _mk(f"fig6_beta{tag}", "torus10", beta, 0.01, -0.6,
                                     65, 5.0 / 128.0, 2.0)
    for beta, tag in ((0.12, "012"), (0.15, "015"), (0.18, "018"), (0.2, "020")):
        cat[f"fig7_beta{tag}"] = _mk(f"fig7_beta{tag}", "hemisphere", beta, 0.005,
                                     -0.6, 65, 5.0 / 128.0, 2.0)
    for sigma, tag in ((0.6, "pos"), (0.0, "zero"), (-0.6, "neg")):
        cat[f"fig8_sigma_{tag}"] = _mk(f"fig8_sigma_{tag}", "torus4", 0.07, 0.01,
                                       sigma, 100, 1.0 / 100.0, 10.0)
    cat["fig9"] = _mk("fig9", "torus4", 0.07, 0.001, -0.6, 100, 1.0 / 50.0, 10.0)
    cat["fig10"] = _mk("fig10", "torus_flat", 0.07, 0.001, -0.6, 100, 1.0 / 50.0, 3.0)
    cat["fig11"] = _mk("fig11", "island_flat", 0.1, 0.001, -0.6, 50, 1.0 / 200.0, 1.0)
    return cat


_PRESETS = _presets()
PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> RunConfig:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None
