"""Run configuration: a versioned JSON document with one section per module."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Optional

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    theta0: float = 0.5
    alpha0: float = 2.7
    omega0: float = 1.0
    epsilon: float = 1e-2
    allow_outside_regime: bool = False


@dataclass(frozen=True)
class InteractionSection:
    pmax: int = 6
    tol_zero: float = 1e-12
    nonzero_threshold: float = 1e-3


@dataclass(frozen=True)
class GaussianSection:
    center: float = 0.0
    width: float = 1.0
    height: float = 1.0


@dataclass(frozen=True)
class WKBSection:
    precision: str = "extended"
    v0: GaussianSection = field(default_factory=GaussianSection)
    approx_length: float = 8.0
    amplitude_points: int = 256
    transport_dt: float = 0.01
    t_end: float = 1.0
    n_snapshots: int = 5


@dataclass(frozen=True)
class SymflowSection:
    kind: str = "pp"
    T1: float = 3.0
    window_h: Optional[float] = None
    n_samples: int = 200
    seed: int = 0
    fit_from: float = 0.6


@dataclass(frozen=True)
class SolverSection:
    n_points: int = 2**14
    dt_factor: float = 0.1
    t_end: float = 0.5
    stride: int = 10
    dealias: bool = True
    nonlinear: bool = True


@dataclass(frozen=True)
class HarnessSection:
    K: float = 1.0
    T0_factor: float = 1.6
    bump_center: float = 0.0
    bump_radius: float = 0.4
    n_records: int = 60
    fit_window: tuple = (0.3, 0.9)
    epsilons: tuple = (1e-2, 3e-3, 1e-3)
    controls: bool = True
    with_floor: bool = False


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    model: ModelSection = field(default_factory=ModelSection)
    interaction: InteractionSection = field(default_factory=InteractionSection)
    wkb: WKBSection = field(default_factory=WKBSection)
    symflow: SymflowSection = field(default_factory=SymflowSection)
    solver: SolverSection = field(default_factory=SolverSection)
    harness: HarnessSection = field(default_factory=HarnessSection)


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys at {path or 'top level'}: {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        default = getattr(defaults, name)
        where = f"{path}.{name}" if path else name
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, where)
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{where} must be a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = _coerce(default, value, where)
    return cls(**kwargs)


def _coerce(default, value, where: str):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where} must be a string")
    return value


def from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.schema_version}")
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    return plain(asdict(cfg))


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, indent=2)


def loads(text: str) -> RunConfig:
    return from_dict(json.loads(text))


def load(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as fh:
        return loads(fh.read())


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def apply_override(cfg: RunConfig, assignment: str) -> RunConfig:
    """Apply 'section.key=value' (value parsed as JSON, falling back to a bare string)."""
    if "=" not in assignment:
        raise ConfigError(f"override must look like KEY=VALUE, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    data = to_dict(cfg)
    node = data
    parts = key.strip().split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown override path {key!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown override path {key!r}")
    node[parts[-1]] = value
    return from_dict(data)


def model_params(cfg: RunConfig, epsilon: Optional[float] = None):
    from .model import ModelParams

    m = cfg.model
    return ModelParams(m.theta0, m.alpha0, m.omega0, m.epsilon if epsilon is None else epsilon, m.allow_outside_regime)


def experiment_config(cfg: RunConfig, epsilon: Optional[float] = None):
    from .harness import BumpSpec, ExperimentConfig, GaussianSpec

    h, w, s = cfg.harness, cfg.wkb, cfg.solver
    return ExperimentConfig(
        params=model_params(cfg, epsilon),
        v0=GaussianSpec(w.v0.center, w.v0.width, w.v0.height),
        bump=BumpSpec(h.bump_center, h.bump_radius),
        K=h.K,
        precision=w.precision,
        T0_factor=h.T0_factor,
        n_points=s.n_points,
        approx_length=w.approx_length,
        amplitude_points=w.amplitude_points,
        dt_factor=s.dt_factor,
        transport_dt=w.transport_dt,
        n_records=h.n_records,
        fit_window=tuple(h.fit_window),
    )


def validate(cfg: RunConfig) -> None:
    """Run every module precondition that can be checked without computing anything heavy."""
    from .grid import Grid1D
    from .model import ModelParamsError
    from .symflow import FLOW_KINDS
    from .wkb import PRECISION_DEPTH

    try:
        model_params(cfg)
        for eps in cfg.harness.epsilons:
            model_params(cfg, eps)
        Grid1D(1.0, cfg.solver.n_points)
        Grid1D(1.0, cfg.wkb.amplitude_points)
        experiment_config(cfg)
    except (ModelParamsError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.wkb.precision not in PRECISION_DEPTH:
        raise ConfigError(f"wkb.precision must be one of {sorted(PRECISION_DEPTH)}")
    if cfg.symflow.kind not in FLOW_KINDS:
        raise ConfigError(f"symflow.kind must be one of {FLOW_KINDS}")
    if cfg.symflow.window_h is not None and cfg.symflow.window_h <= 0:
        raise ConfigError("symflow.window_h must be positive")
    for name in ("dt_factor", "t_end"):
        if getattr(cfg.solver, name) <= 0:
            raise ConfigError(f"solver.{name} must be positive")
    if cfg.solver.stride < 1 or cfg.wkb.transport_dt <= 0 or cfg.wkb.t_end <= 0:
        raise ConfigError("stride, transport_dt and wkb.t_end must be positive")
