"""Run configuration: a strict YAML tree with canonical hashing.

Unknown keys anywhere in the tree are rejected with their full path, so a
typo fails loudly instead of silently running defaults.  The canonical
hash covers the entire normalized tree (defaults filled in, weights as
exact rational strings) and is embedded in checkpoints, which refuse to
load against a different configuration unless forced.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import yaml

from condgen.env import CondGenEnv, ControlSpec
from condgen.grids import DomainSpec, make_domain


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


class _Section:
    """Tracks key consumption in one mapping so leftovers can be reported."""

    def __init__(self, data: dict, path: str) -> None:
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def get(self, key: str, default=None):
        self.seen.add(key)
        return self.data.get(key, default)

    def sub(self, key: str) -> "_Section":
        self.seen.add(key)
        raw = self.data.get(key, {})
        if raw is None:
            raw = {}
        prefix = f"{self.path}.{key}" if self.path else key
        return _Section(raw, prefix)

    def finish(self) -> None:
        extra = set(self.data) - self.seen
        if extra:
            where = self.path or "config"
            raise ConfigError(f"{where}: unknown key {sorted(extra)[0]!r}")


def _require_type(value, types, path: str):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        names = (
            "/".join(t.__name__ for t in types)
            if isinstance(types, tuple)
            else types.__name__
        )
        raise ConfigError(f"{path}: expected {names}, got {value!r}")
    return value


def _int(value, path: str, minimum: int | None = None) -> int:
    _require_type(value, int, path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return int(value)


def _number(value, path: str) -> float:
    _require_type(value, (int, float), path)
    return float(value)


@dataclass(frozen=True)
class DomainConfig:
    name: str
    size: tuple[int, int] | None = None
    solver_budget: int = 200_000


@dataclass(frozen=True)
class ControlConfig:
    controlled: tuple[str, ...]
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)
    fixed_goals: dict[str, int] = field(default_factory=dict)
    weights: dict[str, Fraction] = field(default_factory=dict)


@dataclass(frozen=True)
class EnvConfig:
    change_ratio: float = 1.0
    raster_order: bool = False


@dataclass(frozen=True)
class TeacherConfig:
    mode: str = "uniform"
    fit_window: int = 250
    refit_every: int = 50
    warmup: int = 100
    k_range: tuple[int, int] = (2, 5)
    explore_ratio: float = 0.2


@dataclass(frozen=True)
class TrainingConfig:
    total_frames: int = 200_000
    workers: int = 8
    segment_length: int = 128
    epochs: int = 4
    minibatches: int = 4
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    learning_rate: float = 2.5e-4
    max_grad_norm: float = 0.5
    checkpoint_every: int = 50
    seed: int = 0


@dataclass(frozen=True)
class EvalConfig:
    resolution: int = 8
    episodes_per_cell: int = 20
    step_cap: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    interval_ms: int = 50


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    control: ControlConfig
    env: EnvConfig = EnvConfig()
    teacher: TeacherConfig = TeacherConfig()
    training: TrainingConfig = TrainingConfig()
    eval: EvalConfig = EvalConfig()
    service: ServiceConfig = ServiceConfig()

    def build_domain(self) -> DomainSpec:
        try:
            return make_domain(
                self.domain.name, self.domain.size, self.domain.solver_budget
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def build_control(self, domain: DomainSpec | None = None) -> ControlSpec:
        domain = domain or self.build_domain()
        try:
            return ControlSpec(
                domain=domain,
                controlled=self.control.controlled,
                bounds=dict(self.control.bounds),
                fixed_goals=dict(self.control.fixed_goals),
                weights=dict(self.control.weights),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def build_env(self) -> CondGenEnv:
        domain = self.build_domain()
        return CondGenEnv(
            domain,
            self.build_control(domain),
            change_ratio=self.env.change_ratio,
            raster_order=self.env.raster_order,
        )

    def canonical_dict(self) -> dict:
        domain = self.build_domain()
        return {
            "domain": {
                "name": self.domain.name,
                "size": list(domain.default_size),
                "solver_budget": self.domain.solver_budget,
            },
            "control": {
                "controlled": list(self.control.controlled),
                "bounds": {k: list(v) for k, v in sorted(self.control.bounds.items())},
                "fixed_goals": dict(sorted(self.control.fixed_goals.items())),
                "weights": {k: str(v) for k, v in sorted(self.control.weights.items())},
            },
            "env": {
                "change_ratio": self.env.change_ratio,
                "raster_order": self.env.raster_order,
            },
            "teacher": {
                "mode": self.teacher.mode,
                "fit_window": self.teacher.fit_window,
                "refit_every": self.teacher.refit_every,
                "warmup": self.teacher.warmup,
                "k_range": list(self.teacher.k_range),
                "explore_ratio": self.teacher.explore_ratio,
            },
            "training": {
                "total_frames": self.training.total_frames,
                "workers": self.training.workers,
                "segment_length": self.training.segment_length,
                "epochs": self.training.epochs,
                "minibatches": self.training.minibatches,
                "gamma": self.training.gamma,
                "lam": self.training.lam,
                "clip_eps": self.training.clip_eps,
                "vf_coef": self.training.vf_coef,
                "ent_coef": self.training.ent_coef,
                "learning_rate": self.training.learning_rate,
                "max_grad_norm": self.training.max_grad_norm,
                "checkpoint_every": self.training.checkpoint_every,
                "seed": self.training.seed,
            },
            "eval": {
                "resolution": self.eval.resolution,
                "episodes_per_cell": self.eval.episodes_per_cell,
                "step_cap": self.eval.step_cap,
                "seed": self.eval.seed,
            },
            "service": {
                "host": self.service.host,
                "port": self.service.port,
                "interval_ms": self.service.interval_ms,
            },
        }


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.canonical_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_config(raw: dict, source: str = "config") -> RunConfig:
    root = _Section(raw, "")

    dom = root.sub("domain")
    name = dom.get("name")
    if name not in ("binary", "zelda", "sokoban"):
        raise ConfigError(f"domain.name: expected binary, zelda, or sokoban, got {name!r}")
    size = dom.get("size")
    if size is not None:
        if not (isinstance(size, list) and len(size) == 2):
            raise ConfigError("domain.size: expected [height, width]")
        size = (_int(size[0], "domain.size[0]", 3), _int(size[1], "domain.size[1]", 3))
    budget = _int(dom.get("solver_budget", 200_000), "domain.solver_budget", 1)
    dom.finish()
    domain_cfg = DomainConfig(name, size, budget)

    ctl = root.sub("control")
    controlled = ctl.get("controlled")
    if not isinstance(controlled, list) or not controlled:
        raise ConfigError("control.controlled: expected a non-empty list of metric names")
    bounds_raw = ctl.get("bounds", {}) or {}
    bounds = {}
    for metric, pair in bounds_raw.items():
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"control.bounds.{metric}: expected [low, high]")
        bounds[metric] = (
            _int(pair[0], f"control.bounds.{metric}[0]"),
            _int(pair[1], f"control.bounds.{metric}[1]"),
        )
    fixed_raw = ctl.get("fixed_goals", {}) or {}
    fixed = {m: _int(v, f"control.fixed_goals.{m}") for m, v in fixed_raw.items()}
    weights_raw = ctl.get("weights", {}) or {}
    weights = {}
    for metric, value in weights_raw.items():
        try:
            weights[metric] = Fraction(str(value))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"control.weights.{metric}: not a rational number: {value!r}") from None
    ctl.finish()
    control_cfg = ControlConfig(tuple(controlled), bounds, fixed, weights)

    env = root.sub("env")
    change_ratio = _number(env.get("change_ratio", 1.0), "env.change_ratio")
    if not 0 < change_ratio <= 1:
        raise ConfigError(f"env.change_ratio: must be in (0, 1], got {change_ratio}")
    raster = env.get("raster_order", False)
    _require_type(raster, bool, "env.raster_order")
    env.finish()
    env_cfg = EnvConfig(change_ratio, raster)

    tch = root.sub("teacher")
    mode = tch.get("mode", "uniform")
    if mode not in ("uniform", "alp_gmm"):
        raise ConfigError(f"teacher.mode: expected uniform or alp_gmm, got {mode!r}")
    k_range = tch.get("k_range", [2, 5])
    if not (isinstance(k_range, list) and len(k_range) == 2):
        raise ConfigError("teacher.k_range: expected [low, high]")
    explore = _number(tch.get("explore_ratio", 0.2), "teacher.explore_ratio")
    if not 0 <= explore <= 1:
        raise ConfigError(f"teacher.explore_ratio: must be in [0, 1], got {explore}")
    teacher_cfg = TeacherConfig(
        mode=mode,
        fit_window=_int(tch.get("fit_window", 250), "teacher.fit_window", 2),
        refit_every=_int(tch.get("refit_every", 50), "teacher.refit_every", 1),
        warmup=_int(tch.get("warmup", 100), "teacher.warmup", 0),
        k_range=(_int(k_range[0], "teacher.k_range[0]", 1), _int(k_range[1], "teacher.k_range[1]", 1)),
        explore_ratio=explore,
    )
    tch.finish()

    trn = root.sub("training")
    training_cfg = TrainingConfig(
        total_frames=_int(trn.get("total_frames", 200_000), "training.total_frames", 1),
        workers=_int(trn.get("workers", 8), "training.workers", 1),
        segment_length=_int(trn.get("segment_length", 128), "training.segment_length", 1),
        epochs=_int(trn.get("epochs", 4), "training.epochs", 1),
        minibatches=_int(trn.get("minibatches", 4), "training.minibatches", 1),
        gamma=_number(trn.get("gamma", 0.99), "training.gamma"),
        lam=_number(trn.get("lam", 0.95), "training.lam"),
        clip_eps=_number(trn.get("clip_eps", 0.2), "training.clip_eps"),
        vf_coef=_number(trn.get("vf_coef", 0.5), "training.vf_coef"),
        ent_coef=_number(trn.get("ent_coef", 0.01), "training.ent_coef"),
        learning_rate=_number(trn.get("learning_rate", 2.5e-4), "training.learning_rate"),
        max_grad_norm=_number(trn.get("max_grad_norm", 0.5), "training.max_grad_norm"),
        checkpoint_every=_int(trn.get("checkpoint_every", 50), "training.checkpoint_every", 1),
        seed=_int(trn.get("seed", 0), "training.seed"),
    )
    trn.finish()

    ev = root.sub("eval")
    eval_cfg = EvalConfig(
        resolution=_int(ev.get("resolution", 8), "eval.resolution", 1),
        episodes_per_cell=_int(ev.get("episodes_per_cell", 20), "eval.episodes_per_cell", 1),
        step_cap=_int(ev.get("step_cap", 1000), "eval.step_cap", 1),
        seed=_int(ev.get("seed", 0), "eval.seed"),
    )
    ev.finish()

    svc = root.sub("service")
    service_cfg = ServiceConfig(
        host=str(svc.get("host", "127.0.0.1")),
        port=_int(svc.get("port", 8000), "service.port", 1),
        interval_ms=_int(svc.get("interval_ms", 50), "service.interval_ms", 1),
    )
    svc.finish()

    root.finish()
    config = RunConfig(
        domain=domain_cfg,
        control=control_cfg,
        env=env_cfg,
        teacher=teacher_cfg,
        training=training_cfg,
        eval=eval_cfg,
        service=service_cfg,
    )
    # Surface domain/control inconsistencies (bad metric names, bounds) now.
    config.build_control()
    return config


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config syntax: {exc}") from None
    if raw is None:
        raise ConfigError("empty config file")
    return parse_config(raw, str(path))
