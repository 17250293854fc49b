"""Experiment configuration and its flat ``key = value`` text format.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
Keys are :class:`ExperimentConfig` field names. Booleans accept
``true/false/yes/no/1/0``; ``hidden`` is a comma list of layer widths;
``pred_budget`` and ``per_edge_budget`` accept ``all``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from typing import Optional

SAMPLERS = ("uer", "per", "ter", "ter_mixed", "ebu", "discor")
LEARNERS = ("tabular", "mlp")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    env: str = "nchain:N=20"
    seed: int = 0
    mode: str = "online"  # online | offline
    sampler: str = "ter"
    total_steps: int = 10_000
    warmup_steps: int = 1_000
    batch_size: int = 32
    replay_ratio: float = 0.25
    gamma: float = 0.99
    eta: float = 0.0
    capacity: int = 1_000_000
    projection_dim: int = 3
    root_budget: int = 8
    pred_budget: Optional[int] = 3
    per_edge_budget: Optional[int] = 1
    weighted_predecessors: bool = False
    roots_mode: str = "terminal"
    kappa: float = 0.01
    discounted_vertex_returns: bool = False  # U(v) from discounted instead of raw returns
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_steps: int = 10_000
    target_update_interval: int = 1
    learner: str = "tabular"
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 1.0
    optimizer: str = "adam"
    double: bool = True
    per_alpha: float = 0.6
    per_beta: float = 0.4
    per_eps: float = 1e-6
    ebu_beta: float = 0.5
    ebu_timeout_episodes: bool = True
    discor_temperature: float = 10.0
    discor_normalize: bool = True
    discor_lr: float = 1.0
    eval_interval: int = 1_000
    eval_episodes: int = 10
    eval_random_prob: float = 0.05
    final_eval_episodes: int = 0  # 0: same as eval_episodes
    value_error: str = "auto"  # auto | on | off
    # offline mode
    dataset_episodes: int = 200
    n_updates: int = 100

    def validate(self) -> "ExperimentConfig":
        def need(ok: bool, msg: str) -> None:
            if not ok:
                raise ConfigError(msg)

        need(self.mode in ("online", "offline"), f"mode must be online or offline, got {self.mode!r}")
        need(self.sampler in SAMPLERS, f"sampler must be one of {SAMPLERS}")
        need(self.learner in LEARNERS, f"learner must be one of {LEARNERS}")
        need(0.0 <= self.eta <= 1.0, "eta must lie in [0, 1]")
        need(0.0 < self.gamma <= 1.0, "gamma must lie in (0, 1]")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.root_budget >= 1, "root_budget must be >= 1")
        need(self.pred_budget is None or self.pred_budget >= 1, "pred_budget must be >= 1")
        need(self.per_edge_budget is None or self.per_edge_budget >= 1, "per_edge_budget must be >= 1")
        need(self.projection_dim >= 1, "projection_dim must be >= 1")
        need(self.capacity >= 1, "capacity must be >= 1")
        need(self.replay_ratio >= 0.0, "replay_ratio must be >= 0")
        need(self.total_steps >= 1, "total_steps must be >= 1")
        need(0 <= self.warmup_steps <= self.total_steps, "warmup_steps must lie in [0, total_steps]")
        need(self.target_update_interval >= 1, "target_update_interval must be >= 1")
        need(self.eval_interval >= 1, "eval_interval must be >= 1")
        need(self.eval_episodes >= 1, "eval_episodes must be >= 1")
        need(0.0 <= self.eval_random_prob <= 1.0, "eval_random_prob must lie in [0, 1]")
        need(self.roots_mode in ("terminal", "pseudo_terminal"), "roots_mode must be terminal or pseudo_terminal")
        need(self.kappa > 0.0, "kappa must be > 0")
        need(self.value_error in ("auto", "on", "off"), "value_error must be auto, on or off")
        need(self.optimizer in ("adam", "sgd"), "optimizer must be adam or sgd")
        need(self.dataset_episodes >= 1 and self.n_updates >= 0, "offline sizes must be positive")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {format_value(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: coerce(k, v) for k, v in d.items()}
        return cls(**kw).validate()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(parse_assignments(text.splitlines()))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_text(f.read())


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def format_value(v) -> str:
    if v is None:
        return "all"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_assignments(lines) -> dict:
    out: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        out[key.strip()] = val.strip()
    return out


def coerce(key: str, value):
    """Convert ``value`` (often a string) to the type of config field ``key``."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    default = getattr(_DEFAULTS, key)
    if not isinstance(value, str):
        if key == "hidden":
            return tuple(int(x) for x in value)
        return value
    try:
        if key in ("pred_budget", "per_edge_budget"):
            return None if value.lower() in ("all", "none", "inf") else int(value)
        if key == "hidden":
            return tuple(int(x) for x in value.split(",") if x.strip())
        if isinstance(default, bool):
            low = value.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(float(value)) if "e" in value.lower() else int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value
