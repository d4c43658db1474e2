import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from . import CONFIG_ENV
from .Adversary import AdversaryKind
from .Errors import ConfigError
from .Group import GroupId, OpCounts
from .Protocol import SessionMode
from .Registry import MAX_TIMESTAMP

OP_CLASSES = tuple(f.name for f in fields(OpCounts))
DEFAULT_ENERGY_WEIGHTS = {"group_exp": 10.0, "group_mul": 1.0, "hash": 1.0}

def parse_latency(value: str | float | int | list | tuple) -> tuple[float, float]:
    """Accepts `low:high`, a single number, or a two-item sequence (milliseconds)."""
    try:
        if isinstance(value, str):
            parts = value.split(":")
            if len(parts) > 2:
                raise ValueError(value)
            low, high = float(parts[0]), float(parts[-1])
        elif isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError(value)
            low, high = float(value[0]), float(value[1])
        else:
            low = high = float(value)
    except (TypeError, ValueError):
        raise ConfigError("latency_range_ms", "expected 'low:high' or a number, got {!r}".format(value)) from None
    return (low, high)

def _default_mix() -> dict[AdversaryKind, float]:
    return {kind: 1.0 for kind in AdversaryKind}

@dataclass
class CampaignConfig:
    sessions: int = 5000
    adv_ratio: float = 0.1
    adversary_mix: dict[AdversaryKind, float] = field(default_factory=_default_mix)
    latency_range_ms: tuple[float, float] = (10.0, 20.0)
    group_id: GroupId = GroupId.PRODUCTION
    rng_seed: int = 42
    energy_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ENERGY_WEIGHTS))
    mode: SessionMode = SessionMode.INTERACTIVE
    fresh_challenge: bool = True
    op_time_ms: dict[str, float] = field(default_factory=lambda: {name: 0.0 for name in OP_CLASSES})
    timeout_ms: float = 1000.0
    entity_seed: str = "tl-001"
    timestamp: int = 1700000000
    parallel: int = 1
    measure_wall_clock: bool = False

    def validate(self) -> 'CampaignConfig':
        if not isinstance(self.sessions, int) or self.sessions < 1:
            raise ConfigError("sessions", "must be an integer >= 1")
        if not 0.0 <= self.adv_ratio <= 1.0:
            raise ConfigError("adv_ratio", "must be within [0, 1]")
        if not all(math.isfinite(w) and w >= 0 for w in self.adversary_mix.values()):
            raise ConfigError("adversary_mix", "weights must be finite and nonnegative")
        if self.adv_ratio > 0 and sum(self.adversary_mix.values()) <= 0:
            raise ConfigError("adversary_mix", "weights must not all be zero")
        low, high = self.latency_range_ms
        if not (math.isfinite(low) and math.isfinite(high)) or low < 0 or low > high:
            raise ConfigError("latency_range_ms", "need finite 0 <= low <= high")
        if not isinstance(self.rng_seed, int) or self.rng_seed < 0:
            raise ConfigError("rng_seed", "must be an integer >= 0")
        for name, weights in (("energy_weights", self.energy_weights), ("op_time_ms", self.op_time_ms)):
            unknown = set(weights) - set(OP_CLASSES)
            if unknown:
                raise ConfigError(name, "unknown op class {}".format(", ".join(sorted(unknown))))
            if not all(math.isfinite(w) and w >= 0 for w in weights.values()):
                raise ConfigError(name, "weights must be finite and nonnegative")
        if not math.isfinite(self.timeout_ms) or self.timeout_ms <= 0:
            raise ConfigError("timeout_ms", "must be a finite positive number")
        for name in ("fresh_challenge", "measure_wall_clock"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(name, "expected true or false")
        if not isinstance(self.entity_seed, str) or not self.entity_seed:
            raise ConfigError("entity_seed", "must be a nonempty string")
        if not 0 <= self.timestamp < MAX_TIMESTAMP:
            raise ConfigError("timestamp", "must fit in 64 bits")
        if not isinstance(self.parallel, int) or self.parallel < 1:
            raise ConfigError("parallel", "must be an integer >= 1")
        return self

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["adversary_mix"] = {kind.value: w for kind, w in self.adversary_mix.items()}
        data["latency_range_ms"] = list(self.latency_range_ms)
        data["group_id"] = self.group_id.value
        data["mode"] = self.mode.value
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'CampaignConfig':
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        values = dict(data)
        try:
            if "adversary_mix" in values:
                values["adversary_mix"] = {
                    AdversaryKind(k): float(w) for k, w in values["adversary_mix"].items()
                }
        except (ValueError, AttributeError, TypeError):
            raise ConfigError("adversary_mix", "expected {{kind: weight}} with kinds {}".format(
                ", ".join(k.value for k in AdversaryKind)
            )) from None
        if "latency_range_ms" in values:
            values["latency_range_ms"] = parse_latency(values["latency_range_ms"])
        for name, kind in (("group_id", GroupId), ("mode", SessionMode)):
            if name in values:
                try:
                    values[name] = kind(values[name])
                except ValueError:
                    raise ConfigError(name, "expected one of {}".format(
                        ", ".join(k.value for k in kind)
                    )) from None
        for name in ("energy_weights", "op_time_ms"):
            if name in values:
                try:
                    merged = {op: 0.0 for op in OP_CLASSES} if name == "op_time_ms" else dict(DEFAULT_ENERGY_WEIGHTS)
                    merged.update({k: float(v) for k, v in values[name].items()})
                    values[name] = merged
                except (AttributeError, TypeError, ValueError):
                    raise ConfigError(name, "expected {op_class: number}") from None
        for name, cast in (("sessions", int), ("rng_seed", int), ("timestamp", int), ("parallel", int),
                           ("adv_ratio", float), ("timeout_ms", float)):
            if name in values:
                try:
                    if isinstance(values[name], bool):
                        raise TypeError
                    values[name] = cast(values[name])
                except (TypeError, ValueError):
                    raise ConfigError(name, "expected a number") from None
        return cls(**values).validate()

    @classmethod
    def from_json(cls, path: Path) -> 'CampaignConfig':
        try:
            with open(path, "r") as file:
                data = json.load(file)
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), "invalid JSON: {}".format(e)) from e
        if not isinstance(data, dict):
            raise ConfigError(str(path), "expected a JSON object")
        return cls.from_dict(data)

def default_config_path() -> Path | None:
    value = os.environ.get(CONFIG_ENV)
    return Path(value) if value else None
