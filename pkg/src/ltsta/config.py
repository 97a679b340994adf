"""Run configuration shared by the library entry point and the CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

from .errors import ConfigError
from .selection import POLICIES

_TRANSFORMS = ("identity", "log", "box_cox", "auto")


@dataclass(frozen=True)
class RunConfig:
    transform: str = "identity"
    lam: float = 1.0
    period: Optional[int] = None
    h: int = 2
    m_max: Union[int, str] = "auto"
    policy: str = "absolute"
    m: Optional[int] = None
    p_max: int = 2
    q_max: int = 2
    n_max: Optional[int] = None
    horizon: int = 1
    level: float = 0.95
    seed: int = 0
    cost: str = "ssr"
    passes: int = 1
    dp_method: str = "exact"
    workers: int = 1

    def __post_init__(self):
        if self.transform not in _TRANSFORMS:
            raise ConfigError(f"transform must be one of {_TRANSFORMS}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.cost not in ("ssr", "sar"):
            raise ConfigError("cost must be 'ssr' or 'sar'")
        if self.dp_method not in ("exact", "heuristic"):
            raise ConfigError("dp_method must be 'exact' or 'heuristic'")
        if self.h < 1:
            raise ConfigError("h must be >= 1")
        if self.m_max != "auto" and (not isinstance(self.m_max, int) or self.m_max < 1):
            raise ConfigError("m_max must be a positive integer or 'auto'")
        if self.m is not None and self.m < 0:
            raise ConfigError("m must be >= 0")
        if self.period is not None and self.period < 1:
            raise ConfigError("period must be >= 1")
        if self.p_max < 0 or self.q_max < 0:
            raise ConfigError("p_max and q_max must be >= 0")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return from_mapping({**self.to_dict(), **changes})


_INT_KEYS = {"period", "h", "m", "p_max", "q_max", "n_max", "horizon", "seed", "passes", "workers"}
_FLOAT_KEYS = {"lam", "level"}
_ALIASES = {"lambda": "lam"}


def _coerce(key: str, value):
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    if key in _INT_KEYS:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} expects an integer, got {value!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} expects a number, got {value!r}") from None
    if key == "m_max":
        if str(value).strip().lower() == "auto":
            return "auto"
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"m_max expects an integer or 'auto', got {value!r}") from None
    return str(value).strip()


def from_mapping(mapping: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for raw_key, value in mapping.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key not in known:
            raise ConfigError(f"unknown configuration key {raw_key!r}")
        coerced = _coerce(key, value)
        if coerced is not None or key in ("m", "period", "n_max"):
            kwargs[key] = coerced
    return RunConfig(**kwargs)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return from_mapping(parse_config_text(fh.read()))
