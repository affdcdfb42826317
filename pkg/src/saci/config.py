"""Pipeline configuration: a line-oriented ``key = value`` file plus overrides.

Keys are documented in ``docs/config.md``. Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .series import Granularity


class ConfigError(Exception):
    pass


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _paths(v: str) -> list[str]:
    return [p.strip() for p in v.split(",") if p.strip()]


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _opt_int(v: str) -> int | None:
    return None if v.strip() in ("", "auto", "none") else int(v)


@dataclass
class PipelineConfig:
    granularity: str = "day"
    start: int | None = None
    end: int | None = None
    trades: str | None = None
    lob: str | None = None
    posts: str | None = None
    lexicons: str | None = None
    frames: list[str] = field(default_factory=list)
    effect: str | None = None
    effect_metric: str = "price_difference"
    prices: str | None = None
    channel_weights: str | None = None
    use_channel_weights: bool = True
    lag_min: int = -10
    lag_max: int = 10
    saci_lag: int | None = None
    train_fraction: float = 0.75
    min_abs_p: float = 0.0
    min_gain: float = 1e-9
    stop_on_first_failure: bool = False
    log_scaling: bool = True
    horizon: int = 1
    model: str | None = None
    output: str = "out"
    seed: int = 42
    synth_n: int = 500
    synth_true_lag: int = 3
    synth_weights: tuple[float, ...] = (0.8,)
    synth_noise_sigma: float = 0.6
    synth_noise_frames: int = 20

    _PARSERS = {
        "start": _opt_int, "end": _opt_int, "saci_lag": _opt_int,
        "lag_min": int, "lag_max": int, "horizon": int, "seed": int,
        "synth_n": int, "synth_true_lag": int, "synth_noise_frames": int,
        "train_fraction": float, "min_abs_p": float, "min_gain": float, "synth_noise_sigma": float,
        "use_channel_weights": _bool, "stop_on_first_failure": _bool, "log_scaling": _bool,
        "frames": _paths, "synth_weights": _floats,
    }

    def set(self, key: str, value: str) -> None:
        names = {f.name for f in fields(self)}
        key = key.strip().replace("-", "_")
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        parser = self._PARSERS.get(key, lambda v: v.strip() or None)
        try:
            setattr(self, key, parser(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None

    def update(self, values: Mapping[str, str]) -> "PipelineConfig":
        for k, v in values.items():
            self.set(k, v)
        return self

    def validate(self) -> None:
        try:
            Granularity.parse(self.granularity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.lag_min > self.lag_max:
            raise ConfigError("lag_min must not exceed lag_max")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        for name in ("trades", "lob", "posts", "lexicons", "effect", "prices", "channel_weights", "model"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name} path does not exist: {p}")
        for p in self.frames:
            if not Path(p).exists():
                raise ConfigError(f"frames path does not exist: {p}")

    @property
    def lags(self) -> range:
        return range(self.lag_min, self.lag_max + 1)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def load_config(path: "str | Path | None", overrides: Mapping[str, str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        cfg.update(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    if overrides:
        cfg.update(overrides)
    return cfg
