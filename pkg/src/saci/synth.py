"""Seeded datasets with planted lagged causes, used as ground truth for the engine."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecInvalid
from .series import Granularity, SeriesFrame, TimeGrid, write_frames_csv
from .transforms import max_abs_normalize

GENERATOR = "numpy.random.Generator(PCG64)"
CAUSE_CHANNEL = "cause"
NOISE_CHANNEL = "noise"
EFFECT_CHANNEL = "synth"


@dataclass(frozen=True)
class PlantedSpec:
    n: int = 500
    true_lag: int = 3
    cause_weights: tuple[float, ...] = (0.8,)
    noise_sigma: float = 0.6
    n_noise_frames: int = 20
    seed: int = 42
    granularity: str = "day"
    start: int = 0
    base_price: float = 1000.0

    def validate(self) -> None:
        if self.true_lag < 1:
            raise SpecInvalid("true_lag must be at least 1")
        if self.n - self.true_lag < 10:
            raise SpecInvalid("n - true_lag must be at least 10")
        if not self.cause_weights:
            raise SpecInvalid("at least one cause weight is required")
        if self.noise_sigma < 0 or self.n_noise_frames < 0:
            raise SpecInvalid("noise_sigma and n_noise_frames must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise SpecInvalid("seed must be a 64-bit unsigned integer")
        if self.base_price <= 0:
            raise SpecInvalid("base_price must be positive")


@dataclass
class PlantedData:
    spec: PlantedSpec
    causes: list[SeriesFrame]
    noise: list[SeriesFrame]
    effect: SeriesFrame
    prices: SeriesFrame
    truth: dict = field(default_factory=dict)

    @property
    def frames(self) -> list[SeriesFrame]:
        return self.causes + self.noise


def generate_planted(spec: PlantedSpec) -> PlantedData:
    """Draw causes ``x_i``, noise frames and ``effect(t) = sum w_i x_i(t - lag) + sigma * eta(t)``.

    Causes are drawn ``true_lag`` buckets early so the effect is defined on the whole
    grid. Draw order is fixed: causes, effect noise, noise frames. The price series is
    ``base_price + cumsum(effect)`` so its first difference reproduces the effect.
    """
    spec.validate()
    g = Granularity.parse(spec.granularity)
    grid = TimeGrid(spec.start, g, spec.n)
    rng = np.random.default_rng(spec.seed)
    k = len(spec.cause_weights)
    raw = rng.standard_normal((k, spec.n + spec.true_lag))
    eta = rng.standard_normal(spec.n)
    noise = rng.standard_normal((spec.n_noise_frames, spec.n))

    w = np.asarray(spec.cause_weights, dtype=np.float64)
    effect_raw = w @ raw[:, :spec.n] + spec.noise_sigma * eta
    causes = [max_abs_normalize(SeriesFrame(grid, CAUSE_CHANNEL, f"cause_{i:03d}", "N", raw[i, spec.true_lag:]))
              for i in range(k)]
    noise_frames = [max_abs_normalize(SeriesFrame(grid, NOISE_CHANNEL, f"noise_{j:03d}", "N", noise[j]))
                    for j in range(spec.n_noise_frames)]
    effect = max_abs_normalize(SeriesFrame(grid, EFFECT_CHANNEL, "price_difference", "", effect_raw))
    prices = SeriesFrame(grid, EFFECT_CHANNEL, "close", "", spec.base_price + np.cumsum(effect.values))
    truth = {
        "generator": GENERATOR,
        "spec": {**asdict(spec), "cause_weights": list(spec.cause_weights)},
        "true_lag": spec.true_lag,
        "true_causes": [[f.channel, f.metric, f.variant] for f in causes],
        "effect": [effect.channel, effect.metric, effect.variant],
    }
    return PlantedData(spec, causes, noise_frames, effect, prices, truth)


def write_planted(data: PlantedData, out_dir: "str | Path") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "frames": out / "synth_frames.csv",
        "effect": out / "effect.csv",
        "prices": out / "prices.csv",
        "truth": out / "ground_truth.json",
    }
    write_frames_csv(paths["frames"], data.frames)
    write_frames_csv(paths["effect"], [data.effect])
    write_frames_csv(paths["prices"], [data.prices])
    paths["truth"].write_text(json.dumps(data.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
