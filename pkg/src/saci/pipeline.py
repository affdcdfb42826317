"""Stage orchestration behind the command line: features, score, correlate, saci,
evaluate and synth. Each stage reads flat files and writes flat files into the
configured output directory, so stages can be rerun independently.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .causal import (
    AssemblyPolicy,
    CorrelationMatrix,
    SaciModel,
    assemble_saci,
    lag_sweep,
    saci_lag_profile,
    write_lag_profile_csv,
    write_terms_csv,
)
from .config import ConfigError, PipelineConfig
from .errors import DataError, InputFormatError, NoCandidates
from .evaluation import (
    evaluate,
    predict_fkp,
    predict_lkp,
    saci_direction_predictor,
    write_eval_csv,
)
from .lexicon import (
    aggregate_channel,
    channel_weights,
    demo_lexicon_dir,
    load_lexicon_dir,
    read_posts_jsonl,
    score_post,
)
from .market import (
    aggregate_trades,
    lob_feature_frames,
    price_difference,
    read_lob_jsonl,
    read_trades_csv,
    trade_metric_frames,
)
from .series import (
    Granularity,
    SeriesFrame,
    TimeGrid,
    build_grid,
    common_grid,
    read_frames_csv,
    write_frames_csv,
)
from .synth import PlantedSpec, generate_planted, write_planted
from .transforms import expand_variants

logger = logging.getLogger(__name__)


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_for(cfg: PipelineConfig, times_s: list[float]) -> TimeGrid | None:
    g = Granularity.parse(cfg.granularity)
    if cfg.start is not None and cfg.end is not None:
        return build_grid(cfg.start, cfg.end, g)
    if not times_s:
        return None
    start = cfg.start if cfg.start is not None else min(times_s)
    end = cfg.end if cfg.end is not None else max(times_s) + 1
    return build_grid(start, end, g)


def _fit_stop(cfg: PipelineConfig, count: int) -> int:
    return max(1, int(math.floor(cfg.train_fraction * count)))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- features ---------------------------------------------------------------


def run_features(cfg: PipelineConfig) -> dict[str, Path]:
    if cfg.trades is None and cfg.lob is None:
        raise ConfigError("features needs a trades and/or lob input")
    out = _out_dir(cfg)
    trades = read_trades_csv(cfg.trades) if cfg.trades else []
    snaps = read_lob_jsonl(cfg.lob) if cfg.lob else []
    paths = {"frames": out / "market_frames.csv", "prices": out / "prices.csv", "effect": out / "effect.csv"}
    grid = _grid_for(cfg, [tr.t / 1000 for tr in trades] + [s.t / 1000 for s in snaps])
    if grid is None:
        logger.warning("no trades or snapshots; writing empty frame files")
        for p in paths.values():
            write_frames_csv(p, [])
        return paths

    raw: list[SeriesFrame] = []
    close = None
    if cfg.trades:
        raw += trade_metric_frames(aggregate_trades(trades, grid), grid)
        close = next(f for f in raw if f.metric == "trade_close")
    if cfg.lob:
        raw += lob_feature_frames(snaps, grid)
    fit = _fit_stop(cfg, grid.count)
    frames = [v for f in raw for v in expand_variants(f, fit_stop=fit)]
    write_frames_csv(paths["frames"], frames)
    write_frames_csv(paths["prices"], [close] if close is not None else [])
    write_frames_csv(paths["effect"], [price_difference(close)] if close is not None else [])
    logger.info("features: %d raw metrics, %d frames on %d %s buckets",
                len(raw), len(frames), grid.count, grid.granularity.label)
    return paths


# -- score ------------------------------------------------------------------


def write_channel_weights(path: Path, weights: dict[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("channel", "weight"))
        for channel in sorted(weights, key=lambda c: (-weights[c], c)):
            w.writerow((channel, repr(float(weights[channel]))))


def read_channel_weights(path: "str | Path") -> dict[str, float]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["channel", "weight"]:
            raise InputFormatError(path, 1, "expected header channel,weight")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row[0]] = float(row[1])
            except (ValueError, IndexError):
                raise InputFormatError(path, lineno, f"bad row {row!r}") from None
    return out


def run_score(cfg: PipelineConfig) -> dict[str, Path]:
    if cfg.posts is None:
        raise ConfigError("score needs a posts input")
    out = _out_dir(cfg)
    lexicons = load_lexicon_dir(cfg.lexicons or demo_lexicon_dir())
    posts = read_posts_jsonl(cfg.posts)
    paths = {"frames": out / "media_frames.csv", "weights": out / "channel_weights.csv"}
    grid = _grid_for(cfg, [p.t for p in posts])
    if grid is None or not posts:
        write_frames_csv(paths["frames"], [])
        write_channel_weights(paths["weights"], {})
        return paths
    scores = [score_post(p, lexicons, log_scaling=cfg.log_scaling) for p in posts]
    frames = aggregate_channel(scores, grid, fit_stop=_fit_stop(cfg, grid.count))
    weights = channel_weights(frames)
    write_frames_csv(paths["frames"], frames)
    write_channel_weights(paths["weights"], weights)
    logger.info("score: %d posts, %d channels, %d frames", len(posts), len(weights), len(frames))
    return paths


# -- correlate / saci -------------------------------------------------------


class _Inputs:
    def __init__(self, causes, effect, groups, weights, grid, n_train):
        self.causes: list[SeriesFrame] = causes
        self.effect: SeriesFrame = effect
        self.groups: dict[str, list[tuple[str, str, str]]] = groups
        self.weights: dict[str, float] = weights
        self.grid: TimeGrid = grid
        self.n_train: int = n_train

    def train(self):
        causes = [f.slice(0, self.n_train) for f in self.causes]
        return causes, self.effect.slice(0, self.n_train)


def _load_inputs(cfg: PipelineConfig) -> _Inputs:
    if not cfg.frames:
        raise ConfigError("no frame files configured (key 'frames')")
    groups: dict[str, list[tuple[str, str, str]]] = {}
    frames: list[SeriesFrame] = []
    for path in cfg.frames:
        loaded = read_frames_csv(path, cfg.granularity)
        groups[Path(path).stem] = [f.key for f in loaded]
        frames += loaded

    effect = None
    if cfg.effect:
        found = [f for f in read_frames_csv(cfg.effect, cfg.granularity) if f.metric == cfg.effect_metric]
        if len(found) != 1:
            raise DataError(f"{cfg.effect}: expected exactly one {cfg.effect_metric!r} frame, found {len(found)}")
        effect = found[0]
    else:
        found = [f for f in frames if f.metric == cfg.effect_metric and f.variant == ""]
        if len(found) != 1:
            raise DataError(f"expected exactly one raw {cfg.effect_metric!r} frame among inputs, found {len(found)}")
        effect = found[0]

    causes = []
    seen = set()
    for f in frames:
        if f.variant == "":
            logger.info("skipping raw frame %s (only normalized variants enter the sweep)", f.name)
            continue
        if f.key in seen:
            raise DataError(f"duplicate frame {f.name} across inputs")
        seen.add(f.key)
        causes.append(f)
    if not causes:
        raise NoCandidates("no normalized cause frames among inputs")

    grid = common_grid([effect, *causes])
    if grid.count < 3:
        raise DataError(f"common span of all inputs has only {grid.count} buckets")
    if grid != effect.grid or any(f.grid != grid for f in causes):
        logger.info("inputs intersected to %d buckets starting at %d", grid.count, grid.start)
    causes = sorted((f.restrict(grid) for f in causes), key=lambda f: f.key)
    effect = effect.restrict(grid)

    weights: dict[str, float] = {}
    if cfg.use_channel_weights and cfg.channel_weights:
        weights = read_channel_weights(cfg.channel_weights)
    return _Inputs(causes, effect, groups, weights, grid, _fit_stop(cfg, grid.count))


def _policy(cfg: PipelineConfig) -> AssemblyPolicy:
    return AssemblyPolicy(cfg.min_abs_p, cfg.min_gain, cfg.stop_on_first_failure)


def _sweep(cfg: PipelineConfig, inputs: _Inputs) -> tuple[CorrelationMatrix, list[str]]:
    causes, effect = inputs.train()
    P = lag_sweep(causes, effect, cfg.lags)
    flagged = []
    if 0 in P.lags:
        for key, p in P.row(0).items():
            if p is not None and p >= 1.0 - 1e-12:
                flagged.append("/".join(key))
                logger.warning("frame %s is identical to the effect up to scale (P=1 at lag 0)", "/".join(key))
    return P, flagged


def _report(cfg, inputs: _Inputs, flagged, **extra) -> dict:
    report = {
        "grid": {"start": inputs.grid.start, "granularity": inputs.grid.granularity.label,
                 "count": inputs.grid.count},
        "train_span": [0, inputs.n_train],
        "effect": "/".join(inputs.effect.key),
        "n_causes": len(inputs.causes),
        "lags": [cfg.lag_min, cfg.lag_max],
        "flagged_equal_to_effect": flagged,
        # internal lag +k corresponds to shifting the effect k buckets back in time
        "lag_convention": "positive lag: cause precedes effect",
    }
    report.update(extra)
    return report


def run_correlate(cfg: PipelineConfig) -> dict[str, Path]:
    inputs = _load_inputs(cfg)
    out = _out_dir(cfg)
    P, flagged = _sweep(cfg, inputs)
    paths = {"correlations": out / "correlations.csv", "report": out / "correlate_report.json"}
    P.write_csv(paths["correlations"])
    _write_json(paths["report"], _report(cfg, inputs, flagged))
    return paths


def run_saci(cfg: PipelineConfig) -> dict[str, Path]:
    inputs = _load_inputs(cfg)
    out = _out_dir(cfg)
    P, flagged = _sweep(cfg, inputs)
    causes, effect = inputs.train()
    policy = _policy(cfg)
    span = (0, inputs.n_train)
    paths = {"correlations": out / "correlations.csv", "model": out / "saci_model.json",
             "terms": out / "saci_terms.csv", "lag_sweep": out / "saci_lag_sweep.csv",
             "report": out / "saci_report.json"}
    P.write_csv(paths["correlations"])

    profile = saci_lag_profile(causes, effect, P, inputs.weights, policy, span)
    write_lag_profile_csv(paths["lag_sweep"], profile)
    if len(inputs.groups) > 1:
        for name, keys in sorted(inputs.groups.items()):
            members = set(keys)
            sub = [f for f in causes if f.key in members]
            gp = {lag: None for lag in P.lags}
            if sub:
                gp = saci_lag_profile(sub, effect, P, inputs.weights, policy, span)
            paths[f"lag_sweep_{name}"] = out / f"saci_lag_sweep_{name}.csv"
            write_lag_profile_csv(paths[f"lag_sweep_{name}"], gp)

    if cfg.saci_lag is not None:
        lag = cfg.saci_lag
        if lag not in P.lags:
            raise ConfigError(f"saci_lag {lag} is outside the lag range")
    else:
        preceding = [(m.training_correlation, -l) for l, m in profile.items() if l >= 1 and m is not None]
        if not preceding:
            raise NoCandidates("no indicator could be assembled at any positive lag")
        lag = -max(preceding)[1]
    model, _ = assemble_saci(causes, effect, lag, P, inputs.weights, policy, span)
    model.grid_start = inputs.grid.start
    model.save(paths["model"])
    write_terms_csv(paths["terms"], model)
    _write_json(paths["report"], _report(cfg, inputs, flagged, model_lag=lag,
                                         training_correlation=model.training_correlation,
                                         n_terms=len(model.terms)))
    logger.info("saci: lag %d, %d terms, training r=%.4f", lag, len(model.terms), model.training_correlation)
    return paths


# -- evaluate ---------------------------------------------------------------


def run_evaluate(cfg: PipelineConfig) -> dict[str, Path]:
    model_path = Path(cfg.model) if cfg.model else Path(cfg.output) / "saci_model.json"
    if not model_path.exists():
        raise ConfigError(f"model file not found: {model_path}")
    if cfg.prices is None:
        raise ConfigError("evaluate needs a prices input")
    model = SaciModel.load(model_path)
    price_frames = read_frames_csv(cfg.prices, cfg.granularity)
    if len(price_frames) != 1:
        raise DataError(f"{cfg.prices}: expected exactly one price frame, found {len(price_frames)}")
    prices = price_frames[0]

    needed = {t.key for t in model.terms}
    frames = [f for path in cfg.frames for f in read_frames_csv(path, cfg.granularity) if f.key in needed]
    grid = common_grid([prices, *frames])
    frames = [f.restrict(grid) for f in frames]
    prices = prices.restrict(grid)

    shift = 0
    if model.grid_start is not None:
        shift = (model.grid_start - grid.start) // grid.period
    lo, hi = model.train_span[0] + shift, model.train_span[1] + shift
    if lo < 0 or hi >= grid.count:
        raise DataError("evaluation grid does not cover the model's training span plus a test span")
    local = replace(model, train_span=(lo, hi))
    test = (hi, grid.count)

    rows = [
        evaluate("saci_direction", saci_direction_predictor(local, frames, prices), prices, test),
        evaluate("lkp", predict_lkp(prices, cfg.horizon), prices, test),
        evaluate("fkp", predict_fkp(prices, cfg.horizon), prices, test),
    ]
    out = _out_dir(cfg)
    path = out / "evaluation.csv"
    write_eval_csv(path, rows)
    for r in rows:
        logger.info("%s: n=%d mape=%.6f da=%.4f", r.predictor, r.n, r.mape, r.da)
    return {"evaluation": path}


# -- synth ------------------------------------------------------------------


def synth_spec(cfg: PipelineConfig) -> PlantedSpec:
    return PlantedSpec(
        n=cfg.synth_n,
        true_lag=cfg.synth_true_lag,
        cause_weights=tuple(cfg.synth_weights),
        noise_sigma=cfg.synth_noise_sigma,
        n_noise_frames=cfg.synth_noise_frames,
        seed=cfg.seed,
        granularity=cfg.granularity,
        start=cfg.start or 0,
    )


def run_synth(cfg: PipelineConfig) -> dict[str, Path]:
    data = generate_planted(synth_spec(cfg))
    return write_planted(data, _out_dir(cfg))
