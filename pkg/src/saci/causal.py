"""Lag sweep of correlation weights and greedy assembly of the additive cause indicator.

For every candidate frame ``X`` and lag ``l`` the sweep records
``P(l, X) = pearson(X[t], effect[t + l])``. At a chosen lag the indicator is

    Y(t) = sum_k X_k(t) * P(l, X_k) * W(channel_k)

where terms are added in decreasing ``W * |P|`` order and kept only while they raise
the lagged correlation of ``Y`` with the effect.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputFormatError, MissingTermFrame, NoCandidates, ZeroVariance
from .series import SeriesFrame, check_lag, lagged_pearson, overlap

logger = logging.getLogger(__name__)

FrameKey = tuple[str, str, str]

CORRELATION_CSV_HEADER = ("lag", "channel", "metric", "variant", "pearson", "zero_variance")


@dataclass
class CorrelationMatrix:
    lags: list[int]
    keys: list[FrameKey]
    values: np.ndarray  # (len(lags), len(keys)); 0.0 where zero_variance
    zero_variance: np.ndarray

    def p(self, lag: int, key: FrameKey) -> float | None:
        """Correlation weight, or ``None`` for a zero-variance marker."""
        i = self.lags.index(lag)
        j = self.keys.index(key)
        return None if self.zero_variance[i, j] else float(self.values[i, j])

    def row(self, lag: int) -> dict[FrameKey, float | None]:
        i = self.lags.index(lag)
        return {k: (None if self.zero_variance[i, j] else float(self.values[i, j]))
                for j, k in enumerate(self.keys)}

    def write_csv(self, path: "str | Path") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CORRELATION_CSV_HEADER)
            for i, lag in enumerate(self.lags):
                for j, (c, m, v) in enumerate(self.keys):
                    w.writerow((lag, c, m, v, repr(float(self.values[i, j])), int(self.zero_variance[i, j])))

    @classmethod
    def read_csv(cls, path: "str | Path") -> "CorrelationMatrix":
        entries = {}
        lags: list[int] = []
        keys: list[FrameKey] = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if tuple(next(reader, ())) != CORRELATION_CSV_HEADER:
                raise InputFormatError(path, 1, "unexpected correlation report header")
            for lineno, row in enumerate(reader, start=2):
                try:
                    lag = int(row[0])
                    key = (row[1], row[2], row[3])
                    entries[(lag, key)] = (float(row[4]), row[5] == "1")
                except (ValueError, IndexError):
                    raise InputFormatError(path, lineno, f"bad row {row!r}") from None
                if lag not in lags:
                    lags.append(lag)
                if key not in keys:
                    keys.append(key)
        values = np.zeros((len(lags), len(keys)))
        zv = np.zeros((len(lags), len(keys)), dtype=bool)
        for (lag, key), (p, z) in entries.items():
            values[lags.index(lag), keys.index(key)] = p
            zv[lags.index(lag), keys.index(key)] = z
        return cls(lags, keys, values, zv)


def lag_sweep(frames: Sequence[SeriesFrame], effect: SeriesFrame, lags: Iterable[int]) -> CorrelationMatrix:
    """Pearson of every frame against the effect at every lag.

    Constant overlaps are recorded as zero-variance markers with value 0.0.
    """
    lags = list(lags)
    frames = list(frames)
    n = effect.grid.count
    for f in frames:
        if f.grid != effect.grid:
            raise ValueError(f"{f.name} is not on the effect grid")
    for lag in lags:
        check_lag(lag, n)
    X = np.vstack([f.values for f in frames]) if frames else np.zeros((0, n))
    values = np.zeros((len(lags), len(frames)))
    zero = np.zeros((len(lags), len(frames)), dtype=bool)
    for i, lag in enumerate(lags):
        cs, es = overlap(n, lag)
        xs = X[:, cs]
        ys = effect.values[es]
        if np.all(ys == ys[0]):
            zero[i, :] = True
            continue
        const = np.all(xs == xs[:, :1], axis=1)
        dx = xs - xs.mean(axis=1, keepdims=True)
        dy = ys - ys.mean()
        sxx = np.einsum("ij,ij->i", dx, dx)
        syy = float(dy @ dy)
        const |= sxx == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (dx @ dy) / np.sqrt(sxx * syy)
        r = np.clip(np.where(const, 0.0, r), -1.0, 1.0)
        values[i] = r
        zero[i] = const
    return CorrelationMatrix(lags, [f.key for f in frames], values, zero)


@dataclass
class Term:
    channel: str
    metric: str
    variant: str
    p: float
    w: float

    @property
    def key(self) -> FrameKey:
        return (self.channel, self.metric, self.variant)

    @property
    def weight(self) -> float:
        return self.p * self.w


@dataclass
class SaciModel:
    lag: int
    terms: list[Term]
    training_correlation: float
    train_span: tuple[int, int]
    history: list[float] = field(default_factory=list)  # correlation after each accepted term
    grid_start: int | None = None
    granularity: str | None = None

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "terms": [{"channel": t.channel, "metric": t.metric, "variant": t.variant,
                       "p": t.p, "w": t.w, "weight": t.weight} for t in self.terms],
            "training_correlation": self.training_correlation,
            "history": self.history,
            "train_span": list(self.train_span),
            "grid_start": self.grid_start,
            "granularity": self.granularity,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SaciModel":
        return cls(
            lag=int(d["lag"]),
            terms=[Term(t["channel"], t["metric"], t["variant"], float(t["p"]), float(t["w"]))
                   for t in d["terms"]],
            training_correlation=float(d["training_correlation"]),
            train_span=tuple(d["train_span"]),
            history=[float(x) for x in d.get("history", [])],
            grid_start=d.get("grid_start"),
            granularity=d.get("granularity"),
        )

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: "str | Path") -> "SaciModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class AssemblyPolicy:
    min_abs_p: float = 0.0
    min_gain: float = 1e-9
    stop_on_first_failure: bool = False


def rank_candidates(frames: Sequence[SeriesFrame], P: CorrelationMatrix, lag: int,
                    W: Mapping[str, float], policy: AssemblyPolicy) -> list[tuple[SeriesFrame, float, float]]:
    """Candidates ``(frame, P, W)`` in assembly order: ``W*|P|`` descending, then by key."""
    row = P.row(lag)
    out = []
    for f in frames:
        p = row.get(f.key)
        w = W.get(f.channel, 1.0)
        if p is None or abs(p) <= policy.min_abs_p or p * w == 0.0:
            continue
        out.append((f, p, w))
    out.sort(key=lambda c: (-c[2] * abs(c[1]), c[0].key))
    return out


def assemble_saci(frames: Sequence[SeriesFrame], effect: SeriesFrame, lag: int, P: CorrelationMatrix,
                  W: Mapping[str, float] | None = None, policy: AssemblyPolicy | None = None,
                  train_span: tuple[int, int] | None = None) -> tuple[SaciModel, np.ndarray]:
    """Greedily build the indicator at ``lag``.

    ``frames``, ``effect`` and ``P`` should all describe the training span; ``train_span``
    is recorded in the model as grid indices. Returns the model and ``Y`` on that span.
    """
    W = W or {}
    policy = policy or AssemblyPolicy()
    if lag not in P.lags:
        raise ValueError(f"correlation matrix has no entries for lag {lag}")
    candidates = rank_candidates(frames, P, lag, W, policy)
    if not candidates:
        raise NoCandidates(f"no usable candidate at lag {lag}")

    grid = effect.grid
    first, p0, w0 = candidates[0]
    y = first.values * (p0 * w0)
    terms = [Term(*first.key, p0, w0)]
    best = lagged_pearson(SeriesFrame(grid, "saci", "y", "", y), effect, lag)
    history = [best]
    for f, p, w in candidates[1:]:
        trial = y + f.values * (p * w)
        try:
            r = lagged_pearson(SeriesFrame(grid, "saci", "y", "", trial), effect, lag)
        except ZeroVariance:
            r = -math.inf
        if r > best + policy.min_gain:
            y, best = trial, r
            terms.append(Term(*f.key, p, w))
            history.append(r)
        elif policy.stop_on_first_failure:
            break
    span = train_span if train_span is not None else (0, grid.count)
    model = SaciModel(lag, terms, best, tuple(span), history,
                      grid_start=grid.start - span[0] * grid.period, granularity=grid.granularity.label)
    logger.info("lag %d: %d of %d candidates accepted, r=%.4f", lag, len(terms), len(candidates), best)
    return model, y


def apply_saci(model: SaciModel, frames: Iterable[SeriesFrame],
               span: tuple[int, int] | None = None) -> np.ndarray:
    """Evaluate ``Y`` from the model's terms on the frames' grid (or a sub-span of it)."""
    by_key = {f.key: f for f in frames}
    missing = [t.key for t in model.terms if t.key not in by_key]
    if missing:
        raise MissingTermFrame(f"no frame for model terms {missing}")
    grids = {by_key[t.key].grid for t in model.terms}
    if len(grids) > 1:
        raise ValueError("model term frames are on different grids")
    n = next(iter(grids)).count if grids else 0
    lo, hi = span if span is not None else (0, n)
    y = np.zeros(max(0, hi - lo))
    for t in model.terms:
        y = y + by_key[t.key].values[lo:hi] * t.weight
    return y


def saci_lag_profile(frames: Sequence[SeriesFrame], effect: SeriesFrame, P: CorrelationMatrix,
                     W: Mapping[str, float] | None = None, policy: AssemblyPolicy | None = None,
                     train_span: tuple[int, int] | None = None) -> dict[int, SaciModel | None]:
    """Assemble one indicator per lag of ``P``; ``None`` where no candidate qualifies."""
    out: dict[int, SaciModel | None] = {}
    for lag in P.lags:
        try:
            out[lag], _ = assemble_saci(frames, effect, lag, P, W, policy, train_span)
        except NoCandidates:
            out[lag] = None
    return out


def write_lag_profile_csv(path: "str | Path", profile: Mapping[int, SaciModel | None]) -> None:
    """``lag,correlation`` rows; the correlation is empty where no indicator exists."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lag", "correlation"))
        for lag in sorted(profile):
            m = profile[lag]
            w.writerow((lag, "" if m is None else repr(m.training_correlation)))


def read_lag_profile_csv(path: "str | Path") -> dict[int, float | None]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return {int(r["lag"]): (float(r["correlation"]) if r["correlation"] else None) for r in reader}


def write_terms_csv(path: "str | Path", model: SaciModel) -> None:
    """Accepted terms ranked by ``|weight|``: ``channel,metric,variant,weight``."""
    ranked = sorted(model.terms, key=lambda t: (-abs(t.weight), t.key))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("channel", "metric", "variant", "weight"))
        for t in ranked:
            w.writerow((t.channel, t.metric, t.variant, repr(t.weight)))
