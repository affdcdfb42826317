"""Price prediction baselines and error metrics.

``LKP`` copies the last known price, ``FKP`` looks up the true price and bounds what
any predictor can score. Directional accuracy compares the sign of the predicted
change against the realised change, both measured from the previous actual price;
a zero predicted change is only correct against a zero actual change.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .causal import SaciModel, apply_saci
from .errors import EmptyOverlap, ZeroActual
from .series import SeriesFrame

EVAL_CSV_HEADER = ("predictor", "horizon", "n", "mape", "da")


@dataclass(frozen=True, eq=False)
class PredictionSeries:
    horizon: int
    values: np.ndarray
    present: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class EvalRow:
    predictor: str
    horizon: int
    n: int
    mape: float
    da: float


def _span_mask(n: int, span: tuple[int, int] | None) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    lo, hi = span if span is not None else (0, n)
    mask[max(lo, 0):min(hi, n)] = True
    return mask


def predict_lkp(prices: SeriesFrame, horizon: int = 1) -> PredictionSeries:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n = prices.grid.count
    values = np.zeros(n)
    present = np.zeros(n, dtype=bool)
    if n > horizon:
        values[horizon:] = prices.values[:n - horizon]
        present[horizon:] = prices.present[:n - horizon]
    return PredictionSeries(horizon, values, present)


def predict_fkp(prices: SeriesFrame, horizon: int = 1) -> PredictionSeries:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return PredictionSeries(horizon, prices.values.copy(), prices.present.copy())


def mape(pred: PredictionSeries, actual: SeriesFrame, span: tuple[int, int] | None = None) -> float:
    ok = pred.present & actual.present & _span_mask(len(pred), span)
    if not ok.any():
        raise EmptyOverlap("no bucket has both a prediction and an actual price")
    a = actual.values[ok]
    if np.any(a == 0):
        raise ZeroActual("actual price is zero inside the evaluated overlap")
    return float(np.mean(np.abs(pred.values[ok] - a) / np.abs(a)))


def _direction_mask(pred: PredictionSeries, actual: SeriesFrame, span) -> np.ndarray:
    ok = pred.present & actual.present & _span_mask(len(pred), span)
    if ok.size:
        ok[0] = False
    ok[1:] &= actual.present[:-1]
    return ok


def directional_accuracy(pred: PredictionSeries, actual: SeriesFrame,
                         span: tuple[int, int] | None = None) -> float:
    ok = _direction_mask(pred, actual, span)
    if not ok.any():
        raise EmptyOverlap("no bucket has a prediction, an actual and a previous actual")
    idx = np.flatnonzero(ok)
    prev = actual.values[idx - 1]
    hits = np.sign(pred.values[idx] - prev) == np.sign(actual.values[idx] - prev)
    return float(np.mean(hits))


def evaluate(name: str, pred: PredictionSeries, actual: SeriesFrame,
             span: tuple[int, int] | None = None) -> EvalRow:
    n = int(_direction_mask(pred, actual, span).sum())
    return EvalRow(name, pred.horizon, n, mape(pred, actual, span), directional_accuracy(pred, actual, span))


def saci_direction_predictor(model: SaciModel, frames: Iterable[SeriesFrame],
                             prices: SeriesFrame) -> PredictionSeries:
    """Direction-only forecast ``price(t+l-1) + sign(Y(t)) * step``.

    ``step`` is the median nonzero absolute price change over the model's training span.
    """
    if model.lag < 1:
        raise ValueError("direction predictor needs a model with a positive lag")
    frames = list(frames)
    y = apply_saci(model, frames)
    n = prices.grid.count
    if len(y) != n:
        raise ValueError("model frames and prices must share a grid")
    lo, hi = model.train_span
    pd = np.diff(prices.values[lo:hi])
    both = prices.present[lo + 1:hi] & prices.present[lo:hi - 1]
    moves = np.abs(pd[both])
    moves = moves[moves > 0]
    step = float(np.median(moves)) if moves.size else 0.0

    lag = model.lag
    values = np.zeros(n)
    present = np.zeros(n, dtype=bool)
    # prediction for bucket s = t + lag uses Y(t) and price(s - 1)
    s = np.arange(lag, n)
    t = s - lag
    values[s] = prices.values[s - 1] + np.sign(y[t]) * step
    present[s] = prices.present[s - 1]
    return PredictionSeries(1, values, present)


def write_eval_csv(path: "str | Path", rows: Sequence[EvalRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVAL_CSV_HEADER)
        for r in rows:
            w.writerow((r.predictor, r.horizon, r.n, repr(r.mape), repr(r.da)))


def read_eval_csv(path: "str | Path") -> list[EvalRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [EvalRow(r["predictor"], int(r["horizon"]), int(r["n"]), float(r["mape"]), float(r["da"]))
                for r in csv.DictReader(fh)]
