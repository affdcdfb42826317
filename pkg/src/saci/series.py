"""Uniform time grids, aligned metric frames and (lagged) Pearson correlation.

Every metric in the pipeline travels as a :class:`SeriesFrame`: one value per
bucket of a :class:`TimeGrid` plus a presence mask. Absent buckets hold the
neutral value 0.0, so downstream arithmetic never sees NaN.

Lag convention: ``lagged_pearson(cause, effect, lag)`` pairs ``cause[t]`` with
``effect[t + lag]``. A positive lag means the cause precedes the effect.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InputFormatError,
    LagOutOfRange,
    NonPositiveSpan,
    TooShort,
    ZeroVariance,
)

VALID_VARIANTS = ("", "N", "LN", "DN", "DLN")

FRAME_CSV_HEADER = ("t", "channel", "metric", "variant", "value", "present")


class Granularity(enum.Enum):
    DAY = ("day", 86400)
    HOUR = ("hour", 3600)
    MINUTE = ("minute", 60)
    SECOND = ("second", 1)

    def __init__(self, label: str, seconds: int):
        self.label = label
        self.seconds = seconds

    @classmethod
    def parse(cls, value: "str | Granularity") -> "Granularity":
        if isinstance(value, Granularity):
            return value
        for g in cls:
            if g.label == str(value).strip().lower():
                return g
        raise ValueError(f"unknown granularity {value!r}; expected one of day, hour, minute, second")

    @classmethod
    def from_seconds(cls, seconds: int) -> "Granularity":
        for g in cls:
            if g.seconds == seconds:
                return g
        raise ValueError(f"no granularity with period {seconds} s")


@dataclass(frozen=True)
class TimeGrid:
    start: int
    granularity: Granularity
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("grid count must be non-negative")
        if self.start % self.granularity.seconds:
            raise ValueError(f"grid start {self.start} not aligned to {self.granularity.label}")

    @property
    def period(self) -> int:
        return self.granularity.seconds

    @property
    def end(self) -> int:
        return self.start + self.count * self.period

    def times(self) -> np.ndarray:
        return self.start + self.period * np.arange(self.count, dtype=np.int64)

    def index_of(self, t: float) -> int:
        """Bucket index of epoch-second ``t``; may fall outside ``[0, count)``."""
        return int(math.floor((t - self.start) / self.period))

    def slice(self, begin: int, stop: int) -> "TimeGrid":
        begin = max(0, begin)
        stop = min(self.count, stop)
        return TimeGrid(self.start + begin * self.period, self.granularity, max(0, stop - begin))

    def intersect(self, other: "TimeGrid") -> "TimeGrid":
        if other.granularity is not self.granularity:
            raise ValueError("cannot intersect grids of different granularity")
        if (other.start - self.start) % self.period:
            raise ValueError("grids are not phase-aligned")
        start = max(self.start, other.start)
        end = min(self.end, other.end)
        return TimeGrid(start, self.granularity, max(0, (end - start) // self.period))


def build_grid(start: float, end: float, g: "Granularity | str") -> TimeGrid:
    g = Granularity.parse(g)
    if end <= start:
        raise NonPositiveSpan(f"end {end} must be after start {start}")
    aligned = int(math.floor(start / g.seconds)) * g.seconds
    count = int(math.ceil((end - aligned) / g.seconds))
    return TimeGrid(aligned, g, count)


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """One metric of one channel on a grid.

    ``values`` at absent positions are forced to 0.0 on construction.
    """

    grid: TimeGrid
    channel: str
    metric: str
    variant: str
    values: np.ndarray
    present: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        present = (np.ones(values.shape, dtype=bool) if self.present is None
                   else np.array(self.present, dtype=bool))
        if values.ndim != 1 or values.shape != present.shape or values.size != self.grid.count:
            raise ValueError(
                f"frame {self.channel}/{self.metric}: values {values.shape} and mask "
                f"{present.shape} must both have length {self.grid.count}"
            )
        if self.variant not in VALID_VARIANTS:
            raise ValueError(f"invalid variant suffix {self.variant!r}")
        values[~present] = 0.0
        values.flags.writeable = False
        present.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "present", present)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.channel, self.metric, self.variant)

    @property
    def name(self) -> str:
        return f"{self.channel}/{self.metric}" + (f"_{self.variant}" if self.variant else "")

    def __len__(self):
        return self.grid.count

    def replace(self, values=None, present=None, variant=None, grid=None, channel=None,
                metric=None) -> "SeriesFrame":
        return SeriesFrame(
            grid=self.grid if grid is None else grid,
            channel=self.channel if channel is None else channel,
            metric=self.metric if metric is None else metric,
            variant=self.variant if variant is None else variant,
            values=self.values if values is None else values,
            present=self.present if present is None else present,
        )

    def slice(self, begin: int, stop: int) -> "SeriesFrame":
        sub = self.grid.slice(begin, stop)
        lo = (sub.start - self.grid.start) // self.grid.period
        return self.replace(values=self.values[lo:lo + sub.count],
                            present=self.present[lo:lo + sub.count], grid=sub)

    def restrict(self, grid: TimeGrid) -> "SeriesFrame":
        """Crop to ``grid``, which must lie within this frame's grid."""
        lo = (grid.start - self.grid.start) // self.grid.period
        if lo < 0 or lo + grid.count > self.grid.count or grid.granularity is not self.grid.granularity:
            raise ValueError(f"grid does not fit inside frame {self.name}")
        return self.slice(lo, lo + grid.count)

    def equals(self, other: "SeriesFrame") -> bool:
        return (self.key == other.key and self.grid == other.grid
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.present, other.present))


EffectSeries = SeriesFrame


def align(grid: TimeGrid, channel: str, metric: str, times: Iterable[float],
          values: Iterable[float], how: str = "mean", variant: str = "") -> SeriesFrame:
    """Bucket raw ``(t, value)`` observations onto ``grid``.

    ``how`` is ``mean``, ``sum`` or ``last``; observations outside the grid are dropped.
    Accumulation happens in observation order so the result is reproducible bit-for-bit.
    """
    if how not in ("mean", "sum", "last"):
        raise ValueError(f"unknown aggregation {how!r}")
    sums = np.zeros(grid.count)
    counts = np.zeros(grid.count, dtype=np.int64)
    for t, v in zip(times, values):
        i = grid.index_of(t)
        if 0 <= i < grid.count:
            if how == "last":
                sums[i] = v
            else:
                sums[i] += v
            counts[i] += 1
    present = counts > 0
    out = sums.copy()
    if how == "mean":
        out[present] = sums[present] / counts[present]
    return SeriesFrame(grid, channel, metric, variant, out, present)


def _is_constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("pearson needs sequences of equal length")
    if x.size < 3:
        raise TooShort(f"pearson needs at least 3 pairs, got {x.size}")
    if _is_constant(x) or _is_constant(y):
        raise ZeroVariance("constant input has no correlation")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("input variance underflows to zero")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def check_lag(lag: int, count: int) -> None:
    if abs(lag) >= count - 2:
        raise LagOutOfRange(f"lag {lag} leaves fewer than 3 overlapping buckets on a grid of {count}")


def overlap(n: int, lag: int) -> tuple[slice, slice]:
    """Index slices pairing ``cause[t]`` with ``effect[t + lag]``."""
    if lag >= 0:
        return slice(0, n - lag), slice(lag, n)
    return slice(-lag, n), slice(0, n + lag)


def lagged_pearson(cause: SeriesFrame, effect: SeriesFrame, lag: int) -> float:
    if cause.grid != effect.grid:
        raise ValueError(f"{cause.name} and {effect.name} are on different grids")
    n = cause.grid.count
    check_lag(lag, n)
    cs, es = overlap(n, lag)
    return pearson(cause.values[cs], effect.values[es])


def common_grid(frames: Iterable[SeriesFrame]) -> TimeGrid:
    grid = None
    for f in frames:
        grid = f.grid if grid is None else grid.intersect(f.grid)
    if grid is None:
        raise ValueError("no frames given")
    return grid


# -- frame interchange CSV -------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_frames_csv(path: "str | Path", frames: Iterable[SeriesFrame]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_CSV_HEADER)
        for f in frames:
            for t, v, p in zip(f.grid.times(), f.values, f.present):
                w.writerow((int(t), f.channel, f.metric, f.variant, _fmt(v), int(p)))


def read_frames_csv(path: "str | Path", granularity: "Granularity | str | None" = None) -> list[SeriesFrame]:
    """Read frames written by :func:`write_frames_csv`.

    Without ``granularity`` the bucket period is inferred from the smallest time step
    of any frame; each frame gets the grid spanning its own first and last rows.
    """
    rows: dict[tuple[str, str, str], list[tuple[int, float, bool]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != FRAME_CSV_HEADER:
            raise InputFormatError(path, 1, f"expected header {','.join(FRAME_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise InputFormatError(path, lineno, f"expected 6 fields, got {len(row)}")
            try:
                t = int(row[0])
                value = float(row[4])
                present = {"0": False, "1": True}[row[5].strip()]
            except (ValueError, KeyError):
                raise InputFormatError(path, lineno, f"cannot parse row {row!r}") from None
            if row[3] not in VALID_VARIANTS:
                raise InputFormatError(path, lineno, f"invalid variant {row[3]!r}")
            rows[(row[1], row[2], row[3])].append((t, value, present))
    if not rows:
        return []

    if granularity is None:
        steps = set()
        for obs in rows.values():
            ts = sorted({t for t, _, _ in obs})
            steps.update(b - a for a, b in zip(ts, ts[1:]))
        if not steps:
            raise InputFormatError(path, 2, "cannot infer granularity from single-bucket frames")
        g = Granularity.from_seconds(min(steps))
    else:
        g = Granularity.parse(granularity)

    frames = []
    for (channel, metric, variant), obs in rows.items():
        ts = [t for t, _, _ in obs]
        t0, t1 = min(ts), max(ts)
        grid = TimeGrid(t0, g, (t1 - t0) // g.seconds + 1)
        values = np.zeros(grid.count)
        present = np.zeros(grid.count, dtype=bool)
        for t, v, p in obs:
            i = grid.index_of(t)
            values[i] = v
            present[i] = p
        frames.append(SeriesFrame(grid, channel, metric, variant, values, present))
    return frames
