"""Market metrics from raw trades and limit order book snapshots.

Trades are bucketed into extended OHLCV records (per-side counts, volumes, plain and
volume-weighted average prices); book snapshots are reduced to best prices, weighted
average prices, spreads, depth and imbalances. Metric identifiers are stable and
listed in :data:`TRADE_METRICS` and :data:`LOB_METRICS`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CrossedBook, EmptySide, InputFormatError
from .series import SeriesFrame, TimeGrid

MARKET_CHANNEL = "market"


@dataclass(frozen=True)
class Trade:
    t: int  # epoch milliseconds
    price: float
    amount: float
    side: str  # aggressor side: "buy" or "sell"

    def __post_init__(self):
        if not (self.price > 0 and self.amount > 0):
            raise ValueError(f"trade at {self.t}: price and amount must be positive")
        if self.side not in ("buy", "sell"):
            raise ValueError(f"trade at {self.t}: side must be buy or sell, got {self.side!r}")


@dataclass(frozen=True)
class LobSnapshot:
    t: int  # epoch milliseconds
    bids: tuple[tuple[float, float], ...]
    asks: tuple[tuple[float, float], ...]


@dataclass
class OhlcvExtended:
    open: float
    high: float
    low: float
    close: float
    buy_count: int = 0
    sell_count: int = 0
    buy_base_volume: float = 0.0
    sell_base_volume: float = 0.0
    buy_quote_volume: float = 0.0
    sell_quote_volume: float = 0.0
    # per-side prices are None when that side had no trades in the bucket
    buy_avg_price: float | None = None
    sell_avg_price: float | None = None
    buy_vwap_base: float | None = None
    sell_vwap_base: float | None = None
    buy_vwap_quote: float | None = None
    sell_vwap_quote: float | None = None


@dataclass(frozen=True)
class LobFeatures:
    min_ask: float
    max_bid: float
    ask_vwap: float
    bid_vwap: float
    ask_volume: float
    bid_volume: float
    spread_best: float
    spread_vwap: float
    price_imbalance: float
    volume_imbalance: float


OHLCV_FIELDS = tuple(f.name for f in fields(OhlcvExtended))
IMBALANCE_METRICS = (
    "count_imbalance",
    "base_volume_imbalance",
    "quote_volume_imbalance",
    "avg_price_imbalance",
    "quote_volume_imbalance_by_change",
)
TRADE_METRICS = tuple("trade_" + name for name in OHLCV_FIELDS + IMBALANCE_METRICS)
LOB_METRICS = tuple("lob_" + f.name for f in fields(LobFeatures))


def imbalance(a: float, b: float) -> float:
    """Bounded skew ``(a - b) / (a + b)``, 0 when both are zero."""
    total = a + b
    if total == 0:
        return 0.0
    return (a - b) / total


class _Side:
    __slots__ = ("count", "base", "quote", "price_sum", "quote_weighted")

    def __init__(self):
        self.count = 0
        self.base = 0.0
        self.quote = 0.0
        self.price_sum = 0.0
        self.quote_weighted = 0.0  # sum of price * quote_amount

    def add(self, price: float, amount: float):
        q = price * amount
        self.count += 1
        self.base += amount
        self.quote += q
        self.price_sum += price
        self.quote_weighted += price * q

    def means(self):
        if not self.count:
            return None, None, None
        return self.price_sum / self.count, self.quote / self.base, self.quote_weighted / self.quote


def aggregate_trades(trades: Iterable[Trade], grid: TimeGrid) -> list[OhlcvExtended | None]:
    """Extended OHLCV per bucket; ``None`` where the bucket has no trades.

    Base-weighted average is ``sum(p*a) / sum(a)``; quote-weighted average weights each
    price by its quote amount ``p*a``.
    """
    ordered = sorted(trades, key=lambda tr: tr.t)
    period_ms = grid.period * 1000
    start_ms = grid.start * 1000
    out: list[OhlcvExtended | None] = [None] * grid.count
    sides: list[dict[str, _Side] | None] = [None] * grid.count
    for tr in ordered:
        i = (tr.t - start_ms) // period_ms
        if not 0 <= i < grid.count:
            continue
        bar = out[i]
        if bar is None:
            bar = out[i] = OhlcvExtended(tr.price, tr.price, tr.price, tr.price)
            sides[i] = {"buy": _Side(), "sell": _Side()}
        else:
            bar.high = max(bar.high, tr.price)
            bar.low = min(bar.low, tr.price)
            bar.close = tr.price
        sides[i][tr.side].add(tr.price, tr.amount)

    for bar, acc in zip(out, sides):
        if bar is None:
            continue
        for name in ("buy", "sell"):
            s = acc[name]
            setattr(bar, f"{name}_count", s.count)
            setattr(bar, f"{name}_base_volume", s.base)
            setattr(bar, f"{name}_quote_volume", s.quote)
            avg, vb, vq = s.means()
            setattr(bar, f"{name}_avg_price", avg)
            setattr(bar, f"{name}_vwap_base", vb)
            setattr(bar, f"{name}_vwap_quote", vq)
    return out


def price_difference(close: SeriesFrame) -> SeriesFrame:
    """First difference of close prices; bucket 0 and gaps are absent."""
    values = np.zeros(close.grid.count)
    present = np.zeros(close.grid.count, dtype=bool)
    if close.grid.count > 1:
        values[1:] = np.diff(close.values)
        present[1:] = close.present[1:] & close.present[:-1]
    return close.replace(metric="price_difference", variant="", values=values, present=present)


def trade_metric_frames(ohlcv: Sequence[OhlcvExtended | None], grid: TimeGrid,
                        channel: str = MARKET_CHANNEL) -> list[SeriesFrame]:
    """Raw (un-normalized) frames for every OHLCV field plus the imbalance metrics."""
    n = grid.count
    if len(ohlcv) != n:
        raise ValueError("ohlcv records must align with the grid")
    cols = {name: (np.zeros(n), np.zeros(n, dtype=bool)) for name in OHLCV_FIELDS + IMBALANCE_METRICS}

    def put(name, i, value):
        if value is not None:
            cols[name][0][i] = value
            cols[name][1][i] = True

    for i, bar in enumerate(ohlcv):
        if bar is None:
            continue
        for name in OHLCV_FIELDS:
            put(name, i, getattr(bar, name))
        put("count_imbalance", i, imbalance(bar.buy_count, bar.sell_count))
        put("base_volume_imbalance", i, imbalance(bar.buy_base_volume, bar.sell_base_volume))
        put("quote_volume_imbalance", i, imbalance(bar.buy_quote_volume, bar.sell_quote_volume))
        if bar.buy_avg_price is not None and bar.sell_avg_price is not None:
            put("avg_price_imbalance", i, imbalance(bar.buy_avg_price, bar.sell_avg_price))

    close_v, close_p = cols["close"]
    close = SeriesFrame(grid, channel, "trade_close", "", close_v, close_p)
    pd_frame = price_difference(close)
    qvi_v, qvi_p = cols["quote_volume_imbalance"]
    if close_p.any():
        eps = 1e-9 * float(np.median(np.abs(close_v[close_p])))
        by_v, by_p = cols["quote_volume_imbalance_by_change"]
        ok = qvi_p & pd_frame.present
        by_v[ok] = qvi_v[ok] / np.maximum(np.abs(pd_frame.values[ok]), eps)
        by_p[ok] = True

    return [SeriesFrame(grid, channel, "trade_" + name, "", v, p) for name, (v, p) in cols.items()]


def lob_features(snap: LobSnapshot) -> LobFeatures:
    if not snap.bids or not snap.asks:
        raise EmptySide(f"snapshot at {snap.t} has an empty side")
    bids = np.asarray(snap.bids, dtype=np.float64).reshape(-1, 2)
    asks = np.asarray(snap.asks, dtype=np.float64).reshape(-1, 2)
    max_bid = float(bids[:, 0].max())
    min_ask = float(asks[:, 0].min())
    if max_bid >= min_ask:
        raise CrossedBook(f"snapshot at {snap.t}: best bid {max_bid} >= best ask {min_ask}")
    bid_volume = float(bids[:, 1].sum())
    ask_volume = float(asks[:, 1].sum())
    bid_vwap = float(bids[:, 0] @ bids[:, 1]) / bid_volume
    ask_vwap = float(asks[:, 0] @ asks[:, 1]) / ask_volume
    return LobFeatures(
        min_ask=min_ask,
        max_bid=max_bid,
        ask_vwap=ask_vwap,
        bid_vwap=bid_vwap,
        ask_volume=ask_volume,
        bid_volume=bid_volume,
        spread_best=min_ask - max_bid,
        spread_vwap=ask_vwap - bid_vwap,
        price_imbalance=imbalance(bid_vwap, ask_vwap),
        volume_imbalance=imbalance(bid_volume, ask_volume),
    )


def lob_feature_frames(snapshots: Iterable[LobSnapshot], grid: TimeGrid,
                       channel: str = MARKET_CHANNEL) -> list[SeriesFrame]:
    """One raw frame per book metric; the last snapshot in a bucket represents it."""
    last: dict[int, LobSnapshot] = {}
    period_ms = grid.period * 1000
    for snap in sorted(snapshots, key=lambda s: s.t):
        i = (snap.t - grid.start * 1000) // period_ms
        if 0 <= i < grid.count:
            last[i] = snap
    names = [f.name for f in fields(LobFeatures)]
    values = {name: np.zeros(grid.count) for name in names}
    present = np.zeros(grid.count, dtype=bool)
    for i, snap in last.items():
        feats = lob_features(snap)
        for name in names:
            values[name][i] = getattr(feats, name)
        present[i] = True
    return [SeriesFrame(grid, channel, "lob_" + name, "", values[name], present) for name in names]


# -- ingestion --------------------------------------------------------------


def read_trades_csv(path: "str | Path") -> list[Trade]:
    """Read ``t_ms,price,amount,side`` rows."""
    trades = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return trades
        if [h.strip() for h in header] != ["t_ms", "price", "amount", "side"]:
            raise InputFormatError(path, 1, "expected header t_ms,price,amount,side")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, price, amount, side = row
                trades.append(Trade(int(t), float(price), float(amount), side.strip().lower()))
            except ValueError as exc:
                raise InputFormatError(path, lineno, f"bad trade row {row!r}: {exc}") from None
    return trades


def read_lob_jsonl(path: "str | Path") -> list[LobSnapshot]:
    snaps = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                snaps.append(LobSnapshot(
                    int(obj["t"]),
                    tuple((float(p), float(v)) for p, v in obj["bids"]),
                    tuple((float(p), float(v)) for p, v in obj["asks"]),
                ))
            except (ValueError, KeyError, TypeError) as exc:
                raise InputFormatError(path, lineno, f"bad snapshot: {exc}") from None
    return snaps
