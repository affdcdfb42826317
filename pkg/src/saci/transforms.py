"""Stationarizing transforms and variant expansion.

Variant suffixes name the transforms applied left to right:
``D`` first difference, ``L`` signed decimal log, ``N`` max-abs normalization.
Only the four suffixes in :data:`VARIANTS` enter the causal sweep.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import TooShort
from .series import SeriesFrame

logger = logging.getLogger(__name__)

VARIANTS = ("N", "LN", "DN", "DLN")


def differentiate(x: SeriesFrame) -> SeriesFrame:
    if x.grid.count < 2:
        raise TooShort(f"{x.name}: differencing needs at least 2 buckets")
    values = np.zeros(x.grid.count)
    values[1:] = np.diff(x.values)
    present = np.zeros(x.grid.count, dtype=bool)
    present[1:] = x.present[1:] & x.present[:-1]
    return x.replace(values=values, present=present)


def signed_log(x: SeriesFrame) -> SeriesFrame:
    """``sign(x) * log10(1 + |x|)``; odd and order preserving."""
    return x.replace(values=np.sign(x.values) * np.log10(1.0 + np.abs(x.values)))


def max_abs_normalize(x: SeriesFrame, fit_stop: int | None = None) -> SeriesFrame:
    """Divide by the largest present ``|x|``.

    With ``fit_stop`` the scale comes from buckets ``[0, fit_stop)`` only; later values
    that land outside [-1, 1] are clamped and a warning is logged.
    """
    mask = x.present if fit_stop is None else x.present[:fit_stop]
    vals = x.values if fit_stop is None else x.values[:fit_stop]
    m = float(np.max(np.abs(vals[mask]))) if mask.any() else 0.0
    if m == 0.0:
        return x.replace()
    y = x.values / m
    if fit_stop is not None:
        outside = np.abs(y) > 1.0
        if outside.any():
            logger.warning("%s: %d out-of-sample values clamped to [-1, 1]", x.name, int(outside.sum()))
            y = np.clip(y, -1.0, 1.0)
    return x.replace(values=y)


def expand_variants(x: SeriesFrame, fit_stop: int | None = None) -> list[SeriesFrame]:
    """Return the N, LN, DN and DLN frames of a raw metric."""
    if x.grid.count < 2:
        raise TooShort(f"{x.name}: variant expansion needs at least 2 buckets")
    d = differentiate(x)
    chains = {
        "N": x,
        "LN": signed_log(x),
        "DN": d,
        "DLN": signed_log(d),
    }
    return [max_abs_normalize(f, fit_stop).replace(variant=v) for v, f in chains.items()]
