"""Interpretable n-gram lexicon scoring of media posts.

Matching gives precedence to longer n-grams: once an n-gram is accepted, every
shorter match lying inside its token span is discounted, whatever its category.
Posts are scored into sentiment metrics (``sen``, ``pos``, ``neg``, ``con``) and one
metric per extra category, then averaged per channel on a time grid.
"""

from __future__ import annotations

import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputFormatError, LexiconError, MissingCategory
from .series import SeriesFrame, TimeGrid, align
from .transforms import max_abs_normalize

MAX_NGRAM = 8
SENTIMENT_METRICS = ("sen", "pos", "neg", "con")
COUNT_METRICS = ("word_count", "post_count")

_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Post:
    t: float  # epoch seconds
    channel: str
    text: str

    def __post_init__(self):
        if not self.channel:
            raise ValueError("post channel must be non-empty")


@dataclass(frozen=True)
class Lexicon:
    category: str
    entries: Mapping[tuple[str, ...], float]

    def __post_init__(self):
        for gram in self.entries:
            if not 1 <= len(gram) <= MAX_NGRAM:
                raise LexiconError(f"{self.category}: n-gram {gram!r} must have 1..{MAX_NGRAM} tokens")

    @classmethod
    def from_phrases(cls, category: str, phrases: Iterable["str | tuple[str, float]"]) -> "Lexicon":
        entries: dict[tuple[str, ...], float] = {}
        for item in phrases:
            phrase, weight = (item, 1.0) if isinstance(item, str) else item
            gram = tuple(tokenize(phrase))
            if gram in entries:
                raise LexiconError(f"{category}: duplicate n-gram {' '.join(gram)!r}")
            entries[gram] = float(weight)
        return cls(category, entries)


@dataclass(frozen=True)
class Match:
    category: str
    start: int
    stop: int
    weight: float

    @property
    def length(self) -> int:
        return self.stop - self.start


@dataclass
class PostScores:
    t: float
    channel: str
    masses: dict[str, float]
    sen: float
    pos: float
    neg: float
    con: float
    token_count: int
    categories: dict[str, float] = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        out = {"sen": self.sen, "pos": self.pos, "neg": self.neg, "con": self.con}
        out.update(self.categories)
        out["word_count"] = float(self.token_count)
        out["post_count"] = 1.0
        return out


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def match_ngrams(tokens: Sequence[str], lexicons: Iterable[Lexicon]) -> dict[str, list[Match]]:
    """Accepted matches per category under longest-first suppression.

    Candidates are visited longest first, then by start position; a candidate is
    dropped when its span lies strictly inside an already accepted longer span.
    Equal spans in different categories, and partial overlaps, are all kept.
    """
    index: dict[tuple[str, ...], list[tuple[str, float]]] = defaultdict(list)
    for lex in sorted(lexicons, key=lambda lx: lx.category):
        for gram, weight in lex.entries.items():
            index[gram].append((lex.category, weight))
    lengths = sorted({len(g) for g in index}, reverse=True)

    candidates = []
    tokens = tuple(tokens)
    for n in lengths:
        for s in range(len(tokens) - n + 1):
            for category, weight in index.get(tokens[s:s + n], ()):
                candidates.append(Match(category, s, s + n, weight))

    accepted: list[Match] = []
    out: dict[str, list[Match]] = defaultdict(list)
    for m in candidates:
        if any(a.length > m.length and a.start <= m.start and m.stop <= a.stop for a in accepted):
            continue
        accepted.append(m)
        out[m.category].append(m)
    return dict(out)


def score_post(post: Post, lexicons: Sequence[Lexicon], log_scaling: bool = True,
               sentiment: bool = True) -> PostScores:
    """Score a post against ``lexicons``.

    With ``log_scaling`` each category mass ``M`` becomes ``log10(1 + M)`` before it is
    divided by the token count.
    """
    categories = {lx.category for lx in lexicons}
    if sentiment and not {"positive", "negative"} <= categories:
        raise MissingCategory("sentiment scoring needs 'positive' and 'negative' lexicons")
    tokens = tokenize(post.text)
    matches = match_ngrams(tokens, lexicons)
    masses = {}
    for cat in sorted(categories):
        mass = math.fsum(m.weight for m in matches.get(cat, ()))
        masses[cat] = math.log10(1.0 + mass) if log_scaling else mass
    total = max(len(tokens), 1)

    cp = masses.get("positive", 0.0)
    cn = masses.get("negative", 0.0)
    pos = min(cp / total, 1.0)
    neg = -min(cn / total, 1.0)
    sen = (cp - cn) / (cp + cn) if cp + cn > 0 else 0.0
    con = math.sqrt(pos * abs(neg))
    extra = {cat: min(max(mass / total, 0.0), 1.0)
             for cat, mass in masses.items() if cat not in ("positive", "negative")}
    return PostScores(post.t, post.channel, masses, sen, pos, neg, con, len(tokens), extra)


def aggregate_channel(scores: Iterable[PostScores], grid: TimeGrid,
                      fit_stop: int | None = None) -> list[SeriesFrame]:
    """Per-channel, per-bucket means of post metrics, max-abs normalized.

    ``word_count`` and ``post_count`` are summed per bucket rather than averaged.
    Frames are returned sorted by (channel, metric).
    """
    by_channel: dict[str, list[PostScores]] = defaultdict(list)
    for s in scores:
        by_channel[s.channel].append(s)
    frames = []
    for channel in sorted(by_channel):
        posts = by_channel[channel]
        metric_names = sorted({name for p in posts for name in p.metrics()})
        for name in metric_names:
            how = "sum" if name in COUNT_METRICS else "mean"
            obs = [(p.t, p.metrics()[name]) for p in posts if name in p.metrics()]
            raw = align(grid, channel, name, [t for t, _ in obs], [v for _, v in obs], how=how)
            frames.append(max_abs_normalize(raw, fit_stop).replace(variant="N"))
    return frames


def representability(frames: Iterable[SeriesFrame], grid: TimeGrid | None = None) -> float:
    """Fraction of buckets in which the channel has at least one post."""
    mask = None
    for f in frames:
        mask = f.present.copy() if mask is None else mask | f.present
        grid = f.grid
    if mask is None or grid is None or grid.count == 0:
        return 0.0
    return int(mask.sum()) / grid.count


def channel_weights(frames: Iterable[SeriesFrame]) -> dict[str, float]:
    by_channel: dict[str, list[SeriesFrame]] = defaultdict(list)
    for f in frames:
        by_channel[f.channel].append(f)
    return {c: representability(fs) for c, fs in sorted(by_channel.items())}


# -- ingestion --------------------------------------------------------------


def load_lexicon(path: "str | Path") -> Lexicon:
    """One n-gram per line, tokens separated by spaces, optional ``<TAB>weight``."""
    path = Path(path)
    entries: dict[tuple[str, ...], float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            phrase, _, weight = line.partition("\t")
            gram = tuple(tokenize(phrase))
            if not gram:
                raise InputFormatError(path, lineno, "entry has no tokens")
            if len(gram) > MAX_NGRAM:
                raise InputFormatError(path, lineno, f"n-gram longer than {MAX_NGRAM} tokens")
            if gram in entries:
                raise InputFormatError(path, lineno, f"duplicate n-gram {phrase.strip()!r}")
            try:
                entries[gram] = float(weight) if weight.strip() else 1.0
            except ValueError:
                raise InputFormatError(path, lineno, f"bad weight {weight!r}") from None
    return Lexicon(path.stem, entries)


def load_lexicon_dir(path: "str | Path") -> list[Lexicon]:
    return [load_lexicon(p) for p in sorted(Path(path).glob("*.txt"))]


def read_posts_jsonl(path: "str | Path") -> list[Post]:
    posts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                posts.append(Post(float(obj["t"]), str(obj["channel"]), str(obj["text"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise InputFormatError(path, lineno, f"bad post: {exc}") from None
    return posts


def demo_lexicon_dir() -> Path:
    """Directory of the small demonstration lexicons shipped with the package."""
    return Path(__file__).parent / "lexicons"
