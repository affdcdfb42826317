"""Exit criteria for the toolkit. Each test records one PASS/FAIL line, printed in the
terminal summary as the "acceptance criteria" section.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_force_ohlcv, naive_sweep
from saci.causal import assemble_saci, lag_sweep, read_lag_profile_csv
from saci.cli import main
from saci.evaluation import directional_accuracy, mape, predict_fkp, predict_lkp, saci_direction_predictor
from saci.lexicon import Lexicon, Post, match_ngrams, score_post, tokenize
from saci.market import Trade, aggregate_trades, imbalance
from saci.series import Granularity, SeriesFrame, TimeGrid, pearson
from saci.synth import PlantedSpec, generate_planted
from saci.transforms import expand_variants, max_abs_normalize, signed_log


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
    assert ok, detail


REFERENCE = dict(n=500, true_lag=3, noise_sigma=0.6, n_noise_frames=20, seed=42)


def test_01_planted_lag_recovery():
    t0 = time.perf_counter()
    data = generate_planted(PlantedSpec(cause_weights=(0.8,), **REFERENCE))
    P = lag_sweep(data.frames, data.effect, range(-10, 11))
    elapsed = time.perf_counter() - t0
    col = np.abs(P.values[:, P.keys.index(data.causes[0].key)])
    best = P.lags[int(np.argmax(col))]
    ok = best == 3 and col.max() >= 0.7 and elapsed < 1.0
    record(1, "planted-lag recovery", ok, f"argmax lag {best}, |P| {col.max():.4f} (>= 0.7), {elapsed * 1e3:.1f} ms (< 1 s)")


def test_02_saci_dominance_shape(tmp_path):
    src, out = tmp_path / "synth", tmp_path / "out"
    assert main(["synth", "-o", str(src), "-s", "synth_weights=0.8,0.8,0.8,0.8,0.8"]) == 0
    assert main(["saci", "-o", str(out), "-s", f"frames={src / 'synth_frames.csv'}",
                 "-s", f"effect={src / 'effect.csv'}"]) == 0
    profile = read_lag_profile_csv(out / "saci_lag_sweep.csv")
    mags = {lag: abs(r) for lag, r in profile.items() if r is not None}
    best = max(mags, key=mags.get)
    runner_up = max(v for lag, v in mags.items() if lag != best)
    margin = mags[best] - runner_up
    ok = best == 3 and margin >= 0.2
    record(2, "SACI dominance shape", ok, f"peak at lag {best} |r|={mags[best]:.4f}, margin {margin:.4f} (>= 0.2)")


def test_03_greedy_assembly_guarantee():
    failures = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        lag = int(rng.integers(1, 6))
        spec = PlantedSpec(n=int(rng.integers(60, 300)), true_lag=lag,
                           cause_weights=tuple(rng.uniform(-1, 1, int(rng.integers(1, 6)))),
                           noise_sigma=float(rng.uniform(0, 2)), n_noise_frames=int(rng.integers(0, 15)),
                           seed=seed)
        data = generate_planted(spec)
        P = lag_sweep(data.frames, data.effect, [lag])
        model, _ = assemble_saci(data.frames, data.effect, lag, P)
        h = model.history
        if not (model.training_correlation >= abs(model.terms[0].p) - 1e-9
                and all(b > a + 1e-9 for a, b in zip(h, h[1:]))
                and h[-1] == model.training_correlation):
            failures.append(seed)
    record(3, "greedy-assembly guarantee", not failures, f"{100 - len(failures)}/100 fixtures monotone")


def test_04_sweep_oracle_equivalence():
    worst = 0.0
    mismatched_markers = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(8, 51))
        k = int(rng.integers(1, 11))
        X = rng.normal(size=(k, n))
        if seed % 10 == 0:
            X[0] = 1.5  # exercise the zero-variance path
        grid = TimeGrid(0, Granularity.DAY, n)
        frames = [SeriesFrame(grid, "c", f"m{j}", "N", X[j]) for j in range(k)]
        effect = SeriesFrame(grid, "e", "pd", "", rng.normal(size=n))
        lmax = min(5, n - 3)
        lags = range(-lmax, lmax + 1)
        P = lag_sweep(frames, effect, lags)
        for (lag, j), r in naive_sweep([list(row) for row in X], list(effect.values), lags).items():
            i = P.lags.index(lag)
            if r is None:
                mismatched_markers += not P.zero_variance[i, j]
            else:
                mismatched_markers += bool(P.zero_variance[i, j])
                worst = max(worst, abs(P.values[i, j] - r))
    ok = worst <= 1e-12 and mismatched_markers == 0
    record(4, "sweep/oracle equivalence", ok, f"max |diff| {worst:.2e} (<= 1e-12), marker mismatches {mismatched_markers}")


def test_05_pearson_properties():
    rng = np.random.default_rng(5)
    sym = bound = affine = ident = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 100))
        x = rng.normal(size=n) * rng.uniform(1e-3, 1e3)
        y = rng.normal(size=n) + rng.uniform(-1, 1) * x
        r = pearson(x, y)
        sym = max(sym, abs(r - pearson(y, x)))
        bound = max(bound, abs(r) - 1.0)
        a, b = rng.uniform(1e-3, 1e3), rng.uniform(-1e3, 1e3)
        affine = max(affine, abs(pearson(a * x + b, y) - r), abs(pearson(-a * x + b, y) + r))
        ident = max(ident, abs(pearson(x, x) - 1.0))
    ok = sym <= 1e-12 and bound <= 1e-12 and affine <= 1e-9 and ident == 0.0
    record(5, "pearson properties", ok,
           f"symmetry {sym:.1e}, bound excess {max(bound, 0):.1e}, affine {affine:.1e}, |r(x,x)-1| {ident:.1e}")


def test_06_transform_properties():
    rng = np.random.default_rng(6)
    idem = odd = bounded = True
    invariance = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 80))
        x = rng.normal(size=n) * 10 ** rng.uniform(-3, 6)
        present = rng.random(n) > 0.2
        f = SeriesFrame(TimeGrid(0, Granularity.DAY, n), "c", "m", "", x, present)
        once = max_abs_normalize(f)
        idem &= np.array_equal(max_abs_normalize(once).values, once.values)
        odd &= np.array_equal(signed_log(f.replace(values=-f.values)).values, -signed_log(f).values)
        bounded &= all(np.all(np.abs(v.values) <= 1.0) for v in expand_variants(f))
        full = SeriesFrame(f.grid, "c", "m", "", x)
        if n >= 3 and not np.all(x == x[0]):
            y = rng.normal(size=n)
            invariance = max(invariance, abs(pearson(max_abs_normalize(full).values, y) - pearson(full.values, y)))
    ok = idem and odd and bounded and invariance <= 1e-9
    record(6, "transform properties", ok,
           f"idempotent {idem}, odd {odd}, variants bounded {bounded}, pearson drift {invariance:.1e}")


def test_07_order_priority_sentiment():
    ex1 = match_ngrams(tokenize("not a bad thing"), [Lexicon.from_phrases("positive", ["not a bad thing"]),
                                                      Lexicon.from_phrases("negative", ["bad thing", "bad"])])
    ex2 = match_ngrams(tokenize("no good"), [Lexicon.from_phrases("negative", ["no good", "no"]),
                                              Lexicon.from_phrases("positive", ["good"])])
    ex_ok = ({c: [(m.start, m.stop) for m in ms] for c, ms in ex1.items()} == {"positive": [(0, 4)]}
             and {c: [(m.start, m.stop) for m in ms] for c, ms in ex2.items()} == {"negative": [(0, 2)]})

    rng = np.random.default_rng(7)
    vocab = [f"w{i}" for i in range(25)]

    def fuzz_lexicon(cat):
        grams = {" ".join(rng.choice(vocab, int(rng.integers(1, 4)))) for _ in range(int(rng.integers(1, 20)))}
        return Lexicon.from_phrases(cat, [(g, float(rng.uniform(0.1, 3))) for g in sorted(grams)])

    worst = 0.0
    for i in range(1000):
        lex = [fuzz_lexicon("positive"), fuzz_lexicon("negative")]
        text = " ".join(rng.choice(vocab, int(rng.integers(0, 40))))
        s = score_post(Post(i, "c", text), lex, log_scaling=bool(i % 2))
        worst = max(worst, abs(s.con - math.sqrt(s.pos * abs(s.neg))))
    ok = ex_ok and worst <= 1e-12
    record(7, "order-priority sentiment", ok, f"worked examples exact {ex_ok}, con identity max err {worst:.1e}")


def test_08_market_feature_oracle():
    rng = np.random.default_rng(8)
    grid = TimeGrid(0, Granularity.SECOND, 6)
    worst = 0.0
    structure_ok = True
    for _ in range(100):
        k = int(rng.integers(0, 101))
        raw = [(int(t), float(p), float(a), str(s)) for t, p, a, s in zip(
            rng.integers(-500, 6500, k), rng.uniform(1, 1e5, k), rng.uniform(1e-4, 50, k),
            rng.choice(["buy", "sell"], k))]
        got = aggregate_trades([Trade(*tr) for tr in raw], grid)
        for g, w in zip(got, brute_force_ohlcv(raw, 0, 1, 6)):
            if (g is None) != (w is None):
                structure_ok = False
                continue
            for name, v in (w or {}).items():
                gv = getattr(g, name)
                if (gv is None) != (v is None):
                    structure_ok = False
                elif v is not None:
                    worst = max(worst, abs(gv - v) / max(abs(v), 1e-300))
    pairs = rng.uniform(0, 1e6, size=(1000, 2))
    antisym = all(imbalance(a, b) == -imbalance(b, a) for a, b in pairs)
    ok = structure_ok and worst <= 1e-9 and antisym
    record(8, "market-feature oracle", ok,
           f"max rel err {worst:.1e} (<= 1e-9), presence agrees {structure_ok}, imbalance antisymmetric {antisym}")


def test_09_baselines(tmp_path):
    rng = np.random.default_rng(9)
    fkp_ok = True
    lkp_err = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 60))
        p = rng.uniform(1, 1e4) + np.cumsum(rng.normal(size=n))
        p = np.where(np.abs(p) < 1e-6, 1.0, p)
        actual = SeriesFrame(TimeGrid(0, Granularity.DAY, n), "m", "close", "", p)
        fkp = predict_fkp(actual)
        fkp_ok &= mape(fkp, actual) == 0.0 and directional_accuracy(fkp, actual) == 1.0
        expected = math.fsum(abs(p[t] - p[t - 1]) / abs(p[t]) for t in range(1, n)) / (n - 1)
        lkp_err = max(lkp_err, abs(mape(predict_lkp(actual), actual) - expected))

    data = generate_planted(PlantedSpec(n=500, true_lag=3, cause_weights=(1.0,), noise_sigma=0.0,
                                        n_noise_frames=20, seed=42))
    train = (0, 375)
    frames = [f.slice(*train) for f in data.frames]
    effect = data.effect.slice(*train)
    P = lag_sweep(frames, effect, [3])
    model, _ = assemble_saci(frames, effect, 3, P, train_span=train)
    da = directional_accuracy(saci_direction_predictor(model, data.frames, data.prices), data.prices, (375, 500))
    ok = fkp_ok and lkp_err <= 1e-12 and da == 1.0
    record(9, "baselines", ok, f"FKP exact {fkp_ok}, LKP mape err {lkp_err:.1e} (<= 1e-12), SACI held-out DA {da}")


def test_10_end_to_end_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        src, out = tmp_path / run / "synth", tmp_path / run / "out"
        assert main(["synth", "-o", str(src)]) == 0
        common = ["-o", str(out), "-s", f"frames={src / 'synth_frames.csv'}"]
        assert main(["saci", *common, "-s", f"effect={src / 'effect.csv'}"]) == 0
        assert main(["evaluate", *common, "-s", f"prices={src / 'prices.csv'}"]) == 0
        digests.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = digests[0] == digests[1]
    record(10, "end-to-end determinism", same and len(digests[0]) >= 6,
           f"{len(digests[0])} artifacts, byte-identical {same}")
