import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saci.errors import InputFormatError, LexiconError, MissingCategory
from saci.lexicon import (
    Lexicon,
    Post,
    aggregate_channel,
    channel_weights,
    demo_lexicon_dir,
    load_lexicon,
    load_lexicon_dir,
    match_ngrams,
    representability,
    score_post,
    tokenize,
)
from saci.series import Granularity, TimeGrid

DAY = 86400


def test_tokenize():
    assert tokenize("Not a BAD thing!") == ["not", "a", "bad", "thing"]
    assert tokenize("") == []
    assert tokenize("no good") == ["no", "good"]
    assert tokenize("moon... to_the-moon") == ["moon", "to", "the", "moon"]


def test_tetragram_suppresses_parts():
    lex = [Lexicon.from_phrases("positive", ["not a bad thing"]),
           Lexicon.from_phrases("negative", ["bad thing", "bad"])]
    got = match_ngrams(["not", "a", "bad", "thing"], lex)
    assert list(got) == ["positive"]
    assert [(m.start, m.stop) for m in got["positive"]] == [(0, 4)]


def test_bigram_suppresses_unigrams():
    lex = [Lexicon.from_phrases("negative", ["no good", "no"]), Lexicon.from_phrases("positive", ["good"])]
    got = match_ngrams(["no", "good"], lex)
    assert list(got) == ["negative"]
    assert [(m.start, m.stop) for m in got["negative"]] == [(0, 2)]


def test_no_matches():
    assert match_ngrams(["hello", "world"], [Lexicon.from_phrases("positive", ["good"])]) == {}


def test_overlapping_equal_length_matches_both_kept():
    lex = [Lexicon.from_phrases("a", ["x y"]), Lexicon.from_phrases("b", ["y z"])]
    got = match_ngrams(["x", "y", "z"], lex)
    assert len(got["a"]) == 1 and len(got["b"]) == 1


def test_same_span_in_two_categories():
    lex = [Lexicon.from_phrases("negative", ["doomed"]), Lexicon.from_phrases("catastrophizing", ["doomed"])]
    got = match_ngrams(["we", "are", "doomed"], lex)
    assert set(got) == {"negative", "catastrophizing"}


def test_repeated_occurrences_counted():
    got = match_ngrams(tokenize("good good, not good"), [Lexicon.from_phrases("positive", ["good"]),
                                                       Lexicon.from_phrases("negative", ["not good"])])
    assert len(got["positive"]) == 2 and len(got["negative"]) == 1


def test_duplicate_ngram_rejected():
    with pytest.raises(LexiconError):
        Lexicon.from_phrases("positive", ["good", "Good"])
    with pytest.raises(LexiconError):
        Lexicon("x", {tuple("abcdefghi"): 1.0})


BASE = [Lexicon.from_phrases("positive", ["good", "not a bad thing"]),
        Lexicon.from_phrases("negative", ["bad", "bad thing", "no good", "no"])]


def test_score_not_a_bad_thing():
    s = score_post(Post(0, "c", "Not a bad thing"), BASE, log_scaling=False)
    assert s.pos == 0.25 and s.neg == 0.0 and s.sen == 1.0 and s.con == 0.0


def test_score_zero_hits():
    s = score_post(Post(0, "c", "hello there"), BASE)
    assert (s.sen, s.pos, s.neg, s.con) == (0, 0, 0, 0)
    s = score_post(Post(0, "c", ""), BASE)
    assert (s.sen, s.pos, s.neg, s.con, s.token_count) == (0, 0, 0, 0, 0)


def test_con_examples():
    s = score_post(Post(0, "c", "good bad"), BASE, log_scaling=False)
    assert s.pos == 0.5 and s.neg == -0.5 and s.con == 0.5 and s.sen == 0.0
    s = score_post(Post(0, "c", "good"), [Lexicon.from_phrases("positive", [("good", 1.0)]),
                                          Lexicon.from_phrases("negative", [("good", 1.0)])], log_scaling=False)
    assert s.con == 1.0
    assert math.sqrt(0.49 * abs(-0.25)) == pytest.approx(0.35, abs=1e-15)


def test_log_scaling():
    s = score_post(Post(0, "c", "good good good x x x x x x"), BASE, log_scaling=True)
    assert s.masses["positive"] == pytest.approx(math.log10(4))
    assert s.pos == pytest.approx(math.log10(4) / 9)


def test_entry_weight():
    lex = [Lexicon.from_phrases("positive", [("great", 2.5)]), Lexicon.from_phrases("negative", [])]
    s = score_post(Post(0, "c", "great"), lex, log_scaling=False)
    assert s.masses["positive"] == 2.5 and s.pos == 1.0


def test_missing_category():
    with pytest.raises(MissingCategory):
        score_post(Post(0, "c", "x"), [Lexicon.from_phrases("positive", ["good"])])
    s = score_post(Post(0, "c", "always"), [Lexicon.from_phrases("overgeneralizing", ["always"])], sentiment=False)
    assert s.categories == {"overgeneralizing": pytest.approx(math.log10(2))}


def test_adding_ngram_does_not_decrease_mass():
    text = "prices are going to zero and it is a total disaster"
    small = [Lexicon.from_phrases("positive", []), Lexicon.from_phrases("negative", ["disaster"])]
    big = [Lexicon.from_phrases("positive", []), Lexicon.from_phrases("negative", ["disaster", "going to zero"])]
    a = score_post(Post(0, "c", text), small, log_scaling=False).masses["negative"]
    b = score_post(Post(0, "c", text), big, log_scaling=False).masses["negative"]
    assert b >= a


WORDS = ["good", "bad", "not", "a", "thing", "no", "moon", "crash", "always", "x"]
fuzz_lexicons = st.builds(
    lambda pos, neg: [Lexicon.from_phrases("positive", sorted(pos)), Lexicon.from_phrases("negative", sorted(neg))],
    st.sets(st.lists(st.sampled_from(WORDS), min_size=1, max_size=4).map(" ".join), max_size=8),
    st.sets(st.lists(st.sampled_from(WORDS), min_size=1, max_size=4).map(" ".join), max_size=8),
)


@settings(max_examples=200, deadline=None)
@given(fuzz_lexicons, st.lists(st.sampled_from(WORDS), max_size=30), st.booleans())
def test_score_bounds_and_suppression(lex, words, log_scaling):
    text = " ".join(words)
    s = score_post(Post(0, "c", text), lex, log_scaling=log_scaling)
    assert 0 <= s.pos <= 1 and -1 <= s.neg <= 0 and -1 <= s.sen <= 1 and 0 <= s.con <= 1
    assert s.con == math.sqrt(s.pos * abs(s.neg))
    accepted = [m for ms in match_ngrams(tokenize(text), lex).values() for m in ms]
    for m in accepted:
        for other in accepted:
            if other is not m and other.length > m.length:
                assert not (other.start <= m.start and m.stop <= other.stop)
    again = score_post(Post(0, "c", text), lex, log_scaling=log_scaling)
    assert again == s


def test_aggregate_channel_mean_and_normalization():
    grid = TimeGrid(0, Granularity.DAY, 3)
    lex = [Lexicon.from_phrases("positive", ["good"]), Lexicon.from_phrases("negative", ["bad"])]
    scores = [score_post(Post(t, "ch", txt), lex, log_scaling=False) for t, txt in
              [(10, "good x x x x"), (20, "good good x x x"), (2 * DAY + 5, "bad bad bad bad bad")]]
    frames = {f.metric: f for f in aggregate_channel(scores, grid)}
    pos = frames["pos"]
    # bucket 0 mean pos = (0.2 + 0.4) / 2 = 0.3; normalized by max 0.3
    assert list(pos.present) == [True, False, True]
    assert pos.values[0] == pytest.approx(1.0) and pos.values[1] == 0.0
    neg = frames["neg"]
    assert list(neg.values) == [0.0, 0.0, -1.0]
    assert all(f.variant == "N" for f in frames.values())
    assert list(frames["post_count"].values) == [1.0, 0.0, 0.5]


def test_aggregate_normalizes_signed_means():
    grid = TimeGrid(0, Granularity.DAY, 3)
    lex = [Lexicon.from_phrases("positive", ["good"]), Lexicon.from_phrases("negative", ["bad"])]
    # bucket sen values 0.3, absent, -0.6
    s0 = score_post(Post(5, "ch", "good"), lex)
    s2 = score_post(Post(2 * DAY, "ch", "bad"), lex)
    s0.sen, s2.sen = 0.3, -0.6
    sen = {f.metric: f for f in aggregate_channel([s0, s2], grid)}["sen"]
    assert list(sen.values) == pytest.approx([0.5, 0.0, -1.0])
    assert list(sen.present) == [True, False, True]


def test_representability():
    grid = TimeGrid(0, Granularity.DAY, 10)
    lex = [Lexicon.from_phrases("positive", ["good"]), Lexicon.from_phrases("negative", ["bad"])]
    daily = [score_post(Post(d * DAY, "daily", "good"), lex) for d in range(10)]
    sparse = [score_post(Post(d * DAY, "sparse", "bad"), lex) for d in (1, 4, 4, 8)]
    frames = aggregate_channel(daily + sparse, grid)
    w = channel_weights(frames)
    assert w == {"daily": 1.0, "sparse": 0.3}
    assert representability([]) == 0.0


def test_load_lexicon(tmp_path):
    p = tmp_path / "catastrophizing.txt"
    p.write_text("# comment\ngoing to zero\t2\n\ndoomed\n")
    lex = load_lexicon(p)
    assert lex.category == "catastrophizing"
    assert lex.entries == {("going", "to", "zero"): 2.0, ("doomed",): 1.0}
    p.write_text("doomed\nDoomed\n")
    with pytest.raises(InputFormatError, match=":2:"):
        load_lexicon(p)


def test_demo_lexicons_load():
    cats = {lx.category for lx in load_lexicon_dir(demo_lexicon_dir())}
    assert {"positive", "negative", "labeling", "catastrophizing", "overgeneralizing"} <= cats
