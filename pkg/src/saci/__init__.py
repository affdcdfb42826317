"""Lagged-correlation causal analysis of market and media time series.

The toolkit turns raw trades, order book snapshots and media posts into aligned
metric frames, measures how each frame's correlation with a price-difference
effect varies with lag, and greedily assembles a synthetic additive cause
indicator (SACI) from the best-correlated frames.
"""

from .causal import (
    AssemblyPolicy,
    CorrelationMatrix,
    SaciModel,
    Term,
    apply_saci,
    assemble_saci,
    lag_sweep,
    saci_lag_profile,
)
from .evaluation import (
    PredictionSeries,
    directional_accuracy,
    mape,
    predict_fkp,
    predict_lkp,
    saci_direction_predictor,
)
from .lexicon import Lexicon, Post, PostScores, aggregate_channel, match_ngrams, representability, score_post, tokenize
from .market import (
    LobFeatures,
    LobSnapshot,
    OhlcvExtended,
    Trade,
    aggregate_trades,
    imbalance,
    lob_feature_frames,
    price_difference,
    trade_metric_frames,
)
from .series import EffectSeries, Granularity, SeriesFrame, TimeGrid, build_grid, lagged_pearson, pearson
from .synth import PlantedSpec, generate_planted
from .transforms import differentiate, expand_variants, max_abs_normalize, signed_log

__version__ = "0.1.0"
