"""Sample-efficient omniprediction for proper losses on binary outcomes.

Fit per-threshold base predictors, ensemble them with either the online
two-player game or the direct merge scheme (with calibrated-multiaccuracy
baselines for comparison), and measure the worst-case excess loss over the
weighted 0-1 loss grid.
"""

from .calma import (
    AuxiliaryClass,
    BucketedPredictor,
    CalmaGamePredictor,
    calma_boost,
    calma_game,
    ece,
    ma_error,
)
from .dataio import (
    FiniteDistributionSpec,
    QuantileForecast,
    gen_simulated,
    interpolate_cdf,
    load_dataset,
    load_forecasts,
    load_quantiles,
    prob_nonzero_sale,
    save_dataset,
    simulated_spec,
)
from .ensemble import (
    GridLeaf,
    MergedPredictor,
    MergeNode,
    ensemble_scheme,
    evaluate_merged,
    merge,
    verify_switch_structure,
)
from .errors import (
    NumericError,
    OmnipredError,
    UnseenCovariateError,
    UnsupportedDimensionError,
    ValidationError,
)
from .estimators import (
    BestBaseOmnipredictor,
    CalibratedMultiaccuracyOmnipredictor,
    DirectEnsembleOmnipredictor,
    ThresholdERMFitter,
    TwoPlayerOmnipredictor,
)
from .evaluation import (
    OmniReport,
    best_base_model,
    omni_error,
    population_omni_error,
    l1_sandwich,
)
from .game import GamePredictor, hedge_update, predict_game, run_two_player, solve_minmax
from .grids import ThetaGrid, default_grid_size, round_to_grid
from .losses import MixtureMeasure, expected_weighted_loss, mixture_loss, weighted_loss
from .predictors import (
    AffinePredictor,
    BasePredictorSet,
    ConstantPredictor,
    Dataset,
    GridDistribution,
    LookupPredictor,
    RecodedPredictor,
    enumerate_linear_candidates,
    erm_fit,
    fit_base_set,
)
from .sweep import SweepConfig, run_sweep, write_sweep_csv

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
