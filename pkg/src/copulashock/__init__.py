"""Copula-based shock detection for asset markets.

Rolling windows of asset returns are summarised as empirical copulae
between uniformly sampled portfolio return and volatility; a
diagonal-band mass ratio flags inverted association, long runs of which
mark warning and crisis periods. Window copulae can be clustered by
transport distance or corner features, and reconstructed from a corner
block via PSD quadratic regression.
"""

from ._kernels import HAS_NUMBA, NUMBA_ACTIVE, derive_substream
from .clustering import (
    ClusterAssignment,
    affinity,
    corner_feature_matrix,
    feature_distance_matrix,
    kmedoids,
    spectral_clusters,
)
from .copula import (
    CopulaGrid,
    equal_mass_thresholds,
    estimate_copula,
    load_copula_csv,
    save_copula_csv,
)
from .data import (
    ReturnsTable,
    Window,
    WindowMoments,
    load_returns_csv,
    prices_to_returns,
    rolling_windows,
    window_moments,
)
from .indicator import (
    BandGeometry,
    IndicatorSeries,
    MarketPeriod,
    band_masks,
    classify_periods,
    corner_features,
    indicator,
    indicator_series,
    window_grids,
)
from .regression import (
    CopulaModel,
    CornerSpec,
    QuadraticCellModel,
    extract_training_set,
    fit_cell_model,
    fit_copula_model,
    indicator_from_model,
    load_model,
    predict_copula,
    save_model,
)
from .sampling import (
    EvaluatedSamples,
    eval_portfolios,
    sample_and_eval,
    sample_uniform_simplex,
)
from .transport import distance_matrix, emd, ground_distance_matrix, transport_cost

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "NUMBA_ACTIVE",
    "derive_substream",
    "ClusterAssignment",
    "affinity",
    "corner_feature_matrix",
    "feature_distance_matrix",
    "kmedoids",
    "spectral_clusters",
    "CopulaGrid",
    "equal_mass_thresholds",
    "estimate_copula",
    "load_copula_csv",
    "save_copula_csv",
    "ReturnsTable",
    "Window",
    "WindowMoments",
    "load_returns_csv",
    "prices_to_returns",
    "rolling_windows",
    "window_moments",
    "BandGeometry",
    "IndicatorSeries",
    "MarketPeriod",
    "band_masks",
    "classify_periods",
    "corner_features",
    "indicator",
    "indicator_series",
    "window_grids",
    "CopulaModel",
    "CornerSpec",
    "QuadraticCellModel",
    "extract_training_set",
    "fit_cell_model",
    "fit_copula_model",
    "indicator_from_model",
    "load_model",
    "predict_copula",
    "save_model",
    "EvaluatedSamples",
    "eval_portfolios",
    "sample_and_eval",
    "sample_uniform_simplex",
    "distance_matrix",
    "emd",
    "ground_distance_matrix",
    "transport_cost",
    "__version__",
]
