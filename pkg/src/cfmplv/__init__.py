"""Model-based phase locking values from noisy circular phase data.

Phase time series are modelled as wrapped versions of smooth real-valued
curves with hierarchical subject and channel effects. A Gibbs sampler gives
posterior draws of the denoised curves and hence of every pairwise PLV.
"""

__version__ = "0.1.0"

from .gibbs import ChainConfig, Hyperparams, ModelState, PosteriorChain, initialize, run_chain
from .phase_data import (
    CsvLayout, GenerativeTruth, PhaseDataset, TimeGrid, load_csv, save_csv, simulate_dataset,
    validate, wrap,
)
from .plv import PlvSummary, naive_plv, posterior_plv, summarize
from .spline_basis import BasisMatrix, SplineConfig, evaluate, evaluate_grid, make_config
from .wrapped_normal import choose_truncation, sample_wrap_count, wrapped_density

__all__ = [
    "ChainConfig", "Hyperparams", "ModelState", "PosteriorChain", "initialize", "run_chain",
    "CsvLayout", "GenerativeTruth", "PhaseDataset", "TimeGrid", "load_csv", "save_csv",
    "simulate_dataset", "validate", "wrap", "PlvSummary", "naive_plv", "posterior_plv",
    "summarize", "BasisMatrix", "SplineConfig", "evaluate", "evaluate_grid", "make_config",
    "choose_truncation", "sample_wrap_count", "wrapped_density",
]
