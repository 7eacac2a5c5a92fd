"""Bartlett/Welch spectral estimation with non-asymptotic error certificates for L-mixing data."""

from .bounds import (
    BoundReport,
    PowerLawFit,
    bias_bound_bartlett,
    bias_bound_welch,
    bound_report,
    confidence_radius,
    deviation_bound,
    deviation_constant,
    fit_power_law,
    outer_product_mixing,
    power_law_cover,
    segment_mixing,
)
from .estimators import (
    EstimatorState,
    RunningEstimate,
    SpectralEstimate,
    TimeSeries,
    WindowSpec,
    batch_estimate,
    data_budget,
    hann_window,
    make_window,
    segment_transform,
    streaming_run,
    streaming_update,
)
from .harness import ExperimentConfig, ExperimentResult, export_result, run_experiment, slope_fit
from .mixing import (
    LinearProcessModel,
    MarkovChainModel,
    MixingProfile,
    doeblin_coefficient,
    filter_profile,
    markov_profile,
    stationary_distribution,
    table_profile,
    two_state_example,
)
from .models import (
    expected_estimate,
    markov_autocovariance,
    simulate_linear_process,
    simulate_markov,
    true_psd,
)

__version__ = "0.1.0"
