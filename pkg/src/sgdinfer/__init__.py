"""Online covariance estimation and statistical inference for averaged SGD.

The package provides a recursive de-biased covariance estimator for averaged
SGD iterates (O(p^2) per step, no Hessian required), online batch-means and
plug-in baselines, the standard experiment models (linear, logistic,
expectile regression, scalar mean) and a replication harness with confidence
intervals, coverage evaluation and rate-slope fits.
"""

from .backend import HAS_NUMBA, active_backend
from .baselines import (
    BatchMeansCovariance,
    NearSingularHessian,
    PluginCovariance,
    bm_finalize_raw,
    plugin_finalize_raw,
)
from .batching import (
    BatchSnapshot,
    BlockBatcher,
    batch_bounds_check,
    batch_lengths,
    bm_trigger,
    exact_block_anchors,
    scaled_trigger,
    threshold,
)
from .debias import (
    CovEstimate,
    DebiasCovariance,
    debias_finalize_raw,
    direct_estimate,
    oracle_mean_estimator,
)
from .harness import (
    ExperimentConfig,
    RunRecord,
    confidence_interval,
    config_from_file,
    coverage,
    emit_outputs,
    fit_log_slope,
    mean_model_rate_study,
    read_matrix,
    run_experiment,
    summarize,
    write_matrix,
)
from .models import (
    GroundTruth,
    ModelSpec,
    gaussian_expectile,
    gradient,
    ground_truth_sigma,
    hessian,
    loss,
    make_model,
    mc_moment_matrices,
    mc_sandwich_sigma,
    normal_cdf,
    quantile_std_normal,
    sample,
)
from .sgd import AveragedSgd, StepSchedule, sgd_step, step_size

__version__ = "0.1.0"
