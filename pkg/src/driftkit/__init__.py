"""Detect and quantify dataset shift with classifier-based KL estimates."""

__version__ = "0.1.0"

from .data import (AugmentedDataset, BinningRule, LabeledSamples, SplitDatasets, apply_binning,  # noqa: E402
                   augment_and_split, load_csv, load_pair, make_binning)
from .divergence import KLEstimates, ShiftStatistics, compute_all, estimate_kl, plugin_kl_y  # noqa: E402
from .errors import (BinningError, ConfigurationError, DataError, DriftkitError, FittingError,  # noqa: E402
                     IngestionError, SupportError, UsageError)
from .model import (ConditionalModel, ProbabilisticClassifier, fit_conditional, fit_logistic,  # noqa: E402
                    predict_proba, sample_conditional)
from .pipeline import RunConfig, ShiftReport, detect_shift, render_summary, run, write_report  # noqa: E402
from .ratio import FeatureView, RatioModel, fit_ratio, log_ratio  # noqa: E402
from .testing import Hypothesis, TestResult, p_value  # noqa: E402
