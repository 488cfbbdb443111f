"""Neural-network survival models trained by maximum likelihood, with evaluation metrics."""

from .data import SubjectWeights, SurvivalDataset, event_count, read_csv, validate, write_csv
from .km import StepFunction, censoring_distribution, ipcw_weights, kaplan_meier
from .losses import (
    TieMethod,
    cox_neg_partial_log_likelihood,
    weibull_neg_log_likelihood,
    weibull_survival,
)
from .metrics import (
    Alternative,
    MetricResult,
    auc,
    brier,
    brier_integral,
    compare,
    concordance_index,
    confidence_interval,
    p_value,
)
from .momentum import MemoryBank, Momentum, MomentumPair
from .net import Mlp, TrainConfig, init, train
from .simulate import SimConfig, edge_case_suite, simulate_weibull_cox

__version__ = "0.1.0"
