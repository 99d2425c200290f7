"""Relative-error coresets for linear classification via l1 Lewis weight sampling."""

from .coreset import Coreset, coreset_error, derive_seed, draw_coreset, full_coreset
from .data import (
    IndexInstance,
    LabeledMatrix,
    fold_labels,
    gen_index_instance,
    gen_synthetic,
    load_csv,
    load_libsvm,
    write_csv,
    write_libsvm,
)
from .linalg import leverage_scores, pseudo_solve, qr_factor
from .losses import (
    HINGE,
    LOGISTIC,
    NO_REG,
    RELU,
    NiceHinge,
    Regularizer,
    estimate_mu,
    get_loss,
    loss_gradient,
    total_loss,
    weighted_loss,
)
from .solve import SolveConfig, SolveResult, minimize, relative_loss
from .weights import (
    LewisConfig,
    WeightVector,
    distribution_ratio_histogram,
    lewis_weights,
    sampling_probabilities,
    sqrt_leverage_distribution,
    uniform_distribution,
)

__version__ = "0.1.0"
