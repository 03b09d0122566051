"""Gaussian-process binary classification with random (RFF) and learned (VFF)
Fourier features, trained by variational inference."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    TransformSpec,
    apply_transform,
    balanced_sample,
    fit_pca,
    fit_preprocessing,
    fit_standardize,
    load_csv,
    overall_accuracy,
)
from .errors import (
    CorruptModelError,
    DomainError,
    IngestionError,
    NumericalError,
    UnsupportedVersionError,
)
from .features import FrequencyBasis, approx_kernel, project, sample_frequencies, se_kernel
from .model import TrainedModel, load, predict_label, predict_proba, save
from .optim import OptimizerConfig, cg_minimize, check_gradient
from .trainer import TrainConfig, TrainTrace, fit, init_sigma
from .variational import (
    compute_posterior,
    lambda_of_xi,
    log_bound,
    objective_gradient,
    sigmoid_bound_rhs,
    update_xi,
)
