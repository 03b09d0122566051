"""Training loop for the RFF and VFF classifiers.

Starting from ``xi = 1``, ``gamma = 1`` and a length-scale equal to the mean
pairwise distance of a data subset, each outer iteration

1. moves ``xi`` to ``sqrt(diag(Z Sigma Z') + (Z mu)^2)``, then
2. runs conjugate gradients on the feature parameters and ``gamma`` with
   ``xi`` held fixed, warm-started from the previous values,

until the relative change of the evidence bound falls below ``rel_tol``.
Both steps can only raise the bound, so the recorded sequence is monotone.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .data import Dataset, TransformSpec, apply_transform
from .errors import DomainError, NumericalError
from .features import BasisMode, FrequencyBasis, sample_frequencies
from .model import TrainedModel
from .optim import OptimizerConfig, cg_minimize
from .variational import EvidenceObjective, compute_posterior, log_bound, update_xi

__all__ = ["TrainConfig", "TrainStatus", "IterationRecord", "TrainTrace", "init_sigma", "fit"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "rff"
    D: int = 100
    seed: int = 0
    max_outer_iters: int = 50
    rel_tol: float = 1e-5
    median_subset: int = 1000
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ridge_on_V: bool = False

    def __post_init__(self):
        if self.mode not in ("rff", "vff"):
            raise DomainError(f"mode must be 'rff' or 'vff', got {self.mode!r}")
        if self.D < 1:
            raise DomainError(f"D must be >= 1, got {self.D}")
        if self.max_outer_iters < 1:
            raise DomainError("max_outer_iters must be >= 1")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.median_subset < 2:
            raise DomainError("median_subset must be >= 2")


class TrainStatus(str, enum.Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    log_F: float
    sigma_or_V_norm: float
    gamma: float
    wall_time: float
    evals: int


@dataclass
class TrainTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: TrainStatus = TrainStatus.BUDGET_EXHAUSTED
    flags: list[str] = field(default_factory=list)

    @property
    def log_F(self) -> np.ndarray:
        return np.array([r.log_F for r in self.records])

    def is_monotone(self, rel_slack: float = 1e-8) -> bool:
        lf = self.log_F
        return bool(np.all(lf[1:] >= lf[:-1] - rel_slack * np.abs(lf[:-1])))


def init_sigma(X, subset_size: int = 1000, seed: int = 0) -> tuple[float, bool]:
    """Mean pairwise Euclidean distance over a random subset of rows.

    Rows are put in lexicographic order before sampling, so the result does
    not depend on the order of the data.  Returns ``(sigma, ok)``; when all
    selected rows coincide the fallback ``(1.0, False)`` is returned.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise DomainError("need at least two points to initialize the length-scale")
    m = min(int(subset_size), n)
    if m < n:
        order = np.lexsort(X.T[::-1])
        rng = np.random.Generator(np.random.PCG64(seed))
        X = X[order[np.sort(rng.choice(n, size=m, replace=False))]]
    dist = float(np.mean(pdist(X)))
    if not dist > 0:
        return 1.0, False
    return dist, True


def _params(objective: EvidenceObjective, theta):
    W, sigma, gamma = objective.unpack(theta)
    scale = sigma if objective.mode == "rff" else float(np.linalg.norm(W))
    return W, sigma, gamma, scale


def fit(dataset: Dataset, config: TrainConfig | None = None, preprocessing: TransformSpec | None = None):
    """Train a classifier.

    Parameters
    ----------
    dataset : Dataset
        Raw training data.  Class balance is not enforced here.
    config : TrainConfig, optional
    preprocessing : TransformSpec, optional
        Already-fitted transform applied to ``dataset.X`` before training and
        stored on the model for prediction.

    Returns
    -------
    (TrainedModel, TrainTrace)

    Raises
    ------
    NumericalError
        With ``iteration`` set to the outer iteration that failed.
    """
    config = config or TrainConfig()
    if preprocessing is None:
        preprocessing = TransformSpec.identity(dataset.d)
    X = apply_transform(preprocessing, dataset.X)
    y = dataset.y.astype(np.float64)
    n, d = X.shape
    if n < 2:
        raise DomainError("need at least two training instances")

    trace = TrainTrace()
    if np.all(y == y[0]):
        trace.flags.append("single_class")
        log.warning("training data contains a single class")

    sigma0, ok = init_sigma(X, config.median_subset, config.seed)
    if not ok:
        trace.flags.append("sigma_fallback")
        log.warning("all sampled points coincide; length-scale initialized to 1.0")
    basis0 = sample_frequencies(config.D, d, config.seed)
    xi = np.ones(n)
    objective = EvidenceObjective(X, y, xi, basis0.W, config.mode, ridge=config.ridge_on_V)
    theta = objective.pack(sigma0, 1.0)

    start = time.perf_counter()
    k = 0
    try:
        Z = objective.features(theta)
        _, _, gamma, scale = _params(objective, theta)
        post = compute_posterior(Z, y, gamma, xi)
        prev = log_bound(Z, y, gamma, xi, post).log_F
        trace.records.append(IterationRecord(0, prev, scale, gamma, time.perf_counter() - start, 0))
        for k in range(1, config.max_outer_iters + 1):
            xi = update_xi(Z, post)
            objective = EvidenceObjective(X, y, xi, basis0.W, config.mode, ridge=config.ridge_on_V)
            res = cg_minimize(objective, theta, config.optimizer)
            theta = res.x
            Z = objective.features(theta)
            _, _, gamma, scale = _params(objective, theta)
            post = compute_posterior(Z, y, gamma, xi)
            cur = log_bound(Z, y, gamma, xi, post).log_F
            trace.records.append(IterationRecord(k, cur, scale, gamma, time.perf_counter() - start, res.evals))
            log.debug("iter %d log_F=%.10g gamma=%.4g scale=%.4g evals=%d", k, cur, gamma, scale, res.evals)
            if abs(cur - prev) <= config.rel_tol * abs(prev):
                trace.status = TrainStatus.CONVERGED
                break
            prev = cur
    except NumericalError as exc:
        exc.iteration = k
        raise

    W, sigma, gamma, _ = _params(objective, theta)
    if config.mode == "rff":
        basis = basis0
    else:
        basis = FrequencyBasis(W, BasisMode.LEARNABLE, config.seed)
    meta = {
        "n": int(n),
        "d": int(d),
        "seed": int(config.seed),
        "outer_iters": int(trace.records[-1].iteration),
        "final_log_F": float(trace.records[-1].log_F),
        "status": trace.status.value,
        "sigma_init": float(sigma0),
        "flags": list(trace.flags),
    }
    model = TrainedModel(
        mode=config.mode,
        basis=basis,
        sigma=float(sigma) if config.mode == "rff" else 1.0,
        gamma=float(gamma),
        mu=post.mu.copy(),
        Sigma=post.Sigma.copy(),
        preprocessing=preprocessing,
        train_meta=meta,
        n_train=n,
    )
    return model, trace
