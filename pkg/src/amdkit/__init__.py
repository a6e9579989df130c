"""Ablation-mask distributions for small multitask feed-forward networks.

Train a model whose task representations can be causally probed, compute the
Bayesian posterior over binary ablation masks for each task, and derive
entropy, mutual-information, and distance analyses from those posteriors.
"""

__version__ = "0.1.0"

from .amd import (CorrectnessEstimate, Mask, MaskDistribution, likelihood_value,
                  log_likelihood, posterior_exact, posterior_mcmc,
                  task_mask_accuracy)
from .datasets import Dataset, SyntheticConfig, generate_synthetic, load_dataset
from .infotheory import (MIReport, TaskPosterior, TaskRepresentationMetrics,
                         joint_entropy, marginals, metrics_bundle,
                         normalized_mi, reverse_task_posterior)
from .isc import Hyperparams, ISCModel, ModelDims, TrainingTrace, train
from .similarity import (DistanceMatrix, TransportPlan, mpc, rsa, spearman,
                         sym_kl, vector_distances, wasserstein_hamming)

__all__ = [
    "__version__",
    "CorrectnessEstimate", "Mask", "MaskDistribution", "likelihood_value",
    "log_likelihood", "posterior_exact", "posterior_mcmc", "task_mask_accuracy",
    "Dataset", "SyntheticConfig", "generate_synthetic", "load_dataset",
    "MIReport", "TaskPosterior", "TaskRepresentationMetrics", "joint_entropy",
    "marginals", "metrics_bundle", "normalized_mi", "reverse_task_posterior",
    "Hyperparams", "ISCModel", "ModelDims", "TrainingTrace", "train",
    "DistanceMatrix", "TransportPlan", "mpc", "rsa", "spearman", "sym_kl",
    "vector_distances", "wasserstein_hamming",
]
