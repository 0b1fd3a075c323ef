"""HSIC-regularized out-of-distribution detection on small vector data.

The pieces are deliberately separate so each can be checked on its own:
``kernels`` and ``independence`` hold the dependence estimators,
``encoder`` trains the MLP with hand-written gradients, ``scoring`` and
``metrics`` turn features into detection numbers, and ``experiment`` ties
them together over seeds and sweeps.
"""
from .data import BundleConfig, DatasetBundle, DistortConfig, make_gaussian_bundle
from .encoder import EncoderParams, TrainConfig, train
from .experiment import ExperimentPlan, Method, Sweep, run_plan, sweep_summary
from .independence import hsic_biased, hsic_linear_covariance, mmd_biased
from .kernels import KernelSpec, kernel_matrix
from .metrics import MetricsReport, evaluate
from .scoring import class_means, cor_scores, msp_scores

__version__ = "0.1.0"

__all__ = [
    "BundleConfig",
    "DatasetBundle",
    "DistortConfig",
    "EncoderParams",
    "ExperimentPlan",
    "KernelSpec",
    "Method",
    "MetricsReport",
    "Sweep",
    "TrainConfig",
    "class_means",
    "cor_scores",
    "evaluate",
    "hsic_biased",
    "hsic_linear_covariance",
    "kernel_matrix",
    "make_gaussian_bundle",
    "mmd_biased",
    "msp_scores",
    "run_plan",
    "sweep_summary",
    "train",
]
