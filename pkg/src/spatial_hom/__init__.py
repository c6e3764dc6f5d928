"""Separation sensing with momentum-resolved two-photon interference."""
from .detection import DetectorModel, SceneParams, bucket_probs, joint_density
from .estimator import TrialConfig, log_likelihood, mle, mle_bucket, run_trials
from .information import (crb, fi_contribution, fisher_asymptote, fisher_nonresolving,
                          fisher_partial, fisher_report, fisher_resolving, fisher_single_camera)
from .sampler import sample_batch
from .wavepacket import envelope, make_gaussian, make_tabulated, qfi

__all__ = [
    "DetectorModel", "SceneParams", "TrialConfig", "bucket_probs", "crb", "envelope",
    "fi_contribution", "fisher_asymptote", "fisher_nonresolving", "fisher_partial",
    "fisher_report", "fisher_resolving", "fisher_single_camera", "joint_density",
    "log_likelihood", "make_gaussian", "make_tabulated", "mle", "mle_bucket", "qfi",
    "run_trials", "sample_batch",
]
