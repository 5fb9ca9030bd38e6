"""Generalized Gaussian process modeling for binary time series.

A latent Gaussian field links computer-experiment inputs to serially
correlated binary outputs through a logistic model with autoregressive and
input-interaction terms.  The package provides penalized quasi-likelihood
estimation with REML covariance learning, logit-normal predictive
distributions with Monte Carlo uncertainty quantification, dynamic
emulation of new binary series, and the simulation/benchmark harness that
exercises them.
"""

from .estimation import (Coefficients, CovParams, FitOptions, FitState,
                         FittedModel, fit, iwls_step, reml_negloglik,
                         working_response)
from .inference import CoefReport, coef_report, information_matrix
from .kernel import CorrMatrix, KernelSpec, corr_matrix, cross_corr, kernel_eval
from .logitnormal import kappa, quantile, sample, tau
from .metrics import (ScoreReport, baseline_glm, cross_validate, fit_baseline,
                      proper_scores, rmspe)
from .panel import (BinaryPanel, DesignMatrix, InputDesign, ModelOrder,
                    build_design, load_panel)
from .prediction import (ChainResult, ConditionalLaw, EmulationResult,
                         MHConfig, PredictiveSummary, bootstrap_binary,
                         conditional_law, emulate_series, mh_sample_probs,
                         mmspe_given_p, predict_at, sample_chain)
from .simgen import (SimulatedPanel, TruthSpec, gen_demo_1d,
                     gen_friedman_panel, gen_gp_panel, reference_gp_truth)
from .studies import run_study

__version__ = "0.1.0"

__all__ = [
    "BinaryPanel", "ChainResult", "CoefReport", "Coefficients",
    "ConditionalLaw", "CorrMatrix", "CovParams", "DesignMatrix",
    "EmulationResult", "FitOptions", "FitState", "FittedModel",
    "InputDesign", "KernelSpec", "MHConfig", "ModelOrder",
    "PredictiveSummary", "ScoreReport", "SimulatedPanel", "TruthSpec",
    "baseline_glm", "bootstrap_binary", "build_design", "coef_report",
    "conditional_law", "corr_matrix", "cross_corr", "cross_validate",
    "emulate_series", "fit", "fit_baseline", "gen_demo_1d",
    "gen_friedman_panel", "gen_gp_panel", "information_matrix",
    "iwls_step", "kappa", "kernel_eval", "load_panel", "mh_sample_probs",
    "mmspe_given_p", "predict_at", "proper_scores", "quantile",
    "reference_gp_truth", "reml_negloglik", "rmspe", "run_study", "sample",
    "sample_chain", "tau", "working_response",
]
