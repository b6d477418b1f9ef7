"""Attribution methods for static text classifiers."""

from .attribution import Attribution, LimeConfig, LimeExplanation, lime_explain, mean_abs_shap, pdp, shap_linear, shap_values
from .logreg import FitInfo, LinearModel, LogRegConfig, decision_function, predict_proba, train_logreg
from .stability import StabilityConfig, StabilityResult, spearman_rho, stability_score, top_k_union_rho
from .tfidf import TfIdfConfig, TfIdfModel, fit_tfidf, transform, transform_many

__all__ = [
    "Attribution",
    "FitInfo",
    "LimeConfig",
    "LimeExplanation",
    "LinearModel",
    "LogRegConfig",
    "StabilityConfig",
    "StabilityResult",
    "TfIdfConfig",
    "TfIdfModel",
    "decision_function",
    "fit_tfidf",
    "lime_explain",
    "mean_abs_shap",
    "pdp",
    "predict_proba",
    "shap_linear",
    "shap_values",
    "spearman_rho",
    "stability_score",
    "top_k_union_rho",
    "train_logreg",
    "transform",
    "transform_many",
]
