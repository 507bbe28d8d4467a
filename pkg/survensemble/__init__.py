"""Survival predictors, censoring-aware scores and an exponentiated-gradient ensemble over them."""

from survensemble.core import Dataset, RiskScore, Subject, SurvivalCurve, kaplan_meier, validate_dataset
from survensemble.ensemble import EnsembleModel, fit_cross_fitted_ensemble, fit_ensemble, predict_ensemble
from survensemble.models import ModelKind, ModelSpec, fit_model, load_model, predict_risk, predict_survival
from survensemble.scoring import ScoreKind, concordance_index, integrated_brier_score
from survensemble.simulate import GeneratorSpec, ScenarioSpec, generate, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EnsembleModel",
    "GeneratorSpec",
    "ModelKind",
    "ModelSpec",
    "RiskScore",
    "ScenarioSpec",
    "ScoreKind",
    "Subject",
    "SurvivalCurve",
    "concordance_index",
    "fit_cross_fitted_ensemble",
    "fit_ensemble",
    "fit_model",
    "generate",
    "integrated_brier_score",
    "kaplan_meier",
    "load_model",
    "predict_ensemble",
    "predict_risk",
    "predict_survival",
    "run_scenario",
    "validate_dataset",
]
