"""The six survival predictors and a registry keyed by model kind."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from survensemble.core import Dataset
from survensemble.errors import ConfigError
from survensemble.models.aalen import AalenConfig, AalenModel, fit_aalen
from survensemble.models.base import (
    FittedModel,
    ModelConfig,
    ModelKind,
    SurvivalPredictor,
    predict_risk,
    predict_survival,
)
from survensemble.models.cox import CoxConfig, CoxModel, fit_cox
from survensemble.models.deepsurv import DeepSurvConfig, DeepSurvModel, fit_deepsurv
from survensemble.models.gbc import GbcConfig, GbcModel, fit_gbc
from survensemble.models.rsf import RsfConfig, RsfModel, fit_rsf
from survensemble.models.weibull_aft import WeibullAftConfig, WeibullAftModel, fit_weibull_aft

MODEL_FITTERS: dict[ModelKind, tuple[Callable[[Dataset, Any], FittedModel], type[ModelConfig]]] = {
    ModelKind.COX: (fit_cox, CoxConfig),
    ModelKind.GBC: (fit_gbc, GbcConfig),
    ModelKind.RSF: (fit_rsf, RsfConfig),
    ModelKind.WEIBULL_AFT: (fit_weibull_aft, WeibullAftConfig),
    ModelKind.AALEN: (fit_aalen, AalenConfig),
    ModelKind.DEEPSURV: (fit_deepsurv, DeepSurvConfig),
}

MODEL_CLASSES: dict[ModelKind, type[FittedModel]] = {
    ModelKind.COX: CoxModel,
    ModelKind.GBC: GbcModel,
    ModelKind.RSF: RsfModel,
    ModelKind.WEIBULL_AFT: WeibullAftModel,
    ModelKind.AALEN: AalenModel,
    ModelKind.DEEPSURV: DeepSurvModel,
}


def model_kind(name: str) -> ModelKind:
    try:
        return ModelKind(name)
    except ValueError:
        raise ConfigError(f"unknown model kind {name!r}; expected one of {[k.value for k in ModelKind]}") from None


def make_config(kind: ModelKind | str, raw: Mapping[str, Any] | None = None) -> ModelConfig:
    _, config_cls = MODEL_FITTERS[model_kind(kind)]
    return config_cls.from_dict(dict(raw or {}))


def fit_model(kind: ModelKind | str, dataset: Dataset, config: ModelConfig | Mapping[str, Any] | None = None) -> FittedModel:
    fit, config_cls = MODEL_FITTERS[model_kind(kind)]
    if not isinstance(config, config_cls):
        config = config_cls.from_dict(dict(config or {}))
    return fit(dataset, config)


@dataclass(frozen=True)
class ModelSpec:
    """A named model variant: which fitter to run and with which config."""

    name: str
    kind: ModelKind
    config: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | str) -> ModelSpec:
        if isinstance(raw, str):
            raw = {"kind": raw}
        unknown = sorted(set(raw) - {"name", "kind", "config"})
        if unknown:
            raise ConfigError(f"model entry: unknown keys {unknown}")
        kind = model_kind(raw["kind"])
        config = dict(raw.get("config") or {})
        make_config(kind, config)
        return cls(name=str(raw.get("name", kind.value)), kind=kind, config=config)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind.value, "config": dict(self.config)}

    def fit(self, dataset: Dataset) -> FittedModel:
        return fit_model(self.kind, dataset, self.config)


def load_model(document: str | Path | Mapping[str, Any]) -> FittedModel:
    """Rebuild a fitted model from its JSON document, a path to one, or the parsed dict."""
    if isinstance(document, Path):
        document = document.read_text()
    if isinstance(document, str):
        document = json.loads(document)
    model_cls = MODEL_CLASSES[model_kind(document["kind"])]
    return model_cls.from_parameters(int(document["n_features"]), document["training_grid"], document["parameters"])


__all__ = [
    "MODEL_CLASSES",
    "MODEL_FITTERS",
    "FittedModel",
    "ModelConfig",
    "ModelKind",
    "ModelSpec",
    "SurvivalPredictor",
    "fit_model",
    "load_model",
    "make_config",
    "model_kind",
    "predict_risk",
    "predict_survival",
]
