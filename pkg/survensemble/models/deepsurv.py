"""DeepSurv: a multilayer perceptron risk score trained on the Cox negative log partial likelihood."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch
from torch import nn

from survensemble.core import Dataset
from survensemble.errors import ConfigError, NonFiniteLoss
from survensemble.models.base import ModelConfig, ModelKind, ProportionalHazardsModel, breslow_log_cumhaz, check_range

logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass(frozen=True)
class DeepSurvConfig(ModelConfig):
    hidden: tuple[int, ...] = (60, 10)
    l2: float = 0.0
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0

    def validate(self) -> None:
        if not self.hidden:
            raise ConfigError("deepsurv.hidden needs at least one layer")
        for width in self.hidden:
            check_range("deepsurv", "hidden", width, 1)
        check_range("deepsurv", "l2", self.l2, 0.0)
        check_range("deepsurv", "learning_rate", self.learning_rate, 0.0)
        check_range("deepsurv", "epochs", self.epochs, 0)


def build_network(n_features: int, hidden: tuple[int, ...], zero_output: bool = True) -> nn.Sequential:
    layers: list[nn.Module] = []
    width = n_features
    for units in hidden:
        layers += [nn.Linear(width, units), nn.ReLU()]
        width = units
    output = nn.Linear(width, 1)
    if zero_output:
        nn.init.zeros_(output.weight)
        nn.init.zeros_(output.bias)
    layers.append(output)
    return nn.Sequential(*layers).to(DTYPE)


def deepsurv_loss(
    network: nn.Module, X: torch.Tensor, times: torch.Tensor, events: torch.Tensor, l2: float = 0.0
) -> torch.Tensor:
    """-(1/L) sum over events of [r_i - log sum_{y_j >= y_i} exp(r_j)] + l2 * ||theta||^2."""
    risk = network(X).squeeze(-1)
    order = torch.argsort(times, stable=True)
    sorted_times = times[order]
    tail = torch.logcumsumexp(risk[order].flip(0), dim=0).flip(0)
    start = torch.searchsorted(sorted_times, times[events])
    partial = (risk[events] - tail[start]).sum() / events.sum()
    penalty = sum((p**2).sum() for p in network.parameters())
    return -partial + l2 * penalty


@dataclass(frozen=True, eq=False)
class DeepSurvModel(ProportionalHazardsModel):
    kind = ModelKind.DEEPSURV

    network: nn.Sequential
    hidden: tuple[int, ...]
    l2: float = 0.0
    loss_trace: tuple[float, ...] = field(default=())

    def log_partial_hazard(self, X: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.network(torch.as_tensor(np.array(X, dtype=float))).squeeze(-1).numpy().copy()

    def parameters(self) -> dict[str, Any]:
        return {
            "hidden": list(self.hidden),
            "l2": self.l2,
            "state": {name: value.tolist() for name, value in self.network.state_dict().items()},
            "log_baseline_cumhaz": self.log_baseline_cumhaz.tolist(),
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> DeepSurvModel:
        hidden = tuple(parameters["hidden"])
        network = build_network(n_features, hidden)
        network.load_state_dict({k: torch.tensor(v, dtype=DTYPE) for k, v in parameters["state"].items()})
        network.eval()
        return cls(
            training_grid=np.asarray(training_grid, dtype=float),
            n_features=n_features,
            log_baseline_cumhaz=np.asarray(parameters["log_baseline_cumhaz"], dtype=float),
            network=network,
            hidden=hidden,
            l2=float(parameters["l2"]),
            loss_trace=tuple(parameters.get("loss_trace", ())),
        )


def fit_deepsurv(dataset: Dataset, config: DeepSurvConfig | None = None) -> DeepSurvModel:
    config = config or DeepSurvConfig()
    dataset.require_events()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        network = build_network(dataset.d, config.hidden)
    X = torch.as_tensor(dataset.covariates.copy())
    times = torch.as_tensor(dataset.times.copy())
    events = torch.as_tensor(dataset.events.copy())
    optimizer = torch.optim.SGD(network.parameters(), lr=config.learning_rate)
    trace: list[float] = []
    for epoch in range(config.epochs):
        optimizer.zero_grad()
        loss = deepsurv_loss(network, X, times, events, config.l2)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"deepsurv loss became {loss.item()} at epoch {epoch}; lower the learning rate")
        loss.backward()
        optimizer.step()
        trace.append(loss.item())
    network.eval()
    if trace:
        logger.debug("deepsurv trained %d epochs, loss %.6f -> %.6f", config.epochs, trace[0], trace[-1])
    with torch.no_grad():
        risk = network(X).squeeze(-1).numpy().copy()
    if not np.all(np.isfinite(risk)):
        raise NonFiniteLoss("deepsurv produced non-finite risk scores; lower the learning rate")
    grid, log_cumhaz = breslow_log_cumhaz(dataset.times, dataset.events, risk)
    return DeepSurvModel(
        training_grid=grid,
        n_features=dataset.d,
        log_baseline_cumhaz=log_cumhaz,
        network=network,
        hidden=config.hidden,
        l2=config.l2,
        loss_trace=tuple(trace),
    )
