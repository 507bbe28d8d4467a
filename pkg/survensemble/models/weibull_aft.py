"""Weibull accelerated failure time model.

S(t|x) = exp(-(t / rho(x)) ** shape) with rho(x) = exp(beta0 + beta @ x). The censored log-likelihood,
scaled by 1/n, is maximised with L-BFGS-B on (beta0, beta, log shape) using an analytic gradient.
An optional elastic-net penalty acts on beta only; its L1 part uses a smooth surrogate of |x|.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import minimize

from survensemble.core import Dataset, event_grid
from survensemble.errors import NonConvergence, NonPositiveTime
from survensemble.models.base import (
    FittedModel,
    ModelConfig,
    ModelKind,
    as_matrix,
    check_range,
    expected_lifetime_risk,
    monotone_survival,
)

logger = logging.getLogger(__name__)

SOFT_ABS_SHARPNESS = 100.0


@dataclass(frozen=True)
class WeibullAftConfig(ModelConfig):
    penalizer: float = 0.0
    l1_ratio: float = 0.0
    max_iter: int = 1000
    tol: float = 1e-9

    def validate(self) -> None:
        check_range("weibull_aft", "penalizer", self.penalizer, 0.0)
        check_range("weibull_aft", "l1_ratio", self.l1_ratio, 0.0, 1.0)
        check_range("weibull_aft", "max_iter", self.max_iter, 1)
        check_range("weibull_aft", "tol", self.tol, 0.0)


@dataclass(frozen=True, eq=False)
class WeibullAftModel(FittedModel):
    kind = ModelKind.WEIBULL_AFT

    training_grid: np.ndarray
    n_features: int
    beta0: float
    beta: np.ndarray
    shape: float
    penalizer: float = 0.0
    l1_ratio: float = 0.0

    def scale(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.beta0 + as_matrix(X, self.n_features) @ self.beta)

    def survival_function(self, t: float | np.ndarray, X: np.ndarray) -> np.ndarray:
        """Closed-form survival, shape (n, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-((t[None, :] / self.scale(X)[:, None]) ** self.shape))

    def hazard(self, t: float | np.ndarray, X: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rho = self.scale(X)[:, None]
        return self.shape / rho * (t[None, :] / rho) ** (self.shape - 1.0)

    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        return monotone_survival(self.survival_function(self.training_grid, X))

    def risk_scores(self, X: np.ndarray) -> np.ndarray:
        return expected_lifetime_risk(self.training_grid, self.survival_matrix(X))

    def parameters(self) -> dict[str, Any]:
        return {
            "beta0": self.beta0,
            "beta": self.beta.tolist(),
            "shape": self.shape,
            "penalizer": self.penalizer,
            "l1_ratio": self.l1_ratio,
        }

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> WeibullAftModel:
        return cls(
            training_grid=np.asarray(training_grid, dtype=float),
            n_features=n_features,
            beta0=float(parameters["beta0"]),
            beta=np.asarray(parameters["beta"], dtype=float),
            shape=float(parameters["shape"]),
            penalizer=float(parameters["penalizer"]),
            l1_ratio=float(parameters["l1_ratio"]),
        )


def _soft_abs(x: np.ndarray, a: float = SOFT_ABS_SHARPNESS) -> np.ndarray:
    return (np.logaddexp(0.0, a * x) + np.logaddexp(0.0, -a * x)) / a


def _soft_abs_grad(x: np.ndarray, a: float = SOFT_ABS_SHARPNESS) -> np.ndarray:
    return np.tanh(0.5 * a * x)


def weibull_negative_log_likelihood(
    theta: np.ndarray, X: np.ndarray, log_t: np.ndarray, events: np.ndarray, penalizer: float, l1_ratio: float
) -> tuple[float, np.ndarray]:
    """Penalised negative log-likelihood / n and its gradient in theta = (beta0, beta, log shape)."""
    n, d = X.shape
    beta0, beta, log_shape = theta[0], theta[1 : d + 1], theta[-1]
    shape = np.exp(log_shape)
    z = shape * (log_t - beta0 - X @ beta)
    ez = np.exp(np.clip(z, None, 700.0))
    loglik = np.sum(events * (log_shape - log_t + z)) - ez.sum()
    d_mu = shape * (ez - events)
    grad = np.empty_like(theta)
    grad[0] = -d_mu.sum()
    grad[1 : d + 1] = -(X.T @ d_mu)
    grad[-1] = -(np.sum(events * (1.0 + z)) - np.sum(ez * z))
    value, grad = -loglik / n, grad / n
    if penalizer > 0:
        value += penalizer * (l1_ratio * _soft_abs(beta).sum() + 0.5 * (1.0 - l1_ratio) * beta @ beta)
        grad[1 : d + 1] += penalizer * (l1_ratio * _soft_abs_grad(beta) + (1.0 - l1_ratio) * beta)
    return float(value), grad


def fit_weibull_aft(dataset: Dataset, config: WeibullAftConfig | None = None) -> WeibullAftModel:
    config = config or WeibullAftConfig()
    dataset.require_events()
    if np.any(dataset.times <= 0):
        raise NonPositiveTime(f"row {int(np.flatnonzero(dataset.times <= 0)[0])}: weibull times must be positive")
    X, events = dataset.covariates, dataset.events.astype(float)
    log_t = np.log(dataset.times)
    theta0 = np.concatenate([[log_t.mean()], np.zeros(dataset.d), [0.0]])
    result = minimize(
        weibull_negative_log_likelihood,
        theta0,
        args=(X, log_t, events, config.penalizer, config.l1_ratio),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "gtol": config.tol, "ftol": 1e-15},
    )
    if not np.all(np.isfinite(result.x)) or not np.isfinite(result.fun):
        raise NonConvergence(f"weibull_aft optimizer left the finite domain: {result.message}")
    if not result.success and result.nit >= config.max_iter:
        raise NonConvergence(f"weibull_aft did not converge in {config.max_iter} iterations: {result.message}")
    if not result.success:
        logger.debug("weibull_aft stopped at the precision limit: %s", result.message)
    logger.debug("weibull_aft converged in %d iterations, nll/n=%.6f", result.nit, result.fun)
    d = dataset.d
    return WeibullAftModel(
        training_grid=event_grid(dataset.times, dataset.events),
        n_features=d,
        beta0=float(result.x[0]),
        beta=np.asarray(result.x[1 : d + 1]),
        shape=float(np.exp(result.x[-1])),
        penalizer=config.penalizer,
        l1_ratio=config.l1_ratio,
    )
