"""Cox proportional hazards with a ridge penalty, fitted by damped Newton-Raphson on the Breslow partial likelihood."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg

from survensemble.core import Dataset
from survensemble.errors import NonConvergence, SeparationDetected
from survensemble.models.base import ModelConfig, ModelKind, ProportionalHazardsModel, breslow_log_cumhaz, check_range

logger = logging.getLogger(__name__)

# Newton steps (in covariate standard deviations) still this large once the gradient has vanished mean the
# partial likelihood keeps rising toward infinite coefficients
SEPARATION_STEP = 0.1
MIN_STEP = 1e-8


@dataclass(frozen=True)
class CoxConfig(ModelConfig):
    ridge_alpha: float = 0.0
    max_iter: int = 100
    tol: float = 1e-6

    def validate(self) -> None:
        check_range("cox", "ridge_alpha", self.ridge_alpha, 0.0)
        check_range("cox", "max_iter", self.max_iter, 1)
        check_range("cox", "tol", self.tol, 0.0)


@dataclass(frozen=True, eq=False)
class CoxModel(ProportionalHazardsModel):
    kind = ModelKind.COX

    beta: np.ndarray
    ridge_alpha: float = 0.0

    def log_partial_hazard(self, X: np.ndarray) -> np.ndarray:
        return X @ self.beta

    def parameters(self) -> dict[str, Any]:
        return {
            "beta": self.beta.tolist(),
            "ridge_alpha": self.ridge_alpha,
            "log_baseline_cumhaz": self.log_baseline_cumhaz.tolist(),
        }

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> CoxModel:
        return cls(
            training_grid=np.asarray(training_grid, dtype=float),
            n_features=n_features,
            log_baseline_cumhaz=np.asarray(parameters["log_baseline_cumhaz"], dtype=float),
            beta=np.asarray(parameters["beta"], dtype=float),
            ridge_alpha=float(parameters["ridge_alpha"]),
        )


def _risk_set_sums(X: np.ndarray, times: np.ndarray, events: np.ndarray, eta: np.ndarray):
    """Reverse-cumulative weighted sums over risk sets, evaluated at each event's risk-set start."""
    order = np.argsort(times, kind="stable")
    shift = eta.max()
    w = np.exp(eta[order] - shift)
    Xs = X[order]
    s0 = np.cumsum(w[::-1])[::-1]
    s1 = np.cumsum((w[:, None] * Xs)[::-1], axis=0)[::-1]
    s2 = np.cumsum((w[:, None, None] * Xs[:, :, None] * Xs[:, None, :])[::-1], axis=0)[::-1]
    start = np.searchsorted(times[order], times[events], side="left")
    return s0[start], s1[start], s2[start], shift


def cox_partial_log_likelihood(
    beta: np.ndarray, X: np.ndarray, times: np.ndarray, events: np.ndarray, ridge_alpha: float = 0.0
) -> tuple[float, np.ndarray, np.ndarray]:
    """Penalized Breslow partial log-likelihood with its gradient and Hessian."""
    beta = np.asarray(beta, dtype=float)
    eta = X @ beta
    s0, s1, s2, shift = _risk_set_sums(X, times, events, eta)
    mean = s1 / s0[:, None]
    loglik = eta[events].sum() - (np.log(s0) + shift).sum() - 0.5 * ridge_alpha * beta @ beta
    gradient = (X[events] - mean).sum(axis=0) - ridge_alpha * beta
    covariance = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
    hessian = -covariance.sum(axis=0) - ridge_alpha * np.eye(beta.size)
    return float(loglik), gradient, hessian


def _newton_direction(gradient: np.ndarray, hessian: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.solve(-hessian, gradient, assume_a="pos")
    except (scipy.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(-hessian, gradient, rcond=None)[0]


def fit_cox(dataset: Dataset, config: CoxConfig | None = None) -> CoxModel:
    config = config or CoxConfig()
    dataset.require_events()
    X, times, events = dataset.covariates, dataset.times, dataset.events
    spread = X.std(axis=0)
    beta = np.zeros(dataset.d)
    loglik, gradient, hessian = cox_partial_log_likelihood(beta, X, times, events, config.ridge_alpha)
    stopped = "iteration budget exhausted"
    for iteration in range(config.max_iter):
        if np.max(np.abs(gradient), initial=0.0) <= config.tol:
            break
        delta = _newton_direction(gradient, hessian)
        step = 1.0
        candidate = beta + delta
        new_loglik, new_gradient, new_hessian = cox_partial_log_likelihood(candidate, X, times, events, config.ridge_alpha)
        while new_loglik < loglik and step >= MIN_STEP:
            step *= 0.5
            candidate = beta + step * delta
            new_loglik, new_gradient, new_hessian = cox_partial_log_likelihood(
                candidate, X, times, events, config.ridge_alpha
            )
        if new_loglik < loglik:
            stopped = f"line search failed at iteration {iteration + 1}"
            break
        stalled = abs(new_loglik - loglik) <= 1e-12 * max(1.0, abs(loglik))
        beta, loglik, gradient, hessian = candidate, new_loglik, new_gradient, new_hessian
        logger.debug("cox iteration %d: loglik=%.8f |grad|=%.2e step=%.3g", iteration, loglik, np.abs(gradient).max(), step)
        if stalled:
            stopped = f"log-likelihood stalled at iteration {iteration + 1}"
            break
    gradient_norm = np.max(np.abs(gradient), initial=0.0)
    if gradient_norm > config.tol:
        raise NonConvergence(f"cox did not converge: {stopped} (|grad| = {gradient_norm:.2e})")
    # a vanishing gradient with a Newton step that does not vanish: the maximum is at infinity
    remaining = np.max(np.abs(_newton_direction(gradient, hessian)) * spread, initial=0.0)
    if remaining > SEPARATION_STEP:
        raise SeparationDetected(
            f"coefficients diverging (next Newton step {remaining:.2f} sd at |grad| = {gradient_norm:.1e});"
            " the partial likelihood is monotone, add a ridge penalty"
        )
    grid, log_cumhaz = breslow_log_cumhaz(times, events, X @ beta)
    return CoxModel(
        training_grid=grid,
        n_features=dataset.d,
        log_baseline_cumhaz=log_cumhaz,
        beta=beta,
        ridge_alpha=config.ridge_alpha,
    )
