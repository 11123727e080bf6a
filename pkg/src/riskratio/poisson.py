"""Unconstrained Poisson log-link fit used to seed the reparameterization.

The covariance convention is ``sigma_hat = L.T @ L`` with ``L`` upper
triangular, so that ``Z = X @ L.T`` and ``theta = solve(L.T, beta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .design import DesignData
from .errors import ConvergenceError, NotPositiveDefiniteError, SingularDesignError


@dataclass(frozen=True, eq=False)
class PoissonFit:
    beta_hat: np.ndarray
    sigma_hat: np.ndarray
    L: np.ndarray
    deviance: float
    iterations: int
    converged: bool

    def gradient(self, design: DesignData) -> np.ndarray:
        """Score of the Poisson log-likelihood at ``beta_hat``."""
        mu = np.exp(design.X @ self.beta_hat)
        return design.X.T @ (design.y - mu)


def cholesky_upper(S: np.ndarray, pivot_tol: float = 0.0) -> np.ndarray:
    """Upper-triangular ``L`` with ``L.T @ L == S``.

    Raises :class:`NotPositiveDefiniteError` when a pivot is not larger than
    ``pivot_tol * max(diag(S))``.
    """
    S = np.asarray(S, dtype=float)
    k = S.shape[0]
    if S.shape != (k, k):
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    threshold = pivot_tol * float(np.max(np.diag(S))) if k else 0.0
    L = np.zeros_like(S)
    for j in range(k):
        pivot = S[j, j] - L[:j, j] @ L[:j, j]
        if not pivot > threshold:
            raise NotPositiveDefiniteError(j, float(pivot))
        L[j, j] = math.sqrt(pivot)
        L[j, j + 1:] = (S[j, j + 1:] - L[:j, j] @ L[:j, j + 1:]) / L[j, j]
    return L


def solve_upper_transpose(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve ``L.T @ w = v`` for upper-triangular ``L``."""
    return solve_triangular(L, v, trans="T", lower=False)


def _deviance(y, mu):
    # y*log(y/mu) is taken as 0 where y == 0
    term = np.zeros_like(mu)
    pos = y > 0
    term[pos] = y[pos] * np.log(y[pos] / mu[pos])
    return 2.0 * float(np.sum(term - (y - mu)))


def _weighted_factor(X, mu):
    XtWX = X.T @ (mu[:, None] * X)
    try:
        return XtWX, cholesky_upper(XtWX, pivot_tol=1e-12)
    except NotPositiveDefiniteError as exc:
        raise SingularDesignError(
            f"design is rank deficient (weighted cross-product pivot {exc.index} vanishes)"
        ) from exc


def fit_poisson(design: DesignData, max_iter: int = 25, tol: float = 1e-8) -> PoissonFit:
    """Fit ``log mu = X beta`` to the 0/1 outcome by IRLS.

    Iteration stops once the relative deviance change drops below ``tol``;
    ``sigma_hat`` is the unscaled inverse Fisher information at the final
    iterate.
    """
    X, y = design.X, design.y
    if design.n < design.k:
        raise SingularDesignError(f"n = {design.n} observations for k = {design.k} coefficients")

    eta = np.log(y + 0.1)
    mu = np.exp(eta)
    dev_old = _deviance(y, mu)
    beta = None
    for it in range(1, max_iter + 1):
        z = eta + (y - mu) / mu
        _, R = _weighted_factor(X, mu)
        rhs = X.T @ (mu * z)
        beta = solve_triangular(R, solve_upper_transpose(R, rhs), lower=False)
        eta = X @ beta
        mu = np.exp(eta)
        dev = _deviance(y, mu)
        if abs(dev - dev_old) / (abs(dev) + 0.1) < tol:
            break
        dev_old = dev
    else:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", last_beta=beta)

    _, R = _weighted_factor(X, mu)
    R_inv = solve_triangular(R, np.eye(design.k), lower=False)
    sigma = R_inv @ R_inv.T
    sigma = 0.5 * (sigma + sigma.T)
    L = cholesky_upper(sigma)
    return PoissonFit(beta_hat=beta, sigma_hat=sigma, L=L, deviance=dev, iterations=it, converged=True)
