import numpy as np

from riskratio import PoissonFit, reparameterize
from riskratio.design import DesignData


def space_from_Z(Z, theta_hat=None, y=None):
    """Reparameterized space whose Z is given directly (L = identity)."""
    Z = np.asarray(Z, dtype=float)
    n, k = Z.shape
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    design = DesignData(y=y, X=Z.copy(), labels=tuple(f"z{j}" for j in range(k)), intercept=False)
    theta_hat = np.zeros(k) if theta_hat is None else np.asarray(theta_hat, dtype=float)
    fit = PoissonFit(beta_hat=theta_hat, sigma_hat=np.eye(k), L=np.eye(k), deviance=0.0, iterations=0, converged=True)
    return reparameterize(design, fit), design


def random_feasible_instance(rng, n=20, k=4):
    """Random Z and theta with Z @ theta < 0, made feasible by flipping offending rows."""
    Z = rng.standard_normal((n, k))
    # exact zeros exercise rows that bound nothing for some coordinates
    Z[rng.random((n, k)) < 0.1] = 0.0
    theta = rng.standard_normal(k)
    eta = Z @ theta
    Z[eta > 0] *= -1
    keep = np.abs(Z @ theta) > 1e-6
    return Z[keep], theta


def brute_force_membership(Z, theta, j, grid):
    """For each t on the grid, does setting theta_j = t keep every constraint strict?"""
    rest = Z @ theta - Z[:, j] * theta[j]
    return np.array([np.all(rest + Z[:, j] * t < 0) for t in grid])


def interval_grid(a, b, centre, m=200):
    lo = (a if np.isfinite(a) else centre - 10.0) - 1.0
    hi = (b if np.isfinite(b) else centre + 10.0) + 1.0
    return np.linspace(lo, hi, m)


def poisson_loglik(beta, X, y):
    eta = X @ beta
    return float(y @ eta - np.exp(eta).sum())


def newton_fd(X, y, h=1e-5, iters=50):
    """Newton's method on the Poisson log-likelihood with central-difference derivatives."""
    k = X.shape[1]
    beta = np.zeros(k)
    beta[0] = np.log(y.mean())
    eye = np.eye(k) * h
    f = lambda b: poisson_loglik(b, X, y)
    for _ in range(iters):
        grad = np.array([(f(beta + e) - f(beta - e)) / (2 * h) for e in eye])
        hess = np.empty((k, k))
        for a in range(k):
            for b in range(k):
                ea, eb = eye[a], eye[b]
                hess[a, b] = (f(beta + ea + eb) - f(beta + ea - eb) - f(beta - ea + eb) + f(beta - ea - eb)) / (4 * h * h)
        step = np.linalg.solve(hess, grad)
        beta = beta - step
        if np.abs(step).max() < 1e-12:
            break
    return beta


def grid_membership(Z, theta, j, grid):
    """Vectorised :func:`brute_force_membership`."""
    rest = Z @ theta - Z[:, j] * theta[j]
    return np.all(rest[:, None] + np.outer(Z[:, j], grid) < 0, axis=0)


def max_linear_predictor(X, draws, chunk=2000):
    """Largest ``x_i @ beta`` over all rows and all stored draws."""
    worst = -np.inf
    for start in range(0, len(draws), chunk):
        worst = max(worst, float((X @ draws[start:start + chunk].T).max()))
    return worst


# criterion number -> (passed, description); printed by the terminal summary hook
ACCEPTANCE = {}
