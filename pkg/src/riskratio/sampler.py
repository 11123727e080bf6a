"""Metropolis-within-Gibbs sampling of log-binomial posteriors.

The chain runs on ``theta = L^{-T} beta`` where ``sigma_hat = L.T @ L`` comes
from the Poisson fit, so the target is close to a standard normal centred at
``theta_hat`` and restricted to ``{theta : Z theta < 0}`` with ``Z = X L^T``.
At fixed remaining coordinates the feasible slice of coordinate ``j`` is an
open interval, and each update proposes from a unit-scale Cauchy centred at
``theta_hat[j]`` truncated to that interval. Proposals are therefore always
feasible.

:func:`run_baseline_chain` is a plain random-walk Metropolis-within-Gibbs on
``beta`` that rejects infeasible proposals after the fact, for comparison.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .design import DesignData
from .errors import InitializationError
from .poisson import PoissonFit, fit_poisson, solve_upper_transpose

HALF_PI = math.pi / 2

# ufunc reductions directly; ndarray.max() adds a Python-level wrapper per call
_max = np.maximum.reduce
_min = np.minimum.reduce


@dataclass(frozen=True)
class Interval:
    a: float = -math.inf
    b: float = math.inf

    def __contains__(self, t: float) -> bool:
        return self.a < t < self.b


@dataclass(frozen=True)
class Prior:
    """Log prior density on the beta scale, up to an additive constant.

    ``log_density`` may return ``-inf`` to veto a region. A prior with
    ``log_density=None`` is flat and is never evaluated.
    """

    log_density: Callable[[np.ndarray], float] | None = None
    name: str = "flat"

    @property
    def is_flat(self) -> bool:
        return self.log_density is None

    def __call__(self, beta: np.ndarray) -> float:
        if self.log_density is None:
            return 0.0
        return float(self.log_density(beta))


def flat_prior() -> Prior:
    return Prior()


@dataclass(frozen=True)
class SamplerConfig:
    """Run-length and tuning settings shared by both samplers.

    ``burn_in=None`` discards the first 10% of iterations. ``step_scale``
    only affects the random-walk baseline.
    """

    iterations: int = 10_000
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    recompute_every: int = 1000
    step_scale: float = 0.1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if self.recompute_every < 1:
            raise ValueError("recompute period must be positive")
        if not self.step_scale > 0:
            raise ValueError("step scale must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_kept(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass(frozen=True, eq=False)
class ReparamSpace:
    Z: np.ndarray
    theta_hat: np.ndarray
    L: np.ndarray
    neg_idx: tuple[np.ndarray, ...]
    pos_idx: tuple[np.ndarray, ...]
    # -1 / Z[A_j, j] and -1 / Z[B_j, j], so bounds are products rather than divisions
    neg_scale: tuple[np.ndarray, ...] = field(repr=False)
    pos_scale: tuple[np.ndarray, ...] = field(repr=False)
    cols: tuple[np.ndarray, ...] = field(repr=False)
    events: np.ndarray = field(repr=False)
    non_events: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    def to_beta(self, theta: np.ndarray) -> np.ndarray:
        return self.L.T @ theta

    def to_theta(self, beta: np.ndarray) -> np.ndarray:
        return solve_upper_transpose(self.L, beta)

    def log_likelihood(self, eta: np.ndarray) -> float:
        if _max(eta) >= 0.0:
            return -math.inf
        return float(self.events @ eta + self.non_events @ np.log1p(-np.exp(eta)))


def reparameterize(design: DesignData, fit: PoissonFit) -> ReparamSpace:
    Z = design.X @ fit.L.T
    theta_hat = solve_upper_transpose(fit.L, fit.beta_hat)
    neg, pos, neg_s, pos_s = [], [], [], []
    for j in range(Z.shape[1]):
        col = Z[:, j]
        a_idx = np.flatnonzero(col < 0)
        b_idx = np.flatnonzero(col > 0)
        neg.append(a_idx)
        pos.append(b_idx)
        neg_s.append(-1.0 / col[a_idx])
        pos_s.append(-1.0 / col[b_idx])
    Z.setflags(write=False)
    cols = tuple(np.ascontiguousarray(Z[:, j]) for j in range(Z.shape[1]))
    y = np.asarray(design.y, dtype=float)
    return ReparamSpace(
        Z, theta_hat, fit.L, tuple(neg), tuple(pos), tuple(neg_s), tuple(pos_s),
        cols=cols, events=y, non_events=1.0 - y,
    )


@dataclass(frozen=True, eq=False)
class ChainState:
    """Current point of the chain and its cached likelihood terms.

    ``eta = Z @ theta`` and ``p = exp(eta)``; ``log_value`` is the Bernoulli
    log-likelihood and ``prior_value`` the log prior at ``L.T @ theta``.
    """

    theta: np.ndarray
    eta: np.ndarray
    log_value: float
    prior_value: float

    @property
    def p(self) -> np.ndarray:
        return np.exp(self.eta)


def log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood with ``log p = eta``; ``-inf`` outside the support.

    Reference implementation; the samplers use the precomputed weights held by
    :class:`ReparamSpace`.
    """
    if eta.max() >= 0.0:
        return -math.inf
    events = y == 1
    return float(eta[events].sum() + np.log1p(-np.exp(eta[~events])).sum())


def make_state(space: ReparamSpace, design: DesignData, prior: Prior, theta: np.ndarray) -> ChainState:
    """Build a coherent state at ``theta`` by full recomputation."""
    theta = np.array(theta, dtype=float)
    eta = space.Z @ theta
    return ChainState(
        theta=theta,
        eta=eta,
        log_value=space.log_likelihood(eta),
        prior_value=prior(space.to_beta(theta)),
    )


def conditional_interval(space: ReparamSpace, theta: np.ndarray, j: int, eta: np.ndarray | None = None) -> Interval:
    """Feasible slice ``(a_j, b_j)`` of coordinate ``j`` with the others held fixed.

    Row ``i`` contributes the bound ``-(z_i theta - z_ij theta_j) / z_ij``,
    i.e. ``theta_j - eta_i / z_ij``: a lower bound when ``z_ij < 0`` and an
    upper bound when ``z_ij > 0``. ``eta`` (``Z @ theta``) may be passed to
    avoid recomputing it.
    """
    if eta is None:
        eta = space.Z @ theta
    tj = float(theta[j])
    idx = space.neg_idx[j]
    a = tj + float(_max(eta.take(idx) * space.neg_scale[j])) if idx.size else -math.inf
    idx = space.pos_idx[j]
    b = tj + float(_min(eta.take(idx) * space.pos_scale[j])) if idx.size else math.inf
    assert a < b, f"empty conditional support ({a}, {b}) for coordinate {j}: state is not feasible"
    return Interval(a, b)


def _arctan_span(d: float, e: float) -> float:
    """``atan(e) - atan(d)`` for ``d < e`` (either may be infinite), without cancellation."""
    if d == -math.inf:
        return math.pi if e == math.inf else math.atan2(1.0, -e)
    if e == math.inf:
        return math.atan2(1.0, d)
    return math.atan2(e - d, 1.0 + d * e)


def sample_truncated_cauchy(location: float, interval: Interval, u: float) -> float:
    """Inverse-CDF draw from Cauchy(location, 1) truncated to ``interval``.

    The draw is ``location + tan(w)`` with ``w`` uniform between
    ``atan(a - location)`` and ``atan(b - location)``. To avoid cancellation
    it is evaluated as an offset from whichever of ``location``, ``a`` or
    ``b`` lies nearest to the result, via the tangent addition formula.
    """
    a, b = interval.a, interval.b
    d, e = a - location, b - location
    span = _arctan_span(d, e)
    lo = -HALF_PI if d == -math.inf else math.atan(d)
    x = location + math.tan(lo + u * span)
    ref = location
    if a != -math.inf and abs(x - a) < abs(x - ref):
        ref = a
    if b != math.inf and abs(x - b) < abs(x - ref):
        ref = b
    if ref is location:
        return x
    if ref == a:
        t = math.tan(u * span)
        return a + (1.0 + d * d) * t / (1.0 - d * t)
    t = math.tan((1.0 - u) * span)
    return b - (1.0 + e * e) * t / (1.0 + e * t)


def log_hastings_ratio(
    state: ChainState,
    space: ReparamSpace,
    design: DesignData,
    prior: Prior,
    j: int,
    proposal: float,
) -> tuple[float, ChainState | None]:
    """Log acceptance ratio for moving coordinate ``j`` to ``proposal``.

    Returns the ratio and the proposed state (``None`` when the proposal is
    outside the support, in which case the ratio is ``-inf``).
    """
    delta = proposal - state.theta[j]
    eta_new = state.eta + space.cols[j] * delta
    log_new = space.log_likelihood(eta_new)
    if log_new == -math.inf:
        return -math.inf, None
    theta_new = state.theta.copy()
    theta_new[j] = proposal
    prior_new = 0.0 if prior.is_flat else prior(space.to_beta(theta_new))
    if prior_new == -math.inf:
        return -math.inf, None
    loc = space.theta_hat[j]
    log_rho = (
        log_new - state.log_value
        + prior_new - state.prior_value
        + math.log1p((proposal - loc) ** 2) - math.log1p((state.theta[j] - loc) ** 2)
    )
    new_state = ChainState(theta_new, eta_new, log_new, prior_new)
    return log_rho, new_state


def gibbs_step(
    state: ChainState,
    space: ReparamSpace,
    design: DesignData,
    prior: Prior,
    j: int,
    rng: np.random.Generator,
    proposal: float | None = None,
) -> tuple[ChainState, bool]:
    """One Metropolis-Hastings update of coordinate ``j``.

    ``proposal`` overrides the truncated-Cauchy draw (the acceptance uniform
    is still taken from ``rng``).
    """
    if proposal is None:
        interval = conditional_interval(space, state.theta, j, eta=state.eta)
        proposal = sample_truncated_cauchy(space.theta_hat[j], interval, rng.random())
    log_rho, candidate = log_hastings_ratio(state, space, design, prior, j, proposal)
    u = rng.random()
    if candidate is not None and (log_rho >= 0.0 or (math.log(u) if u else -math.inf) < log_rho):
        return candidate, True
    return state, False


def _feasible(X: np.ndarray, beta: np.ndarray) -> bool:
    return bool(np.max(X @ beta) < 0.0)


def _nearest_feasible(X: np.ndarray, beta: np.ndarray, margin: float) -> np.ndarray | None:
    """Point closest to ``beta`` in L1 distance with ``X @ b <= -margin``, or ``None``."""
    n, k = X.shape
    # variables (b, d) with d >= |b - beta|
    cost = np.concatenate([np.zeros(k), np.ones(k)])
    eye = np.eye(k)
    A_ub = np.block([[X, np.zeros((n, k))], [eye, -eye], [-eye, -eye]])
    b_ub = np.concatenate([np.full(n, -margin), beta, -beta])
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)] * k, method="highs")
    return res.x[:k] if res.status == 0 else None


def initial_beta(design: DesignData, fit: PoissonFit) -> np.ndarray:
    """Feasible starting value on the beta scale derived from the Poisson MLE.

    When some ``x_i beta_hat >= 0`` the intercept is lowered so that the
    largest linear predictor becomes ``-0.01``. Designs without an intercept
    fall back to the nearest point (L1) satisfying ``X beta <= -0.01``.
    """
    beta = fit.beta_hat.copy()
    if _feasible(design.X, beta):
        return beta
    if design.intercept:
        beta[0] -= float(np.max(design.X @ beta)) + 0.01
        if _feasible(design.X, beta):
            return beta
    else:
        candidate = _nearest_feasible(design.X, beta, 0.01)
        if candidate is not None and _feasible(design.X, candidate):
            return candidate
    raise InitializationError("could not find a starting point with all fitted probabilities below 1")


def initial_state(
    space: ReparamSpace,
    design: DesignData,
    prior: Prior,
    fit: PoissonFit,
    rng: np.random.Generator | None = None,
) -> ChainState:
    """Start the chain at the Poisson estimate pulled back to theta space.

    ``rng`` is accepted for interface symmetry; the construction is
    deterministic.
    """
    theta0 = space.to_theta(initial_beta(design, fit))
    state = make_state(space, design, prior, theta0)
    if _max(state.eta) >= 0.0:
        raise InitializationError("starting point lies on the constraint boundary")
    if state.prior_value == -math.inf:
        raise InitializationError("prior density vanishes at the starting point")
    return state


@dataclass(frozen=True, eq=False)
class ChainOutput:
    draws: np.ndarray
    labels: tuple[str, ...]
    accepted: np.ndarray
    proposed: np.ndarray
    seconds: float
    sampler: str = "proposed"

    @property
    def acceptance_rate(self) -> np.ndarray:
        return self.accepted / np.maximum(self.proposed, 1)


_SWEEP_BLOCK = 1024


def _sweeps(
    space: ReparamSpace,
    design: DesignData,
    prior: Prior,
    config: SamplerConfig,
    state: ChainState,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Inlined equivalent of repeated :func:`gibbs_step` calls.

    Consumes the same uniforms in the same order (proposal, then acceptance)
    and performs the same floating-point operations, so it reproduces the
    step-by-step chain exactly; it only avoids per-step object overhead.
    """
    k = space.k
    loc = [float(v) for v in space.theta_hat]
    cols, events, non_events = space.cols, space.events, space.non_events
    neg_idx, pos_idx, neg_scale, pos_scale = space.neg_idx, space.pos_idx, space.neg_scale, space.pos_scale
    flat = prior.is_flat
    theta = [float(v) for v in state.theta]
    eta, log_value, prior_value = state.eta, state.log_value, state.prior_value
    log1p, exp, log, inf = np.log1p, np.exp, math.log, math.inf

    thetas = np.empty((config.n_kept, k))
    accepted = [0] * k
    row = 0
    uniforms = ()
    pos = 0
    for it in range(config.iterations):
        if pos >= len(uniforms):
            block = min(_SWEEP_BLOCK, config.iterations - it)
            uniforms = rng.random(2 * k * block).tolist()
            pos = 0
        for j in range(k):
            tj = theta[j]
            idx = neg_idx[j]
            a = tj + float(_max(eta.take(idx) * neg_scale[j])) if idx.size else -inf
            idx = pos_idx[j]
            b = tj + float(_min(eta.take(idx) * pos_scale[j])) if idx.size else inf
            if not a < b:
                raise AssertionError(f"empty conditional support ({a}, {b}) for coordinate {j}: state is not feasible")
            proposal = sample_truncated_cauchy(loc[j], Interval(a, b), uniforms[pos])
            u = uniforms[pos + 1]
            pos += 2

            eta_new = eta + cols[j] * (proposal - tj)
            if _max(eta_new) >= 0.0:
                continue
            log_new = float(events @ eta_new + non_events @ log1p(-exp(eta_new)))
            if flat:
                prior_new = 0.0
            else:
                theta_new = np.array(theta)
                theta_new[j] = proposal
                prior_new = prior(space.to_beta(theta_new))
                if prior_new == -inf:
                    continue
            lj = loc[j]
            log_rho = (
                log_new - log_value
                + prior_new - prior_value
                + math.log1p((proposal - lj) ** 2) - math.log1p((tj - lj) ** 2)
            )
            if log_rho >= 0.0 or (log(u) if u else -inf) < log_rho:
                theta[j] = proposal
                eta, log_value, prior_value = eta_new, log_new, prior_new
                accepted[j] += 1
        if (it + 1) % config.recompute_every == 0:
            fresh = make_state(space, design, prior, np.array(theta))
            eta, log_value, prior_value = fresh.eta, fresh.log_value, fresh.prior_value
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            thetas[row] = theta
            row += 1
    return thetas, np.array(accepted, dtype=np.int64)


def run_chain(
    design: DesignData,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    fit: PoissonFit | None = None,
) -> ChainOutput:
    """Run the reparameterized truncated-Cauchy sampler.

    Coordinates are swept in order ``0..k-1``. One draw ``L.T @ theta`` is
    stored after each kept sweep. The cached likelihood is rebuilt from
    ``theta`` every ``config.recompute_every`` sweeps.
    """
    prior = prior or flat_prior()
    config = config or SamplerConfig()
    start = time.perf_counter()
    fit = fit or fit_poisson(design)
    space = reparameterize(design, fit)
    rng = np.random.default_rng(config.seed)
    state = initial_state(space, design, prior, fit, rng)

    thetas, accepted = _sweeps(space, design, prior, config, state, rng)
    k = design.k
    draws = thetas @ space.L
    return ChainOutput(
        draws=draws,
        labels=design.labels,
        accepted=accepted,
        proposed=np.full(k, config.iterations, dtype=np.int64),
        seconds=time.perf_counter() - start,
        sampler="proposed",
    )


def run_baseline_chain(
    design: DesignData,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    fit: PoissonFit | None = None,
) -> ChainOutput:
    """Random-walk Metropolis-within-Gibbs directly on beta.

    Each coordinate gets a Gaussian step of sd ``config.step_scale``; a
    proposal that pushes any ``x_i beta`` to zero or above is rejected. The
    starting point is the same as for :func:`run_chain`.
    """
    prior = prior or flat_prior()
    config = config or SamplerConfig()
    start = time.perf_counter()
    fit = fit or fit_poisson(design)
    rng = np.random.default_rng(config.seed)
    X, y = design.X, design.y
    k = design.k
    cols = [np.ascontiguousarray(X[:, j]) for j in range(k)]
    non_events = 1.0 - y

    def loglik(eta):
        if _max(eta) >= 0.0:
            return -math.inf
        return float(y @ eta + non_events @ np.log1p(-np.exp(eta)))

    beta = initial_beta(design, fit)
    eta = X @ beta
    log_value = loglik(eta)
    prior_value = prior(beta)
    if prior_value == -math.inf:
        raise InitializationError("prior density vanishes at the starting point")

    draws = np.empty((config.n_kept, k))
    accepted = np.zeros(k, dtype=np.int64)
    row = 0
    for it in range(config.iterations):
        for j in range(k):
            step = config.step_scale * rng.standard_normal()
            eta_new = eta + cols[j] * step
            u = rng.random()
            log_new = loglik(eta_new)
            if log_new == -math.inf:
                continue
            beta_new = beta.copy()
            beta_new[j] += step
            prior_new = 0.0 if prior.is_flat else prior(beta_new)
            log_rho = log_new - log_value + prior_new - prior_value
            if log_rho >= 0.0 or (math.log(u) if u else -math.inf) < log_rho:
                beta, eta, log_value, prior_value = beta_new, eta_new, log_new, prior_new
                accepted[j] += 1
        if (it + 1) % config.recompute_every == 0:
            eta = X @ beta
            log_value = loglik(eta)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws[row] = beta
            row += 1
    return ChainOutput(
        draws=draws,
        labels=design.labels,
        accepted=accepted,
        proposed=np.full(k, config.iterations, dtype=np.int64),
        seconds=time.perf_counter() - start,
        sampler="baseline",
    )
