import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from riskratio import (
    InitializationError,
    Interval,
    PoissonFit,
    Prior,
    SamplerConfig,
    conditional_interval,
    fit_poisson,
    flat_prior,
    gibbs_step,
    initial_state,
    reparameterize,
    run_baseline_chain,
    run_chain,
    sample_truncated_cauchy,
)
from riskratio.design import DesignData
from riskratio.diagnostics import effective_sample_size
from riskratio.sampler import initial_beta, log_hastings_ratio, log_likelihood, make_state

from conftest import INTERCEPT_ONLY_POSTERIOR_MEAN, intercept_only, log_posterior_intercept_only
from helpers import brute_force_membership, interval_grid, random_feasible_instance, space_from_Z


def truncated_cauchy_cdf(x, loc, a, b):
    lo, hi = np.arctan(a - loc), np.arctan(b - loc)
    return (np.arctan(np.clip(x, a, b) - loc) - lo) / (hi - lo)


# ---------------------------------------------------------------- intervals

def test_interval_all_positive_column():
    space, _ = space_from_Z([[1.0], [2.0], [0.5]])
    iv = conditional_interval(space, np.array([-1.0]), 0)
    assert iv.a == -math.inf
    assert iv.b == 0.0


def test_interval_contradiction_asserts():
    space, _ = space_from_Z([[1.0], [-2.0]])
    with pytest.raises(AssertionError):
        conditional_interval(space, np.array([0.0]), 0)


def test_interval_matches_grid_oracle(rng):
    Z, theta = random_feasible_instance(rng, n=20, k=4)
    space, _ = space_from_Z(Z)
    for j in range(4):
        iv = conditional_interval(space, theta, j)
        assert iv.a < theta[j] < iv.b
        grid = interval_grid(iv.a, iv.b, theta[j])
        grid = grid[(np.abs(grid - iv.a) > 1e-9) & (np.abs(grid - iv.b) > 1e-9)]
        inside = np.array([t in iv for t in grid])
        np.testing.assert_array_equal(inside, brute_force_membership(Z, theta, j, grid))


def test_interval_uses_cached_eta(rng):
    Z, theta = random_feasible_instance(rng)
    space, _ = space_from_Z(Z)
    assert conditional_interval(space, theta, 2) == conditional_interval(space, theta, 2, eta=Z @ theta)


# ---------------------------------------------------------------- truncated Cauchy

def test_cauchy_endpoints():
    iv = Interval(-1.0, 3.0)
    assert sample_truncated_cauchy(0.5, iv, 1e-15) == pytest.approx(-1.0, abs=1e-12)
    assert sample_truncated_cauchy(0.5, iv, 1 - 1e-15) == pytest.approx(3.0, abs=1e-12)


def test_cauchy_median_untruncated():
    assert sample_truncated_cauchy(2.5, Interval(), 0.5) == pytest.approx(2.5, abs=1e-15)


def test_cauchy_matches_formula():
    # location - tan((u - 1) atan(a - location) + u atan(location - b))
    loc, a, b, u = 0.7, -2.0, 1.5, 0.3
    expected = loc - math.tan((u - 1) * math.atan(a - loc) + u * math.atan(loc - b))
    assert sample_truncated_cauchy(loc, Interval(a, b), u) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("loc, a, b, u", [
    # far-away finite endpoint produced by a round-off sized z_ij
    (-6.5347969700986095, -256181184038549.84, -1.9136029775444472, 0.30016628491122543),
    (-6.5347969700986095, -1.0, 5.0e14, 0.7),
    (44.9375, 0.0, 0.125, 1e-12),
    (-3.0, 1e6, 1e6 + 1.0, 0.5),
    (2.0, -math.inf, -1e5, 0.25),
    (2.0, 1e5, math.inf, 0.9),
    (0.0, -math.inf, math.inf, 0.999),
])
def test_cauchy_no_cancellation(loc, a, b, u):
    from mpmath import mp, mpf, atan, tan

    mp.dps = 50
    lo, hi = atan(mpf(a) - loc), atan(mpf(b) - loc)
    exact = mpf(loc) + tan((1 - mpf(u)) * lo + mpf(u) * hi)
    x = sample_truncated_cauchy(loc, Interval(a, b), u)
    assert abs(x - float(exact)) <= 1e-12 * max(1.0, abs(float(exact)))
    assert a < x < b


def test_cauchy_ks_symmetric_interval(rng):
    draws = np.array([sample_truncated_cauchy(0.0, Interval(-1.0, 1.0), u) for u in rng.random(100_000)])
    res = stats.kstest(draws, lambda x: (np.arctan(x) + np.pi / 4) / (np.pi / 2))
    assert res.statistic < 0.02


@settings(max_examples=300, deadline=None)
@given(
    loc=st.floats(-50, 50),
    a=st.floats(-1e3, 1e3),
    width=st.floats(1e-3, 1e3),
    u=st.floats(1e-12, 1 - 1e-12),
    one_sided=st.sampled_from(["none", "left", "right", "both"]),
)
def test_cauchy_support(loc, a, width, u, one_sided):
    lo, hi = a, a + width
    if one_sided in ("left", "both"):
        lo = -math.inf
    if one_sided in ("right", "both"):
        hi = math.inf
    # the probability mass within one ulp of a finite endpoint must be resolvable
    mass = math.atan(hi - loc) - math.atan(lo - loc)
    for end in (lo, hi):
        if math.isfinite(end):
            assume(min(u, 1 - u) * mass * (1 + (end - loc) ** 2) > 8 * math.ulp(end))
    x = sample_truncated_cauchy(loc, Interval(lo, hi), u)
    assert lo < x < hi


# ---------------------------------------------------------------- Gibbs step

@pytest.fixture
def toy_setup(toy):
    fit = fit_poisson(toy)
    space = reparameterize(toy, fit)
    prior = flat_prior()
    return space, toy, prior, initial_state(space, toy, prior, fit)


def test_identity_proposal_always_accepted(toy_setup, rng):
    space, design, prior, state = toy_setup
    for j in range(2):
        log_rho, _ = log_hastings_ratio(state, space, design, prior, j, state.theta[j])
        assert log_rho == pytest.approx(0.0, abs=1e-12)
        new, ok = gibbs_step(state, space, design, prior, j, rng, proposal=state.theta[j])
        assert ok
        np.testing.assert_allclose(new.theta, state.theta)
        assert new.log_value == pytest.approx(state.log_value, abs=1e-12)


def test_hastings_ratio_reciprocal(toy_setup):
    space, design, prior, state = toy_setup
    j = 1
    iv = conditional_interval(space, state.theta, j, eta=state.eta)
    for u in (0.1, 0.4, 0.9):
        t = sample_truncated_cauchy(space.theta_hat[j], iv, u)
        forward, moved = log_hastings_ratio(state, space, design, prior, j, t)
        backward, _ = log_hastings_ratio(moved, space, design, prior, j, state.theta[j])
        assert forward == pytest.approx(-backward, abs=1e-9)


def test_cache_coherence_after_accepted_moves(toy_setup, rng):
    space, design, prior, state = toy_setup
    accepted = 0
    for _ in range(200):
        for j in range(2):
            state, ok = gibbs_step(state, space, design, prior, j, rng)
            accepted += ok
            if ok:
                eta = space.Z @ state.theta
                assert state.log_value == pytest.approx(log_likelihood(eta, design.y), abs=1e-8)
    assert accepted > 0
    assert np.all(state.eta < 0) and np.all((state.p > 0) & (state.p < 1))


def test_rejected_step_returns_same_state(toy_setup):
    space, design, prior, state = toy_setup
    # proposal outside the support is rejected without evaluating the ratio
    iv = conditional_interval(space, state.theta, 0, eta=state.eta)
    new, ok = gibbs_step(state, space, design, prior, 0, np.random.default_rng(0), proposal=iv.b + 1.0)
    assert not ok and new is state


def test_prior_veto_rejects(toy):
    fit = fit_poisson(toy)
    space = reparameterize(toy, fit)
    start = initial_state(space, toy, flat_prior(), fit)
    beta0 = space.to_beta(start.theta)
    # vetoes any increase of the slope
    prior = Prior(lambda b: 0.0 if b[1] <= beta0[1] + 1e-12 else -math.inf, name="capped")
    state = make_state(space, toy, prior, start.theta)
    rng = np.random.default_rng(5)
    for _ in range(300):
        for j in range(2):
            state, _ = gibbs_step(state, space, toy, prior, j, rng)
            assert space.to_beta(state.theta)[1] <= beta0[1] + 1e-9


def test_toy_acceptance_rate():
    out = run_chain(__import__("riskratio").toy_dataset(), config=SamplerConfig(iterations=10_000, seed=11))
    rate = out.acceptance_rate
    assert np.all((rate > 0.1) & (rate < 0.95)), rate


def test_long_run_cache_drift(toy, rng):
    fit = fit_poisson(toy)
    space = reparameterize(toy, fit)
    state = initial_state(space, toy, flat_prior(), fit)
    for _ in range(3000):
        for j in range(2):
            state, _ = gibbs_step(state, space, toy, flat_prior(), j, rng)
    assert abs(state.log_value - log_likelihood(space.Z @ state.theta, toy.y)) < 1e-6


# ---------------------------------------------------------------- initialization

def test_initial_state_toy_feasible(toy, rng):
    fit = fit_poisson(toy)
    space = reparameterize(toy, fit)
    state = initial_state(space, toy, flat_prior(), fit, rng)
    assert np.all(space.Z @ state.theta < 0)
    assert np.all(toy.X @ space.to_beta(state.theta) < 0)


def test_initial_state_breast_uses_estimate_directly(breast_design, breast_fit):
    assert np.max(breast_design.X @ breast_fit.beta_hat) < 0
    space = reparameterize(breast_design, breast_fit)
    state = initial_state(space, breast_design, flat_prior(), breast_fit)
    np.testing.assert_allclose(space.to_beta(state.theta), breast_fit.beta_hat, atol=1e-12)


def _fake_fit(beta, k):
    return PoissonFit(beta_hat=np.asarray(beta, float), sigma_hat=np.eye(k), L=np.eye(k),
                      deviance=0.0, iterations=0, converged=True)


def test_intercept_shift(toy):
    beta = np.array([0.3 - 10 * 0.1, 0.1])
    assert np.max(toy.X @ beta) == pytest.approx(0.3)
    start = initial_beta(toy, _fake_fit(beta, 2))
    assert np.max(toy.X @ start) == pytest.approx(-0.01, abs=1e-12)
    assert start[1] == beta[1]


def test_no_intercept_fallback():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    d = DesignData(y=np.array([1.0, 0.0, 0.0]), X=X, labels=("a", "b"), intercept=False)
    start = initial_beta(d, _fake_fit([0.5, -1.0], 2))
    assert np.max(X @ start) < 0


def test_no_feasible_point():
    X = np.array([[1.0], [-1.0]])
    d = DesignData(y=np.array([1.0, 0.0]), X=X, labels=("a",), intercept=False)
    with pytest.raises(InitializationError):
        initial_beta(d, _fake_fit([0.5], 1))


# ---------------------------------------------------------------- chains

def test_toy_chain_feasible(toy):
    out = run_chain(toy, config=SamplerConfig(iterations=10_000, seed=3))
    assert out.draws.shape == (9000, 2)
    i = np.arange(1, 11)
    assert np.all(out.draws[:, [0]] + out.draws[:, [1]] * i < 1e-12)


def test_chain_reproducible(toy):
    cfg = SamplerConfig(iterations=2000, seed=99)
    a, b = run_chain(toy, config=cfg), run_chain(toy, config=cfg)
    assert a.draws.tobytes() == b.draws.tobytes()
    np.testing.assert_array_equal(a.accepted, b.accepted)
    c = run_baseline_chain(toy, config=cfg)
    d = run_baseline_chain(toy, config=cfg)
    assert c.draws.tobytes() == d.draws.tobytes()


def test_thin_and_burn_in(toy):
    out = run_chain(toy, config=SamplerConfig(iterations=1000, burn_in=100, thin=3, seed=1))
    assert out.draws.shape[0] == len(range(100, 1000, 3))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    assert SamplerConfig(iterations=500).burn_in == 50


def test_intercept_only_matches_quadrature():
    out = run_chain(intercept_only(20, 7), config=SamplerConfig(iterations=20_000, seed=4))
    draws = out.draws[:, 0]
    mcse = draws.std(ddof=1) / math.sqrt(effective_sample_size(draws))
    assert abs(draws.mean() - INTERCEPT_ONLY_POSTERIOR_MEAN) < 3 * mcse


def test_quadrature_oracle_value():
    grid = np.linspace(-15, 0, 10_001)
    logd = log_posterior_intercept_only(grid)
    dens = np.exp(logd - logd[np.isfinite(logd)].max())
    mean = np.trapezoid(grid * dens, grid) / np.trapezoid(dens, grid)
    assert mean == pytest.approx(INTERCEPT_ONLY_POSTERIOR_MEAN, abs=1e-8)


@pytest.mark.slow
def test_stationary_distribution_1d():
    """10^6 draws of the intercept-only chain against the quadrature CDF."""
    out = run_chain(intercept_only(20, 7), config=SamplerConfig(iterations=1_000_000, burn_in=1000, seed=8))
    grid = np.linspace(-15, 0, 200_001)
    logd = log_posterior_intercept_only(grid)
    dens = np.exp(logd - logd[np.isfinite(logd)].max())
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    cdf /= cdf[-1]
    res = stats.kstest(out.draws[:, 0], lambda x: np.interp(x, grid, cdf))
    assert res.statistic < 0.01


def test_baseline_toy_feasible(toy):
    out = run_baseline_chain(toy, config=SamplerConfig(iterations=10_000, seed=3))
    i = np.arange(1, 11)
    assert np.all(out.draws[:, [0]] + out.draws[:, [1]] * i < 1e-12)
    assert out.sampler == "baseline"


def test_baseline_tiny_steps(toy):
    out = run_baseline_chain(toy, config=SamplerConfig(iterations=3000, seed=3, step_scale=1e-5))
    assert np.all(out.acceptance_rate > 0.99)
    assert effective_sample_size(out.draws[:, 1]) < 50


def _stepwise_chain(design, config, prior=None):
    prior = prior or flat_prior()
    fit = fit_poisson(design)
    space = reparameterize(design, fit)
    rng = np.random.default_rng(config.seed)
    state = initial_state(space, design, prior, fit, rng)
    kept, accepted = [], np.zeros(design.k, dtype=np.int64)
    for it in range(config.iterations):
        for j in range(design.k):
            state, ok = gibbs_step(state, space, design, prior, j, rng)
            accepted[j] += ok
        if (it + 1) % config.recompute_every == 0:
            state = make_state(space, design, prior, state.theta)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            kept.append(state.theta.copy())
    return np.array(kept) @ space.L, accepted


@pytest.mark.parametrize("prior", [None, Prior(lambda beta: -0.5 * float(beta @ beta), name="normal")])
def test_chain_matches_stepwise_updates(toy, prior):
    # spans two uniform blocks and a recompute
    cfg = SamplerConfig(iterations=1500, burn_in=200, thin=2, seed=5, recompute_every=700)
    out = run_chain(toy, prior=prior, config=cfg)
    draws, accepted = _stepwise_chain(toy, cfg, prior)
    np.testing.assert_array_equal(out.draws, draws)
    np.testing.assert_array_equal(out.accepted, accepted)
