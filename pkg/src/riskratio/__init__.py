"""Bayesian risk-ratio estimation with log-binomial regression models.

The sampler works in a rotated parameter space built from a Poisson
approximation to the model and proposes each coordinate from a Cauchy
distribution truncated to the region where every fitted probability stays
below one.
"""

from .datasets import (
    SimulationParams,
    breast_cancer_table,
    simulate_cohort,
    simulate_cohort_table,
    toy_dataset,
)
from .design import DesignData, ModelSpec, RawTable, build_design, read_csv
from .diagnostics import PosteriorSummary, acf, effective_sample_size, summarize
from .errors import (
    ConvergenceError,
    DataError,
    GenerationError,
    InitializationError,
    NotPositiveDefiniteError,
    NumericalError,
    RiskRatioError,
    SingularDesignError,
)
from .poisson import PoissonFit, cholesky_upper, fit_poisson, solve_upper_transpose
from .sampler import (
    ChainOutput,
    ChainState,
    Interval,
    Prior,
    ReparamSpace,
    SamplerConfig,
    conditional_interval,
    flat_prior,
    gibbs_step,
    initial_state,
    reparameterize,
    run_baseline_chain,
    run_chain,
    sample_truncated_cauchy,
)

__version__ = "0.1.0"
