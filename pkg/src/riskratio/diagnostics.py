"""Autocorrelation, effective sample size and posterior summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import ChainOutput

BETA = "beta"
RR = "rr"

ESS_CAP = 1.5


def _centered(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    if not np.any(x):
        raise ValueError("zero variance: series is constant")
    return x


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased autocorrelation of an already centred series at every lag, via FFT."""
    n = len(x)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[:n]
    return acov / acov[0]


def acf(series, max_lag: int = 40) -> np.ndarray:
    """Autocorrelations ``r(0..max_lag)`` with the biased ``1/N`` normalisation."""
    x = _centered(series)
    if len(x) <= max_lag + 1:
        raise ValueError(f"series of length {len(x)} too short for max lag {max_lag}")
    r = _autocorrelation(x)[: max_lag + 1]
    r[0] = 1.0
    return np.clip(r, -1.0, 1.0)


def effective_sample_size(series) -> float:
    """Effective sample size using Geyer's initial monotone sequence estimator.

    Autocorrelations are summed in adjacent pairs ``rho(2m) + rho(2m+1)``
    until the first non-positive pair; the retained pair sums are forced to
    be non-increasing. The estimate is capped at ``1.5 * N``.
    """
    x = _centered(series)
    n = len(x)
    if n < 100:
        raise ValueError(f"need at least 100 draws, got {n}")
    rho = _autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[: stop[0]] if stop.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    if tau <= 1.0 / ESS_CAP:
        return ESS_CAP * n
    return float(n / tau)


def transform(draws: np.ndarray, scale: str) -> np.ndarray:
    if scale == RR:
        return np.exp(draws)
    if scale == BETA:
        return np.asarray(draws, dtype=float)
    raise ValueError(f"unknown scale {scale!r}; expected {BETA!r} or {RR!r}")


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    labels: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scale: str

    def rows(self) -> list[dict]:
        return [
            {"parameter": lab, "mean": float(m), "sd": float(s), "q2.5": float(lo), "q97.5": float(hi)}
            for lab, m, s, lo, hi in zip(self.labels, self.mean, self.sd, self.lower, self.upper)
        ]

    def degenerate(self) -> np.ndarray:
        """Parameters whose 95% interval has collapsed to a point."""
        return ~(self.lower < self.upper)


def summarize(output: ChainOutput, scale: str = RR) -> PosteriorSummary:
    """Posterior mean, sd and equal-tailed 95% interval per parameter.

    With ``scale="rr"`` every draw is exponentiated first. Quantiles
    interpolate linearly between order statistics (position ``p (N-1)``,
    zero-based).
    """
    values = transform(output.draws, scale)
    lower, upper = np.quantile(values, [0.025, 0.975], axis=0, method="linear")
    return PosteriorSummary(
        labels=tuple(output.labels),
        mean=values.mean(axis=0),
        sd=values.std(axis=0, ddof=1),
        lower=lower,
        upper=upper,
        scale=scale,
    )


def ess_per_parameter(output: ChainOutput, scale: str = RR) -> np.ndarray:
    values = transform(output.draws, scale)
    return np.array([effective_sample_size(values[:, j]) for j in range(values.shape[1])])


def acf_table(output: ChainOutput, max_lag: int = 40, scale: str = RR) -> np.ndarray:
    """``(max_lag + 1) x k`` autocorrelations of each parameter."""
    values = transform(output.draws, scale)
    return np.column_stack([acf(values[:, j], max_lag) for j in range(values.shape[1])])
