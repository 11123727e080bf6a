"""Bundled example data and the synthetic cohort generator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .design import DesignData, RawTable, read_csv
from .errors import DataError, GenerationError

# (stage, receptor level, deaths, total); receptor level 1 = low, 2 = high
BREAST_CANCER_CELLS = (
    (1, 1, 2, 12),
    (1, 2, 5, 55),
    (2, 1, 9, 22),
    (2, 2, 17, 74),
    (3, 1, 12, 14),
    (3, 2, 9, 15),
)

TOY_OUTCOME = (0, 0, 0, 0, 1, 0, 1, 1, 1, 1)

DEFAULT_EXP_BETA = (0.379, 1.400, 1.200, 1.300, 1.100, 1.250, 1.500, 1.400, 1.100)
DEFAULT_EXP_ALPHA = (0.512, 1.400, 1.200, 1.600, 1.400)

W_CORRELATION = 0.5

COHORT_COLUMNS = ("y", "E", "F1", "F2", "F3", "F4", "V1", "V2", "V3")
COHORT_LABELS = ("(Intercept)", "E", "F1", "F2", "F3", "F4", "V1", "V2", "V3")


def breast_cancer_table() -> RawTable:
    """192 women by tumour stage and receptor level with 5-year mortality."""
    stage, receptor, dead = [], [], []
    for s, r, deaths, total in BREAST_CANCER_CELLS:
        stage += [s] * total
        receptor += [r] * total
        dead += [1] * deaths + [0] * (total - deaths)
    return RawTable.from_columns({"Stage": stage, "Receptor_Level": receptor, "Dead": dead})


def breast_cancer_csv_path():
    """Location of the shipped CSV copy of :func:`breast_cancer_table`."""
    return resources.files("riskratio") / "data" / "breast_cancer.csv"


def load_breast_cancer_csv() -> RawTable:
    with resources.as_file(breast_cancer_csv_path()) as path:
        return read_csv(path)


def toy_table() -> RawTable:
    return RawTable.from_columns({"i": list(range(1, 11)), "y": list(TOY_OUTCOME)})


def toy_dataset() -> DesignData:
    """Ten observations with ``log p_i = b1 + i * b2``."""
    i = np.arange(1, 11, dtype=float)
    X = np.column_stack([np.ones(10), i])
    return DesignData(y=np.array(TOY_OUTCOME, dtype=float), X=X, labels=("(Intercept)", "i"))


@dataclass(frozen=True)
class SimulationParams:
    n: int = 1500
    exp_beta: tuple[float, ...] = DEFAULT_EXP_BETA
    exp_alpha: tuple[float, ...] = DEFAULT_EXP_ALPHA
    seed: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise DataError("cohort size must be at least 2")
        if len(self.exp_beta) != 9:
            raise DataError(f"exp_beta needs 9 entries, got {len(self.exp_beta)}")
        if len(self.exp_alpha) != 5:
            raise DataError(f"exp_alpha needs 5 entries, got {len(self.exp_alpha)}")
        if not all(v > 0 for v in self.exp_beta + self.exp_alpha):
            raise DataError("risk-ratio parameters must be positive")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")

    @property
    def beta(self) -> np.ndarray:
        return np.log(np.array(self.exp_beta))

    @property
    def alpha(self) -> np.ndarray:
        return np.log(np.array(self.exp_alpha))


def _check_probabilities(log_p: np.ndarray, what: str):
    bad = np.flatnonzero(log_p >= 0.0)
    if bad.size:
        i = int(bad[0])
        raise GenerationError(f"{what} probability exp({log_p[i]:.4g}) >= 1 at row {i + 1}")


def simulate_cohort_table(params: SimulationParams) -> RawTable:
    """Draw a raw (uncentred) cohort with columns y, E, F1..F4, V1..V3.

    V1 and V2 are a correlated normal pair rescaled to [0, 1] by the
    cohort-wide minimum and range; V3 is uniform.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n
    F1 = rng.integers(0, 2, n).astype(float)
    F2 = rng.integers(0, 2, n).astype(float)
    F3 = rng.random(n)
    F4 = rng.random(n)
    confounders = np.column_stack([np.ones(n), F1 - 0.5, F2 - 0.5, F3 - 0.5, F4 - 0.5])
    log_pe = confounders @ params.alpha
    _check_probabilities(log_pe, "exposure")
    E = (rng.random(n) < np.exp(log_pe)).astype(float)

    rho = W_CORRELATION
    w1 = rng.standard_normal(n)
    w2 = rho * w1 + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)
    V = []
    for w in (w1, w2):
        shifted = w - w.min()
        V.append(shifted / shifted.max())
    V3 = rng.random(n)

    X = np.column_stack([confounders[:, :1], E - 0.5, confounders[:, 1:], V[0] - 0.5, V[1] - 0.5, V3 - 0.5])
    log_p = X @ params.beta
    _check_probabilities(log_p, "outcome")
    y = (rng.random(n) < np.exp(log_p)).astype(float)

    values = (y, E, F1, F2, F3, F4, V[0], V[1], V3)
    return RawTable(COHORT_COLUMNS, dict(zip(COHORT_COLUMNS, values)))


def cohort_design(table: RawTable) -> DesignData:
    """Centred design ``(1, E-1/2, F1-1/2, ..., V3-1/2)`` for a simulated cohort."""
    n = table.n_rows
    cols = [np.ones(n)] + [table[c] - 0.5 for c in COHORT_COLUMNS[1:]]
    return DesignData(y=table["y"].copy(), X=np.column_stack(cols), labels=COHORT_LABELS)


def simulate_cohort(params: SimulationParams) -> DesignData:
    return cohort_design(simulate_cohort_table(params))
