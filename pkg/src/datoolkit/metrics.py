"""Bias and fairness metrics: Monte-Carlo estimators, closed forms, bounds.

Bias of a mechanism at cell i is the expected released count minus the
true count; the fairness statistic alpha is the spread (max minus min) of
the per-cell biases.  Empirical alpha always comes from the mean-bias
vector, never from averaging per-repetition spreads: the definition is a
statement about expectations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .accounting import binomial_cdf
from .errors import DomainError, ParameterError, SchemaError
from .mechanisms import nonneg_project
from .parallel import map_indexed
from .rng import RngHandle
from .tabular import GroupIndex, Histogram

MechanismFn = Callable[[Histogram, RngHandle], object]


@dataclass(frozen=True)
class BiasVector:
    """Per-cell expected error of a mechanism on a fixed histogram."""

    per_cell: np.ndarray
    mode: str  # "empirical" or "analytic"
    reps: int | None = None
    seed: int | None = None
    per_cell_se: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.per_cell, dtype=float).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "per_cell", arr)
        if self.per_cell_se is not None:
            se = np.asarray(self.per_cell_se, dtype=float).reshape(-1)
            se.setflags(write=False)
            object.__setattr__(self, "per_cell_se", se)

    @property
    def l1(self) -> float:
        return float(np.abs(self.per_cell).sum())


@dataclass(frozen=True)
class FairnessReport:
    alpha: float
    argmax_cell: int
    argmin_cell: int


def fairness_of(bias) -> FairnessReport:
    """Spread of the bias vector: max entry minus min entry."""
    per_cell = bias.per_cell if isinstance(bias, BiasVector) else np.asarray(bias, float)
    if per_cell.size == 0:
        raise ParameterError("fairness needs a non-empty bias vector")
    hi = int(np.argmax(per_cell))
    lo = int(np.argmin(per_cell))
    return FairnessReport(float(per_cell[hi] - per_cell[lo]), hi, lo)


# -- Monte-Carlo estimation ------------------------------------------------------


def empirical_bias(
    mechanism: MechanismFn,
    hist: Histogram,
    reps: int,
    rng: RngHandle,
    project: bool = False,
) -> BiasVector:
    """Mean released-minus-true vector over ``reps`` independent runs.

    ``project=True`` applies the non-negative projection to each output
    first, as the release pipeline does for mechanisms that may produce
    negative counts.  Repetition r uses the derived stream ``rng.spawn(r)``,
    so results do not depend on execution order.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    truth = hist.counts.astype(float)

    def one(r: int) -> np.ndarray:
        out = mechanism(hist, rng.spawn(r))
        released = out.counts if isinstance(out, Histogram) else np.asarray(out, float)
        if project:
            released = nonneg_project(released)
        return released - truth

    errors = map_indexed(one, reps)
    stacked = np.stack(errors)
    mean = stacked.mean(axis=0)
    se = stacked.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else None
    return BiasVector(mean, "empirical", reps=reps, seed=rng.seed, per_cell_se=se)


# -- closed forms ------------------------------------------------------------------


def cs_suppression_probability(x, k: int, epsilon: float):
    """Pr[x + Laplace(2/epsilon) < k], elementwise."""
    x = np.asarray(x, dtype=float)
    below = 1.0 - 0.5 * np.exp(-epsilon * (k - x) / 2.0)
    above = 0.5 * np.exp(-epsilon * (x - k) / 2.0)
    return np.where(x < k, below, above)


def analytic_bias_cs(hist: Histogram, k: int, epsilon: float) -> BiasVector:
    """Closed-form bias of DP cell suppression: (k/2 - x_i) Pr[suppress i].

    Uses the real number k/2, the analysis object; the shipped mechanism
    releases floor(k/2), which differs by less than half a unit per
    suppressed cell.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    p = cs_suppression_probability(hist.counts, k, epsilon)
    per_cell = (k / 2.0 - hist.counts) * p
    return BiasVector(per_cell, "analytic")


def analytic_bias_swap(
    hist: Histogram, groups: GroupIndex, epsilon: float
) -> BiasVector:
    """Closed-form bias of DP swapping.

    Cell i gains (group mass - n_Q x_i) / (exp(eps) + n_Q - 1).  The l1
    norm provably equals n_Q/(exp(eps)+n_Q-1) times the summed mean
    absolute deviations of the group count vectors; both are computed and
    cross-checked here on every call.
    """
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    if groups.schema != hist.schema:
        raise SchemaError("group index was built for a different schema")
    n_q = hist.schema.qi_universe_size
    if any(len(g) != n_q for g in groups.groups):
        raise SchemaError("groups do not all have n_Q cells")
    denom = math.exp(epsilon) + n_q - 1
    counts = hist.counts.astype(float)
    per_cell = np.empty_like(counts)
    mad_sum = 0.0
    for group in groups.groups:
        cells = list(group)
        block = counts[cells]
        total = block.sum()
        per_cell[cells] = (total - n_q * block) / denom
        mad_sum += np.abs(block - total / n_q).sum()  # n_q * MAD of the block
    bias = BiasVector(per_cell, "analytic")
    mad_l1 = n_q / denom * mad_sum
    assert math.isclose(bias.l1, mad_l1, rel_tol=1e-12, abs_tol=1e-9), (
        f"l1 {bias.l1} disagrees with the MAD expression {mad_l1}"
    )
    return bias


def analytic_bias_kanon_flag(x_i: int, k: int, beta: float) -> float:
    """Bias of the subsample-then-merge indicator at a cell with count x_i.

    Equals Pr[Binomial(x_i, beta) <= k-1] when x_i >= k and zero otherwise
    (a cell already below the threshold is merged either way).
    """
    if x_i < 0:
        raise ParameterError("x_i must be >= 0")
    if k < 1:
        raise ParameterError("k must be >= 1")
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    if x_i < k:
        return 0.0
    return binomial_cdf(k - 1, x_i, beta)


# -- fairness bounds ----------------------------------------------------------------


def alpha_bound_cs(hist: Histogram, k: int, epsilon: float) -> float:
    """Fairness bound for DP cell suppression.

    (x_max - x_min) p(x_min) + max(|k/2 - x_min|, |k/2 - x_max|)
    (p(x_min) - p(x_max)), with p the suppression probability.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    x_min = float(hist.counts.min())
    x_max = float(hist.counts.max())
    p_min = float(cs_suppression_probability(x_min, k, epsilon))
    p_max = float(cs_suppression_probability(x_max, k, epsilon))
    half = k / 2.0
    return (x_max - x_min) * p_min + max(abs(half - x_min), abs(half - x_max)) * (
        p_min - p_max
    )


def alpha_bound_swap(hist: Histogram, qi_universe_size: int, epsilon: float) -> float:
    """Fairness bound for DP swapping: 2 n_Q (x_max - x_min)/(exp(eps)+n_Q-1)."""
    if qi_universe_size < 1:
        raise ParameterError("qi_universe_size must be >= 1")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    spread = float(hist.counts.max() - hist.counts.min())
    return 2.0 * qi_universe_size * spread / (math.exp(epsilon) + qi_universe_size - 1)


def alpha_bound_laplace(hist: Histogram, epsilon: float) -> float:
    """Fairness bound for the projected Laplace mechanism.

    exp(-epsilon x_min / 2)/2 times the count spread; decreasing in
    epsilon and zero on constant histograms.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    x_min = float(hist.counts.min())
    spread = float(hist.counts.max()) - x_min
    return 0.5 * math.exp(-epsilon * x_min / 2.0) * spread


@dataclass(frozen=True)
class DominanceReport:
    """Outcome of the Laplace-vs-DA fairness comparison on one histogram."""

    precondition_met: bool
    holds: bool | None
    alpha_laplace: float
    alpha_suppression: float
    alpha_swapping: float
    x_min: int
    x_max: int
    k: int
    qi_universe_size: int
    epsilon: float


def fairness_dominance_check(
    hist: Histogram, k: int, qi_universe_size: int, epsilon: float
) -> DominanceReport:
    """Check alpha_Laplace <= alpha_suppression and <= alpha_swapping.

    The comparison is guaranteed only when 2 <= x_min <= k; the
    precondition is checked, and when it fails the report carries
    ``holds=None`` so callers never treat the bounds as ordered.
    """
    x_min = int(hist.counts.min())
    x_max = int(hist.counts.max())
    a_lap = alpha_bound_laplace(hist, epsilon)
    a_cs = alpha_bound_cs(hist, k, epsilon)
    a_sw = alpha_bound_swap(hist, qi_universe_size, epsilon)
    met = 2 <= x_min <= k
    holds = (a_lap <= a_cs + 1e-12 and a_lap <= a_sw + 1e-12) if met else None
    return DominanceReport(
        met, holds, a_lap, a_cs, a_sw, x_min, x_max, k, qi_universe_size, epsilon
    )
