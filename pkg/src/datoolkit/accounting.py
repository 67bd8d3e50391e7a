"""Analytic (epsilon, delta) guarantees and a brute-force verifier.

The closed forms here are the single source of the delta column everywhere
else in the toolkit; the harness must call these functions rather than
recompute.  The brute-force verifier checks the sufficient condition for
(epsilon, delta)-DP directly on tiny instances: for each adjacent pair it
measures the probability mass of outcomes whose likelihood ratio exceeds
exp(epsilon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, ParameterError
from .rng import RngHandle
from .tabular import Histogram, adjacent_histograms


def _check_epsilon(epsilon: float) -> None:
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise DomainError(f"epsilon must be positive and finite, got {epsilon!r}")


@dataclass(frozen=True)
class DeltaReport:
    """One (mechanism, epsilon, delta) row plus the parameters behind it."""

    mechanism: str
    epsilon: float
    delta: float | None
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")

    def as_row(self) -> dict:
        row = {
            "mechanism": self.mechanism,
            "epsilon": self.epsilon,
            "delta": self.delta,
        }
        row.update({f"param_{k}": v for k, v in sorted(self.parameters.items())})
        return row


# -- closed forms --------------------------------------------------------------


def delta_cell_suppression(epsilon: float, bound: int, k: int) -> float:
    """delta = 1 - exp(-epsilon (B - k)) / 4, valid for 1 <= k < B."""
    _check_epsilon(epsilon)
    if k < 1:
        raise DomainError("k must be >= 1")
    if k >= bound:
        raise DomainError(f"the guarantee assumes k < B, got k={k}, B={bound}")
    return 1.0 - 0.25 * math.exp(-epsilon * (bound - k))


def delta_swapping(epsilon: float, qi_universe_size: int) -> float:
    """delta for QI randomized response with retention exp(eps)/(exp(eps)+n_Q-1)."""
    _check_epsilon(epsilon)
    if qi_universe_size < 2:
        raise DomainError("qi_universe_size must be >= 2")
    e = math.exp(epsilon)
    gamma = e / (e + qi_universe_size - 1)
    q1 = qi_universe_size - 1
    return 1.0 - (1.0 - gamma * gamma) / q1 - ((1.0 - gamma) / q1) ** 2


def binomial_cdf(j_max: int, trials: int, p: float) -> float:
    """Pr[Binomial(trials, p) <= j_max].

    Exact integer binomial coefficients in log space up to 1000 trials; an
    incremental term recurrence beyond that (the exact coefficients get
    needlessly large while the float result is identical to ~1e-12).
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    if trials < 0:
        raise DomainError("trials must be >= 0")
    if j_max < 0:
        return 0.0
    j_max = min(j_max, trials)
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 1.0 if j_max >= trials else 0.0
    log_p, log_q = math.log(p), math.log1p(-p)
    if trials <= 1000:
        total = 0.0
        for j in range(j_max + 1):
            total += math.exp(
                math.log(math.comb(trials, j)) + j * log_p + (trials - j) * log_q
            )
        return min(total, 1.0)
    term = math.exp(trials * log_q)
    total = term
    ratio = p / (1.0 - p)
    for j in range(j_max):
        term *= (trials - j) / (j + 1) * ratio
        total += term
    return min(total, 1.0)


def delta_kanonymity(epsilon: float, beta: float, bound: int) -> float:
    """delta = 1 - min over w in [1..B] of Pr[Bin(w, beta) <= floor((1-e^-eps) w)]^2.

    The guarantee depends on the subsample rate and the count bound only;
    the anonymity threshold k drops out of the analysis.
    """
    _check_epsilon(epsilon)
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    if bound < 1:
        raise DomainError("bound must be >= 1")
    shrink = 1.0 - math.exp(-epsilon)
    worst = 1.0
    for w in range(1, bound + 1):
        nu = math.floor(shrink * w)
        worst = min(worst, binomial_cdf(nu, w, beta))
    return 1.0 - worst * worst


def gaussian_dp_parameters(epsilon: float, delta: float) -> float:
    """Effective epsilon of the discrete Gaussian: eps^2/2 + eps sqrt(2 ln(1/delta))."""
    _check_epsilon(epsilon)
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]")
    return 0.5 * epsilon * epsilon + epsilon * math.sqrt(2.0 * math.log(1.0 / delta))


# -- brute-force verifier --------------------------------------------------------

#: Outcomes whose likelihood ratio is within this relative tolerance of
#: exp(epsilon) count as satisfying the ratio condition.  Several
#: mechanisms put real mass on outcomes with ratio exactly exp(epsilon);
#: those belong to the good set, and with sampled probabilities a strict
#: comparison would flip them in and out at random.
RATIO_RTOL = 0.05

Sampler = Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
ExactPmf = Callable[[np.ndarray], Mapping[tuple, float]]


@dataclass(frozen=True)
class PairResult:
    source: tuple[int, ...]
    target: tuple[int, ...]
    delta_hat: float


@dataclass(frozen=True)
class BruteForceReport:
    delta_hat: float
    mc_standard_error: float
    n_samples: int
    method: str
    pairs: tuple[PairResult, ...]


def _outcome_distribution_sampled(
    sampler: Sampler, counts: np.ndarray, n_samples: int, gen: np.random.Generator
) -> dict[tuple, float]:
    batch = sampler(counts, n_samples, gen)
    batch = np.asarray(batch)
    if batch.shape != (n_samples, counts.shape[0]):
        raise ParameterError(
            f"sampler returned shape {batch.shape}, "
            f"expected {(n_samples, counts.shape[0])}"
        )
    if not np.issubdtype(batch.dtype, np.integer):
        if not np.equal(np.mod(batch, 1), 0).all():
            raise ParameterError(
                "continuous-output mechanism: the brute-force verifier covers "
                "discrete-output mechanisms only"
            )
        batch = batch.astype(np.int64)
    outcomes, freq = np.unique(batch, axis=0, return_counts=True)
    return {
        tuple(int(v) for v in row): c / n_samples
        for row, c in zip(outcomes, freq)
    }


def _pair_delta(
    p_source: Mapping[tuple, float],
    p_target: Mapping[tuple, float],
    epsilon: float,
    rtol: float,
) -> float:
    threshold = math.exp(epsilon) * (1.0 + rtol)
    bad_mass = 0.0
    for outcome, p in p_source.items():
        q = p_target.get(outcome, 0.0)
        if p > threshold * q:
            bad_mass += p
    return bad_mass


def verify_dp_bruteforce(
    hist: Histogram,
    epsilon: float,
    sampler: Sampler | None = None,
    *,
    exact_pmf: ExactPmf | None = None,
    n_samples: int = 1_000_000,
    rng: RngHandle | None = None,
    ratio_rtol: float | None = None,
) -> BruteForceReport:
    """Empirical delta over every adjacent pair reachable from ``hist``.

    For each neighbor D' of D (both orientations) the verifier builds the
    outcome distributions of the mechanism on D and D', collects the
    outcomes whose probability ratio exceeds exp(epsilon), and reports the
    worst total mass of that set.  Distributions come from ``exact_pmf``
    when given, otherwise from ``n_samples`` draws of ``sampler``.

    Restricted to tiny instances (n <= 3 cells, counts <= 3) where the
    outcome space is genuinely enumerable.
    """
    _check_epsilon(epsilon)
    if sampler is None and exact_pmf is None:
        raise ParameterError("need a sampler or an exact pmf")
    counts = hist.counts
    if counts.shape[0] > 3:
        raise DomainError("brute-force verification is limited to n <= 3 cells")
    if hist.bound > 3:
        raise DomainError("brute-force verification is limited to counts <= 3")
    if hist.total < 1:
        raise DomainError("histogram must contain at least one record")
    rtol = RATIO_RTOL if ratio_rtol is None else ratio_rtol

    if exact_pmf is not None:
        method = "exact"
        get = exact_pmf
        rtol = min(rtol, 1e-9)
    else:
        method = "sampled"
        gen = (rng or RngHandle(0)).gen
        cache: dict[tuple, dict[tuple, float]] = {}

        def get(c: np.ndarray) -> Mapping[tuple, float]:
            key = tuple(int(v) for v in c)
            if key not in cache:
                cache[key] = _outcome_distribution_sampled(sampler, c, n_samples, gen)
            return cache[key]

    pairs: list[PairResult] = []
    worst = 0.0
    source_key = tuple(int(v) for v in counts)
    p_source = get(counts)
    for neighbor in adjacent_histograms(hist):
        p_neighbor = get(neighbor.counts)
        neighbor_key = tuple(int(v) for v in neighbor.counts)
        for (a_key, pa), (b_key, pb) in (
            ((source_key, p_source), (neighbor_key, p_neighbor)),
            ((neighbor_key, p_neighbor), (source_key, p_source)),
        ):
            d = _pair_delta(pa, pb, epsilon, rtol)
            pairs.append(PairResult(a_key, b_key, d))
            worst = max(worst, d)

    se = 0.0
    if method == "sampled":
        se = math.sqrt(max(worst * (1.0 - worst), 1.0 / n_samples) / n_samples)
    return BruteForceReport(worst, se, n_samples if method == "sampled" else 0,
                            method, tuple(pairs))


# -- exact outcome distributions for the shipped mechanisms ----------------------
#
# These enumerations are derived independently of the samplers in
# :mod:`datoolkit.mechanisms`, so exact and sampled verification check each
# other as well as the closed-form deltas.


def exact_pmf_cell_suppression(k: int, epsilon: float) -> ExactPmf:
    """Outcome distribution of per-cell DP suppression on tiny histograms."""
    if k < 1:
        raise DomainError("k must be >= 1")
    _check_epsilon(epsilon)

    def suppress_prob(x: int) -> float:
        # Pr[x + Laplace(2/eps) < k]
        if x < k:
            return 1.0 - 0.5 * math.exp(-epsilon * (k - x) / 2.0)
        return 0.5 * math.exp(-epsilon * (x - k) / 2.0)

    def pmf(counts: np.ndarray) -> dict[tuple, float]:
        dists: dict[tuple, float] = {(): 1.0}
        for x in counts.tolist():
            p = suppress_prob(x)
            cell_outcomes = {}
            cell_outcomes[k // 2] = p
            cell_outcomes[x] = cell_outcomes.get(x, 0.0) + (1.0 - p)
            dists = {
                prefix + (value,): mass * q
                for prefix, mass in dists.items()
                for value, q in cell_outcomes.items()
            }
        return dists

    return pmf


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial_pmf(counts: tuple[int, ...], probs: list[float], total: int) -> float:
    coeff = math.factorial(total)
    p = 1.0
    for c, prob in zip(counts, probs):
        coeff //= math.factorial(c)
        p *= prob**c
    return coeff * p


def exact_pmf_swapping(groups, epsilon: float) -> ExactPmf:
    """Outcome distribution of DP swapping on tiny histograms."""
    _check_epsilon(epsilon)
    n_q = groups.schema.qi_universe_size
    e = math.exp(epsilon)
    gamma = e / (e + n_q - 1)

    def pmf(counts: np.ndarray) -> dict[tuple, float]:
        n = counts.shape[0]
        dists: dict[tuple, float] = {(0,) * n: 1.0}
        for group in groups.groups:
            for pos, cell in enumerate(group):
                x = int(counts[cell])
                if x == 0:
                    continue
                probs = []
                for dest_pos in range(len(group)):
                    if dest_pos == pos:
                        probs.append(gamma)
                    else:
                        probs.append((1.0 - gamma) / (n_q - 1))
                moves: dict[tuple, float] = {}
                for comp in _compositions(x, len(group)):
                    moves[comp] = _multinomial_pmf(comp, probs, x)
                new: dict[tuple, float] = {}
                for outcome, mass in dists.items():
                    for comp, q in moves.items():
                        updated = list(outcome)
                        for dest_cell, c in zip(group, comp):
                            updated[dest_cell] += c
                        key = tuple(updated)
                        new[key] = new.get(key, 0.0) + mass * q
                dists = new
        return dists

    return pmf


def exact_pmf_subsample(beta: float) -> ExactPmf:
    """Outcome distribution of Bernoulli(beta) row subsampling on histograms."""
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")

    def pmf(counts: np.ndarray) -> dict[tuple, float]:
        dists: dict[tuple, float] = {(): 1.0}
        for x in counts.tolist():
            cell = {
                j: math.comb(x, j) * beta**j * (1.0 - beta) ** (x - j)
                for j in range(x + 1)
            }
            dists = {
                prefix + (j,): mass * q
                for prefix, mass in dists.items()
                for j, q in cell.items()
            }
        return dists

    return pmf
