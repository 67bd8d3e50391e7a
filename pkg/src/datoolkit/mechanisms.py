"""Release mechanisms: randomized DP variants and deterministic baselines.

All mechanisms use the bounded adjacency of :mod:`datoolkit.tabular` (one
record changes its tuple), hence the Laplace scale 2/epsilon: a change of
one record moves two histogram cells by one unit each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal

import numpy as np

from .dgauss import sample_discrete_gaussian
from .errors import ConfigError, ParameterError
from .rng import RngHandle
from .tabular import Dataset, GroupIndex, Histogram

CsVariant = Literal["per_cell_noise", "noisy_threshold"]

CS_VARIANTS: tuple[CsVariant, ...] = ("per_cell_noise", "noisy_threshold")


@dataclass(frozen=True)
class MechanismConfig:
    """Shared mechanism parameters, validated once.

    ``cs_variant`` selects between per-cell noisy comparisons (the default,
    the analyzed mechanism) and a single noisy shared threshold.
    """

    epsilon: float = 1.0
    k: int = 6
    swap_fraction: float = 1.0
    cs_variant: CsVariant = "per_cell_noise"
    beta_override: float | None = None

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if not 0.0 <= self.swap_fraction <= 1.0:
            raise ParameterError("swap_fraction must lie in [0, 1]")
        if self.cs_variant not in CS_VARIANTS:
            raise ParameterError(f"unknown cs_variant {self.cs_variant!r}")
        if self.beta_override is not None and not 0.0 < self.beta_override < 1.0:
            raise ParameterError("beta_override must lie in (0, 1)")


def _check_epsilon(epsilon: float) -> None:
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ParameterError(f"epsilon must be a positive finite number, got {epsilon!r}")


# -- additive-noise mechanisms ------------------------------------------------


def laplace_mechanism(hist: Histogram, epsilon: float, rng: RngHandle) -> np.ndarray:
    """True counts plus i.i.d. Laplace(2/epsilon) noise; real-valued output."""
    _check_epsilon(epsilon)
    noise = rng.gen.laplace(0.0, 2.0 / epsilon, size=hist.counts.shape[0])
    return hist.counts + noise


def discrete_gaussian_mechanism(
    hist: Histogram, epsilon: float, rng: RngHandle
) -> np.ndarray:
    """True counts plus exact discrete Gaussian noise, variance 4/epsilon^2."""
    _check_epsilon(epsilon)
    sigma2 = Fraction(4) / (Fraction(epsilon) * Fraction(epsilon))
    gen = rng.gen
    noise = np.array(
        [sample_discrete_gaussian(sigma2, gen) for _ in range(hist.counts.shape[0])],
        dtype=np.int64,
    )
    return hist.counts + noise


def nonneg_project(values: np.ndarray) -> np.ndarray:
    """Clamp at zero, then round to the nearest integer with ties up."""
    clamped = np.maximum(np.asarray(values, dtype=float), 0.0)
    return np.floor(clamped + 0.5).astype(np.int64)


# -- cell suppression ----------------------------------------------------------


def cell_suppression(hist: Histogram, k: int) -> Histogram:
    """Replace counts below the threshold k with floor(k/2); deterministic."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    counts = np.where(hist.counts < k, k // 2, hist.counts)
    return hist.replace_counts(counts)


def _dp_cs_sample(
    counts: np.ndarray,
    k: int,
    epsilon: float,
    gen: np.random.Generator,
    size: int | None = None,
    variant: CsVariant = "per_cell_noise",
    exact_half: bool = False,
) -> np.ndarray:
    squeeze = size is None
    s = 1 if squeeze else int(size)
    n = counts.shape[0]
    scale = 2.0 / epsilon
    if variant == "per_cell_noise":
        noise = gen.laplace(0.0, scale, size=(s, n))
        suppressed = counts + noise < k
        fill = k / 2.0 if exact_half else k // 2
    elif variant == "noisy_threshold":
        noisy_k = k + gen.laplace(0.0, scale, size=(s, 1))
        suppressed = counts < noisy_k
        fill = noisy_k / 2.0 if exact_half else np.floor(noisy_k / 2.0)
    else:
        raise ParameterError(f"unknown cs_variant {variant!r}")
    released = np.where(suppressed, fill, counts.astype(float))
    if not exact_half:
        released = released.astype(np.int64)
    return released[0] if squeeze else released


def dp_cell_suppression(
    hist: Histogram,
    k: int,
    epsilon: float,
    rng: RngHandle,
    variant: CsVariant = "per_cell_noise",
    exact_half: bool = False,
):
    """Suppress based on noisy evidence that a count is below the threshold.

    Default (``per_cell_noise``, Eq.-style): cell i is released unchanged
    when x_i + Laplace(2/epsilon) >= k and replaced with floor(k/2)
    otherwise, with fresh noise per cell.  ``noisy_threshold`` draws one
    shared noisy threshold instead and compares true counts against it.

    ``exact_half=True`` releases the real number k/2 instead of floor(k/2)
    (the analysis object used by the closed-form bias); the result is then
    a float array rather than a :class:`Histogram`.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    _check_epsilon(epsilon)
    released = _dp_cs_sample(
        hist.counts, k, epsilon, rng.gen, None, variant, exact_half
    )
    if exact_half:
        return released
    return hist.replace_counts(released)


def cell_suppression_sampler(
    k: int, epsilon: float, variant: CsVariant = "per_cell_noise"
) -> Callable[[np.ndarray, int, np.random.Generator], np.ndarray]:
    """Batched sampler over the same code path, for the brute-force verifier."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    _check_epsilon(epsilon)

    def sample(counts: np.ndarray, size: int, gen: np.random.Generator) -> np.ndarray:
        return _dp_cs_sample(counts, k, epsilon, gen, size, variant)

    return sample


# -- swapping ------------------------------------------------------------------


def swapping(dataset: Dataset, swap_fraction: float, rng: RngHandle) -> Dataset:
    """Exchange quasi-identifier values between nearest record pairs.

    Performs floor((1 - swap_fraction) * m / 2) swaps.  Each swap picks a
    uniformly random unswapped row, pairs it with the nearest unswapped row
    (discrete metric summed over attributes; the numeric |a-b|/range term
    never applies to the all-categorical schemas used here), exchanges
    their QI values, and retires both rows.  Ties go to the lowest row
    index so runs are reproducible under a seed.
    """
    if not 0.0 <= swap_fraction <= 1.0:
        raise ParameterError("swap_fraction must lie in [0, 1]")
    schema = dataset.schema
    qi_cols = list(schema.qi_columns)
    if not qi_cols:
        raise ConfigError("swapping needs at least one quasi-identifier")
    m = len(dataset)
    n_swaps = int(math.floor((1.0 - swap_fraction) * m / 2.0))
    codes = dataset.codes.copy()
    if n_swaps == 0:
        return Dataset(schema, codes)
    gen = rng.gen
    unswapped = np.ones(m, dtype=bool)
    for _ in range(n_swaps):
        pool = np.flatnonzero(unswapped)
        picked = pool[int(gen.integers(pool.shape[0]))]
        others = pool[pool != picked]
        distances = (codes[others] != codes[picked]).sum(axis=1)
        partner = others[int(np.argmin(distances))]  # argmin -> lowest index
        picked_qi = codes[picked, qi_cols].copy()
        codes[picked, qi_cols] = codes[partner, qi_cols]
        codes[partner, qi_cols] = picked_qi
        unswapped[picked] = False
        unswapped[partner] = False
    return Dataset(schema, codes)


def swap_retention_probability(epsilon: float, qi_universe_size: int) -> float:
    """Probability that a record keeps its QI tuple under DP swapping."""
    _check_epsilon(epsilon)
    if qi_universe_size < 1:
        raise ParameterError("qi_universe_size must be >= 1")
    e = math.exp(epsilon)
    return e / (e + qi_universe_size - 1)


def _dp_swap_sample(
    counts: np.ndarray,
    groups: GroupIndex,
    epsilon: float,
    gen: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    squeeze = size is None
    s = 1 if squeeze else int(size)
    n_q = groups.schema.qi_universe_size
    gamma = swap_retention_probability(epsilon, n_q)
    out = np.zeros((s, counts.shape[0]), dtype=np.int64)
    if n_q == 1:
        out += counts  # degenerate: nothing to resample
        return out[0] if squeeze else out
    uniform_others = np.full(n_q - 1, 1.0 / (n_q - 1))
    for group in groups.groups:
        cells = np.asarray(group)
        for pos, cell in enumerate(group):
            x = int(counts[cell])
            if x == 0:
                continue
            kept = gen.binomial(x, gamma, size=s)
            out[:, cell] += kept
            moved = gen.multinomial(x - kept, uniform_others)  # (s, n_q - 1)
            others = np.delete(cells, pos)
            out[:, others] += moved
    return out[0] if squeeze else out


def dp_swapping(hist: Histogram, epsilon: float, rng: RngHandle) -> Histogram:
    """Randomized-response resampling of every record's QI tuple.

    Each of the m records implied by the histogram keeps its QI tuple with
    the retention probability and otherwise redraws it uniformly from the
    other QI tuples; non-QI values never change, so mass moves only within
    a non-QI group.  Colliding tuples collapse by summing counts.
    """
    _check_epsilon(epsilon)
    groups = GroupIndex.from_schema(hist.schema)
    counts = _dp_swap_sample(hist.counts, groups, epsilon, rng.gen)
    return hist.replace_counts(counts)


def swapping_sampler(
    groups: GroupIndex, epsilon: float
) -> Callable[[np.ndarray, int, np.random.Generator], np.ndarray]:
    """Batched DP-swapping sampler over the same code path as dp_swapping."""
    _check_epsilon(epsilon)

    def sample(counts: np.ndarray, size: int, gen: np.random.Generator) -> np.ndarray:
        return _dp_swap_sample(counts, groups, epsilon, gen, size)

    return sample
