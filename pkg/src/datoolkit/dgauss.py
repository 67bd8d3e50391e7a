"""Exact discrete Gaussian sampling.

Rejection sampler built on Bernoulli(exp(-x)) and discrete-Laplace
primitives.  All randomness comes from bounded uniform integers and the
acceptance tests use exact rational arithmetic, so no floating-point
Gaussian is ever rounded to an integer.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import ParameterError


def _bernoulli(p: Fraction, gen: np.random.Generator) -> bool:
    # p must be a rational in [0, 1]
    return int(gen.integers(p.denominator)) < p.numerator


def _bernoulli_exp_unit(x: Fraction, gen: np.random.Generator) -> bool:
    # Bernoulli(exp(-x)) for 0 <= x <= 1, via the alternating-series trick
    k = 1
    while _bernoulli(x / k, gen):
        k += 1
    return k % 2 == 1


def _bernoulli_exp(x: Fraction, gen: np.random.Generator) -> bool:
    # Bernoulli(exp(-x)) for any rational x >= 0
    while x > 1:
        if not _bernoulli_exp_unit(Fraction(1), gen):
            return False
        x -= 1
    return _bernoulli_exp_unit(x, gen)


def _geometric_exp_slow(x: Fraction, gen: np.random.Generator) -> int:
    # Geometric(1 - exp(-x)): number of leading successes
    k = 0
    while _bernoulli_exp(x, gen):
        k += 1
    return k


def _geometric_exp(x: Fraction, gen: np.random.Generator) -> int:
    # Geometric(1 - exp(-x)) without iterating exp(-x) trials one by one
    t = x.denominator
    while True:
        u = int(gen.integers(t))
        if _bernoulli_exp(Fraction(u, t), gen):
            break
    v = _geometric_exp_slow(Fraction(1), gen)
    return (v * t + u) // x.numerator


def _discrete_laplace(scale: Fraction, gen: np.random.Generator) -> int:
    # Pr[x] proportional to exp(-|x|/scale)
    inv = 1 / scale
    while True:
        negative = bool(gen.integers(2))
        magnitude = _geometric_exp(inv, gen)
        if negative and magnitude == 0:
            continue
        return -magnitude if negative else magnitude


def _floor_sqrt(x: Fraction) -> int:
    # largest integer a with a*a <= x
    return math.isqrt(math.floor(x))


def sample_discrete_gaussian(sigma2, gen: np.random.Generator) -> int:
    """One draw with Pr[x] proportional to exp(-x^2 / (2 sigma2)), x integer."""
    sigma2 = Fraction(sigma2)
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    t = _floor_sqrt(sigma2) + 1
    while True:
        candidate = _discrete_laplace(Fraction(t), gen)
        penalty = (abs(candidate) - sigma2 / t) ** 2 / (2 * sigma2)
        if _bernoulli_exp(penalty, gen):
            return candidate


def sample_discrete_gaussian_vec(
    sigma2, size: int, gen: np.random.Generator
) -> np.ndarray:
    sigma2 = Fraction(sigma2)
    return np.array(
        [sample_discrete_gaussian(sigma2, gen) for _ in range(size)], dtype=np.int64
    )
