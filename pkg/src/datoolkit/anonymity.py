"""k-anonymization via Mondrian, reconstruction, and the DP variant.

Mondrian partitions the records top-down, always trying the quasi-
identifier dimension with the widest normalized range first and splitting
the partition at its median; a cut is taken only when both halves keep at
least k records.  Leaves generalize each QI attribute to the set of values
observed in the leaf; non-QI attributes pass through untouched.

The DP variant retains each row independently with probability
beta = 1 - exp(-epsilon) before anonymizing, which is what buys the
(epsilon, delta) guarantee computed in :mod:`datoolkit.accounting`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError, SchemaError
from .rng import RngHandle
from .tabular import Dataset, Label, Schema


@dataclass(frozen=True)
class Interval:
    """Numeric generalization [low, high]; reconstruction samples a Gaussian
    centered at the midpoint with sigma = width/4, rounded to the nearest
    non-negative integer (values beyond the endpoints are kept)."""

    low: float
    high: float

    def __post_init__(self):
        if self.high < self.low:
            raise ParameterError("interval endpoints out of order")


@dataclass(frozen=True)
class GeneralizedRow:
    """One output row: per attribute either a merged tuple of labels (QI),
    a single label (non-QI), or an :class:`Interval`; plus a multiplicity."""

    values: tuple
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError("count must be >= 1")


@dataclass(frozen=True)
class AnonymizedPartition:
    schema: Schema
    k: int
    qi_attributes: tuple[str, ...]
    rows: tuple[GeneralizedRow, ...]

    @property
    def total(self) -> int:
        return sum(r.count for r in self.rows)

    def to_csv(self, path) -> None:
        """Merged sets render as "a|b|c", intervals as "[a,b]"."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.schema.names) + ["count"])
            for row in self.rows:
                rendered = []
                for value in row.values:
                    if isinstance(value, Interval):
                        rendered.append(f"[{value.low:g},{value.high:g}]")
                    elif isinstance(value, tuple):
                        rendered.append("|".join(str(v) for v in value))
                    else:
                        rendered.append(str(value))
                writer.writerow(rendered + [row.count])


def _resolve_qi(schema: Schema, qi_attributes) -> tuple[str, ...]:
    if qi_attributes is None:
        qi = schema.quasi_identifiers
    else:
        qi = tuple(qi_attributes)
        unknown = [q for q in qi if q not in schema.names]
        if unknown:
            raise SchemaError(f"unknown quasi-identifier(s): {unknown}")
        qi = tuple(n for n in schema.names if n in qi)
    if not qi:
        raise SchemaError("k-anonymization needs at least one quasi-identifier")
    return qi


def mondrian_kanonymize(
    dataset: Dataset, k: int, qi_attributes: Sequence[str] | None = None
) -> AnonymizedPartition:
    """Greedy top-down median partitioning into leaves of >= k records.

    ``qi_attributes`` overrides the schema's QI set (the anonymization
    feature set need not coincide with the swapping one).  Fewer than k
    records is not an error: the result is a single fully generalized row
    per non-QI combination, covering the whole observed QI range.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if len(dataset) == 0:
        raise ParameterError("cannot anonymize an empty dataset")
    schema = dataset.schema
    qi = _resolve_qi(schema, qi_attributes)
    qi_cols = [schema.column_index(a) for a in qi]
    non_qi_cols = [j for j in range(schema.d) if j not in qi_cols]
    codes = dataset.codes
    domain_sizes = schema._domain_sizes

    def split_score(indices: np.ndarray, col: int) -> float:
        size = int(domain_sizes[col])
        if size <= 1:
            return 0.0
        distinct = np.unique(codes[indices, col]).shape[0]
        return (distinct - 1) / (size - 1)

    leaves: list[np.ndarray] = []

    def partition(indices: np.ndarray) -> None:
        order = sorted(
            range(len(qi_cols)),
            key=lambda j: (-split_score(indices, qi_cols[j]), j),
        )
        for j in order:
            col = qi_cols[j]
            values = codes[indices, col]
            lo, hi = values.min(), values.max()
            if lo == hi:
                continue
            median = np.sort(values)[(values.shape[0] - 1) // 2]
            left = indices[values <= median]
            right = indices[values > median]
            if left.shape[0] >= k and right.shape[0] >= k:
                partition(left)
                partition(right)
                return
        leaves.append(indices)

    partition(np.arange(len(dataset)))

    rows: list[GeneralizedRow] = []
    for leaf in leaves:
        merged = {}
        for col in qi_cols:
            observed = np.unique(codes[leaf, col])
            domain = schema.attributes[col][1]
            merged[col] = tuple(domain[int(c)] for c in observed)
        if non_qi_cols:
            sub = codes[leaf][:, non_qi_cols]
            combos, counts = np.unique(sub, axis=0, return_counts=True)
        else:
            combos, counts = np.zeros((1, 0), dtype=np.int64), np.array([leaf.shape[0]])
        for combo, count in zip(combos, counts):
            values: list = [None] * schema.d
            for col in qi_cols:
                values[col] = merged[col]
            for pos, col in enumerate(non_qi_cols):
                values[col] = schema.attributes[col][1][int(combo[pos])]
            rows.append(GeneralizedRow(tuple(values), int(count)))

    part = AnonymizedPartition(schema, k, qi, tuple(rows))
    assert part.total == len(dataset)
    return part


def reconstruct(partition: AnonymizedPartition, rng: RngHandle) -> Dataset:
    """Sample concrete records back in the original space.

    Every generalized row emits exactly ``count`` records: merged
    categorical values are drawn uniformly, intervals via the Gaussian rule
    of :class:`Interval`, and single labels are copied through.
    """
    gen = rng.gen
    schema = partition.schema
    out_rows: list[tuple] = []
    for row in partition.rows:
        columns: list[list[Label]] = []
        for value in row.values:
            if isinstance(value, Interval):
                mu = (value.low + value.high) / 2.0
                sigma = (value.high - value.low) / 4.0
                draws = np.rint(gen.normal(mu, sigma, size=row.count))
                columns.append([int(max(v, 0)) for v in draws])
            elif isinstance(value, tuple):
                picks = gen.integers(len(value), size=row.count)
                columns.append([value[int(i)] for i in picks])
            else:
                columns.append([value] * row.count)
        out_rows.extend(zip(*columns))
    return Dataset.from_rows(schema, out_rows)


def subsample_rate(epsilon: float) -> float:
    """Row-retention probability of DP k-anonymity: 1 - exp(-epsilon)."""
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ParameterError("epsilon must be positive and finite")
    return 1.0 - math.exp(-epsilon)


def dp_kanonymity(
    dataset: Dataset,
    k: int,
    epsilon: float | None,
    rng: RngHandle,
    beta_override: float | None = None,
    qi_attributes: Sequence[str] | None = None,
) -> Dataset:
    """Subsample rows with probability beta, anonymize, reconstruct.

    beta defaults to 1 - exp(-epsilon); ``beta_override`` replaces it (and
    must lie strictly inside (0, 1)).  An empty subsample reconstructs to
    an empty dataset.
    """
    if beta_override is not None:
        beta = beta_override
    else:
        if epsilon is None:
            raise ParameterError("need epsilon or beta_override")
        beta = subsample_rate(epsilon)
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if k < 1:
        raise ParameterError("k must be >= 1")
    gen = rng.gen
    mask = gen.random(len(dataset)) < beta
    subset = Dataset(dataset.schema, dataset.codes[mask])
    if len(subset) == 0:
        return Dataset.empty(dataset.schema)
    partition = mondrian_kanonymize(subset, k, qi_attributes)
    return reconstruct(partition, rng)


def binomial_subsample_counts(
    counts: np.ndarray, beta: float, gen: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Histogram-level Bernoulli(beta) thinning: cell i becomes Bin(x_i, beta).

    Distributionally identical to row-level subsampling; used to verify the
    DP guarantee of the subsample step on tiny instances.
    """
    if not 0.0 < beta < 1.0:
        raise ParameterError("beta must lie in (0, 1)")
    squeeze = size is None
    s = 1 if squeeze else int(size)
    out = gen.binomial(np.broadcast_to(counts, (s, counts.shape[0])), beta)
    return out[0] if squeeze else out
