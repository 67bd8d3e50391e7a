"""Tabular data model: schemas, datasets, histograms, and adjacency.

Cell identity is fixed by a lexicographic enumeration of the attribute
universe (first schema attribute most significant); every module addresses
cells through this index.  Adjacency is the bounded notion throughout: one
record changes its tuple, so one cell loses a unit and another gains one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, RowError, SchemaError

Label = Hashable


@dataclass(frozen=True)
class Schema:
    """Ordered categorical attributes plus the quasi-identifier split.

    ``attributes`` is a tuple of ``(name, domain)`` pairs where each domain
    is an ordered tuple of category labels.  ``quasi_identifiers`` lists the
    attribute names treated as quasi-identifying; the rest are non-QI.
    """

    attributes: tuple[tuple[str, tuple[Label, ...]], ...]
    quasi_identifiers: tuple[str, ...] = ()

    def __post_init__(self):
        attrs = tuple((str(name), tuple(domain)) for name, domain in self.attributes)
        object.__setattr__(self, "attributes", attrs)
        names = [name for name, _ in attrs]
        if not names:
            raise SchemaError("schema needs at least one attribute")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names")
        for name, domain in attrs:
            if len(domain) == 0:
                raise SchemaError(f"attribute {name!r} has an empty domain")
            if len(set(domain)) != len(domain):
                raise SchemaError(f"attribute {name!r} has duplicate labels")
        qi = tuple(str(q) for q in self.quasi_identifiers)
        unknown = [q for q in qi if q not in names]
        if unknown:
            raise SchemaError(f"unknown quasi-identifier(s): {unknown}")
        if len(set(qi)) != len(qi):
            raise SchemaError("duplicate quasi-identifier names")
        # store in schema attribute order
        object.__setattr__(
            self, "quasi_identifiers", tuple(n for n in names if n in qi)
        )

    # -- basic views ----------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    @property
    def d(self) -> int:
        return len(self.attributes)

    def domain(self, name: str) -> tuple[Label, ...]:
        for attr, dom in self.attributes:
            if attr == name:
                return dom
        raise SchemaError(f"no attribute named {name!r}")

    @property
    def non_quasi_identifiers(self) -> tuple[str, ...]:
        qi = set(self.quasi_identifiers)
        return tuple(n for n in self.names if n not in qi)

    @cached_property
    def _domain_sizes(self) -> np.ndarray:
        return np.array([len(dom) for _, dom in self.attributes], dtype=np.int64)

    @cached_property
    def _encoders(self) -> tuple[dict, ...]:
        return tuple(
            {label: i for i, label in enumerate(dom)} for _, dom in self.attributes
        )

    @property
    def universe_size(self) -> int:
        """n: number of cells in the attribute universe."""
        return int(np.prod(self._domain_sizes))

    @property
    def qi_universe_size(self) -> int:
        """n_Q: number of distinct quasi-identifier tuples."""
        size = 1
        for name in self.quasi_identifiers:
            size *= len(self.domain(name))
        return size

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"no attribute named {name!r}") from None

    @property
    def qi_columns(self) -> tuple[int, ...]:
        return tuple(self.column_index(n) for n in self.quasi_identifiers)

    @property
    def non_qi_columns(self) -> tuple[int, ...]:
        return tuple(self.column_index(n) for n in self.non_quasi_identifiers)

    # -- cell indexing ---------------------------------------------------

    @cached_property
    def _strides(self) -> np.ndarray:
        sizes = self._domain_sizes
        strides = np.ones(self.d, dtype=np.int64)
        for j in range(self.d - 2, -1, -1):
            strides[j] = strides[j + 1] * sizes[j + 1]
        return strides

    def cell_index(self, codes: np.ndarray) -> np.ndarray:
        """Lexicographic cell index for rows of domain codes, shape (..., d)."""
        return np.asarray(codes, dtype=np.int64) @ self._strides

    def cell_codes(self, index: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`cell_index`; returns codes of shape (..., d)."""
        idx = np.asarray(index, dtype=np.int64)
        out = np.empty(idx.shape + (self.d,), dtype=np.int64)
        rem = idx
        for j in range(self.d):
            out[..., j], rem = np.divmod(rem, self._strides[j])
        return out

    def encode_rows(self, rows: Iterable[Sequence[Label]]) -> np.ndarray:
        encoders = self._encoders
        out = []
        for i, row in enumerate(rows):
            row = tuple(row)
            if len(row) != self.d:
                raise RowError(i, f"expected {self.d} values, got {len(row)}")
            codes = []
            for j, value in enumerate(row):
                try:
                    codes.append(encoders[j][value])
                except (KeyError, TypeError):
                    name = self.names[j]
                    raise RowError(
                        i, f"value {value!r} not in domain of {name!r}"
                    ) from None
            out.append(codes)
        return np.array(out, dtype=np.int64).reshape(len(out), self.d)

    def decode_row(self, codes: Sequence[int]) -> tuple[Label, ...]:
        return tuple(
            self.attributes[j][1][int(c)] for j, c in enumerate(codes)
        )


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Microdata: m records over a schema, stored as domain-index codes."""

    schema: Schema
    codes: np.ndarray  # (m, d) int64, read-only

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64).reshape(-1, self.schema.d)
        sizes = self.schema._domain_sizes
        if codes.size and ((codes < 0) | (codes >= sizes)).any():
            raise SchemaError("dataset codes outside attribute domains")
        object.__setattr__(self, "codes", _readonly(codes))

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence[Label]]) -> "Dataset":
        return cls(schema, schema.encode_rows(rows))

    @classmethod
    def empty(cls, schema: Schema) -> "Dataset":
        return cls(schema, np.empty((0, schema.d), dtype=np.int64))

    @property
    def rows(self) -> list[tuple[Label, ...]]:
        return [self.schema.decode_row(r) for r in self.codes]

    def __len__(self) -> int:
        return self.codes.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.schema == other.schema
            and self.codes.shape == other.codes.shape
            and bool((self.codes == other.codes).all())
        )


@dataclass(frozen=True)
class Histogram:
    """Non-negative integer counts over the universe, lexicographic order."""

    schema: Schema
    counts: np.ndarray  # length n, int64, read-only

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        n = self.schema.universe_size
        if counts.shape[0] != n:
            raise SchemaError(f"expected {n} counts, got {counts.shape[0]}")
        if counts.size and counts.min() < 0:
            raise SchemaError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", _readonly(counts))

    @property
    def bound(self) -> int:
        """B: the maximum cell count (recomputed, never stored)."""
        return int(self.counts.max())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def replace_counts(self, counts: np.ndarray) -> "Histogram":
        return Histogram(self.schema, counts)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Histogram)
            and self.schema == other.schema
            and bool((self.counts == other.counts).all())
        )


@dataclass(frozen=True)
class GroupIndex:
    """Cells grouped by shared non-QI coordinates.

    Groups partition the universe into n/n_Q parts of exactly n_Q cells
    each; within a group the cells differ only in their QI tuple.
    """

    schema: Schema
    groups: tuple[tuple[int, ...], ...]
    cell_to_group: np.ndarray

    @classmethod
    def from_schema(cls, schema: Schema) -> "GroupIndex":
        n = schema.universe_size
        codes = schema.cell_codes(np.arange(n))
        non_qi = list(schema.non_qi_columns)
        if non_qi:
            sub = codes[:, non_qi]
            sizes = schema._domain_sizes[non_qi]
            strides = np.ones(len(non_qi), dtype=np.int64)
            for j in range(len(non_qi) - 2, -1, -1):
                strides[j] = strides[j + 1] * sizes[j + 1]
            keys = sub @ strides
        else:
            keys = np.zeros(n, dtype=np.int64)
        order = {}
        for cell, key in enumerate(keys.tolist()):
            order.setdefault(key, []).append(cell)
        groups = tuple(tuple(cells) for _, cells in sorted(order.items()))
        cell_to_group = np.empty(n, dtype=np.int64)
        for g, cells in enumerate(groups):
            cell_to_group[list(cells)] = g
        n_q = schema.qi_universe_size
        if any(len(g) != n_q for g in groups):
            raise SchemaError("groups do not all have n_Q cells")
        return cls(schema, groups, _readonly(cell_to_group))

    def group_of(self, cell: int) -> tuple[int, ...]:
        return self.groups[int(self.cell_to_group[cell])]


# -- dataset <-> histogram --------------------------------------------------


def build_histogram(dataset: Dataset) -> Histogram:
    """Count records per universe cell."""
    schema = dataset.schema
    idx = schema.cell_index(dataset.codes) if len(dataset) else np.empty(0, np.int64)
    counts = np.bincount(idx, minlength=schema.universe_size)
    return Histogram(schema, counts)


def histogram_to_dataset(hist: Histogram) -> Dataset:
    """Materialize count_i copies of tuple a_i, in cell-index order.

    Right inverse of :func:`build_histogram` on histograms.
    """
    schema = hist.schema
    idx = np.repeat(np.arange(schema.universe_size), hist.counts)
    return Dataset(schema, schema.cell_codes(idx))


def adjacent_histograms(hist: Histogram) -> Iterator[Histogram]:
    """All neighbors under bounded adjacency: one cell -1, another +1.

    Yields (#positive cells) * (n-1) histograms; empty input yields nothing.
    """
    counts = hist.counts
    n = counts.shape[0]
    for i in np.flatnonzero(counts > 0):
        for j in range(n):
            if j == int(i):
                continue
            neighbor = counts.copy()
            neighbor[i] -= 1
            neighbor[j] += 1
            yield hist.replace_counts(neighbor)


# -- CSV ingestion -----------------------------------------------------------


@dataclass(frozen=True)
class ThresholdBinning:
    """Binarize a numeric column: labels[1] iff value > threshold."""

    threshold: float
    labels: tuple[Label, Label] = ("0", "1")

    def apply(self, values: np.ndarray, domain: tuple[Label, ...]) -> list[Label]:
        return [self.labels[1] if v > self.threshold else self.labels[0] for v in values]


@dataclass(frozen=True)
class EquiWidthBinning:
    """Equal-width brackets over observed min..max, right-open except the last.

    Bracket j maps to the j-th label of the attribute's domain, so the
    domain must have exactly ``bins`` labels.
    """

    bins: int

    def apply(self, values: np.ndarray, domain: tuple[Label, ...]) -> list[Label]:
        if len(domain) != self.bins:
            raise SchemaError(
                f"equi-width binning into {self.bins} brackets needs a "
                f"{self.bins}-label domain, got {len(domain)}"
            )
        lo, hi = float(values.min()), float(values.max())
        if hi == lo:
            return [domain[0]] * len(values)
        width = (hi - lo) / self.bins
        idx = np.minimum(((values - lo) // width).astype(int), self.bins - 1)
        return [domain[i] for i in idx]


# Default discretization for the ACS-excerpt shape: income binarized at
# $50k (strictly greater earns the "1" label), ages into 5 brackets.
DEFAULT_BINNING: Mapping[str, object] = {
    "INCTOT": ThresholdBinning(50_000.0),
    "AGE": EquiWidthBinning(5),
}


def load_csv(path, schema: Schema, binning=None) -> Dataset:
    """Read microdata from a comma-separated file (header row, UTF-8).

    ``binning`` maps column names to discretization rules; ``None`` applies
    :data:`DEFAULT_BINNING` to whichever of its columns the schema has, and
    ``{}`` disables discretization entirely.  Unbinned columns must contain
    schema labels verbatim.
    """
    if binning is None:
        binning = {k: v for k, v in DEFAULT_BINNING.items() if k in schema.names}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        raw_rows = [row for row in reader if row]
    missing = [name for name in schema.names if name not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    positions = [header.index(name) for name in schema.names]

    columns: list[list[Label]] = []
    for name, pos in zip(schema.names, positions):
        raw = []
        for i, row in enumerate(raw_rows):
            if pos >= len(row):
                raise RowError(i, f"missing value for column {name!r}")
            raw.append(row[pos])
        rule = binning.get(name)
        if rule is None:
            columns.append(raw)
            continue
        try:
            numeric = np.array([float(v) for v in raw], dtype=float)
        except ValueError:
            bad = next(i for i, v in enumerate(raw) if not _is_float(v))
            raise RowError(bad, f"non-numeric value {raw[bad]!r} in column {name!r}")
        columns.append(rule.apply(numeric, schema.domain(name)))

    rows = list(zip(*columns)) if raw_rows else []
    return Dataset.from_rows(schema, rows)


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


# -- schema config files ------------------------------------------------------


def schema_from_mapping(cfg: Mapping) -> Schema:
    try:
        attrs = cfg["attributes"]
    except (KeyError, TypeError):
        raise ConfigError("schema config needs an 'attributes' list") from None
    attributes = []
    qi = []
    for entry in attrs:
        try:
            name = entry["name"]
            domain = tuple(entry["domain"])
        except (KeyError, TypeError):
            raise ConfigError(
                "each attribute needs 'name' and 'domain'"
            ) from None
        attributes.append((name, domain))
        if entry.get("quasi_identifier", False):
            qi.append(name)
    return Schema(tuple(attributes), tuple(qi))


def schema_from_config(path) -> Schema:
    """Load a schema from a JSON or TOML file mapping attributes to domains."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"schema file not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ImportError:  # pragma: no cover - depends on interpreter
            import tomli as tomllib
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    else:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    return schema_from_mapping(cfg)
