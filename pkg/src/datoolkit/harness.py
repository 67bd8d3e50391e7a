"""Experiment driver: data-release tables, error sweeps, classification.

Every repetition r of every experiment runs on the derived stream
``seed + r`` so reports are byte-identical across runs and thread counts
(the DA_TOOLKIT_THREADS environment variable caps parallelism).  The delta
column always comes from :mod:`datoolkit.accounting`; nothing here
recomputes a privacy guarantee.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import accounting, anonymity, classify, mechanisms, metrics
from .errors import ConfigError
from .parallel import map_indexed
from .rng import RngHandle
from .tabular import (
    Dataset,
    Histogram,
    build_histogram,
    histogram_to_dataset,
    load_csv,
    schema_from_config,
    schema_from_mapping,
)

DP_MECHANISMS = (
    "laplace",
    "discrete_gaussian",
    "dp_suppression",
    "dp_swapping",
    "dp_kanonymity",
)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Dataset
    epsilons: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    repetitions: int = 200
    seed: int = 0
    mechanisms: tuple[str, ...] = DP_MECHANISMS
    out_dir: Path | None = None
    # per-mechanism thresholds for the release/classification tables
    suppression_k: int = 6
    kanon_k: int = 60
    kanon_qi: tuple[str, ...] | None = None  # default: every non-label attribute
    # sweep axes
    cs_thresholds: tuple[int, ...] = (2, 4, 6, 8)
    swap_fractions: tuple[float, ...] = (0.25, 0.5, 0.75, 0.95)
    kanon_ks: tuple[int, ...] = (30, 60, 120)
    # classification
    label_attr: str = "INCTOT"
    feature_attrs: tuple[str, ...] | None = None  # default: every non-label attribute
    hyperparams: classify.HyperParams = field(default_factory=classify.HyperParams)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be positive")

    def resolved_kanon_qi(self) -> tuple[str, ...]:
        if self.kanon_qi is not None:
            return self.kanon_qi
        return tuple(n for n in self.dataset.schema.names if n != self.label_attr)

    def resolved_features(self) -> tuple[str, ...]:
        if self.feature_attrs is not None:
            return self.feature_attrs
        return tuple(n for n in self.dataset.schema.names if n != self.label_attr)


# -- config files ---------------------------------------------------------------


def _load_mapping(path: Path) -> Mapping:
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # pragma: no cover - depends on interpreter
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_experiment_config(path, overrides: Mapping | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a TOML or JSON file.

    The ``[data]`` table either points at a CSV plus schema file or asks
    for the bundled synthetic data (``synthetic_rows``/``synthetic_seed``).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = dict(_load_mapping(path))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})

    data = cfg.get("data", {})
    if "csv" in data:
        schema_ref = data.get("schema")
        if schema_ref is None:
            raise ConfigError("[data] with a csv needs a 'schema' file")
        if isinstance(schema_ref, Mapping):
            schema = schema_from_mapping(schema_ref)
        else:
            schema_path = Path(schema_ref)
            if not schema_path.is_absolute():
                schema_path = path.parent / schema_path
            schema = schema_from_config(schema_path)
        csv_path = Path(data["csv"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        if not csv_path.exists():
            raise ConfigError(f"dataset file not found: {csv_path}")
        dataset = load_csv(csv_path, schema)
    elif "synthetic_rows" in data:
        from .synth import synthetic_dataset

        dataset = synthetic_dataset(
            int(data["synthetic_rows"]), int(data.get("synthetic_seed", 7))
        )
    else:
        raise ConfigError("config needs a [data] table with 'csv' or 'synthetic_rows'")

    release = cfg.get("release", {})
    sweep = cfg.get("sweep", {})
    cls = cfg.get("classification", {})
    hp = classify.HyperParams(
        learning_rate=float(cls.get("learning_rate", 0.1)),
        iterations=int(cls.get("iterations", 2000)),
        l2_penalty=float(cls.get("l2_penalty", 1e-4)),
        tolerance=float(cls.get("tolerance", 1e-6)),
    )
    try:
        config = ExperimentConfig(
            dataset=dataset,
            epsilons=tuple(float(e) for e in cfg.get("epsilons", (0.5, 1.0, 2.0, 4.0))),
            repetitions=int(cfg.get("repetitions", 200)),
            seed=int(cfg.get("seed", 0)),
            mechanisms=tuple(cfg.get("mechanisms", DP_MECHANISMS)),
            out_dir=Path(cfg["out_dir"]) if "out_dir" in cfg else None,
            suppression_k=int(release.get("suppression_k", 6)),
            kanon_k=int(release.get("kanon_k", 60)),
            kanon_qi=tuple(release["kanon_qi"]) if "kanon_qi" in release else None,
            cs_thresholds=tuple(int(k) for k in sweep.get("cs_thresholds", (2, 4, 6, 8))),
            swap_fractions=tuple(
                float(f) for f in sweep.get("swap_fractions", (0.25, 0.5, 0.75, 0.95))
            ),
            kanon_ks=tuple(int(k) for k in sweep.get("kanon_ks", (30, 60, 120))),
            label_attr=str(cls.get("label", "INCTOT")),
            feature_attrs=tuple(cls["features"]) if "features" in cls else None,
            hyperparams=hp,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    unknown = [m for m in config.mechanisms if m not in DP_MECHANISMS]
    if unknown:
        raise ConfigError(f"unknown mechanism(s): {unknown}")
    return config


# -- mechanism registry -----------------------------------------------------------

# A release runner maps the original histogram/dataset to released counts
# in the original space.  Extra runners may be injected for testing.
ReleaseRunner = Callable[[Histogram, Dataset, float, ExperimentConfig, RngHandle], np.ndarray]


def _run_laplace(hist, dataset, eps, config, rng):
    return mechanisms.nonneg_project(mechanisms.laplace_mechanism(hist, eps, rng))


def _run_gaussian(hist, dataset, eps, config, rng):
    return mechanisms.nonneg_project(
        mechanisms.discrete_gaussian_mechanism(hist, eps, rng)
    )


def _run_dp_suppression(hist, dataset, eps, config, rng):
    return mechanisms.dp_cell_suppression(hist, config.suppression_k, eps, rng).counts


def _run_dp_swapping(hist, dataset, eps, config, rng):
    return mechanisms.dp_swapping(hist, eps, rng).counts


def _run_dp_kanonymity(hist, dataset, eps, config, rng):
    released = anonymity.dp_kanonymity(
        dataset, config.kanon_k, eps, rng, qi_attributes=config.resolved_kanon_qi()
    )
    return build_histogram(released).counts


RELEASE_RUNNERS: dict[str, ReleaseRunner] = {
    "laplace": _run_laplace,
    "discrete_gaussian": _run_gaussian,
    "dp_suppression": _run_dp_suppression,
    "dp_swapping": _run_dp_swapping,
    "dp_kanonymity": _run_dp_kanonymity,
}


def _delta_report(name: str, eps: float, config: ExperimentConfig, hist: Histogram):
    if name == "laplace":
        return accounting.DeltaReport("laplace", eps, 0.0)
    if name == "discrete_gaussian":
        # the tabulated delta for this mechanism is not derivable from the
        # published conversion formula; left blank on purpose
        return accounting.DeltaReport("discrete_gaussian", eps, None)
    if name == "dp_suppression":
        delta = accounting.delta_cell_suppression(eps, hist.bound, config.suppression_k)
        return accounting.DeltaReport(
            "dp_suppression", eps, delta,
            {"bound": hist.bound, "k": config.suppression_k},
        )
    if name == "dp_swapping":
        n_q = hist.schema.qi_universe_size
        return accounting.DeltaReport(
            "dp_swapping", eps, accounting.delta_swapping(eps, n_q), {"n_q": n_q}
        )
    if name == "dp_kanonymity":
        beta = anonymity.subsample_rate(eps)
        delta = accounting.delta_kanonymity(eps, beta, hist.bound)
        return accounting.DeltaReport(
            "dp_kanonymity", eps, delta,
            {"beta": beta, "bound": hist.bound, "k": config.kanon_k},
        )
    return accounting.DeltaReport(name, eps, None)


# -- experiments -------------------------------------------------------------------


@dataclass(frozen=True)
class ReleaseRow:
    epsilon: float
    mechanism: str
    delta: float | None
    bias_l1: float
    alpha: float


def _repeat_errors(
    runner: ReleaseRunner,
    hist: Histogram,
    dataset: Dataset,
    eps: float,
    config: ExperimentConfig,
    base: RngHandle,
) -> np.ndarray:
    truth = hist.counts.astype(float)

    def one(r: int) -> np.ndarray:
        rng = RngHandle(base.seed + r, base.key)
        return runner(hist, dataset, eps, config, rng) - truth

    return np.stack(map_indexed(one, config.repetitions))


def run_data_release(
    config: ExperimentConfig,
    extra_mechanisms: Mapping[str, ReleaseRunner] | None = None,
) -> list[ReleaseRow]:
    """Per (epsilon, mechanism): analytic delta, empirical bias l1, alpha."""
    runners = dict(RELEASE_RUNNERS)
    if extra_mechanisms:
        runners.update(extra_mechanisms)
    unknown = [m for m in config.mechanisms if m not in runners]
    if unknown:
        raise ConfigError(f"unknown mechanism(s): {unknown}")
    hist = build_histogram(config.dataset)
    rows = []
    deltas = []
    for eps in config.epsilons:
        for name in config.mechanisms:
            errors = _repeat_errors(
                runners[name], hist, config.dataset, eps, config,
                RngHandle(config.seed, (_stable_key(name), _stable_key(f"{eps}"))),
            )
            bias = errors.mean(axis=0)
            report = _delta_report(name, eps, config, hist)
            deltas.append(report)
            rows.append(
                ReleaseRow(
                    eps,
                    name,
                    report.delta,
                    float(np.abs(bias).sum()),
                    metrics.fairness_of(bias).alpha,
                )
            )
    if config.out_dir is not None:
        _write_release(config.out_dir, rows, deltas)
    return rows


def _stable_key(text: str) -> int:
    # deterministic small integer from a name (hash() is salted per process)
    value = 0
    for ch in text:
        value = (value * 131 + ord(ch)) % (2**31)
    return value


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    mechanism: str
    epsilon: float | None
    mean_l1_error: float
    se_l1_error: float
    alpha: float


SWEEP_AXES = ("cs_threshold", "swap_fraction", "kanon_k")


def run_sweep(config: ExperimentConfig, axis: str) -> list[SweepRow]:
    """Traditional-vs-DP error sweep along one parameter axis.

    Emits, per axis value, the traditional mechanism's mean l1 error (and
    the spread alpha of its mean error vector) plus one row per epsilon for
    the DP counterpart.  k-anonymity errors are measured in the original
    space after reconstruction.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    hist = build_histogram(config.dataset)
    truth = hist.counts.astype(float)
    rows: list[SweepRow] = []

    def summarize(errors: np.ndarray) -> tuple[float, float, float]:
        l1 = np.abs(errors).sum(axis=1)
        se = float(l1.std(ddof=1) / math.sqrt(l1.shape[0])) if l1.shape[0] > 1 else 0.0
        alpha = metrics.fairness_of(errors.mean(axis=0)).alpha
        return float(l1.mean()), se, alpha

    if axis == "cs_threshold":
        for k in config.cs_thresholds:
            released = mechanisms.cell_suppression(hist, k).counts - truth
            rows.append(
                SweepRow(
                    axis, float(k), "suppression", None,
                    float(np.abs(released).sum()), 0.0,
                    metrics.fairness_of(released).alpha,
                )
            )
            for eps in config.epsilons:
                cfg = replace(config, suppression_k=k)
                errors = _repeat_errors(
                    _run_dp_suppression, hist, config.dataset, eps, cfg,
                    RngHandle(config.seed, (1, k, _stable_key(f"{eps}"))),
                )
                mean, se, alpha = summarize(errors)
                rows.append(SweepRow(axis, float(k), "dp_suppression", eps, mean, se, alpha))
    elif axis == "swap_fraction":
        for fraction in config.swap_fractions:

            def one_traditional(r: int, fraction=fraction) -> np.ndarray:
                rng = RngHandle(config.seed + r, (2, _stable_key(f"{fraction}")))
                swapped = mechanisms.swapping(config.dataset, fraction, rng)
                return build_histogram(swapped).counts - truth

            errors = np.stack(map_indexed(one_traditional, config.repetitions))
            mean, se, alpha = summarize(errors)
            rows.append(SweepRow(axis, fraction, "swapping", None, mean, se, alpha))
        for eps in config.epsilons:
            errors = _repeat_errors(
                _run_dp_swapping, hist, config.dataset, eps, config,
                RngHandle(config.seed, (3, _stable_key(f"{eps}"))),
            )
            mean, se, alpha = summarize(errors)
            for fraction in config.swap_fractions:
                rows.append(SweepRow(axis, fraction, "dp_swapping", eps, mean, se, alpha))
    else:  # kanon_k
        qi = config.resolved_kanon_qi()
        for k in config.kanon_ks:

            def one_traditional(r: int, k=k) -> np.ndarray:
                rng = RngHandle(config.seed + r, (4, k))
                part = anonymity.mondrian_kanonymize(config.dataset, k, qi)
                recon = anonymity.reconstruct(part, rng)
                return build_histogram(recon).counts - truth

            errors = np.stack(map_indexed(one_traditional, config.repetitions))
            mean, se, alpha = summarize(errors)
            rows.append(SweepRow(axis, float(k), "kanonymity", None, mean, se, alpha))
            for eps in config.epsilons:
                cfg = replace(config, kanon_k=k)
                errors = _repeat_errors(
                    _run_dp_kanonymity, hist, config.dataset, eps, cfg,
                    RngHandle(config.seed, (5, k, _stable_key(f"{eps}"))),
                )
                mean, se, alpha = summarize(errors)
                rows.append(SweepRow(axis, float(k), "dp_kanonymity", eps, mean, se, alpha))

    if config.out_dir is not None:
        _write_sweep(config.out_dir, axis, rows)
    return rows


@dataclass(frozen=True)
class ClassifyRow:
    mechanism: str
    epsilon: float | None
    mean_accuracy: float
    se_accuracy: float


def _privatized_dataset(
    name: str, hist: Histogram, dataset: Dataset, eps: float,
    config: ExperimentConfig, rng: RngHandle,
) -> Dataset:
    if name == "dp_kanonymity":
        return anonymity.dp_kanonymity(
            dataset, config.kanon_k, eps, rng, qi_attributes=config.resolved_kanon_qi()
        )
    counts = RELEASE_RUNNERS[name](hist, dataset, eps, config, rng)
    return histogram_to_dataset(hist.replace_counts(counts))


def run_classification(config: ExperimentConfig) -> list[ClassifyRow]:
    """Train on privatized data, score on the original records.

    The baseline row trains on the original data; every mechanism row
    reports the mean accuracy over ``repetitions`` privatize-train-score
    runs, always evaluated on the original, non-private dataset.
    """
    features = config.resolved_features()
    hist = build_histogram(config.dataset)
    baseline_model = classify.train_logistic(
        config.dataset, config.label_attr, features, config.hyperparams,
        RngHandle(config.seed, (6,)),
    )
    rows = [
        ClassifyRow(
            "baseline", None, classify.accuracy(baseline_model, config.dataset), 0.0
        )
    ]
    for eps in config.epsilons:
        for name in config.mechanisms:

            def one(r: int, name=name, eps=eps) -> float:
                rng = RngHandle(config.seed + r, (7, _stable_key(name), _stable_key(f"{eps}")))
                private = _privatized_dataset(name, hist, config.dataset, eps, config, rng)
                model = classify.train_logistic(
                    private, config.label_attr, features, config.hyperparams, rng
                )
                return classify.accuracy(model, config.dataset)

            accs = np.array(map_indexed(one, config.repetitions))
            se = (
                float(accs.std(ddof=1) / math.sqrt(accs.shape[0]))
                if accs.shape[0] > 1
                else 0.0
            )
            rows.append(ClassifyRow(name, eps, float(accs.mean()), se))
    if config.out_dir is not None:
        _write_classify(config.out_dir, rows)
    return rows


# -- report files -------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[Mapping]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(name)) for name in fieldnames])


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_release(out_dir: Path, rows, deltas) -> None:
    fields = ("epsilon", "mechanism", "delta", "bias_l1", "alpha")
    dicts = [vars(r) for r in rows]
    _write_csv(Path(out_dir) / "release.csv", fields, dicts)
    _write_json(Path(out_dir) / "release.json", dicts)
    _write_json(Path(out_dir) / "accounting.json", [d.as_row() for d in deltas])


def _write_sweep(out_dir: Path, axis: str, rows) -> None:
    fields = (
        "axis", "axis_value", "mechanism", "epsilon",
        "mean_l1_error", "se_l1_error", "alpha",
    )
    _write_csv(Path(out_dir) / f"sweep_{axis}.csv", fields, [vars(r) for r in rows])


def _write_classify(out_dir: Path, rows) -> None:
    fields = ("mechanism", "epsilon", "mean_accuracy", "se_accuracy")
    _write_csv(Path(out_dir) / "classify.csv", fields, [vars(r) for r in rows])
