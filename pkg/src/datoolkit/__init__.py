"""Disclosure-avoidance toolkit.

Differentially private counterparts of cell suppression, swapping, and
k-anonymity, alongside the Laplace and exact discrete Gaussian mechanisms,
with analytic (epsilon, delta), bias, and fairness accounting plus an
experiment harness for data-release and classification comparisons.
"""

from .anonymity import (
    AnonymizedPartition,
    Interval,
    dp_kanonymity,
    mondrian_kanonymize,
    reconstruct,
    subsample_rate,
)
from .accounting import (
    DeltaReport,
    delta_cell_suppression,
    delta_kanonymity,
    delta_swapping,
    gaussian_dp_parameters,
    verify_dp_bruteforce,
)
from .classify import ClassifierModel, HyperParams, accuracy, train_logistic
from .errors import (
    ConfigError,
    DomainError,
    ParameterError,
    RowError,
    SchemaError,
)
from .mechanisms import (
    MechanismConfig,
    cell_suppression,
    discrete_gaussian_mechanism,
    dp_cell_suppression,
    dp_swapping,
    laplace_mechanism,
    nonneg_project,
    swap_retention_probability,
    swapping,
)
from .metrics import (
    BiasVector,
    FairnessReport,
    alpha_bound_cs,
    alpha_bound_laplace,
    alpha_bound_swap,
    analytic_bias_cs,
    analytic_bias_kanon_flag,
    analytic_bias_swap,
    empirical_bias,
    fairness_dominance_check,
    fairness_of,
)
from .rng import RngHandle
from .tabular import (
    Dataset,
    GroupIndex,
    Histogram,
    Schema,
    adjacent_histograms,
    build_histogram,
    histogram_to_dataset,
    load_csv,
    schema_from_config,
)

__version__ = "0.1.0"
