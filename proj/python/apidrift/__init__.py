"""Bayesian sequential drift detection for API call logs."""

import json

from ._core import (  # noqa: F401
    CategorySpace,
    CorruptSnapshot,
    Error,
    FrequencyTable,
    NumericFault,
    ParseError,
    PriorSpec,
    SequentialDetector,
    UnknownCategory,
    ValidationError,
    __version__,
    build_prior,
    chi2_sf,
    log_bf_closed_form,
    log_threshold,
    pearson_gof,
    sample_stream,
    sequential_chi2_monitor,
)
from . import _core


def run_experiment(config, jobs=1, base_dir="."):
    """Run a simulation experiment described by a config dict (same keys as the TOML file)."""
    return json.loads(_core._run_experiment_json(json.dumps(config), base_dir, jobs))


def top_k_report(detector, k=3, metric="delta", rho_reference="expected"):
    """Attribution report for a detector built with keep_history=True."""
    return json.loads(_core._top_k_report_json(detector, k, metric, rho_reference))
