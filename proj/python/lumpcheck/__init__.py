"""Simulation-free consistency checks between lumped and distributed models."""

import json as _json

from ._core import (
    Error,
    InvalidModelError,
    UnstableSystemError,
    bar_fem,
    h2_norm_quadrature,
    h2_norm_second_order,
    h2_norm_state_space,
    model_h2,
    reduce,
    run_cli,
    simulate,
    total_mass,
)
from ._core import check as _check


def check(lpm_path, dpm_path, tol=0.05, target=0.01, max_order=100, validate=False):
    """Run the consistency check; returns the report as a dict."""
    return _json.loads(_check(str(lpm_path), str(dpm_path), tol, target, max_order, validate))


__all__ = [
    "Error",
    "InvalidModelError",
    "UnstableSystemError",
    "bar_fem",
    "check",
    "h2_norm_quadrature",
    "h2_norm_second_order",
    "h2_norm_state_space",
    "model_h2",
    "reduce",
    "run_cli",
    "simulate",
    "total_mass",
]
