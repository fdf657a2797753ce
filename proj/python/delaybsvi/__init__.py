"""Penalized and prox schemes for delayed BSVIs on binary scenario trees."""

import json

from ._core import (
    ConfigError,
    ConvexSpec,
    SolverError,
    canonical_config,
    check_wellposedness,
    eval_phi,
    moreau,
    prox,
    write_reports,
    yosida_grad,
)
from . import _core


def run_config(text):
    """Run a configuration given as JSON text and return the report as a dict."""
    return json.loads(_core.run_config(text))


def run_file(path):
    """Run a configuration file and return the report as a dict."""
    return json.loads(_core.run_file(str(path)))


__all__ = [
    "ConfigError",
    "ConvexSpec",
    "SolverError",
    "canonical_config",
    "check_wellposedness",
    "eval_phi",
    "moreau",
    "prox",
    "run_config",
    "run_file",
    "write_reports",
    "yosida_grad",
]
