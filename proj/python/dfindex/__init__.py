"""Python interface to the dfindex core.

Configurations and reports are plain dicts with the same layout as the JSON
files read and written by the ``df`` command.
"""

import json as _json

from . import _dfindex
from ._dfindex import DomainError, NumericalError, SpecError, positivity_check, worm_upper_bound

__all__ = [
    "DomainError",
    "NumericalError",
    "SpecError",
    "jet",
    "positivity_check",
    "resolve_config",
    "rho_program",
    "run",
    "run_to_disk",
    "worm_upper_bound",
]


def run(config):
    """Run a configuration dict and return the report dict (nothing is written)."""
    return _json.loads(_dfindex.run_json(_json.dumps(config)))


def run_to_disk(config):
    """Run and write reports under config["output"]["path"]; returns (exit code, diagnostics)."""
    return _dfindex.run_to_disk(_json.dumps(config))


def resolve_config(config):
    """The configuration with every default filled in."""
    return _json.loads(_dfindex.resolve_config(_json.dumps(config)))


def rho_program(domain):
    """Defining-function program of a domain dict, as a program dict."""
    return _json.loads(_dfindex.rho_program(_json.dumps(domain)))


def jet(program, z, w):
    """Wirtinger jet (val, d, h_mix, h_hol) of a program dict at (z, w)."""
    return _dfindex.jet(_json.dumps(program), complex(z), complex(w))
