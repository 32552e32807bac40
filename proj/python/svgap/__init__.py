"""Singular value gaps of Sigma^{1/2}(M + eta w z^T).

Python front end over the native core. Ensembles and experiment configs are
plain dicts with the same keys as the JSON config files.
"""

import json

from . import _core
from ._core import (
    NumericError,
    ParseError,
    SpecError,
    brute_force_gi,
    gap_report,
    interlacing,
    is_compressible,
    lcd,
    regularized_lcd,
    singular_values,
    sparse_distance,
    spectral_match,
    svd,
)

__version__ = _core.version()

__all__ = [
    "NumericError",
    "ParseError",
    "SpecError",
    "brute_force_gi",
    "cli",
    "ensemble",
    "gap_report",
    "interlacing",
    "is_compressible",
    "lcd",
    "regularized_lcd",
    "run_experiment",
    "sample_matrix",
    "singular_values",
    "small_ball",
    "sparse_distance",
    "spectral_match",
    "svd",
]


def ensemble(n, p=None, atom="rademacher", sigma=None, seed=0, **extra):
    """Ensemble dict; sigma defaults to the identity."""
    spec = {"n": n, "p": n if p is None else p, "atom": atom, "seed": seed}
    spec["sigma"] = sigma if sigma is not None else {"kind": "identity", "L": 1.0}
    spec.update(extra)
    return spec


def sample_matrix(spec):
    """(raw M, effective matrix) as numpy arrays."""
    return _core.sample_matrix(json.dumps(spec))


def small_ball(atom, eps, samples=100000, seed=0, x=None):
    """(estimate, ci95) of the Levy concentration of an atom, or of sum x_i xi_i."""
    return _core.small_ball(json.dumps(atom), eps, samples, seed, x)


def run_experiment(config):
    """Summary dict (provenance, rates, curves) of a Monte-Carlo campaign."""
    return json.loads(_core.run_experiment(json.dumps(config)))


def cli(*args):
    """Runs the command-line front end in-process: (exit code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
