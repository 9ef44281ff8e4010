"""Degree spectra of unary functions on (omega, <) at desk scale.

Modules: ``core`` (functions, blocks, presentations, approximations),
``analysis`` (block strings, classification), ``ptr`` (pushing a middle
interval to the right), ``constructions`` (realizing a set X as f_A),
``rs`` (retrieving the successor from f_A), ``injury`` (the cycle-block
construction with a counting-function audit) and ``cli``.
"""

from .core import (DeltaTwoApprox, FBlock, FinitePresentation, FuncSpec, OmegaError, builtin, expr_spec, pair,
                   parse_spec, table_spec, unpair)

__version__ = "0.1.0"

__all__ = ["DeltaTwoApprox", "FBlock", "FinitePresentation", "FuncSpec", "OmegaError", "builtin", "expr_spec",
           "pair", "parse_spec", "table_spec", "unpair", "__version__"]
