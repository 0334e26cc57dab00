"""Lie algebroid cohomology, equivariant localization and Bott-type formulas,
checked numerically on explicit local models."""

__version__ = "0.1.0"

from .expr import parse_expr
from .specfile import builtin_names, load_builtin, load_example, load_spec

__all__ = ["__version__", "parse_expr", "builtin_names", "load_builtin", "load_example", "load_spec"]
