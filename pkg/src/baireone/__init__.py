"""Separately absolutely continuous surfaces and absolute Baire-one diagonals."""

import types as _types

from .analysis import (
    ACCertificate,
    TwoSidedCertificate,
    ac_modulus,
    check_blend_constant,
    lipschitz_estimate,
    piecewise_ac_certificate,
    pseudo_norm_obstruction,
    variation,
)
from .errors import (
    ArityError,
    ConfigError,
    EvaluationDomainError,
    ExpressionError,
    ExpressionSyntaxError,
    MollificationError,
    OutsideDomainError,
    UnknownIdentifierError,
)
from .expr import Expression, eval_expr, evaluate, parse, unparse
from .extension import BandScheme, ExtensionSurface, build_surface, choose_deltas, cutoff, eval_surface, section
from .extraction import ExtractionGrid, build_g_n, extract_series, grid_certificate, transfer_to_line
from .funcspace import (
    BaireSeries,
    ExpressionMap,
    Interval,
    LipschitzMap,
    NormedTarget,
    constant_series,
    norm,
    sum_series,
)
from .smoothing import EpsSchedule, lipschitz_approx, mollify_series

__version__ = "0.1.0"

__all__ = sorted(n for n, v in globals().items() if not n.startswith("_") and not isinstance(v, _types.ModuleType))
