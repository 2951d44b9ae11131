"""Constraint mining and monthly roster generation for care facilities."""

from .model import (
    Alphabet,
    DEFAULT_ALPHABET,
    DEFAULT_SHIFT_MAPPING,
    DataError,
    ConfigError,
    DemandTable,
    MonthId,
    OFF_CODE,
    ParseError,
    Request,
    RequestSet,
    Roster,
    ShiftKind,
    ShiftSymbol,
    abstract_roster,
)
from .templates import (
    ExtractionParams,
    MinedConstraint,
    extract_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "DEFAULT_ALPHABET",
    "DEFAULT_SHIFT_MAPPING",
    "DataError",
    "ConfigError",
    "DemandTable",
    "MonthId",
    "OFF_CODE",
    "ParseError",
    "Request",
    "RequestSet",
    "Roster",
    "ShiftKind",
    "ShiftSymbol",
    "abstract_roster",
    "ExtractionParams",
    "MinedConstraint",
    "extract_constraints",
    "__version__",
]
