"""costkit: build, parse, validate, measure, and execute command/step datasets."""

from costkit.model import (
    ActionStep,
    BuildConfig,
    DatasetRecord,
    ObjectName,
    Provenance,
    Violation,
    normalize_name,
    parse_record,
    serialize_record,
    validate_record,
)

__all__ = [
    "ActionStep",
    "BuildConfig",
    "DatasetRecord",
    "ObjectName",
    "Provenance",
    "Violation",
    "normalize_name",
    "parse_record",
    "serialize_record",
    "validate_record",
]

__version__ = "0.1.0"
