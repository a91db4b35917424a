"""Table-field metadata inference toolkit.

Profiles tabular files, predicts field metadata (measure/dimension, field
roles, semantic types, default aggregation) with interchangeable predictors,
derives supervision labels from chart/pivot artifacts, evaluates predictors,
and exports metadata for downstream consumers.
"""

from fieldmeta.table import (
    CellKind,
    CellValue,
    Field,
    FieldType,
    Table,
    detect_field_type,
    is_numeric_field,
    parse_table,
    schema_fingerprint,
)

__version__ = "0.1.0"

__all__ = [
    "CellKind",
    "CellValue",
    "Field",
    "FieldType",
    "Table",
    "detect_field_type",
    "is_numeric_field",
    "parse_table",
    "schema_fingerprint",
    "__version__",
]
