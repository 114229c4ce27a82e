"""starcube: an embeddable star-schema warehouse with cube materialization,
materialized-view query rewrite and interactive OLAP navigation."""

__version__ = "0.1.0"

from .schema import StarSchema, load_schema, nssf_default_schema, serialize_schema, validate

__all__ = [
    "StarSchema",
    "load_schema",
    "nssf_default_schema",
    "serialize_schema",
    "validate",
    "__version__",
]
