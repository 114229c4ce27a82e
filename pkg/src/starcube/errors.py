"""Exception hierarchy shared across the engine."""


class StarcubeError(Exception):
    """Base class for all engine errors."""


class SchemaError(StarcubeError):
    """Malformed schema document (parse-level failure)."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field {field!r}: "
        super().__init__(prefix + message)


class SchemaValidationError(StarcubeError):
    """Schema parsed but violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SourceError(StarcubeError):
    """Fatal extraction failure: missing file or layout mismatch."""


class CleaningError(StarcubeError):
    """Cleaning rule cannot run on the given column (e.g. all values missing)."""


class PipelineError(StarcubeError):
    """Pipeline run aborted; carries the partial report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class StoreError(StarcubeError):
    """Bad interaction with the column store (unknown dimension, attribute mismatch...)."""


class SnapshotError(StarcubeError):
    """Corrupt, truncated or mismatched snapshot file."""


class CubeError(StarcubeError):
    """Invalid cuboid request: spec/schema mismatch, incomparable specs, epoch mix."""


class CubeBudgetError(CubeError):
    """Full-cube build would exceed the configured cell budget."""


class MViewError(StarcubeError):
    """Materialized-view catalog misuse (duplicate name, unknown view...)."""


class StaleViewError(MViewError):
    """View changed epoch between planning and answering; caller should replan."""


class QueryError(StarcubeError):
    """Invalid query: unknown dimension/level/member/measure."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class NavigationError(StarcubeError):
    """Navigation op not applicable in the current state (e.g. roll up past ALL)."""


class ReportError(StarcubeError):
    """Report spec inconsistent with the grid it renders."""
