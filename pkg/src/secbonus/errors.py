"""Exception hierarchy.  The CLI maps each family to an exit code."""

from __future__ import annotations


class SecbonusError(Exception):
    exit_code = 2


class DataError(SecbonusError, ValueError):
    """Invalid input data or a failed consistency check (exit 2)."""


class SarifParseError(DataError):
    """The document is not JSON."""


class SarifFormatError(DataError):
    """The document is JSON but not a usable SARIF log."""


class MixedSnapshotError(DataError):
    pass


class EmptyCodebaseError(DataError):
    pass


class SnapshotError(DataError):
    """No commit on the branch qualifies for the assessment time."""


class ConfigError(DataError):
    pass


class MissingEntryError(DataError):
    def __init__(self, key: str, reason: str = "missing ledger entry") -> None:
        super().__init__(f"{reason}: {key}")
        self.key = key


class ConsistencyError(DataError):
    pass


class ExternalToolError(SecbonusError, RuntimeError):
    """A scanner or git subprocess failed (exit 3)."""

    exit_code = 3


class ScannerTimeout(ExternalToolError):
    pass


class ScannerFailed(ExternalToolError):
    pass


class SarifOutputMissing(ExternalToolError):
    pass
