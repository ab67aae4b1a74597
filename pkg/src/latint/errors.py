"""Exception types shared across the package.

Dimension and argument problems raise plain ValueError; the classes here
exist where the CLI needs to map failures onto distinct exit codes or
callers need to distinguish recoverable conditions.
"""


class ConfigError(Exception):
    """Invalid or unknown configuration (bad schema, unknown keys, bad values)."""


class DataError(Exception):
    """Unusable input data (missing columns, non-numeric cells, missing values)."""


class DegenerateDataError(DataError):
    """Data that is structurally valid but degenerate for the requested
    operation (no events, single-class labels, no comparable pairs)."""


class DivergenceError(RuntimeError):
    """Optimization produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite total loss at epoch {epoch}")


class StateError(RuntimeError):
    """Operation requires state that is absent (e.g. survival curves without
    a fitted baseline hazard, latent export from a model without one)."""


class SearchFailedError(RuntimeError):
    """Every grid-search cell failed; carries per-cell diagnostics."""

    def __init__(self, failures):
        self.failures = failures
        super().__init__(
            f"all {len(failures)} grid cells failed; first failure: {failures[0]}"
        )
