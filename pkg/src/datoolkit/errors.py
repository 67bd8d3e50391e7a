"""Exception types shared across the toolkit."""


class ConfigError(Exception):
    """Invalid experiment, CLI, or mechanism configuration."""


class SchemaError(ValueError):
    """Schema definition problem, or data that does not fit its schema."""


class RowError(ValueError):
    """A data row failed validation; carries the offending 0-based row index."""

    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class ParameterError(ValueError):
    """Mechanism parameter outside its admissible range."""


class DomainError(ValueError):
    """Accounting formula evaluated outside its domain of validity."""
