class ConfigurationError(ValueError):
    """Parameters that cannot produce a valid model, dataset, or run."""


class DatasetError(ValueError):
    """Malformed dataset input. ``row`` is 1-based when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ChainFormatError(ValueError):
    """A chain file record that cannot be parsed."""
