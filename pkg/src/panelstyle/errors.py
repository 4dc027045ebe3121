"""Exception hierarchy shared across the pipeline.

Each class maps to a distinct CLI exit code (see cli.py), so raising the
right type matters more than the message text.
"""


class PanelStyleError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(PanelStyleError):
    """Invalid configuration value, unknown key, or malformed config file."""


class SchemaError(ConfigError):
    """Input file violates its declared schema.

    Carries optional location context so callers can point at the
    offending record.
    """

    def __init__(self, message: str, *, path: str | None = None, where: str | None = None):
        self.path = path
        self.where = where
        prefix = ""
        if path:
            prefix += f"{path}: "
        if where:
            prefix += f"[{where}] "
        super().__init__(prefix + message)


class AssetMissingError(PanelStyleError):
    """A referenced image, checkpoint, or catalog entry does not exist."""


class ContractViolation(PanelStyleError):
    """A function was called with arguments outside its contract."""


class NotFoundError(ContractViolation):
    """Lookup by id failed (unknown panel, page, or template)."""


class TrainingDivergence(PanelStyleError):
    """Optimization produced a non-finite loss."""
