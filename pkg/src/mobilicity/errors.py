"""Exception types shared across the pipeline."""


class ConfigError(ValueError):
    """Invalid configuration (bad flag values, missing input paths)."""


class FormatError(ValueError):
    """Malformed input file (bad header, unparseable structure)."""
