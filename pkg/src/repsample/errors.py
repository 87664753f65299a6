"""Exception hierarchy. CLI maps ConfigError to exit code 2, DataError to 3."""


class RepSampleError(Exception):
    """Base class for all package errors."""


class ConfigError(RepSampleError):
    """Invalid configuration: bad schema, bad parameters, malformed config JSON."""


class DataError(RepSampleError):
    """Invalid data: malformed CSV rows, unknown category codes, domain violations."""
