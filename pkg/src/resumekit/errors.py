"""Shared exception types.

The CLI maps these onto distinct exit codes, so raising the right class
matters more than the message text.
"""


class ResumekitError(Exception):
    pass


class ConfigError(ResumekitError):
    """Bad configuration: alias maps, profiles, endpoints, CLI arguments."""


class DataError(ResumekitError):
    """Bad input data: unreadable records, id collisions, empty bundles."""


class GatewayError(ResumekitError):
    """Base class for anything that goes wrong talking to a model endpoint."""


class TransportError(GatewayError):
    """The endpoint could not be reached or kept failing after retries."""


class ExtractionError(GatewayError):
    """The endpoint answered, but no valid record could be extracted."""

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response
