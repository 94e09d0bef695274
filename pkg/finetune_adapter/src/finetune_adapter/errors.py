"""Exception types mapped onto CLI exit codes."""


class AdapterError(Exception):
    pass


class ConfigError(AdapterError):
    """Bad training config or CLI arguments."""


class DataError(AdapterError):
    """Bad instruction data: unreadable files, malformed JSONL lines."""
