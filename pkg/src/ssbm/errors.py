"""Exception hierarchy shared by every ssbm module."""


class SsbmError(Exception):
    """Base class for all errors raised by ssbm."""


class MalformedLine(SsbmError, ValueError):
    """An edge-list data line could not be parsed."""

    def __init__(self, path, line_number, text, reason):
        self.path = str(path)
        self.line_number = line_number
        self.text = text
        super().__init__(f"{path}:{line_number}: {reason}: {text!r}")


class ConflictingSign(SsbmError, ValueError):
    """The same node pair was listed with both +1 and -1."""


class EmptyInput(SsbmError, ValueError):
    """An input file holds no nodes at all."""


class ConfigError(SsbmError, ValueError):
    """A configuration value failed validation.

    ``field`` names the offending key so callers can report it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InfeasibleConfig(SsbmError, RuntimeError):
    """A generator could not place the requested edges."""


class DegenerateModel(SsbmError, RuntimeError):
    """Every block was annihilated at once."""
