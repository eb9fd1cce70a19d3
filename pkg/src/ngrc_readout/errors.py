"""Exception hierarchy.

Every error carries a short ``code`` string so callers (and the CLI) can
tell failure modes apart without matching on messages.
"""


class NGRCError(Exception):
    code = "error"


class ConfigError(NGRCError, ValueError):
    """Bad configuration key or value."""

    code = "config"


class DataError(NGRCError, ValueError):
    """Dataset content violates an invariant."""

    code = "data"


class MalformedHeaderError(DataError):
    code = "malformed-header"


class LengthMismatchError(DataError):
    code = "length-mismatch"


class LabelOutOfRangeError(DataError):
    code = "label-out-of-range"


class LayoutMismatchError(DataError):
    code = "layout-mismatch"


class NumericalError(NGRCError, ArithmeticError):
    code = "numerical"


class SingularSystemError(NumericalError):
    code = "singular"
