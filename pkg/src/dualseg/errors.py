"""Exception hierarchy shared across the package.

``ValidationError`` covers bad values and shape/contract violations,
``CongruenceError`` the special case of mismatched parameter trees, and
``FormatError`` malformed on-disk artifacts (sample directories,
checkpoints).  The CLI maps ``ValidationError`` to exit code 1 and
``FormatError``/``OSError`` to exit code 2.
"""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class CongruenceError(ValidationError):
    """Two parameter trees do not share names, order, and shapes."""


class FormatError(OSError):
    """An on-disk artifact is structurally broken (header/payload mismatch)."""
