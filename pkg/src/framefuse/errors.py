"""Exception types shared by the engine, service layer, and CLI.

Every error the engine raises deliberately is an ``EngineError`` with a
``category`` that maps onto a CLI exit code (io -> 2, validation -> 3)
and an HTTP status in the service layer.
"""


class EngineError(Exception):
    """Base class for deliberate engine failures."""

    category = "error"


class InputError(EngineError):
    """File and byte-stream problems: missing files, bad magic, truncation."""

    category = "io"


class ValidationFailure(EngineError):
    """Semantic problems: invariant violations, mismatched inputs, bad params."""

    category = "validation"
