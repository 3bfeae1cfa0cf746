"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 2 for bad configuration/input, 3 for a missing artifact, 4 for a
runtime failure.
"""


class RinnError(Exception):
    exit_code = 4


class ConfigError(RinnError):
    exit_code = 2


class TopologyParseError(ConfigError):
    pass


class PortCapacityExceeded(ConfigError):
    def __init__(self, node, required, available, constraint):
        self.node = node
        self.required = required
        self.available = available
        self.constraint = constraint
        super().__init__(
            f"node {node!r}: {constraint} needs {required} ports, only {available} available"
        )


class OutOfRange(ConfigError):
    pass


class MissingArtifact(RinnError):
    exit_code = 3

    def __init__(self, path, what="artifact"):
        self.path = path
        super().__init__(f"missing {what}: {path}")


class KindMismatch(RinnError):
    pass


class NotEnoughComponents(RinnError):
    pass


class Untraversed(RinnError):
    pass


class DimensionMismatch(RinnError):
    pass


class NonFiniteLoss(RinnError):
    pass


class LengthMismatch(RinnError):
    pass


class InsufficientHistory(RinnError):
    """Raised by strict threshold fitting when a window lacks one class."""

    def __init__(self, lightpath, position):
        self.lightpath = lightpath
        self.position = position
        super().__init__(f"window for lightpath {lightpath} position {position} lacks a class")
