"""Exception types shared across the package."""


class FairfiltError(Exception):
    """Base class for all package-specific errors."""


class SelfLoop(FairfiltError):
    """An edge connects a node to itself."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"self-loop at node {node}")


class IndexOutOfRange(FairfiltError):
    """An edge endpoint is outside [0, n)."""

    def __init__(self, node: int, n: int):
        self.node = node
        self.n = n
        super().__init__(f"node index {node} outside [0, {n})")


class IsolatedNode(FairfiltError):
    """A node has degree zero; degree-normalized operators are undefined."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"node {node} has degree 0")


class DimensionMismatch(FairfiltError):
    """Array shapes are inconsistent with the graph size."""


class DomainError(FairfiltError):
    """A value lies outside its documented domain."""


class ConvergenceFailure(FairfiltError):
    """An iterative solver did not reach its tolerance.

    ``payload`` carries the best iterate available when the failure was
    raised (solver-specific), ``violation`` the residual that failed.
    """

    def __init__(self, message: str, payload=None, violation: float | None = None):
        self.payload = payload
        self.violation = violation
        super().__init__(message)


class EmptyGroup(FairfiltError):
    """A conditioning cell required by a group metric is empty."""

    def __init__(self, cell: str):
        self.cell = cell
        super().__init__(f"empty conditioning cell: {cell}")


class EmptyClass(FairfiltError):
    """A training split is missing one of the label classes."""


class NonFiniteLoss(FairfiltError):
    """Training produced a NaN/Inf loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


class ParseError(FairfiltError):
    """A data file failed to parse."""

    def __init__(self, path, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class NonBinarySensitive(FairfiltError):
    """A sensitive-attribute value is not -1 or 1."""

    def __init__(self, path, line: int, value):
        self.path = path
        self.line = line
        self.value = value
        super().__init__(f"{path}:{line}: sensitive attribute must be -1 or 1, got {value!r}")


class GenerationFailure(FairfiltError):
    """Synthetic graph generation failed after all retries."""


class EmptyCell(FairfiltError):
    """Stratified splitting is impossible at the given sizes."""

    def __init__(self, cell: str):
        self.cell = cell
        super().__init__(f"stratified split impossible: {cell}")
