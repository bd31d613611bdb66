"""Exception types shared across the package.

The CLI maps these onto exit codes: scenario/usage problems exit 2,
numerical blow-ups exit 3, failed invariant checks exit 1.
"""


class AnholoflowError(Exception):
    """Base class for all package errors."""


class EvaluationError(AnholoflowError):
    """A field could not be evaluated at the requested point."""

    def __init__(self, message, point=None):
        if point is not None:
            message = f"{message} (point={list(point)!r})"
        super().__init__(message)
        self.point = point


class SingularMetricError(AnholoflowError):
    """Metric (or block) determinant below the degeneracy tolerance."""

    def __init__(self, det, tol=1e-12, what="metric"):
        super().__init__(f"singular {what}: |det| = {abs(det):.3e} <= {tol:.1e}")
        self.det = det
        self.tol = tol


class RegularityError(AnholoflowError):
    """Vertical metric from the energy hessian is degenerate (not weakly regular)."""


class SignatureError(AnholoflowError):
    """Declared signature incompatible with the actual block signature."""


class ConstructionError(AnholoflowError):
    """A constructive operation (e.g. vielbein solve) has no admissible solution."""


class DimensionMismatchError(AnholoflowError):
    """Array dimensions do not match the declared channel / chart dimensions."""


class NormalizationError(AnholoflowError):
    """A vector required to be unit-normalized is not."""


class HyperbolicityError(AnholoflowError):
    """Square-root domain of the hyperbolic (-1 flow) system violated."""


class BlowUpError(AnholoflowError):
    """A time integration produced non-finite values."""

    def __init__(self, t, label="tau"):
        super().__init__(f"solution blew up at {label} = {t:.6g}")
        self.t = t


class FlowSingularityError(AnholoflowError):
    """Metric degenerated during a Ricci-flow step."""

    def __init__(self, chi, node):
        super().__init__(f"metric degenerated at chi = {chi:.6g}, node {node}")
        self.chi = chi
        self.node = node


class NeedsNeighborsError(AnholoflowError):
    """Operation requires both neighbor snapshots of a trajectory index."""


class ScenarioError(AnholoflowError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, key=None):
        if key is not None:
            message = f"{message} (key: {key!r})"
        super().__init__(message)
        self.key = key
