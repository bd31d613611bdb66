"""Charts, differentiable scalar/metric fields and the fixture catalog.

Fields are plain evaluators over coordinate points; all of them accept
dual numbers in any slot, which is what the rest of the package relies
on for exact derivatives.  Fixtures are code-defined with numeric
parameters only -- there is deliberately no expression parser.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import eval_derivative as _dual_eval_derivative
from .dual import generic_det, generic_inv, to_float, value
from .errors import EvaluationError, SingularMetricError

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class Chart:
    """Single coordinate chart u = (x^1..x^n, y^1..y^m).

    ``m == n`` is tangent-bundle mode, where vertical indices may be
    identified with horizontal ones by the fixed offset a = i + n.
    """

    n: int
    m: int
    labels: tuple = ()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("h-dimension must be >= 2")
        if self.m < self.n:
            raise ValueError("v-dimension must be >= h-dimension")
        if not self.labels:
            labels = tuple(f"x{i + 1}" for i in range(self.n)) + tuple(
                f"y{a + 1}" for a in range(self.m)
            )
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self):
        return self.n + self.m

    @property
    def is_tangent_bundle(self):
        return self.m == self.n


class ScalarField:
    """Twice-differentiable scalar evaluator on a chart."""

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = dim

    def __call__(self, point):
        if len(point) != self.dim:
            raise EvaluationError(
                f"point has {len(point)} coordinates, field expects {self.dim}",
                point=[value(p) for p in point],
            )
        return self.fn(list(point))

    def derivative(self, point, multi_index):
        """Exact derivative via nested dual numbers, |multi_index| <= 2."""
        if len(multi_index) > 2:
            raise ValueError("derivative order must be <= 2")
        for i in multi_index:
            if not 0 <= i < self.dim:
                raise EvaluationError(
                    f"multi-index entry {i} outside chart dimension {self.dim}",
                    point=[value(p) for p in point],
                )
        return _dual_eval_derivative(self, point, list(multi_index))


def eval_derivative(fld, point, multi_index):
    """Module-level spelling of ``ScalarField.derivative``."""
    if isinstance(fld, ScalarField):
        return fld.derivative(point, multi_index)
    return _dual_eval_derivative(fld, point, list(multi_index))


def invert_symmetric(matrix, tol=DEGENERACY_TOL, what="metric"):
    """Inverse of a symmetric matrix of (possibly dual) scalars.

    The caller contract is |det| > 1e-12; violations raise
    ``SingularMetricError`` carrying the determinant.
    """
    det = generic_det(matrix)
    if abs(det) <= tol:
        raise SingularMetricError(det=det, tol=tol, what=what)
    return generic_inv(matrix, what=what, tol=tol)


class MetricField:
    """Symmetric matrix-valued field g_ij(x) on the base of a chart.

    ``components`` maps an n-vector to an (n, n) nested structure; any
    entry may be dual.  ``signature`` is an optional vector of +-1; inner
    products always go through the components, never the signature.
    """

    def __init__(self, n, components, signature=None, name="custom"):
        self.n = n
        self._components = components
        self.signature = tuple(signature) if signature is not None else (1,) * n
        self.name = name

    def __call__(self, x):
        if len(x) != self.n:
            raise EvaluationError(
                f"metric expects {self.n} base coordinates, got {len(x)}",
                point=[value(p) for p in x],
            )
        g = self._components(list(x))
        return np.asarray(g, dtype=object)

    def inverse(self, x):
        return invert_symmetric(self(x))

    def det(self, x):
        return generic_det(self(x))

    def check_at(self, x, sym_tol=1e-12):
        """Assert symmetry and nondegeneracy at a sampled point."""
        g = to_float(self(x))
        if np.max(np.abs(g - g.T)) > sym_tol:
            raise EvaluationError("metric not symmetric", point=list(map(value, x)))
        det = float(np.linalg.det(g))
        if abs(det) <= DEGENERACY_TOL:
            raise SingularMetricError(det=det, what=f"metric {self.name!r}")
        return g


# ---------------------------------------------------------------------------
# fixture catalog
# ---------------------------------------------------------------------------

def _flat(n, **_):
    def comps(x):
        return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

    return MetricField(n, comps, name="flat")


def _diag_poly(n, power=2.0, offset=0.0, **_):
    """g = diag(1, (x1 + offset)^power, 1, ...): the polar-like fixture."""

    def comps(x):
        g = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
        g[1][1] = (x[0] + offset) ** power
        return g

    return MetricField(n, comps, name="diag_poly")


def _conformal(n, slope=1.0, **_):
    """g = exp(2 * slope * x1) * delta."""

    def comps(x):
        factor = np.exp(2.0 * slope * x[0])
        return [[factor if i == j else 0.0 for j in range(n)] for i in range(n)]

    return MetricField(n, comps, name="conformal")


def _sphere(n=2, radius=1.0, **_):
    """Round-sphere chart, g = R^2 diag(1, sin^2 x1) (n = 2 only)."""
    if n != 2:
        raise ValueError("sphere fixture is a 2-d chart")

    def comps(x):
        s = np.sin(x[0])
        return [[radius**2, 0.0], [0.0, radius**2 * s * s]]

    return MetricField(2, comps, name="sphere")


def _lorentz_flat(n, **_):
    sig = (-1,) + (1,) * (n - 1)

    def comps(x):
        return [[float(sig[i]) if i == j else 0.0 for j in range(n)] for i in range(n)]

    return MetricField(n, comps, signature=sig, name="lorentz_flat")


METRIC_CATALOG = {
    "flat": _flat,
    "diag_poly": _diag_poly,
    "conformal": _conformal,
    "sphere": _sphere,
    "lorentz_flat": _lorentz_flat,
}


def make_metric(name, n=2, **params):
    """Instantiate a catalog metric fixture by name."""
    try:
        factory = METRIC_CATALOG[name]
    except KeyError:
        raise EvaluationError(f"unknown metric fixture {name!r}") from None
    return factory(n=n, **params)


@dataclass
class RandomSPDSampler:
    """Seeded generator of random SPD matrices for property suites."""

    rng: np.random.Generator
    jitter: float = 0.5

    def matrix(self, n):
        a = self.rng.normal(size=(n, n))
        return a @ a.T + (1.0 + self.jitter) * np.eye(n)
