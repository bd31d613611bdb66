"""Forward-mode dual numbers, nested to second order.

Every differentiable evaluator in this package is an ordinary Python
callable over scalars; derivatives are taken by feeding it ``Dual``
values.  Second derivatives come from nesting (a ``Dual`` whose parts
are themselves ``Dual``), never from finite differences -- finite
differences appear only inside test oracles.

The helpers at the bottom (``generic_inv``, ``generic_det``) are small
Gauss-Jordan routines that stay inside dual arithmetic, so matrix
inverses can be differentiated like everything else.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularMetricError


class Dual:
    """Number of the form ``a + b eps`` with ``eps**2 = 0``.

    ``a`` and ``b`` may themselves be ``Dual`` instances, which yields
    exact higher-order derivatives by nesting.
    """

    __slots__ = ("a", "b")

    def __init__(self, a, b=0.0):
        self.a = a
        self.b = b

    # -- arithmetic -------------------------------------------------
    # ndarray operands defer to numpy so arrays of duals broadcast
    # elementwise instead of being swallowed into one Dual.

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Dual):
            return Dual(self.a + other.a, self.b + other.b)
        return Dual(self.a + other, self.b)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Dual):
            return Dual(self.a - other.a, self.b - other.b)
        return Dual(self.a - other, self.b)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(other - self.a, -self.b)

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Dual):
            return Dual(self.a * other.a, self.a * other.b + self.b * other.a)
        return Dual(self.a * other, self.b * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Dual):
            inv = 1.0 / other.a if not isinstance(other.a, Dual) else other.a ** -1.0
            q = self.a * inv
            return Dual(q, (self.b - q * other.b) * inv)
        return Dual(self.a / other, self.b / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        inv = 1.0 / self.a if not isinstance(self.a, Dual) else self.a ** -1.0
        q = other * inv
        return Dual(q, -q * self.b * inv)

    def __neg__(self):
        return Dual(-self.a, -self.b)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        if p == 2:
            return self * self
        base = self.a ** (p - 1)
        return Dual(base * self.a, p * base * self.b)

    # -- elementary functions (numpy dispatches to these) -----------

    def sqrt(self):
        r = np.sqrt(self.a)
        return Dual(r, self.b / (2.0 * r))

    def exp(self):
        e = np.exp(self.a)
        return Dual(e, e * self.b)

    def log(self):
        return Dual(np.log(self.a), self.b / self.a)

    def sin(self):
        return Dual(np.sin(self.a), np.cos(self.a) * self.b)

    def cos(self):
        return Dual(np.cos(self.a), -np.sin(self.a) * self.b)

    def tan(self):
        t = np.tan(self.a)
        return Dual(t, (1.0 + t * t) * self.b)

    def sinh(self):
        return Dual(np.sinh(self.a), np.cosh(self.a) * self.b)

    def cosh(self):
        return Dual(np.cosh(self.a), np.sinh(self.a) * self.b)

    # -- comparisons act on the real part (pivoting, domain checks) -

    def __lt__(self, other):
        return value(self) < value(other)

    def __le__(self, other):
        return value(self) <= value(other)

    def __gt__(self, other):
        return value(self) > value(other)

    def __ge__(self, other):
        return value(self) >= value(other)

    def __abs__(self):
        # abs is non-differentiable at 0; callers only use it for pivoting
        return abs(value(self))

    def __float__(self):
        return float(value(self))

    def __repr__(self):
        return f"Dual({self.a!r}, {self.b!r})"


def value(x):
    """Strip all dual parts, returning the underlying float."""
    while isinstance(x, Dual):
        x = x.a
    return float(x)


def dual_part(x):
    """First-order coefficient of ``x`` (0.0 for plain numbers)."""
    return x.b if isinstance(x, Dual) else 0.0


def directional_derivative(f, point, direction):
    """First derivative of ``f`` along ``direction`` at ``point``.

    Stays dual-generic: if ``point`` already carries dual parts the
    result does too, which is what makes nesting work.
    """
    seeded = [Dual(x, d) for x, d in zip(point, direction)]
    return dual_part(f(seeded))


def partial(f, point, i):
    """Partial derivative of ``f`` with respect to coordinate ``i``."""
    seeded = [Dual(x, 1.0 if j == i else 0.0) for j, x in enumerate(point)]
    return dual_part(f(seeded))


def gradient(f, point):
    return [partial(f, point, i) for i in range(len(point))]


def partial_array(f, point, i):
    """Partial derivative of an array-valued evaluator, entrywise."""
    seeded = [Dual(x, 1.0 if j == i else 0.0) for j, x in enumerate(point)]
    out = np.asarray(f(seeded), dtype=object)
    res = np.empty(out.shape, dtype=object)
    for idx in np.ndindex(out.shape):
        res[idx] = dual_part(out[idx])
    return res


def eval_derivative(f, point, multi_index):
    """Derivative of scalar evaluator ``f`` for a multi-index of length <= 2."""
    if len(multi_index) == 0:
        return value(f(list(point)))
    if len(multi_index) == 1:
        return value(partial(f, point, multi_index[0]))
    if len(multi_index) == 2:
        i, j = multi_index
        return value(partial(lambda u: partial(f, u, i), point, j))
    raise ValueError("multi_index length must be <= 2")


# -- generic linear algebra over dual scalars -----------------------

def generic_inv(matrix, what="metric", tol=1e-12):
    """Invert a small square matrix of dual-generic scalars.

    Gauss-Jordan with partial pivoting on |real part|.  Raises
    ``SingularMetricError`` when the pivot chain degenerates.
    """
    a = [list(row) for row in matrix]
    n = len(a)
    ident = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    det = 1.0
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(value(a[r][col])))
        if abs(value(a[piv][col])) <= tol:
            raise SingularMetricError(det=0.0, tol=tol, what=what)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            ident[col], ident[piv] = ident[piv], ident[col]
            det = -det
        pivval = a[col][col]
        det = det * value(pivval)
        inv_piv = 1.0 / pivval
        a[col] = [x * inv_piv for x in a[col]]
        ident[col] = [x * inv_piv for x in ident[col]]
        for r in range(n):
            if r == col:
                continue
            factor = a[r][col]
            if isinstance(factor, Dual) or factor != 0.0:
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
                ident[r] = [x - factor * y for x, y in zip(ident[r], ident[col])]
    if abs(det) <= tol:
        raise SingularMetricError(det=det, tol=tol, what=what)
    return np.array(ident, dtype=object)


def generic_det(matrix):
    """Determinant of a small square matrix through LU on real parts.

    Used only for degeneracy checks, so dual parts are dropped.
    """
    a = np.array([[value(x) for x in row] for row in matrix], dtype=float)
    return float(np.linalg.det(a))


def to_float(array):
    """Recursively strip dual parts of a (nested) array of scalars."""
    arr = np.asarray(array, dtype=object)
    out = np.empty(arr.shape, dtype=float)
    for idx in np.ndindex(arr.shape):
        out[idx] = value(arr[idx])
    return out


def finite_difference(f, point, i, step=1e-5):
    """Central-difference first partial: the test oracle for dual math."""
    up = list(point)
    dn = list(point)
    up[i] += step
    dn[i] -= step
    return (value(f(up)) - value(f(dn))) / (2.0 * step)


def finite_difference2(f, point, i, j, step=1e-4):
    """Central-difference second partial, O(step^2)."""
    if i == j:
        up = list(point)
        dn = list(point)
        up[i] += step
        dn[i] -= step
        return (value(f(up)) - 2.0 * value(f(list(point))) + value(f(dn))) / step**2
    pp = list(point); pp[i] += step; pp[j] += step
    pm = list(point); pm[i] += step; pm[j] -= step
    mp = list(point); mp[i] -= step; mp[j] += step
    mm = list(point); mm[i] -= step; mm[j] -= step
    return (value(f(pp)) - value(f(pm)) - value(f(mp)) + value(f(mm))) / (4.0 * step**2)
