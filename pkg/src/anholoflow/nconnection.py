"""Canonical semispray, nonlinear connection and N-adapted frames.

The nonlinear connection splits the chart into horizontal/vertical
subspaces.  Everything here is a pointwise evaluator built on dual
arithmetic: coefficients are never tabulated, they are recomputed at the
requested point (thread-safe, memory-free).
"""

from __future__ import annotations

import numpy as np

from .dual import Dual, dual_part, generic_det, partial_array, to_float, value
from .errors import RegularityError
from .fields import MetricField, invert_symmetric

DEGENERACY_TOL = 1e-12


def christoffel(g: MetricField, x):
    """Second-kind Christoffel symbols gamma^i_lm of a base metric.

    gamma^i_lm = 1/2 g^{ih} (d_m g_lh + d_l g_mh - d_h g_lm); symmetric
    in (l, m).  Entries stay dual when ``x`` carries dual parts.
    """
    n = g.n
    ginv = invert_symmetric(g(x))
    dg = [partial_array(lambda u: g(u), x, k) for k in range(n)]
    gamma = np.empty((n, n, n), dtype=object)
    for i in range(n):
        for l in range(n):
            for m in range(n):
                acc = 0.0
                for h in range(n):
                    acc = acc + ginv[i, h] * (dg[m][l, h] + dg[l][m, h] - dg[h][l, m])
                gamma[i, l, m] = 0.5 * acc
    return gamma


def _partial_u(fn, point, idx):
    seeded = [Dual(c, 1.0 if j == idx else 0.0) for j, c in enumerate(point)]
    return dual_part(fn(seeded))


def _as_vertical_metric(g):
    """Normalize the vertical-metric argument to a callable (x, y) -> matrix."""
    if isinstance(g, MetricField):
        return lambda x, y: g(x), g.n
    raise TypeError("expected a MetricField for the vertical metric")


def energy_hessian_metric(g, x, y):
    """Vertical metric 1/2 d^2(g_ab y^a y^b)/dy^a dy^b via nested duals.

    For y-independent g this equals g(x) analytically; the equality is
    asserted in tests rather than assumed here.
    """
    gv, n = _as_vertical_metric(g)

    def lagrangian(u):
        xs, ys = u[:n], u[n:]
        mat = np.asarray(gv(xs, ys), dtype=object)
        acc = 0.0
        for a in range(n):
            for b in range(n):
                acc = acc + mat[a, b] * ys[a] * ys[b]
        return acc

    u0 = list(x) + list(y)
    gt = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            gt[a, b] = 0.5 * _partial_u(
                lambda u, a=a: _partial_u(lagrangian, u, n + a), u0, n + b
            )
    return gt


def semispray(g, x, y):
    """Canonical semispray coefficients from the effective energy.

    Computed from the Euler-Lagrange form
    Gtilde^i = 1/4 gtilde^{ij} (d^2 L / dy^j dx^k * y^k - dL/dx^j)
    which for y-independent vertical metrics reduces to the classical
    1/2 gamma^i_lm y^l y^m spray (an identity exercised by tests).
    """
    gv, n = _as_vertical_metric(g)

    def lagrangian(u):
        xs, ys = u[:n], u[n:]
        mat = np.asarray(gv(xs, ys), dtype=object)
        acc = 0.0
        for a in range(n):
            for b in range(n):
                acc = acc + mat[a, b] * ys[a] * ys[b]
        return acc

    u0 = list(x) + list(y)
    gt = energy_hessian_metric(g, x, y)
    det = generic_det(gt)
    if abs(det) <= DEGENERACY_TOL:
        raise RegularityError(
            f"energy hessian metric degenerate: |det| = {abs(det):.3e}"
        )
    gtinv = invert_symmetric(gt, what="energy hessian metric")

    rhs = []
    for j in range(n):
        mixed = 0.0
        for k in range(n):
            mixed = mixed + _partial_u(
                lambda u, j=j: _partial_u(lagrangian, u, k), u0, n + j
            ) * y[k]
        rhs.append(mixed - _partial_u(lagrangian, u0, j))
    out = np.empty(n, dtype=object)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc = acc + gtinv[i, j] * rhs[j]
        out[i] = 0.25 * acc
    return out


class NConnection:
    """Nonlinear connection N^a_i(x, y) on an (n, m) chart.

    ``coeff(u)`` returns the (m, n) coefficient array; entries are dual
    when ``u`` is.  Three construction modes: canonical (from a metric
    via the semispray), linear (Gamma^a_bj(x) y^b) and user-supplied.
    """

    def __init__(self, n, m, coeff_fn, mode="user"):
        self.n = n
        self.m = m
        self._coeff = coeff_fn
        self.mode = mode

    def coeff(self, u):
        out = np.asarray(self._coeff(list(u)), dtype=object)
        if out.shape != (self.m, self.n):
            raise ValueError(
                f"N coefficients have shape {out.shape}, expected {(self.m, self.n)}"
            )
        return out

    @classmethod
    def zero(cls, n, m=None):
        m = n if m is None else m
        return cls(n, m, lambda u: np.zeros((m, n), dtype=object), mode="user")

    @classmethod
    def linear(cls, n, gamma_fn):
        """N^a_i = Gamma^a_{bi}(x) y^b, the linear-connection subclass."""

        def coeff(u):
            xs, ys = u[:n], u[n:]
            gam = np.asarray(gamma_fn(xs), dtype=object)
            out = np.empty((n, n), dtype=object)
            for a in range(n):
                for i in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc = acc + gam[a, b, i] * ys[b]
                    out[a, i] = acc
            return out

        return cls(n, n, coeff, mode="linear")

    @classmethod
    def canonical(cls, g):
        """Ntilde^i_j = d Gtilde^i / dy^j from the canonical semispray."""
        _, n = _as_vertical_metric(g)

        def coeff(u):
            xs, ys = u[:n], u[n:]
            out = np.empty((n, n), dtype=object)
            for j in range(n):
                # the whole point is lifted one dual level so nested
                # epsilons never mix with the caller's seeds
                xw = [Dual(c, 0.0) for c in xs]
                seeded = [Dual(c, 1.0 if k == j else 0.0) for k, c in enumerate(ys)]
                spray = semispray(g, xw, seeded)
                for i in range(n):
                    out[i, j] = dual_part(spray[i])
            return out

        return cls(n, n, coeff, mode="canonical")


def frame_derivative(fn, nconn: NConnection, u, k):
    """N-elongated horizontal derivative e_k fn = (d_k - N^a_k d_a) fn.

    ``fn`` maps a full point to a scalar; nesting works because N itself
    is evaluated in dual arithmetic.
    """
    n = nconn.n
    ncoef = nconn.coeff(u)
    out = _partial_u(fn, u, k)
    for a in range(nconn.m):
        out = out - ncoef[a, k] * _partial_u(fn, u, n + a)
    return out


def vertical_derivative(fn, u, a, n):
    """Plain vertical derivative e_a fn = d fn / dy^a."""
    return _partial_u(fn, u, n + a)


def frame_matrices(nconn: NConnection, u):
    """Frame/coframe transition matrices at ``u``.

    Columns of ``frame`` are the coordinate components of (e_i, e_a);
    rows of ``coframe`` are the components of (e^i, e^a).  They are
    mutually inverse block-triangular matrices with unit diagonals.
    """
    n, m = nconn.n, nconn.m
    ncoef = to_float(nconn.coeff(u))
    dim = n + m
    frame = np.eye(dim)
    coframe = np.eye(dim)
    frame[n:, :n] = -ncoef
    coframe[n:, :n] = ncoef
    return frame, coframe


class NAdaptedFrame:
    """Frame/coframe pair induced by an N-connection at a point."""

    def __init__(self, nconn: NConnection, u):
        self.nconn = nconn
        self.point = [value(c) for c in u]
        self.frame, self.coframe = frame_matrices(nconn, u)

    def inverse_residual(self):
        dim = self.nconn.n + self.nconn.m
        return float(np.max(np.abs(self.coframe @ self.frame - np.eye(dim))))


def nconnection_curvature(nconn: NConnection, u):
    """Curl Omega^a_ij = e_j N^a_i - e_i N^a_j (Nijenhuis-type tensor)."""
    n, m = nconn.n, nconn.m
    omega = np.empty((m, n, n), dtype=object)
    for a in range(m):
        for i in range(n):
            omega[a, i, i] = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                ej_ni = frame_derivative(lambda v, a=a, i=i: nconn.coeff(v)[a, i], nconn, u, j)
                ei_nj = frame_derivative(lambda v, a=a, j=j: nconn.coeff(v)[a, j], nconn, u, i)
                omega[a, i, j] = ej_ni - ei_nj
                omega[a, j, i] = -(ej_ni - ei_nj)
    return omega


def anholonomy(nconn: NConnection, u):
    """Anholonomy coefficients W^gamma_{alpha beta} of the N-adapted frame.

    Defined through [e_alpha, e_beta] = W^gamma_{alpha beta} e_gamma; the
    only nonzero blocks are W^b_{i a} = dN^b_i/dy^a (with its antisymmetric
    mirror) and W^a_{i j} = Omega^a_{i j}.
    """
    n, m = nconn.n, nconn.m
    dim = n + m
    w = np.zeros((dim, dim, dim), dtype=object)
    omega = nconnection_curvature(nconn, u)
    for a in range(m):
        for i in range(n):
            for j in range(n):
                w[n + a, i, j] = omega[a, i, j]
    for b in range(m):
        for i in range(n):
            for a in range(m):
                d = vertical_derivative(
                    lambda v, b=b, i=i: nconn.coeff(v)[b, i], u, a, n
                )
                w[n + b, i, n + a] = d
                w[n + b, n + a, i] = -d
    return w


def commutator_in_frame(nconn: NConnection, u, alpha, beta):
    """Oracle for the anholonomy relations.

    Applies [e_alpha, e_beta] to the coordinate functions via dual
    arithmetic and converts the resulting coordinate vector back to
    frame components.  Used by tests and `--verify`; independent of
    ``anholonomy`` except for sharing the N evaluator.
    """
    n, m = nconn.n, nconn.m
    dim = n + m

    def apply(fn, idx):
        if idx < n:
            return lambda v: frame_derivative(fn, nconn, v, idx)
        return lambda v: vertical_derivative(fn, v, idx - n, n)

    comm_coord = np.empty(dim, dtype=object)
    for gamma in range(dim):
        coord = lambda v, gamma=gamma: v[gamma]
        ab = apply(apply(coord, beta), alpha)(list(u))
        ba = apply(apply(coord, alpha), beta)(list(u))
        comm_coord[gamma] = ab - ba
    _, coframe = frame_matrices(nconn, u)
    vec = to_float(comm_coord)
    return coframe @ vec


def integrate_nonlinear_geodesic(g, x0, y0, tau_end, dtau):
    """Diagnostic integrator for d^2x/dtau^2 + 2 Gtilde(x, dx/dtau) = 0.

    RK4 on the first-order system; returns the list of (tau, x, y)
    samples.  The paper-level test surface is only flat-space straight
    lines, so this stays a diagnostic.
    """
    x = np.array([float(c) for c in x0])
    y = np.array([float(c) for c in y0])
    out = [(0.0, x.copy(), y.copy())]
    steps = int(round(tau_end / dtau))

    def rhs(xv, yv):
        spray = to_float(semispray(g, list(xv), list(yv)))
        return yv.copy(), -2.0 * spray

    tau = 0.0
    for _ in range(steps):
        k1x, k1y = rhs(x, y)
        k2x, k2y = rhs(x + 0.5 * dtau * k1x, y + 0.5 * dtau * k1y)
        k3x, k3y = rhs(x + 0.5 * dtau * k2x, y + 0.5 * dtau * k2y)
        k4x, k4y = rhs(x + dtau * k3x, y + dtau * k3y)
        x = x + dtau / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + dtau / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        tau += dtau
        out.append((tau, x.copy(), y.copy()))
    return out
