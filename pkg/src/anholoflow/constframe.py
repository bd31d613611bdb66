"""Vertical vielbeins realizing constant-coefficient d-metrics.

The solitonic construction requires frames in which the canonical
d-connection curvature matrices are constant over the chart.  This
module builds the vertical frame factors that flatten a given base
metric onto a prescribed constant matrix, and provides the numerical
checks (constant-coefficient spread, skew structure of the connection
matrices along a curve tangent) that stand in for the group-theoretic
machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import Dual, to_float, value
from .errors import ConstructionError, NormalizationError, SignatureError
from .fields import MetricField
from .nconnection import energy_hessian_metric
from .dgeometry import (
    CanonicalDConnection,
    DMetric,
    dcurvature,
    dtorsion,
    orthonormalize,
)


def _signature_factor(mat):
    """W with W^T mat W = diag(signs); returns (W, signs)."""
    vals, vecs = np.linalg.eigh(np.asarray(mat, dtype=float))
    if np.min(np.abs(vals)) < 1e-12:
        raise ConstructionError("degenerate matrix in vielbein solve")
    w = vecs @ np.diag(1.0 / np.sqrt(np.abs(vals)))
    return w, np.sign(vals).astype(int)


def solve_vertical_vielbein(g_base: MetricField, g_ring):
    """Vertical frame e_a^abar(x) with e^T g_base(x) e = g_ring.

    The double y-integration admits x-dependent integration constants;
    we fix them by the y-independent symmetric-square-root choice, which
    is canonical and satisfies the defining residual exactly for
    y-independent bases.
    """
    g_ring = np.asarray(g_ring, dtype=float)
    m = g_ring.shape[0]
    if g_ring.shape != (m, m) or not np.allclose(g_ring, g_ring.T, atol=1e-12):
        raise ConstructionError("target constant metric must be square symmetric")
    w_ring, s_ring = _signature_factor(g_ring)

    def evaluator(x):
        g = to_float(g_base(x))
        w, s = _signature_factor(g)
        if sorted(s) != sorted(s_ring):
            raise SignatureError(
                f"base signature {tuple(s)} incompatible with target {tuple(s_ring)}"
            )
        # permute base columns so both sign patterns line up
        perm = [-1] * m
        used = [False] * m
        for col, want in enumerate(s_ring):
            for j in range(m):
                if not used[j] and s[j] == want:
                    perm[col] = j
                    used[j] = True
                    break
        return w[:, perm] @ np.linalg.inv(w_ring)

    return VielbeinField(evaluator, g_ring, g_base)


@dataclass
class VielbeinField:
    """Vertical frame factors e_a^abar(x) with their target constant metric."""

    evaluator: object
    g_ring: np.ndarray
    g_base: MetricField

    def __call__(self, x):
        return np.asarray(self.evaluator([value(c) for c in x]), dtype=float)

    def deformed_vertical_metric(self) -> MetricField:
        """g_ab(x) = e_a^abar e_b^bbar gbar_ab: the flattened v-metric."""
        base = self.g_base
        ev = self

        def comps(x):
            e = ev(x)
            g = to_float(base(x))
            return e.T @ g @ e

        sig = tuple(int(s) for s in np.sign(np.linalg.eigvalsh(self.g_ring)))
        return MetricField(base.n, comps, signature=sig, name=f"vielbein({base.name})")

    def residual(self, x, y):
        """Defining residual |1/2 d^2(e e y y)/dy dy * g_base - g_ring|_max.

        Second y-derivatives taken with dual numbers through the full
        assembled vertical metric, not assumed y-independent.
        """
        gv = self.deformed_vertical_metric()
        gt = to_float(energy_hessian_metric(gv, list(x), list(y)))
        return float(np.max(np.abs(gt - self.g_ring)))


@dataclass
class ConstantCurvatureReport:
    """Per-block curvature spread over a sample set, plus torsion maxima."""

    spreads: dict
    curvature_max: dict
    torsion_max: dict
    tol: float
    block_pass: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.block_pass:
            self.block_pass = {k: v <= self.tol for k, v in self.spreads.items()}

    @property
    def passed(self):
        return all(self.block_pass.values())

    def as_dict(self):
        return {
            "spreads": self.spreads,
            "curvature_max": self.curvature_max,
            "torsion_max": self.torsion_max,
            "tol": self.tol,
            "block_pass": self.block_pass,
            "passed": self.passed,
        }


def _orthonormal_curvature_blocks(dm: DMetric, dc: CanonicalDConnection, u):
    """Curvature tensor congruence-transformed to the orthonormal frame."""
    cb = dcurvature(dc, u)
    a = orthonormalize(dm, u)
    b = np.linalg.inv(a)
    out = np.einsum("pd,gq,ar,bs,dgab->pqrs", b, a, a, a, cb.full)
    return out, cb


def constant_curvature_check(dm: DMetric, samples, tol=1e-6) -> ConstantCurvatureReport:
    """Spread of the orthonormal-frame curvature blocks across a sample set.

    Reports max_u |B(u) - mean(B)|_inf per block and the torsion maxima;
    passes when every spread is within ``tol``.
    """
    samples = [list(u) for u in samples]
    if len(samples) < 2:
        raise ValueError("need at least two sample points")
    dc = CanonicalDConnection(dm)
    per_block = {}
    tors_max = {}
    for u in samples:
        full, _ = _orthonormal_curvature_blocks(dm, dc, u)
        bundle_like = _CurvViews(dm.n, dm.m, full)
        for key, arr in bundle_like.views().items():
            per_block.setdefault(key, []).append(arr)
        tors = dtorsion(dc, dm.nconn, u)
        for key, v in tors.max_abs().items():
            tors_max[key] = max(tors_max.get(key, 0.0), v)
    spreads = {}
    curv_max = {}
    for key, stack in per_block.items():
        arr = np.stack(stack)
        mean = arr.mean(axis=0)
        spreads[key] = float(np.max(np.abs(arr - mean)))
        curv_max[key] = float(np.max(np.abs(arr)))
    return ConstantCurvatureReport(spreads, curv_max, tors_max, tol)


class _CurvViews:
    """Block views over a transformed curvature tensor (same layout as
    CurvatureBundle.full)."""

    def __init__(self, n, m, full):
        self.n, self.m, self.full = n, m, full

    def views(self):
        n, m = self.n, self.m
        f = self.full
        return {
            "R_hh": f[:n, :n, :n, :n],
            "R_vv": f[n:, n:, :n, :n],
            "P_h": f[:n, :n, n:, :n],
            "P_v": f[n:, n:, n:, :n],
            "S_hh": f[:n, :n, n:, n:],
            "S_vv": f[n:, n:, n:, n:],
        }


def generic_cholesky(mat):
    """Lower-triangular factor over dual-generic scalars (SPD blocks only)."""
    a = [list(row) for row in np.asarray(mat, dtype=object)]
    k = len(a)
    low = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1):
            acc = a[i][j]
            for p in range(j):
                acc = acc - low[i][p] * low[j][p]
            if i == j:
                if value(acc) <= 0.0:
                    raise SignatureError("block not positive definite")
                low[i][j] = np.sqrt(acc) if isinstance(acc, Dual) else float(np.sqrt(acc))
            else:
                low[i][j] = acc / low[j][j]
    return np.array(low, dtype=object)


def skew_structure_check(dm: DMetric, tangent, u, connection=None, norm_tol=1e-8):
    """Skew-symmetry residual of the connection matrices along a unit tangent.

    The tangent is given in N-adapted frame components and must satisfy
    g(X, X) = 1.  The connection 1-form is moved to the orthonormal
    frame field (including the frame-derivative term), where metric
    compatibility makes the contracted matrices skew.
    """
    from .dual import partial_array
    from .fields import invert_symmetric

    n, m = dm.n, dm.m
    dim = n + m
    x_comp = np.asarray(tangent, dtype=float)
    g = to_float(dm.hblock(u))
    h = to_float(dm.vblock(u))
    norm = x_comp[:n] @ g @ x_comp[:n] + x_comp[n:] @ h @ x_comp[n:]
    if abs(norm - 1.0) > norm_tol:
        raise NormalizationError(f"tangent has g(X,X) = {norm:.6f}, expected 1")

    dc = connection if connection is not None else CanonicalDConnection(dm)
    gamma_fn = dc.gamma if hasattr(dc, "gamma") else dc

    def ortho_fn(v):
        lh = generic_cholesky(dm.hblock(v))
        lv = generic_cholesky(dm.vblock(v))
        out = np.zeros((dim, dim), dtype=object)
        ah = generic_inv_t(lh)
        av = generic_inv_t(lv)
        out[:n, :n] = ah
        out[n:, n:] = av
        return out

    a0 = to_float(ortho_fn(u))
    b0 = np.linalg.inv(a0)
    gam = to_float(np.asarray(gamma_fn(list(u)), dtype=object))

    ncoef = to_float(dm.nconn.coeff(u))
    raw = [to_float(partial_array(ortho_fn, u, idx)) for idx in range(dim)]
    ea_a = []
    for k in range(n):
        d = raw[k].copy()
        for a in range(m):
            d -= ncoef[a, k] * raw[n + a]
        ea_a.append(d)
    ea_a.extend(raw[n:])

    omega = np.zeros((dim, dim))
    for gpr in range(dim):
        for al in range(dim):
            contrib = ea_a[al][:, gpr].copy()
            for g0 in range(dim):
                contrib += a0[g0, gpr] * gam[:, al, g0]
            omega[:, gpr] += x_comp[al] * contrib
    omega_pr = b0 @ omega
    resid = 0.0
    for blk in (slice(0, n), slice(n, dim)):
        w = omega_pr[blk, blk]
        resid = max(resid, float(np.max(np.abs(w + w.T))))
    return resid


def generic_inv_t(low):
    """(L^{-1})^T for a lower-triangular dual-generic factor."""
    from .dual import generic_inv

    inv = generic_inv(low, what="cholesky factor")
    return inv.T
