"""Sasaki-type d-metric lifts and the canonical d-connection pipeline.

Curvature is assembled from the geometric definition
R(e_a, e_b) e_c = D_a D_b e_c - D_b D_a e_c - D_[a,b] e_c
with the frame commutators supplied by the anholonomy coefficients and
all coefficient derivatives taken by dual numbers through the full
assembly (never by differencing stored tables).  The documented
component blocks are views into that tensor, which keeps every
antisymmetry exact and sidesteps index-order ambiguities of the
coefficient-level formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import partial_array, to_float, value
from .errors import SignatureError
from .fields import MetricField, invert_symmetric
from .nconnection import (
    NConnection,
    anholonomy,
    energy_hessian_metric,
    frame_matrices,
)


class DMetric:
    """Block metric [g_ij, h_ab] soldered by an N-connection.

    ``gh`` and ``gv`` are evaluators over the full point u = (x, y); the
    assembled off-diagonal coordinate form is available via ``ansatz``.
    """

    def __init__(self, chart_n, chart_m, gh, gv, nconn: NConnection, name="dmetric"):
        self.n = chart_n
        self.m = chart_m
        self._gh = gh
        self._gv = gv
        self.nconn = nconn
        self.name = name

    @property
    def dim(self):
        return self.n + self.m

    @property
    def is_tm(self):
        return self.n == self.m

    def hblock(self, u):
        return np.asarray(self._gh(list(u)), dtype=object)

    def vblock(self, u):
        return np.asarray(self._gv(list(u)), dtype=object)

    def ansatz(self, u):
        """Off-diagonal coordinate components [[g + N^T h N, N^T h], [h N, h]]."""
        n, m = self.n, self.m
        g = self.hblock(u)
        h = self.vblock(u)
        ncoef = self.nconn.coeff(u)
        out = np.empty((n + m, n + m), dtype=object)
        for i in range(n):
            for j in range(n):
                acc = g[i, j]
                for a in range(m):
                    for b in range(m):
                        acc = acc + ncoef[a, i] * ncoef[b, j] * h[a, b]
                out[i, j] = acc
        for i in range(n):
            for b in range(m):
                acc = 0.0
                for a in range(m):
                    acc = acc + ncoef[a, i] * h[a, b]
                out[i, n + b] = acc
                out[n + b, i] = acc
        for a in range(m):
            for b in range(m):
                out[n + a, n + b] = h[a, b]
        return out


def extract_blocks(ansatz, n, m):
    """Invert the off-diagonal assembly: ansatz matrix -> (g, h, N)."""
    full = np.asarray(ansatz, dtype=object)
    h = full[n:, n:]
    hinv = invert_symmetric(h, what="v-block")
    lower_left = full[n:, :n]
    ncoef = np.empty((m, n), dtype=object)
    for a in range(m):
        for i in range(n):
            acc = 0.0
            for b in range(m):
                acc = acc + hinv[a, b] * lower_left[b, i]
            ncoef[a, i] = acc
    g = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            acc = full[i, j]
            for a in range(m):
                for b in range(m):
                    acc = acc - ncoef[a, i] * ncoef[b, j] * h[a, b]
            g[i, j] = acc
    return g, h, ncoef


def sasaki_lift(g: MetricField) -> DMetric:
    """Canonical tangent-bundle lift: both blocks equal the energy
    hessian metric, soldered by the canonical N-connection."""
    n = g.n
    nconn = NConnection.canonical(g)

    def block(u):
        return energy_hessian_metric(g, u[:n], u[n:])

    return DMetric(n, n, block, block, nconn, name=f"sasaki({g.name})")


def dmetric_from_blocks(n, m, gh_fn, gv_fn, nconn, name="dmetric"):
    return DMetric(n, m, gh_fn, gv_fn, nconn, name=name)


class CanonicalDConnection:
    """Metric-compatible d-connection with vanishing h-h and v-v torsion.

    ``tables(u)`` returns the coefficient blocks (L1, L2, C1, C2) where
    L1[i,j,k] = L^i_jk, L2[a,b,k] = L^a_bk, C1[i,j,c] = C^i_jc and
    C2[a,b,c] = C^a_bc, with the derivative direction last.  In
    tangent-bundle mode only (L^i_jk, C^a_bc) are computed and the mixed
    blocks are their index-identified copies.
    """

    def __init__(self, dm: DMetric, tm_mode=None):
        self.dm = dm
        self.tm_mode = dm.is_tm if tm_mode is None else tm_mode
        if self.tm_mode and not dm.is_tm:
            raise ValueError("tangent-bundle mode requires m == n")

    def _frame_block_derivs(self, fn, u, ncoef):
        """e_k and e_a derivatives of a matrix evaluator, all directions."""
        n, m = self.dm.n, self.dm.m
        raw = [partial_array(fn, u, idx) for idx in range(n + m)]
        out = []
        for k in range(n):
            d = raw[k]
            for a in range(m):
                d = d - ncoef[a, k] * raw[n + a]
            out.append(d)
        out.extend(raw[n:])
        return out

    def tables(self, u):
        dm = self.dm
        n, m = dm.n, dm.m
        u = list(u)
        ncoef = dm.nconn.coeff(u)
        g = dm.hblock(u)
        h = dm.vblock(u)
        ginv = invert_symmetric(g, what="h-block")
        hinv = invert_symmetric(h, what="v-block")
        dg = self._frame_block_derivs(dm.hblock, u, ncoef)
        dh = self._frame_block_derivs(dm.vblock, u, ncoef)
        dn = [partial_array(dm.nconn.coeff, u, n + a) for a in range(m)]

        l1 = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = 0.0
                    for r in range(n):
                        acc = acc + ginv[i, r] * (
                            dg[k][j, r] + dg[j][k, r] - dg[r][j, k]
                        )
                    l1[i, j, k] = 0.5 * acc

        c2 = np.empty((m, m, m), dtype=object)
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    acc = 0.0
                    for d in range(m):
                        acc = acc + hinv[a, d] * (
                            dh[n + c][b, d] + dh[n + b][c, d] - dh[n + d][b, c]
                        )
                    c2[a, b, c] = 0.5 * acc

        if self.tm_mode:
            return l1, l1, c2, c2

        l2 = np.empty((m, m, n), dtype=object)
        for a in range(m):
            for b in range(m):
                for k in range(n):
                    acc = dn[b][a, k]
                    inner = 0.0
                    for c in range(m):
                        term = dh[k][b, c]
                        for d in range(m):
                            term = term - h[d, c] * dn[b][d, k] - h[d, b] * dn[c][d, k]
                        inner = inner + hinv[a, c] * term
                    l2[a, b, k] = acc + 0.5 * inner

        c1 = np.empty((n, n, m), dtype=object)
        for i in range(n):
            for j in range(n):
                for c in range(m):
                    acc = 0.0
                    for k in range(n):
                        acc = acc + ginv[i, k] * dg[n + c][j, k]
                    c1[i, j, c] = 0.5 * acc

        return l1, l2, c1, c2

    def gamma(self, u):
        """Full coefficient array Gamma[delta, alpha, gamma] with the
        derivative direction alpha as the first lower index:
        D_{e_alpha} e_gamma = Gamma[delta, alpha, gamma] e_delta."""
        n, m = self.dm.n, self.dm.m
        dim = n + m
        l1, l2, c1, c2 = self.tables(u)
        out = np.zeros((dim, dim, dim), dtype=object)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[i, k, j] = l1[i, j, k]
                for c in range(m):
                    out[i, n + c, j] = c1[i, j, c]
        for a in range(m):
            for b in range(m):
                for k in range(n):
                    out[n + a, k, n + b] = l2[a, b, k]
                for c in range(m):
                    out[n + a, n + c, n + b] = c2[a, b, c]
        return out


def canonical_dconnection(dm: DMetric, u, tm_mode=None):
    """Coefficient blocks of the canonical d-connection at a point."""
    dc = CanonicalDConnection(dm, tm_mode=tm_mode)
    l1, l2, c1, c2 = dc.tables(u)
    return to_float(l1), to_float(l2), to_float(c1), to_float(c2)


@dataclass
class TorsionBlocks:
    """d-torsion in the documented component blocks (float arrays)."""

    hhh: np.ndarray  # T^i_jk
    hhv: np.ndarray  # T^i_ja
    vhh: np.ndarray  # T^a_ji
    vvh: np.ndarray  # T^a_bi
    vvv: np.ndarray  # T^a_bc

    def max_abs(self):
        return {
            "hhh": float(np.max(np.abs(self.hhh))),
            "hhv": float(np.max(np.abs(self.hhv))),
            "vhh": float(np.max(np.abs(self.vhh))),
            "vvh": float(np.max(np.abs(self.vvh))),
            "vvv": float(np.max(np.abs(self.vvv))),
        }


def dtorsion(dc: CanonicalDConnection, nconn: NConnection, u) -> TorsionBlocks:
    """Torsion from T(e_a, e_b) = D_a e_b - D_b e_a - [e_a, e_b].

    Going through the frame commutators (rather than copying the
    coefficient-difference formulas) keeps the mixed block an honest
    cross-check against the N-connection curvature.
    """
    n, m = dc.dm.n, dc.dm.m
    dim = n + m
    gam = dc.gamma(u)
    w = anholonomy(nconn, u)
    tors = np.empty((dim, dim, dim), dtype=object)
    for gidx in range(dim):
        for a in range(dim):
            for b in range(dim):
                tors[gidx, a, b] = gam[gidx, a, b] - gam[gidx, b, a] - w[gidx, a, b]
    tf = to_float(tors)
    hhh = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                hhh[i, j, k] = tf[i, k, j]
    hhv = np.empty((n, n, m))
    for i in range(n):
        for j in range(n):
            for a in range(m):
                hhv[i, j, a] = tf[i, n + a, j]
    vhh = np.empty((m, n, n))
    for a in range(m):
        for j in range(n):
            for i in range(n):
                vhh[a, j, i] = tf[n + a, i, j]
    vvh = np.empty((m, m, n))
    for a in range(m):
        for b in range(m):
            for i in range(n):
                vvh[a, b, i] = tf[n + a, n + b, i]
    vvv = np.empty((m, m, m))
    for a in range(m):
        for b in range(m):
            for c in range(m):
                vvv[a, b, c] = tf[n + a, n + c, n + b]
    return TorsionBlocks(hhh, hhv, vhh, vvh, vvv)


@dataclass
class CurvatureBundle:
    """Curvature of a d-connection at a point.

    ``full[d, g, a, b]`` holds the components of R(e_a, e_b) e_g along
    e_d; the named views use the documented block index orders.
    """

    n: int
    m: int
    full: np.ndarray

    @property
    def rhh(self):
        """R^i_hjk (all horizontal)."""
        n = self.n
        out = np.empty((n, n, n, n))
        for i in range(n):
            for h in range(n):
                for j in range(n):
                    for k in range(n):
                        out[i, h, j, k] = self.full[i, h, k, j]
        return out

    @property
    def rvv(self):
        """R^a_bjk."""
        n, m = self.n, self.m
        out = np.empty((m, m, n, n))
        for a in range(m):
            for b in range(m):
                for j in range(n):
                    for k in range(n):
                        out[a, b, j, k] = self.full[n + a, n + b, k, j]
        return out

    @property
    def phh(self):
        """P^i_jka."""
        n, m = self.n, self.m
        out = np.empty((n, n, n, m))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for a in range(m):
                        out[i, j, k, a] = self.full[i, j, n + a, k]
        return out

    @property
    def pvv(self):
        """P^c_bka."""
        n, m = self.n, self.m
        out = np.empty((m, m, n, m))
        for c in range(m):
            for b in range(m):
                for k in range(n):
                    for a in range(m):
                        out[c, b, k, a] = self.full[n + c, n + b, n + a, k]
        return out

    @property
    def shh(self):
        """S^i_jbc."""
        n, m = self.n, self.m
        out = np.empty((n, n, m, m))
        for i in range(n):
            for j in range(n):
                for b in range(m):
                    for c in range(m):
                        out[i, j, b, c] = self.full[i, j, n + c, n + b]
        return out

    @property
    def svv(self):
        """S^a_bcd."""
        n, m = self.n, self.m
        out = np.empty((m, m, m, m))
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    for d in range(m):
                        out[a, b, c, d] = self.full[n + a, n + b, n + d, n + c]
        return out

    def block_views(self, tm=False):
        if tm:
            return {"R": self.rhh, "P": self.phh, "S": self.svv}
        return {
            "R_hh": self.rhh, "R_vv": self.rvv,
            "P_hh": self.phh, "P_vv": self.pvv,
            "S_hh": self.shh, "S_vv": self.svv,
        }

    def max_abs(self):
        return float(np.max(np.abs(self.full)))


def dcurvature(dc: CanonicalDConnection, u) -> CurvatureBundle:
    """Curvature blocks of a d-connection (dual-differentiated assembly)."""
    dm = dc.dm
    n, m = dm.n, dm.m
    dim = n + m
    u = list(u)
    gam = dc.gamma(u)
    ncoef = dm.nconn.coeff(u)
    raw = [partial_array(dc.gamma, u, idx) for idx in range(dim)]
    dgam = []
    for k in range(n):
        d = raw[k]
        for a in range(m):
            d = d - ncoef[a, k] * raw[n + a]
        dgam.append(d)
    dgam.extend(raw[n:])
    w = anholonomy(dm.nconn, u)

    full = np.zeros((dim, dim, dim, dim), dtype=object)
    for d in range(dim):
        for g in range(dim):
            for a in range(dim):
                for b in range(a + 1, dim):
                    acc = dgam[a][d, b, g] - dgam[b][d, a, g]
                    for e in range(dim):
                        acc = acc + gam[e, b, g] * gam[d, a, e]
                        acc = acc - gam[e, a, g] * gam[d, b, e]
                        weab = w[e, a, b]
                        if isinstance(weab, float) and weab == 0.0:
                            continue
                        acc = acc - weab * gam[d, e, g]
                    full[d, g, a, b] = acc
                    full[d, g, b, a] = -acc
    return CurvatureBundle(n, m, to_float(full))


@dataclass
class RicciBlocks:
    rij: np.ndarray
    ria: np.ndarray
    rai: np.ndarray
    sab: np.ndarray
    scalar_h: float
    scalar_v: float

    @property
    def scalar(self):
        return self.scalar_h + self.scalar_v

    def offdiag_max(self):
        """Max |Ricci| over the mixed h-v blocks (the flow constraint)."""
        return max(float(np.max(np.abs(self.ria))), float(np.max(np.abs(self.rai))))

    def tm_symmetry_residual(self):
        """On TM (a = i + n identification) the Ricci d-tensor is symmetric."""
        res = float(np.max(np.abs(self.rij - self.rij.T)))
        res = max(res, float(np.max(np.abs(self.sab - self.sab.T))))
        res = max(res, float(np.max(np.abs(self.ria - self.rai.T))))
        return res


def ricci_and_scalar(dm: DMetric, u, cb: CurvatureBundle = None) -> RicciBlocks:
    """Ricci contractions R_ij = R^k_ijk, R_ia = -P^k_ika, R_ai = P^b_aib,
    S_ab = S^c_abc, plus the scalars ->R = g^{ij} R_ij and <-S = h^{ab} S_ab."""
    n, m = dm.n, dm.m
    if cb is None:
        cb = dcurvature(CanonicalDConnection(dm), u)
    full = cb.full
    rij = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            rij[i, j] = sum(full[k, i, k, j] for k in range(n))
    ria = np.empty((n, m))
    for i in range(n):
        for a in range(m):
            ria[i, a] = -sum(full[k, i, n + a, k] for k in range(n))
    rai = np.empty((m, n))
    for a in range(m):
        for i in range(n):
            rai[a, i] = sum(full[n + b, n + a, n + b, i] for b in range(m))
    sab = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            sab[a, b] = sum(full[n + c, n + a, n + c, n + b] for c in range(m))
    ginv = to_float(invert_symmetric(dm.hblock(u), what="h-block"))
    hinv = to_float(invert_symmetric(dm.vblock(u), what="v-block"))
    scalar_h = float(np.einsum("ij,ij->", ginv, rij))
    scalar_v = float(np.einsum("ab,ab->", hinv, sab))
    return RicciBlocks(rij, ria, rai, sab, scalar_h, scalar_v)


def levi_civita(metric_fn, dim, u):
    """Coordinate Christoffel symbols of an arbitrary metric evaluator.

    Returns Gamma[l, m, n] = Gamma^l_{mn} (symmetric in m, n); used on
    the assembled off-diagonal form for comparison with the canonical
    d-connection.
    """
    u = list(u)
    g = np.asarray(metric_fn(u), dtype=object)
    ginv = invert_symmetric(g, what="off-diagonal metric")
    dg = [partial_array(metric_fn, u, k) for k in range(dim)]
    gam = np.empty((dim, dim, dim), dtype=object)
    for l in range(dim):
        for mu in range(dim):
            for nu in range(dim):
                acc = 0.0
                for s in range(dim):
                    acc = acc + ginv[l, s] * (
                        dg[mu][nu, s] + dg[nu][mu, s] - dg[s][mu, nu]
                    )
                gam[l, mu, nu] = 0.5 * acc
    return gam


def levi_civita_in_frame(dm: DMetric, u):
    """Levi-Civita connection of the off-diagonal metric, transported to
    the N-adapted frame.

    Returns Gamma'[delta, alpha, gamma] with direction alpha first, i.e.
    nabla_{e_alpha} e_gamma = Gamma'[delta, alpha, gamma] e_delta, where
    the frame-change derivative term is included.
    """
    n, m = dm.n, dm.m
    dim = n + m
    u = list(u)
    gam_coord = levi_civita(dm.ansatz, dim, u)

    def frame_fn(v):
        # dual-generic frame matrix [[I, 0], [-N, I]] (columns = e_alpha)
        out = np.empty((dim, dim), dtype=object)
        ncoef = dm.nconn.coeff(v)
        for r in range(dim):
            for c in range(dim):
                out[r, c] = 1.0 if r == c else 0.0
        for a in range(m):
            for i in range(n):
                out[n + a, i] = -ncoef[a, i]
        return out

    a_mat = np.asarray(frame_fn(u), dtype=object)
    da = [partial_array(frame_fn, u, mu) for mu in range(dim)]
    _, coframe = frame_matrices(dm.nconn, u)

    out = np.empty((dim, dim, dim), dtype=object)
    for delta in range(dim):
        for alpha in range(dim):
            for gamma in range(dim):
                acc = 0.0
                for lam in range(dim):
                    inner = 0.0
                    for mu in range(dim):
                        inner = inner + a_mat[mu, alpha] * da[mu][lam, gamma]
                        for nu in range(dim):
                            inner = inner + (
                                a_mat[mu, alpha]
                                * a_mat[nu, gamma]
                                * gam_coord[lam, mu, nu]
                            )
                    acc = acc + coframe[delta, lam] * inner
                out[delta, alpha, gamma] = acc
    return out


def compatibility_residual(dc: CanonicalDConnection, dm: DMetric, u):
    """Max-norm of all h/v covariant derivatives of the block metric.

    D_k g_ij, D_c g_ij, D_k h_ab, D_c h_ab assembled from the connection
    tables and N-elongated block derivatives; zero for any metric
    d-connection.
    """
    n, m = dm.n, dm.m
    u = list(u)
    ncoef = dm.nconn.coeff(u)
    g = dm.hblock(u)
    h = dm.vblock(u)
    l1, l2, c1, c2 = dc.tables(u)
    raw_g = [partial_array(dm.hblock, u, idx) for idx in range(n + m)]
    raw_h = [partial_array(dm.vblock, u, idx) for idx in range(n + m)]

    def frame_d(raw, k):
        d = raw[k]
        for a in range(m):
            d = d - ncoef[a, k] * raw[n + a]
        return d

    worst = 0.0
    for k in range(n):
        dgk = frame_d(raw_g, k)
        dhk = frame_d(raw_h, k)
        for i in range(n):
            for j in range(n):
                acc = dgk[i, j]
                for r in range(n):
                    acc = acc - l1[r, i, k] * g[r, j] - l1[r, j, k] * g[i, r]
                worst = max(worst, abs(value(acc)))
        for a in range(m):
            for b in range(m):
                acc = dhk[a, b]
                for d in range(m):
                    acc = acc - l2[d, a, k] * h[d, b] - l2[d, b, k] * h[a, d]
                worst = max(worst, abs(value(acc)))
    for c in range(m):
        dgc = raw_g[n + c]
        dhc = raw_h[n + c]
        for i in range(n):
            for j in range(n):
                acc = dgc[i, j]
                for r in range(n):
                    acc = acc - c1[r, i, c] * g[r, j] - c1[r, j, c] * g[i, r]
                worst = max(worst, abs(value(acc)))
        for a in range(m):
            for b in range(m):
                acc = dhc[a, b]
                for d in range(m):
                    acc = acc - c2[d, a, c] * h[d, b] - c2[d, b, c] * h[a, d]
                worst = max(worst, abs(value(acc)))
    return float(worst)


def _block_orthonormalizer(block, eta):
    """Congruence factor A with A^T block A = diag(eta) for one block."""
    blk = to_float(block)
    k = blk.shape[0]
    if all(s == 1 for s in eta):
        try:
            chol = np.linalg.cholesky(blk)
        except np.linalg.LinAlgError:
            raise SignatureError(
                "block is not positive definite but declared signature is all +1"
            ) from None
        return np.linalg.inv(chol).T
    vals, vecs = np.linalg.eigh(blk)
    signs = np.sign(vals).astype(int)
    if sorted(signs) != sorted(eta):
        raise SignatureError(
            f"block signature {tuple(signs)} does not match declared {tuple(eta)}"
        )
    a = vecs @ np.diag(1.0 / np.sqrt(np.abs(vals)))
    # permute columns so the produced sign pattern matches eta's order
    perm = [-1] * k
    used = [False] * k
    for col, want in enumerate(eta):
        for j in range(k):
            if not used[j] and signs[j] == want:
                perm[col] = j
                used[j] = True
                break
    return a[:, perm]


def orthonormalize(dm: DMetric, u, eta_h=None, eta_v=None):
    """Block-diagonal congruence A with A^T [g, h] A = eta.

    Preserves the h/v splitting; default signature is Euclidean per
    block.  Raises ``SignatureError`` when the declared signature cannot
    be realized.
    """
    n, m = dm.n, dm.m
    eta_h = tuple(eta_h) if eta_h is not None else (1,) * n
    eta_v = tuple(eta_v) if eta_v is not None else (1,) * m
    a_h = _block_orthonormalizer(dm.hblock(u), eta_h)
    a_v = _block_orthonormalizer(dm.vblock(u), eta_v)
    out = np.zeros((n + m, n + m))
    out[:n, :n] = a_h
    out[n:, n:] = a_v
    return out
