"""Bi-Hamiltonian curve-flow hierarchy on periodic curve variables.

The Hamiltonian variables live on a uniform periodic grid; spatial
derivatives and the nonlocal antiderivative are spectral (FFT), which
makes the zero-mean convention for the inverse derivative exact.  The
h- and v-channels run through the same kernels, so channel parity is
bitwise by construction.

Conventions for the nonlocal algebra: the antiderivative A returns the
zero-mean periodic primitive of (w - mean w), so D(A(w)) = w - mean(w)
and A(f_l) = f - mean(f).  The expanded form of the recursion operator
carries the two projection terms this convention induces; with them the
composition and expansion paths agree identically on all inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, DimensionMismatchError, HyperbolicityError


# ---------------------------------------------------------------------------
# spectral primitives
# ---------------------------------------------------------------------------

def _wavenumbers(m, length):
    return 2.0 * np.pi * np.fft.rfftfreq(m, d=length / m)


def spectral_derivative(w, length, order=1):
    """d^order/dl^order along axis 0 of a periodic sample array.

    The Nyquist mode is zeroed for odd orders (its odd derivative is not
    representable on a real grid), the standard convention identifying
    samples with their band-limited interpolant.
    """
    w = np.asarray(w, dtype=float)
    m = w.shape[0]
    k = _wavenumbers(m, length)
    mult = (1j * k) ** order
    if order % 2 == 1 and m % 2 == 0:
        mult[-1] = 0.0
    shape = (-1,) + (1,) * (w.ndim - 1)
    return np.fft.irfft(np.fft.rfft(w, axis=0) * mult.reshape(shape), n=m, axis=0)


def antiderivative(w, length, return_mean=False):
    """Zero-mean periodic antiderivative of (w - mean w).

    The removed mean is the diagnostic the nonlocal operators report;
    D(antiderivative(w)) reproduces w - mean(w) to spectral accuracy on
    band-limited fields (the Nyquist mode follows the same odd-order
    convention as ``spectral_derivative``).
    """
    w = np.asarray(w, dtype=float)
    m = w.shape[0]
    k = _wavenumbers(m, length)
    what = np.fft.rfft(w, axis=0)
    mean = what[0].real / m
    shape = (-1,) + (1,) * (w.ndim - 1)
    denom = (1j * k).reshape(shape)
    ahat = np.zeros_like(what)
    ahat[1:] = what[1:] / denom[1:]
    if m % 2 == 0:
        ahat[-1] = 0.0
    out = np.fft.irfft(ahat, n=m, axis=0)
    if return_mean:
        return out, mean
    return out


def grid_mean(w):
    return np.asarray(w, dtype=float).mean(axis=0)


def _check_channel(v, w):
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    w = np.atleast_2d(np.asarray(w, dtype=float).T).T
    if v.shape != w.shape:
        raise DimensionMismatchError(
            f"field shape {w.shape} does not match channel shape {v.shape}"
        )
    return v, w


def wedge(a, b):
    """a ^ b = a (x) b - b (x) a, pointwise outer products of row vectors."""
    return np.einsum("mi,mj->mij", a, b) - np.einsum("mi,mj->mij", b, a)


def hook(a, mat):
    """a _| M with (A _| (B (x) C)) = (A . B) C: row-vector contraction."""
    return np.einsum("mi,mij->mj", a, mat)


# ---------------------------------------------------------------------------
# Hamiltonian operator pair and recursion operator
# ---------------------------------------------------------------------------

def apply_J(v, w, length):
    """Symplectic operator J w = w_l + A(v . w) v."""
    v, w = _check_channel(v, w)
    scal = np.einsum("mi,mi->m", v, w)
    return spectral_derivative(w, length) + antiderivative(scal, length)[:, None] * v


def apply_H(v, w, length):
    """Cosymplectic operator H w = w_l + v _| A(v ^ w)."""
    v, w = _check_channel(v, w)
    return spectral_derivative(w, length) + hook(v, antiderivative(wedge(v, w), length))


def recursion(v, w, length, path="compose"):
    """Hereditary recursion operator R = H o J.

    ``path="expanded"`` evaluates the closed form
    R w = w_ll + |v|^2 w + A(v . w) v_l - v _| A(v_l ^ w)
          - mean(v . w) v - v _| mean(v ^ w),
    where the |.|^2 term is the multiplication operator by |v|^2 (the
    reading enforced by requiring the two paths to agree identically)
    and the two mean terms are the zero-mean convention's exact
    contribution on the periodic domain.
    """
    v, w = _check_channel(v, w)
    if path == "compose":
        return apply_H(v, apply_J(v, w, length), length)
    if path != "expanded":
        raise ValueError("path must be 'compose' or 'expanded'")
    w_ll = spectral_derivative(w, length, 2)
    v_l = spectral_derivative(v, length)
    scal = np.einsum("mi,mi->m", v, w)
    vsq = np.einsum("mi,mi->m", v, v)
    out = w_ll + vsq[:, None] * w
    out += antiderivative(scal, length)[:, None] * v_l
    out -= hook(v, antiderivative(wedge(v_l, w), length))
    out -= grid_mean(scal) * v
    out -= hook(v, np.broadcast_to(grid_mean(wedge(v, w)), wedge(v, w).shape))
    return out


# ---------------------------------------------------------------------------
# hierarchy flows and Hamiltonians
# ---------------------------------------------------------------------------

def _flow_form(v, k, length):
    """Curvature-free closed forms F_k with F_0 = v_l (convection),
    F_1 the vector mKdV flow and F_2 its fifth-order successor.

    F_2 = v_5l + 5/2 (|v|^2 v_2l)_l
          + 5/2 [ (|v|^2)_ll - |v_l|^2 + 3/4 |v|^4 ] v_l
    is the expansion of R^2(v_l); the dual-path test pins it against the
    operator composition.
    """
    v_l = spectral_derivative(v, length)
    if k == 0:
        return v_l
    vsq = np.einsum("mi,mi->m", v, v)
    if k == 1:
        return spectral_derivative(v, length, 3) + 1.5 * vsq[:, None] * v_l
    if k == 2:
        v_2l = spectral_derivative(v, length, 2)
        vlsq = np.einsum("mi,mi->m", v_l, v_l)
        term = spectral_derivative(vsq[:, None] * v_2l, length)
        bracket = spectral_derivative(vsq, length, 2) - vlsq + 0.75 * vsq**2
        return (
            spectral_derivative(v, length, 5)
            + 2.5 * term
            + 2.5 * bracket[:, None] * v_l
        )
    raise ValueError(f"unsupported hierarchy index k = {k}")


def hierarchy_flow(v, k, scalar_curv=0.0, length=2.0 * np.pi):
    """Right side of the k-th hierarchy flow, k in {0, 1, 2}.

    For k >= 1 the constant scalar curvature enters as the convective
    combination F_k - R F_{k-1}; the 0 flow is pure translation.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    if k == 0:
        return _flow_form(v, 0, length)
    out = _flow_form(v, k, length)
    if scalar_curv != 0.0:
        out = out - scalar_curv * _flow_form(v, k - 1, length)
    return out


def hamiltonian(v, k, length=2.0 * np.pi):
    """Conserved Hamiltonians of the hierarchy by trapezoidal quadrature.

    Densities: H0 = 1/2 |v|^2, H1 = -1/2 |v_l|^2 + 1/8 |v|^4,
    H2 = 1/2 |v_2l|^2 - 3/4 |v|^2 |v_l|^2 - 1/2 (v . v_l)^2 + 1/16 |v|^6.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    m = v.shape[0]
    dl = length / m
    vsq = np.einsum("mi,mi->m", v, v)
    if k == 0:
        dens = 0.5 * vsq
    elif k == 1:
        v_l = spectral_derivative(v, length)
        dens = -0.5 * np.einsum("mi,mi->m", v_l, v_l) + 0.125 * vsq**2
    elif k == 2:
        v_l = spectral_derivative(v, length)
        v_2l = spectral_derivative(v, length, 2)
        vlsq = np.einsum("mi,mi->m", v_l, v_l)
        vvl = np.einsum("mi,mi->m", v, v_l)
        dens = (
            0.5 * np.einsum("mi,mi->m", v_2l, v_2l)
            - 0.75 * vsq * vlsq
            - 0.5 * vvl**2
            + 0.0625 * vsq**3
        )
    else:
        raise ValueError(f"unsupported hierarchy index k = {k}")
    return float(dens.sum() * dl)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

@dataclass
class CurveState:
    """Periodic samples of the Hamiltonian variables for both channels."""

    length: float
    hv: np.ndarray                 # (M, n-1)
    vv: np.ndarray                 # (M, m-1)
    scalar_h: float = 0.0          # ->R, constant along a run
    scalar_v: float = 0.0          # <-S

    def __post_init__(self):
        self.hv = np.atleast_2d(np.asarray(self.hv, dtype=float).T).T
        self.vv = np.atleast_2d(np.asarray(self.vv, dtype=float).T).T
        if self.hv.shape[0] < 16 or self.vv.shape[0] < 16:
            raise ValueError("grid must have at least 16 nodes")
        if not (np.all(np.isfinite(self.hv)) and np.all(np.isfinite(self.vv))):
            raise ValueError("curve state samples must be finite")

    def channel(self, which):
        if which == "h":
            return self.hv, self.scalar_h
        if which == "v":
            return self.vv, self.scalar_v
        raise ValueError("channel must be 'h' or 'v'")


@dataclass
class SolitonSnapshot:
    tau: float
    v: np.ndarray
    hamiltonians: dict


@dataclass
class SolitonTrajectory:
    length: float
    k: int
    scalar_curv: float
    snapshots: list = field(default_factory=list)

    def conservation_drift(self):
        """Max relative drift of each recorded Hamiltonian."""
        out = {}
        for key in self.snapshots[0].hamiltonians:
            vals = np.array([s.hamiltonians[key] for s in self.snapshots])
            scale = max(abs(vals[0]), 1e-30)
            out[key] = float(np.max(np.abs(vals - vals[0])) / scale)
        return out


def _linear_symbol(k_index, scalar_curv, wavenumbers):
    ik = 1j * wavenumbers
    if k_index == 0:
        return ik
    if k_index == 1:
        return ik**3 - scalar_curv * ik
    if k_index == 2:
        return ik**5 - scalar_curv * ik**3
    raise ValueError(f"unsupported hierarchy index k = {k_index}")


def evolve(v0, k, tau_end, dtau, length=2.0 * np.pi, scalar_curv=0.0,
           record_every=0):
    """Integrate a hierarchy flow with integrating-factor RK4.

    The stiff linear dispersion (and the curvature convection) is solved
    exactly in Fourier space; RK4 acts on the remaining nonlinearity, so
    the stated step sizes are accuracy-, not stability-limited.  Raises
    ``BlowUpError`` when any node becomes non-finite.
    """
    v = np.atleast_2d(np.asarray(v0, dtype=float).T).T
    m, d = v.shape
    kx = _wavenumbers(m, length)
    lin = _linear_symbol(k, scalar_curv, kx)[:, None]
    # 2/3-rule mask keeps the cubic terms alias-free
    dealias = (np.arange(kx.size) <= (2 * (kx.size - 1)) // 3)[:, None]

    def nonlinear(vhat):
        vv = np.fft.irfft(vhat, n=m, axis=0)
        full = np.fft.rfft(hierarchy_flow(vv, k, scalar_curv, length), axis=0)
        return dealias * (full - lin * vhat)

    steps = int(round(tau_end / dtau))
    e_half = np.exp(lin * dtau / 2.0)
    e_full = e_half**2
    traj = SolitonTrajectory(length, k, scalar_curv)

    def record(tau, vhat):
        vv = np.fft.irfft(vhat, n=m, axis=0)
        if not np.all(np.isfinite(vv)):
            raise BlowUpError(tau)
        traj.snapshots.append(SolitonSnapshot(
            tau, vv.copy(),
            {f"H{j}": hamiltonian(vv, j, length) for j in range(3)},
        ))

    vhat = np.fft.rfft(v, axis=0)
    record(0.0, vhat)
    for step in range(steps):
        # RK4 in the integrating-factor variable z = exp(-L (t - t_n)) u
        k1 = nonlinear(vhat)
        z2 = vhat + 0.5 * dtau * k1
        k2 = nonlinear(e_half * z2) / e_half
        z3 = vhat + 0.5 * dtau * k2
        k3 = nonlinear(e_half * z3) / e_half
        z4 = vhat + dtau * k3
        k4 = nonlinear(e_full * z4) / e_full
        znew = vhat + dtau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        vhat = e_full * znew
        tau = (step + 1) * dtau
        if record_every and (step + 1) % record_every == 0:
            record(tau, vhat)
    if not record_every or steps % record_every != 0:
        record(steps * dtau, vhat)
    return traj


# ---------------------------------------------------------------------------
# -1 flow (vector sine-Gordon)
# ---------------------------------------------------------------------------

@dataclass
class SGState:
    """Frame variables of the -1 flow on the periodic grid.

    ``e_par``/``e_perp`` satisfy the kernel conditions D_l e_par =
    -v . e_perp, D_l e_perp = e_par v and unit pointwise norm; ``v`` is
    the Hamiltonian variable driving them.
    """

    length: float
    e_par: np.ndarray              # (M,)
    e_perp: np.ndarray             # (M, d)
    v: np.ndarray                  # (M, d)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_perp_profile(cls, e_perp, length):
        e_perp = np.atleast_2d(np.asarray(e_perp, dtype=float).T).T
        sq = np.einsum("mi,mi->m", e_perp, e_perp)
        if np.max(sq) >= 1.0:
            raise HyperbolicityError("|e_perp| must stay below 1")
        e_par = np.sqrt(1.0 - sq)
        v = spectral_derivative(e_perp, length) / e_par[:, None]
        return cls(length, e_par, e_perp, v)

    def norm_deviation(self):
        sq = self.e_par**2 + np.einsum("mi,mi->m", self.e_perp, self.e_perp)
        return float(np.max(np.abs(sq - 1.0)))

    def norm_gradient_max(self):
        """max |d_l (e_par^2 + |e_perp|^2)|: the pointwise conservation law."""
        sq = self.e_par**2 + np.einsum("mi,mi->m", self.e_perp, self.e_perp)
        return float(np.max(np.abs(spectral_derivative(sq, self.length))))


def _skew_exp_apply(a_vec, e_par, e_perp):
    """Apply exp([[0, -a^T], [a, 0]]) to the stacked frame vector.

    Closed form from A^3 = -|a|^2 A; vectorized over grid nodes.
    """
    norm = np.sqrt(np.einsum("mi,mi->m", a_vec, a_vec))
    small = norm < 1e-14
    s = np.where(small, 1.0, np.sin(norm) / np.where(small, 1.0, norm))
    c = np.where(small, 0.5, (1.0 - np.cos(norm)) / np.where(small, 1.0, norm**2))
    a_dot_perp = np.einsum("mi,mi->m", a_vec, e_perp)
    new_par = e_par - s * a_dot_perp - c * norm**2 * e_par
    new_perp = (
        e_perp
        + s * e_par[:, None] * a_vec
        - c * a_dot_perp[:, None] * a_vec
    )
    return new_par, new_perp


def _transfer_chain(v, length):
    """Per-node orthogonal solution operators of the frame system
    D_l E = [[0, -v^T], [v, 0]] E, by a 4th-order commutator-free Magnus
    scheme with spectrally interpolated Gauss nodes.

    Returns the cumulative transfer matrices T[i] = E(l_i) E(0)^{-1}
    for i = 0..m (T[m] is the monodromy around the circle).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    m, d = v.shape
    h = length / m
    rt3 = np.sqrt(3.0) / 6.0
    vhat = np.fft.rfft(v, axis=0)
    k = _wavenumbers(m, length)[:, None]
    v_g1 = np.fft.irfft(vhat * np.exp(1j * k * (0.5 - rt3) * h), n=m, axis=0)
    v_g2 = np.fft.irfft(vhat * np.exp(1j * k * (0.5 + rt3) * h), n=m, axis=0)
    w_plus = h * (0.25 + rt3)
    w_minus = h * (0.25 - rt3)

    cols = 1 + d
    chain = np.empty((m + 1, cols, cols))
    cur = np.eye(cols)
    chain[0] = cur
    for i in range(m):
        a1 = w_plus * v_g1[i] + w_minus * v_g2[i]
        a2 = w_minus * v_g1[i] + w_plus * v_g2[i]
        par, perp = cur[0, :], cur[1:, :].T          # columns as stacked vectors
        par, perp = _skew_exp_apply(np.broadcast_to(a1, (cols, d)), par, perp)
        par, perp = _skew_exp_apply(np.broadcast_to(a2, (cols, d)), par, perp)
        cur = np.vstack([par, perp.T])
        chain[i + 1] = cur
    return chain


def _periodic_base(monodromy, prev_base, tol=1e-6):
    """Base frame vector compatible with periodicity.

    Projects the previous base onto the (near-)fixed subspace of the
    monodromy; when the monodromy has no fixed direction the nearest
    invariant direction is used and the defect shows up in diagnostics.
    """
    q = monodromy
    dim = q.shape[0]
    u_, s, vt = np.linalg.svd(q - np.eye(dim))
    small = s < max(tol, 1e-12)
    if np.any(small):
        basis = vt[small].T                      # spans the fixed subspace
        coef = basis.T @ prev_base
        cand = basis @ coef
        if np.linalg.norm(cand) > 1e-8:
            return cand / np.linalg.norm(cand)
    # fall back: most nearly fixed direction of the orthogonal monodromy
    vals, vecs = np.linalg.eigh(0.5 * (q + q.T))
    w = vecs[:, -1]
    if w @ prev_base < 0:
        w = -w
    return w


def _reconstruct_frame(v, length, prev_base):
    """Periodic frame fields for the kernel conditions
    D_l e_par = -v . e_perp, D_l e_perp = e_par v.

    The base value at l = 0 is the projection of ``prev_base`` on the
    monodromy's fixed subspace, which keeps the frame single-valued
    around the circle whenever the flow admits a periodic frame.
    Returns (e_par, e_perp, periodicity defect).
    """
    chain = _transfer_chain(v, length)
    m = chain.shape[0] - 1
    base = _periodic_base(chain[m], prev_base)
    frames = chain[:m] @ base
    defect = float(np.linalg.norm(chain[m] @ base - base))
    return frames[:, 0], frames[:, 1:], defect


def sg_minus1_flow(state: SGState, dtau, scalar_curv=1.0):
    """One -1 flow step: v_tau = -R e_perp with frame reconstruction.

    Operator splitting per the kernel conditions: RK4 updates v with the
    perpendicular frame regenerated from v at every stage; the frame
    fields are then rebuilt (orthogonal transfer chain, so the pointwise
    norm is conserved to machine precision) and the normalization
    diagnostics recorded.
    """
    v = state.v
    if np.max(np.abs(scalar_curv) * np.linalg.norm(state.e_perp, axis=1)) >= 1.0:
        raise HyperbolicityError("|v_tau| = |R| |e_perp| reached 1")
    prev_base = np.concatenate([[state.e_par[0]], state.e_perp[0]])
    length = state.length

    def rhs(vf):
        _, perp, _ = _reconstruct_frame(vf, length, prev_base)
        return -scalar_curv * perp

    k1 = rhs(v)
    k2 = rhs(v + 0.5 * dtau * k1)
    k3 = rhs(v + 0.5 * dtau * k2)
    k4 = rhs(v + dtau * k3)
    vnew = v + dtau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(vnew)):
        raise BlowUpError(dtau)
    e_par, e_perp, defect = _reconstruct_frame(vnew, length, prev_base)
    new = SGState(length, e_par, e_perp, vnew)
    new.diagnostics = {
        "norm_deviation": new.norm_deviation(),
        "periodicity_defect": defect,
        "parallel_mean_removed": float(np.mean(np.einsum("mi,mi->m", vnew, e_perp))),
    }
    return new
