"""Strength-parameter algebra, the twisted elliptic operator, and norms.

The operator Delta + sigma/d^2 + X.grad + V is never discretized with a raw
sigma/d^2 diagonal: near the boundary that form loses coercivity on graded
nodes.  Instead it is assembled in the flux ("twisted") form

    y^[-k] div( y^[2k] grad( y^[-k] u ) ) + X.grad u + V_y u,

k = kappa(sigma), with the gauge w = y^[-k] u carried internally.  In the
w-variable the generator has bounded coefficients up to the boundary and the
twisted-Dirichlet datum (the weighted boundary trace of u) appears as a plain
Dirichlet value for w, which is what makes inhomogeneous boundary solves and
the exact-transpose adjoint straightforward.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameter algebra


def kappa_of_sigma(sigma):
    """Characteristic exponent: the root of k(1-k) = sigma with k < 1/2."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s >= 0.25):
        raise OperatorError("sigma must be < 1/4")
    k = 0.5 * (1.0 - np.sqrt(1.0 - 4.0 * s))
    return float(k) if np.isscalar(sigma) else k


def default_p(kappa):
    """Weight exponent p = kappa + 1/2; saturates p^2 - 2p + sigma = -3/4."""
    k = float(kappa)
    if not -0.5 < k < 0.0:
        raise OperatorError("kappa must lie in (-1/2, 0)")
    p = k + 0.5
    sigma = k * (1.0 - k)
    if abs(p * p - 2.0 * p + sigma + 0.75) > 1e-12:
        raise OperatorError("saturation identity violated (roundoff?)")
    return p


@dataclass(frozen=True)
class StrengthParams:
    """Potential strength sigma with its derived exponents and weight offsets.

    sigma in (-3/4, 0); kappa solves kappa(1-kappa) = sigma with kappa < 1/2;
    p in (0, 1/2) must satisfy p^2 - 2p + sigma >= -3/4 (equality at the
    default p = kappa + 1/2).  beta1/beta2 are the additive offsets of the two
    Carleman weights; beta2 is fixed later by the gluing rule when unset.
    """

    sigma: float
    kappa: float
    p: float
    beta1: float = 1.0
    beta2: Optional[float] = None

    def __post_init__(self):
        if not -0.75 < self.sigma < 0.0:
            raise OperatorError("sigma must lie in (-3/4, 0)")
        if abs(self.kappa * (1.0 - self.kappa) - self.sigma) > 1e-12 \
                or self.kappa >= 0.5:
            raise OperatorError("kappa does not match sigma")
        if not 0.0 < self.p < 0.5:
            raise OperatorError("p must lie in (0, 1/2)")
        if self.p**2 - 2.0 * self.p + self.sigma < -0.75 - 1e-12:
            raise OperatorError("p violates p^2 - 2p + sigma >= -3/4")
        if self.beta1 <= 0.0 or (self.beta2 is not None and self.beta2 <= 0.0):
            raise OperatorError("weight offsets must be positive")

    @classmethod
    def from_sigma(cls, sigma, p=None, beta1=1.0):
        kappa = kappa_of_sigma(sigma)
        if p is None:
            p = default_p(kappa)
        return cls(sigma=float(sigma), kappa=kappa, p=float(p), beta1=beta1)


# ---------------------------------------------------------------------------
# lower-order coefficients


@dataclass
class LowerOrder:
    """First/zero-order coefficients: a C1 vector field regular at the
    boundary and a scalar with d_Gamma * scalar continuous up to it.

    ``vector`` maps (N, dim) points to (N, dim) Cartesian values; ``scalar``
    maps points to (N,).  Either may be None (zero).
    """

    vector: Optional[Callable] = None
    scalar: Optional[Callable] = None
    div_vector: Optional[Callable] = None

    @classmethod
    def zero(cls):
        return cls()

    @property
    def is_zero(self):
        return self.vector is None and self.scalar is None

    def vector_at(self, pts):
        if self.vector is None:
            return np.zeros_like(pts)
        return np.asarray(self.vector(pts), dtype=float)

    def scalar_at(self, pts):
        if self.scalar is None:
            return np.zeros(len(pts))
        return np.asarray(self.scalar(pts), dtype=float)

    def divergence_at(self, pts, h=1e-6):
        if self.vector is None:
            return np.zeros(len(pts))
        if self.div_vector is not None:
            return np.asarray(self.div_vector(pts), dtype=float)
        out = np.zeros(len(pts))
        for j in range(pts.shape[1]):
            e = np.zeros(pts.shape[1]); e[j] = h
            out += (self.vector(pts + e)[:, j] - self.vector(pts - e)[:, j]) / (2 * h)
        return out

    def dual(self):
        """Coefficients of the adjoint equation: (-vector, scalar - div vector)."""
        if self.is_zero:
            return LowerOrder.zero()
        vec = None if self.vector is None else (lambda p: -self.vector(p))
        me = self

        def scal(p):
            out = -me.divergence_at(p)
            if me.scalar is not None:
                out = out + np.asarray(me.scalar(p), dtype=float)
            return out

        dvec = None if self.div_vector is None else (lambda p: -self.div_vector(p))
        return LowerOrder(vector=vec, scalar=scal, div_vector=dvec)


# ---------------------------------------------------------------------------
# geometry-derived nodal fields


def bdf_calculus(bdf, mesh):
    """(y, |grad y|^2, lap y) at nodes, exact on the boundary collar."""
    y = bdf.values
    if y is None or len(y) != mesh.n_nodes:
        y = bdf.at(mesh.points)
    grad = mesh.grad(y)
    gsq = np.sum(grad * grad, axis=1)
    lap = mesh.scalar_laplacian(y)
    collar = mesh.d < bdf.domain.d0
    gsq[collar] = 1.0
    if mesh.kind == "interval":
        lap[collar] = 0.0
    else:
        r = np.linalg.norm(mesh.points[collar], axis=1)
        lap[collar] = -1.0 / r
    return y, gsq, lap


def modified_potential(V, bdf, params, mesh):
    """Zero-order coefficient of the twisted form of Delta + sigma/d^2 + V.

    V_y = V + kappa lap(y)/y - sigma (|grad y|^2 y^-2 - d^-2); the last
    bracket vanishes identically on the collar {d < d0} where y = d and
    |grad y| = 1, and is evaluated only at interior nodes.
    """
    kap, sig = params.kappa, params.sigma
    y, gsq, lap = bdf_calculus(bdf, mesh)
    idx = mesh.interior_idx
    out = np.zeros(mesh.n_nodes)
    if callable(V):
        out[idx] = V(mesh.points[idx])
    elif V is not None:
        out[idx] = np.asarray(V)[idx] if np.ndim(V) else float(V)
    collar = mesh.d[idx] < bdf.domain.d0
    yi, di = y[idx], mesh.d[idx]
    out[idx] += kap * lap[idx] / yi
    bracket = np.where(collar, 0.0, gsq[idx] / yi**2 - 1.0 / di**2)
    out[idx] -= sig * bracket
    return out


# ---------------------------------------------------------------------------
# twisted operator assembly


@dataclass
class TwistedOperator:
    """Discrete generator of the singular heat flow, in the w-gauge.

    A_ii / A_ib act on w = y^[-kappa] u (interior / boundary columns); the
    operator on u is y^[kappa] A (y^[-kappa] u).  ``weight`` is the w-space
    inner-product weight vol * y^[2 kappa], which equals the plain L2 weight
    for u.  D_ii/D_ib is the diffusion block alone (symmetric, negative
    semidefinite in the weighted product).
    """

    mesh: object
    bdf: object
    params: StrengthParams
    lower: LowerOrder
    y: np.ndarray
    A_ii: sp.csr_matrix
    A_ib: sp.csr_matrix
    D_ii: sp.csr_matrix
    D_ib: sp.csr_matrix
    K_tw_ii: sp.csr_matrix
    K_tw_ib: sp.csr_matrix
    V_y: np.ndarray
    weight: np.ndarray
    ykap: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    # gauge maps -----------------------------------------------------------

    def to_w(self, u):
        """Interior w-values of a nodal u-field (boundary handled separately)."""
        return np.asarray(u)[..., self.mesh.interior_idx] / self.ykap

    def to_u(self, w_int, w_bdy=None):
        u = np.zeros(np.shape(w_int)[:-1] + (self.mesh.n_nodes,))
        u[..., self.mesh.interior_idx] = w_int * self.ykap
        return u

    # applications ----------------------------------------------------------

    def apply_w(self, w_int, w_bdy=None):
        out = self.A_ii @ w_int
        if w_bdy is not None:
            out = out + self.A_ib @ w_bdy
        return out

    def apply_u(self, u):
        """Generator applied to a homogeneous-boundary nodal u-field."""
        w = self.to_w(u)
        return self.to_u(self.apply_w(w))

    def twisted_energy(self, u):
        """Integral of |y^k grad(y^-k u)|^2 for a homogeneous-boundary field."""
        w = self.to_w(u)
        return float(w @ (self.K_tw_ii @ w))

    def second_order_norm(self, u):
        """L2 norm of y^-k div(y^2k grad(y^-k u))."""
        w = self.to_w(u)
        dw = self.D_ii @ w
        return float(np.sqrt(np.sum(self.weight * dw * dw)))

    def stepper(self, dt, theta=1.0):
        """Cached LU factorization of (I - theta dt A) on interior nodes."""
        key = ("step", float(dt), float(theta))
        if key not in self._cache:
            n = self.A_ii.shape[0]
            M = (sp.identity(n, format="csr") - theta * dt * self.A_ii).tocsc()
            self._cache[key] = spla.splu(M)
        return self._cache[key]


def _face_coefficients(mesh, y, two_kappa):
    """Flux coefficients y_face^(2 kappa): geometric mean inside, exact
    power-law transmissibility on boundary faces."""
    yi, yj = y[mesh.face_i], y[mesh.face_j]
    bface = mesh.face_is_boundary
    coef = np.empty(len(yi))
    inner = ~bface
    coef[inner] = np.exp(0.5 * two_kappa *
                         (np.log(yi[inner]) + np.log(yj[inner])))
    h = mesh.face_h[bface]
    coef[bface] = (1.0 - two_kappa) * h**two_kappa
    return coef


def _upwind_advection(mesh, comp, centered=False):
    """Sparse first-order upwind (or centered) matrix for comp . grad(w).

    comp holds the frame components of the advecting field at interior nodes.
    Returns interior and boundary column blocks.
    """
    ni, n = mesh.n_interior, mesh.n_nodes
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r); cols.append(c); vals.append(v)

    if mesh.kind == "interval":
        axes = [_interval_axis_maps(mesh)]
    else:
        axes = [_disk_radial_axis(mesh), _disk_theta_axis(mesh)]
    for ax, (im, ip, hm, hp) in enumerate(axes):
        c = comp[:, ax]
        for k in range(ni):
            ck = c[k]
            if ck == 0.0:
                continue
            if centered:
                a, b = hm[k], hp[k]
                add(k, im[k], -ck * b / (a * (a + b)))
                add(k, k, ck * (b - a) / (a * b))
                add(k, ip[k], ck * a / (b * (a + b)))
            elif ck > 0.0:
                add(k, ip[k], ck / hp[k])
                add(k, k, -ck / hp[k])
            else:
                add(k, k, ck / hm[k])
                add(k, im[k], -ck / hm[k])
    U = sp.coo_matrix((vals, (rows, cols)), shape=(ni, n)).tocsr()
    return U[:, :ni], U[:, ni:]


def _interval_axis_maps(mesh):
    order = mesh._x_order
    pos = {int(j): k for k, j in enumerate(order)}
    ni = mesh.n_interior
    im = np.zeros(ni, dtype=int); ip = np.zeros(ni, dtype=int)
    hm = np.zeros(ni); hp = np.zeros(ni)
    x = mesh.points[:, 0]
    for k in range(ni):
        s = pos[k]
        im[k] = order[s - 1]; ip[k] = order[s + 1]
        hm[k] = x[k] - x[im[k]]; hp[k] = x[ip[k]] - x[k]
    return im, ip, hm, hp


def _disk_radial_axis(mesh):
    im, ip, cm, cp, _ = mesh._radial_maps()
    r_node = np.repeat(mesh.r, mesh.n_t)
    return im, ip, r_node - cm, cp - r_node


def _disk_theta_axis(mesh):
    ni = mesh.n_interior
    n_t = mesh.n_t
    k = np.arange(ni)
    ring = k // n_t
    j = k % n_t
    im = ring * n_t + (j - 1) % n_t
    ip = ring * n_t + (j + 1) % n_t
    h = np.repeat(mesh.r, n_t) * mesh.dtheta
    return im, ip, h, h


def assemble(mesh, bdf, params, lower=None, advection="upwind", check=True):
    """Assemble the twisted generator on the mesh.

    The diffusion block uses face fluxes y_face^(2 kappa) (w_R - w_L)/h with
    geometric-mean face values and the exact power transmissibility on
    boundary faces, scaled back by the dual-cell volumes; advection and the
    modified potential are added in the w-gauge, where both stay bounded.
    """
    if check and not getattr(bdf, "validated", False):
        raise OperatorError("boundary defining function has not passed "
                            "validation (run validate_bdf / build_bdf_pair)")
    if lower is None:
        lower = LowerOrder.zero()
    kap = params.kappa
    y = bdf.values
    if y is None or len(y) != mesh.n_nodes:
        y = bdf.at(mesh.points)
        y = np.asarray(y)
    y = y.copy()
    y[mesh.boundary_idx] = 0.0
    idx = mesh.interior_idx
    yi = y[idx]

    coef = _face_coefficients(mesh, y, 2.0 * kap)
    K_ii, K_ib = mesh.stiffness(face_coef=coef)
    scale = 1.0 / (mesh.vol[idx] * yi ** (2.0 * kap))
    S = sp.diags(scale)
    D_ii = (-(S @ K_ii)).tocsr()
    D_ib = (-(S @ K_ib)).tocsr()

    # potential: V_y plus the w-gauge advection correction kappa (X.grad y)/y
    V_field = modified_potential(lower.scalar, bdf, params, mesh)
    pts_i = mesh.points[idx]
    if lower.vector is not None:
        Xc = lower.vector_at(pts_i)
        comp = mesh_frame_components(mesh, Xc)
        gy = mesh.grad(y)[idx]
        V_field[idx] += kap * np.sum(comp * gy, axis=1) / yi
        U_ii, U_ib = _upwind_advection(mesh, comp,
                                       centered=(advection == "centered"))
    else:
        U_ii = sp.csr_matrix((len(idx), len(idx)))
        U_ib = sp.csr_matrix((len(idx), mesh.n_boundary))

    A_ii = (D_ii + U_ii + sp.diags(V_field[idx])).tocsr()
    A_ib = (D_ib + U_ib).tocsr()
    return TwistedOperator(
        mesh=mesh, bdf=bdf, params=params, lower=lower, y=y,
        A_ii=A_ii, A_ib=A_ib, D_ii=D_ii, D_ib=D_ib,
        K_tw_ii=K_ii, K_tw_ib=K_ib,
        V_y=V_field, weight=mesh.vol[idx] * yi ** (2.0 * kap),
        ykap=yi**kap)


def mesh_frame_components(mesh, cartesian):
    """Cartesian vectors at interior nodes -> local frame components."""
    if mesh.kind == "interval":
        return cartesian
    pts = mesh.points[mesh.interior_idx]
    th = np.arctan2(pts[:, 1], pts[:, 0])
    er = np.column_stack([np.cos(th), np.sin(th)])
    et = np.column_stack([-np.sin(th), np.cos(th)])
    return np.column_stack([np.sum(cartesian * er, axis=1),
                            np.sum(cartesian * et, axis=1)])


def assemble_laplacian(mesh):
    """Plain (untwisted) flux-form Dirichlet Laplacian: interior/boundary."""
    K_ii, K_ib = mesh.stiffness()
    S = sp.diags(1.0 / mesh.vol[mesh.interior_idx])
    return (-(S @ K_ii)).tocsr(), (-(S @ K_ib)).tocsr()


# ---------------------------------------------------------------------------
# norms


def l2_norm(mesh, u):
    return mesh.l2(u)

def l2_inner(mesh, u, v):
    return float(mesh.integrate(np.asarray(u) * np.asarray(v)))


def h1_seminorm(mesh, u):
    return float(np.sqrt(max(mesh.dirichlet_energy(u), 0.0)))


def h1_norm(mesh, u):
    return float(np.sqrt(mesh.dirichlet_energy(u) + mesh.l2(u) ** 2))


def _stiff_lu(mesh):
    if "stiff_lu" not in mesh._stiff_cache:
        K_ii, _ = mesh.stiffness()
        mesh._stiff_cache["stiff_lu"] = spla.splu(K_ii.tocsc())
    return mesh._stiff_cache["stiff_lu"]


def hminus1_norm(mesh, v):
    """Discrete dual norm: sqrt(<v, (-lap)^-1 v>) via one Dirichlet solve."""
    rhs = (mesh.vol * np.asarray(v))[mesh.interior_idx]
    w = _stiff_lu(mesh).solve(rhs)
    return float(np.sqrt(max(rhs @ w, 0.0)))


# ---------------------------------------------------------------------------
# spectral checks


def hardy_rayleigh_min(mesh):
    """Smallest Rayleigh quotient of grad-energy over the d^-2-weighted mass.

    The continuum infimum over fields vanishing at the boundary is 1/4 on a
    convex domain; the discrete value approaches it from the graded meshes.
    """
    K_ii, _ = mesh.stiffness()
    idx = mesh.interior_idx
    d = mesh.d[idx]
    if np.any(d <= 0):
        raise OperatorError("degenerate mesh: interior node on the boundary")
    M = sp.diags(mesh.vol[idx] / d**2).tocsc()
    vals = spla.eigsh(K_ii.tocsc(), k=1, M=M, sigma=0.0, which="LM",
                      return_eigenvectors=False)
    return float(vals[0])


def estimate_semigroup_shift(op, coarse_n=None):
    """Empirical gamma: largest eigenvalue of the symmetrized generator.

    Estimated on a coarse surrogate when the operator is large; the resolvent
    and contraction bounds use max(0, gamma).
    """
    target = op
    if coarse_n is None:
        coarse_n = 24
    if op.mesh.n_interior > 1500:
        from .mesh import Mesh
        cm = Mesh(op.mesh.domain, coarse_n, op.mesh.gamma,
                  n_theta=(16 if op.mesh.kind == "disk" else None))
        cbdf = op.bdf.resample(cm)
        cbdf.validated = True
        target = assemble(cm, cbdf, op.params, op.lower, check=False)
    W = sp.diags(target.weight)
    S = W @ target.A_ii
    S = 0.5 * (S + S.T)
    val = spla.eigsh(S.tocsc(), k=1, M=W.tocsc(), which="LA",
                     return_eigenvectors=False)
    return max(0.0, float(val[0]))


def resolvent_check(op, lam, f, tol=1e-8):
    """Solve (lam - A) phi = f; return |phi| / |f| and check the bound.

    For lam above the estimated shift gamma the ratio must not exceed
    1/(lam - gamma) beyond tolerance.
    """
    gamma = op._cache.get("gamma")
    if gamma is None:
        gamma = estimate_semigroup_shift(op)
        op._cache["gamma"] = gamma
    if lam <= gamma:
        raise OperatorError(f"lam must exceed the shift estimate {gamma:.3e}")
    ni = op.A_ii.shape[0]
    M = (lam * sp.identity(ni, format="csr") - op.A_ii).tocsc()
    fw = op.to_w(f)
    w = spla.splu(M).solve(fw)
    nf = np.sqrt(np.sum(op.weight * fw * fw))
    if nf == 0.0:
        return 0.0
    ratio = float(np.sqrt(np.sum(op.weight * w * w)) / nf)
    if ratio > 1.0 / (lam - gamma) + tol:
        raise OperatorError(
            f"resolvent ratio {ratio:.3e} exceeds 1/(lam-gamma) = "
            f"{1.0/(lam-gamma):.3e}")
    return ratio
