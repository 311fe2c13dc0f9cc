"""Convex domains, boundary distance, and boundary-defining-function pairs.

The solvers and weighted estimates in this package need smooth positive
substitutes for the boundary distance: functions that equal d_Gamma in a
collar of the boundary, stay concave across the domain, and have a single
interior maximum.  Two such functions with separated maxima (a "pair") let
the two-weight estimates cover each other's degenerate region near the
respective maximum.

Everything here is evaluable at arbitrary points (not just mesh nodes):
the mollification is a fixed discrete convolution with a compactly
supported polynomial bump, so constructions are deterministic and
reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class GeometryError(ValueError):
    """Invalid domain parameters or points outside the domain closure."""


class BdfConstructionError(RuntimeError):
    """Boundary-defining-function construction failed validation.

    Carries the offending ValidationReport in ``report``.
    """

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


# ---------------------------------------------------------------------------
# small smooth building blocks


def smoothstep(t):
    """C^4 ramp: 0 for t<=0, 1 for t>=1, first four derivatives vanish at ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))))


def _as_points(pts, dim):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        if dim == 1:
            pts = pts[:, None]
        else:
            pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise GeometryError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


def bump_quadrature(dim, eps, k=9):
    """Offsets and weights of the discrete mollifier of width eps.

    Polynomial bump (1-|s/eps|^2)^3 sampled on a symmetric k^dim grid and
    normalized so the weights sum to one exactly.  Symmetry makes the
    convolution exact on affine functions.
    """
    s = np.linspace(-eps, eps, k)
    if dim == 1:
        offs = s[:, None]
    else:
        gx, gy = np.meshgrid(s, s, indexing="ij")
        offs = np.column_stack([gx.ravel(), gy.ravel()])
    r2 = np.sum((offs / eps) ** 2, axis=1)
    w = np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0)
    keep = w > 0.0
    offs, w = offs[keep], w[keep]
    return offs, w / w.sum()


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Bounded convex domain with a connected boundary.

    kind is one of "interval", "disk", "oval".  d0 is the collar width within
    which the boundary distance is smooth and the boundary-defining functions
    coincide with it; invariants require d0 small relative to the domain.
    """

    kind: str
    d0: float
    a: float = 0.0
    b: float = 1.0
    radius: float = 1.0
    level_fn: Optional[Callable] = None
    level_grad: Optional[Callable] = None

    @property
    def dim(self):
        return 1 if self.kind == "interval" else 2

    @property
    def diameter(self):
        if self.kind == "interval":
            return self.b - self.a
        if self.kind == "disk":
            return 2.0 * self.radius
        return 2.0 * self.radius  # oval: radius holds a size estimate

    def dist(self, pts):
        """Distance to the boundary, vectorized; exact for interval/disk."""
        pts = _as_points(pts, self.dim)
        if self.kind == "interval":
            x = pts[:, 0]
            return np.minimum(x - self.a, self.b - x)
        if self.kind == "disk":
            return self.radius - np.hypot(pts[:, 0], pts[:, 1])
        return self._oval_dist(pts)

    def _oval_dist(self, pts):
        # Newton projection along the level-set gradient; adequate for smooth
        # convex ovals with moderate eccentricity.
        p = pts.copy()
        for _ in range(40):
            val = self.level_fn(p)
            g = self.level_grad(p)
            g2 = np.maximum(np.sum(g * g, axis=1), 1e-300)
            p = p - (val / g2)[:, None] * g
            if np.max(np.abs(self.level_fn(p))) < 1e-13:
                break
        d = np.linalg.norm(pts - p, axis=1)
        inside = self.level_fn(pts) <= 0.0
        return np.where(inside, d, -d)

    def contains(self, pts, tol=0.0):
        return self.dist(pts) >= -tol


def make_domain(kind, params, d0):
    """Build a Domain, validating parameters and the collar width d0."""
    if d0 <= 0.0:
        raise GeometryError("d0 must be positive")
    if kind == "interval":
        a, b = float(params[0]), float(params[1])
        if not b > a:
            raise GeometryError("interval endpoints must satisfy a < b")
        if not d0 < 0.25 * (b - a):
            raise GeometryError("d0 too large: need d0 < (b - a)/4")
        return Domain(kind="interval", d0=float(d0), a=a, b=b)
    if kind == "disk":
        if isinstance(params, dict):
            radius = float(params["radius"])
        elif np.isscalar(params):
            radius = float(params)
        else:
            radius = float(params[0])
        if radius <= 0.0:
            raise GeometryError("disk radius must be positive")
        if not d0 < 0.25 * radius:
            raise GeometryError("d0 too large: need d0 < R/4")
        return Domain(kind="disk", d0=float(d0), radius=radius)
    if kind == "oval":
        level_fn = params["level_fn"]
        level_grad = params.get("level_grad")
        if level_grad is None:
            def level_grad(p, _f=level_fn, _h=1e-6):
                g = np.empty_like(p)
                for j in range(p.shape[1]):
                    e = np.zeros(p.shape[1]); e[j] = _h
                    g[:, j] = (_f(p + e) - _f(p - e)) / (2 * _h)
                return g
        size = float(params.get("size", 1.0))
        return Domain(kind="oval", d0=float(d0), radius=size,
                      level_fn=level_fn, level_grad=level_grad)
    raise GeometryError(f"unknown domain kind {kind!r}")


def distance_to_boundary(domain, point):
    """d_Gamma at one or many points; raises for points outside the closure."""
    arr = np.asarray(point, dtype=float)
    single = np.isscalar(point) or (arr.ndim == 0) or (
        arr.ndim == 1 and domain.dim == 2 and arr.size == 2)
    pts = _as_points(point, domain.dim)
    d = domain.dist(pts)
    if np.any(d < -1e-12 * domain.diameter):
        raise GeometryError("point outside the domain closure")
    d = np.maximum(d, 0.0)
    return float(d[0]) if (single or d.size == 1) else d


# ---------------------------------------------------------------------------
# boundary defining functions


@dataclass
class BoundaryDefiningFunction:
    """Positive C^4-like extension of the boundary distance.

    Equals d_Gamma on {d_Gamma < d0} exactly, concave with margin eps on
    {d_Gamma >= 2 d0}, concavity deficit at most eps_prime in between, and a
    unique interior critical point (its maximum).

    The construction blends the boundary distance with a mollification of the
    plateau-truncated distance min(d_Gamma, plateau) and subtracts the strict
    concavity term eps |x - center|^2; on the plateau the function is exactly
    (plateau - eps |x - center|^2), so the maximum sits at ``center``.
    ``values`` caches node samples of the construction mesh; ``at`` evaluates
    anywhere.
    """

    domain: Domain
    eps: float                      # certified interior concavity margin
    eps_prime: float                # certified mid-region concavity deficit
    moll_eps: float                 # mollification width and |x|^2 coefficient
    plateau: float                  # truncation level of the core
    center: np.ndarray              # center of the quadratic concavity term
    critical_point: np.ndarray = None
    critical_value: float = 0.0
    values: np.ndarray = None       # samples on the construction mesh
    near_boundary_rule: bool = True
    _quad: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self._quad is None:
            self._quad = bump_quadrature(self.domain.dim, self.moll_eps)
        if self.critical_point is None:
            self.critical_point = np.asarray(self.center, float)

    # -- evaluation --------------------------------------------------------

    def mollified_core(self, pts):
        """Discrete mollification of min(d_Gamma, plateau); needs d > width."""
        offs, w = self._quad
        shifted = pts[:, None, :] - offs[None, :, :]
        dvals = self.domain.dist(shifted.reshape(-1, self.domain.dim))
        g = np.minimum(dvals, self.plateau)
        return g.reshape(pts.shape[0], -1) @ w

    def mollified_distance(self, pts):
        """Discrete mollification of d_Gamma itself (no truncation)."""
        offs, w = self._quad
        shifted = pts[:, None, :] - offs[None, :, :]
        dvals = self.domain.dist(shifted.reshape(-1, self.domain.dim))
        return dvals.reshape(pts.shape[0], -1) @ w

    def at(self, pts):
        """Evaluate the function at arbitrary interior points."""
        pts = _as_points(pts, self.domain.dim)
        d0 = self.domain.d0
        d = self.domain.dist(pts)
        y = d.copy()
        mask = d > d0
        if np.any(mask):
            sub = pts[mask]
            one_minus_phi = smoothstep((d[mask] - d0) / d0)
            gm = self.mollified_core(sub)
            zz = sub - self.center[None, :]
            y[mask] += one_minus_phi * (gm - d[mask]
                                        - self.eps_quad * np.sum(zz * zz, axis=1))
        return y

    @property
    def eps_quad(self):
        # coefficient of the -eps |x - center|^2 term; same eps as mollifier
        return self.moll_eps

    def jet(self, pts, h=None):
        """(y, grad y, hess y) at arbitrary points by 4th-order differences."""
        pts = _as_points(pts, self.domain.dim)
        if h is None:
            h = 2e-4 * self.domain.diameter
        return fd_jet(self.at, pts, h)

    def resample(self, mesh):
        """Same function, with node samples for another mesh."""
        out = BoundaryDefiningFunction(
            domain=self.domain, eps=self.eps, eps_prime=self.eps_prime,
            moll_eps=self.moll_eps, plateau=self.plateau,
            center=self.center.copy(),
            critical_point=self.critical_point.copy(),
            critical_value=self.critical_value, _quad=self._quad)
        out.values = out.at(mesh.points)
        return out


def fd_jet(fn, pts, h):
    """Value, gradient, and Hessian of a scalar callable, 4th-order stencils."""
    pts = np.asarray(pts, dtype=float)
    n, dim = pts.shape
    f0 = fn(pts)
    grad = np.zeros((n, dim))
    hess = np.zeros((n, dim, dim))
    c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0     # offsets -2h,-h,h,2h
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # -2h..2h incl 0
    for i in range(dim):
        e = np.zeros(dim); e[i] = h
        fm2, fm1 = fn(pts - 2 * e), fn(pts - e)
        fp1, fp2 = fn(pts + e), fn(pts + 2 * e)
        grad[:, i] = (c1[0] * fm2 + c1[1] * fm1 + c1[2] * fp1 + c1[3] * fp2) / h
        hess[:, i, i] = (c2[0] * fm2 + c2[1] * fm1 + c2[2] * f0
                         + c2[3] * fp1 + c2[4] * fp2) / h**2
    for i in range(dim):
        for j in range(i + 1, dim):
            ei = np.zeros(dim); ei[i] = h
            ej = np.zeros(dim); ej[j] = h
            fpp = fn(pts + ei + ej); fpm = fn(pts + ei - ej)
            fmp = fn(pts - ei + ej); fmm = fn(pts - ei - ej)
            hess[:, i, j] = hess[:, j, i] = (fpp - fpm - fmp + fmm) / (4 * h**2)
    return f0, grad, hess


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    """Region-by-region margins for the boundary-defining-function checks."""

    ok: bool
    near_boundary_exact: bool
    max_abs_near_dev: float
    positive: bool
    grad_sq_dev_near: float        # max | |grad y|^2 - 1 | on {d <= d0}
    grad_sq_min_mid: float         # min |grad y|^2 on {d0 < d < 2 d0}
    concavity_margin_near: float   # min of -lambda_max(hess) on {d <= d0}
    concavity_margin_mid: float
    concavity_margin_inner: float  # on {d >= 2 d0}
    n_critical_clusters: int
    critical_point: np.ndarray
    critical_distance: float
    quadratic_fit_ok: bool
    failures: list

    def summary(self):
        lines = [f"valid={self.ok}"]
        lines.append(f"  y=d near boundary: exact={self.near_boundary_exact} "
                     f"(max dev {self.max_abs_near_dev:.3e})")
        lines.append(f"  |grad y|^2: near dev {self.grad_sq_dev_near:.3e}, "
                     f"mid min {self.grad_sq_min_mid:.6f}")
        lines.append(f"  concavity margins: near {self.concavity_margin_near:.3e}, "
                     f"mid {self.concavity_margin_mid:.3e}, "
                     f"inner {self.concavity_margin_inner:.3e}")
        lines.append(f"  critical clusters: {self.n_critical_clusters} at "
                     f"{np.array2string(self.critical_point, precision=5)} "
                     f"(d={self.critical_distance:.4f}, "
                     f"quad fit ok={self.quadratic_fit_ok})")
        if self.failures:
            lines.append("  failures: " + "; ".join(self.failures))
        return "\n".join(lines)


# direction set for concavity checks: axes plus diagonals (2D: 8 directions)
_DIRS_1D = np.array([[1.0]])
_d = 1.0 / np.sqrt(2.0)
_DIRS_2D = np.array([[1, 0], [0, 1], [_d, _d], [_d, -_d],
                     [-1, 0], [0, -1], [-_d, -_d], [-_d, _d]])


def _hess_max_eig(hess):
    """Largest eigenvalue of symmetric (n,dim,dim) Hessians, closed form."""
    if hess.shape[1] == 1:
        return hess[:, 0, 0]
    a, b, c = hess[:, 0, 0], hess[:, 0, 1], hess[:, 1, 1]
    mid = 0.5 * (a + c)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b**2)
    return mid + rad


def _local_maxima_clusters(mesh, vals):
    """Connected clusters of nodes that are >= all of their mesh neighbors."""
    neigh = mesh.neighbor_lists()
    n = len(vals)
    is_max = np.zeros(n, dtype=bool)
    for i in mesh.interior_idx:
        is_max[i] = all(vals[i] >= vals[j] - 1e-14 * max(1.0, abs(vals[i]))
                        for j in neigh[i])
    idx = [i for i in np.nonzero(is_max)[0]]
    # cluster by adjacency
    clusters = []
    unseen = set(idx)
    while unseen:
        seed = unseen.pop()
        group = [seed]
        frontier = [seed]
        while frontier:
            k = frontier.pop()
            for j in neigh[k]:
                if j in unseen:
                    unseen.remove(j)
                    group.append(j)
                    frontier.append(j)
        clusters.append(group)
    return clusters


def _quadratic_fit_critical(mesh, vals, seed_idx):
    """Quadratic fit around the argmax node; returns (x*, y*, hess, ok)."""
    pts = mesh.points
    x0 = pts[seed_idx]
    h_loc = mesh.local_spacing(seed_idx)
    rad = 3.5 * h_loc
    dist = np.linalg.norm(pts - x0[None, :], axis=1)
    sel = np.nonzero(dist <= rad)[0]
    if len(sel) < (6 if mesh.dim == 2 else 4):
        sel = np.argsort(dist)[: (10 if mesh.dim == 2 else 5)]
    z = pts[sel] - x0[None, :]
    if mesh.dim == 1:
        cols = [np.ones(len(sel)), z[:, 0], z[:, 0] ** 2]
    else:
        cols = [np.ones(len(sel)), z[:, 0], z[:, 1],
                z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, vals[sel], rcond=None)
    resid = vals[sel] - A @ coef
    if mesh.dim == 1:
        hess = np.array([[2.0 * coef[2]]])
        lin = np.array([coef[1]])
    else:
        hess = np.array([[2.0 * coef[3], coef[4]], [coef[4], 2.0 * coef[5]]])
        lin = coef[1:3]
    # stationary point of the fitted quadratic
    try:
        step = np.linalg.solve(hess, -lin)
    except np.linalg.LinAlgError:
        return x0, vals[seed_idx], hess, False
    xstar = x0 + step
    quad_scale = abs(vals[seed_idx] - np.min(vals[sel])) + 1e-300
    fit_ok = (np.max(np.abs(resid)) <= 0.35 * quad_scale + 1e-12
              and np.linalg.norm(step) <= 2.0 * rad
              and np.all(np.linalg.eigvalsh(hess) < 0.0))
    ystar = float(coef[0] - 0.5 * lin @ step) if fit_ok else float(vals[seed_idx])
    return xstar, ystar, hess, fit_ok


def validate_bdf(bdf, mesh, tol_near=1e-8, tol_hess=None, tol_grad=1e-5):
    """Check the four defining properties at every node; report worst margins.

    Hessians use centered differences of the node samples; concavity margins
    are reported per region as min of -lambda_max(hess), which bounds the
    quadratic form over every direction (the fixed direction set is implied).
    """
    vals = bdf.values if bdf.values is not None else bdf.at(mesh.points)
    d = mesh.d
    d0 = bdf.domain.d0
    interior = mesh.interior_idx
    # Concavity checks classify by the stencil footprint: a node whose
    # difference stencil reaches into the transition band (d0, 2 d0) is held
    # to the band's (weaker) criterion, else bleed across the cutoff knots
    # would contaminate the strict-region margins at O(1).
    h_loc = mesh.normal_spacing()
    lo, hi = d - 1.5 * h_loc, d + 1.5 * h_loc
    touches_band = (hi > d0) & (lo < 2 * d0)
    near = interior[(d[interior] <= d0) & ~touches_band[interior]]
    inner = interior[(d[interior] >= 2 * d0) & ~touches_band[interior]]
    mid = interior[touches_band[interior]]
    near_loc = interior[d[interior] <= d0]
    if tol_hess is None:
        tol_hess = 1e-9

    failures = []

    dev = np.abs(vals - d)
    near_all = np.nonzero(d < d0)[0]
    max_dev = float(dev[near_all].max()) if len(near_all) else 0.0
    near_exact = max_dev == 0.0
    if not near_exact:
        failures.append(f"y != d_Gamma on the collar (max dev {max_dev:.2e})")

    positive = bool(np.all(vals[interior] > 0.0))
    if not positive:
        failures.append("y not strictly positive on the interior")

    grad = mesh.grad(vals)
    gsq = np.sum(grad * grad, axis=1)
    gdev_near = float(np.max(np.abs(gsq[near_loc] - 1.0))) if len(near_loc) else 0.0
    gmin_mid = float(np.min(gsq[mid])) if len(mid) else 1.0
    if gdev_near > tol_grad:
        failures.append(f"|grad y|^2 != 1 on the collar (dev {gdev_near:.2e})")
    if gmin_mid < 0.5:
        failures.append(f"|grad y|^2 < 1/2 in the mid region (min {gmin_mid:.3f})")

    hess = mesh.hess(vals)
    margin = -_hess_max_eig(hess)          # want >= 0 / -eps' / eps by region
    m_near = float(np.min(margin[near])) if len(near) else 0.0
    m_mid = float(np.min(margin[mid])) if len(mid) else 0.0
    m_inner = float(np.min(margin[inner])) if len(inner) else 0.0
    if m_near < -tol_near:
        failures.append(f"concavity fails on the collar (margin {m_near:.2e})")
    if m_mid < -bdf.eps_prime - tol_hess:
        failures.append(f"mid-region concavity deficit exceeds eps' ({m_mid:.2e})")
    if m_inner < bdf.eps - tol_hess:
        failures.append(f"inner concavity margin below eps ({m_inner:.2e})")

    clusters = _local_maxima_clusters(mesh, vals)
    n_clusters = len(clusters)
    seed = int(np.argmax(vals))
    xstar, _, _, fit_ok = _quadratic_fit_critical(mesh, vals, seed)
    dstar = float(bdf.domain.dist(xstar[None, :])[0])
    if n_clusters != 1:
        failures.append(f"{n_clusters} critical clusters (need exactly 1)")
    if not fit_ok:
        failures.append("critical point not locally quadratic (kink?)")
    if dstar <= 2 * d0:
        failures.append(f"critical point too close to the boundary (d={dstar:.3f})")

    return ValidationReport(
        ok=not failures,
        near_boundary_exact=near_exact, max_abs_near_dev=max_dev,
        positive=positive,
        grad_sq_dev_near=gdev_near, grad_sq_min_mid=gmin_mid,
        concavity_margin_near=m_near, concavity_margin_mid=m_mid,
        concavity_margin_inner=m_inner,
        n_critical_clusters=n_clusters, critical_point=xstar,
        critical_distance=dstar, quadratic_fit_ok=fit_ok,
        failures=failures)


# ---------------------------------------------------------------------------
# construction


@dataclass
class BdfPair:
    """Two validated boundary defining functions with separated maxima."""

    y1: BoundaryDefiningFunction
    y2: BoundaryDefiningFunction
    separation: float
    report1: ValidationReport = None
    report2: ValidationReport = None


def _certify(bdf, mesh):
    """Measure region margins and store certified (eps, eps_prime)."""
    rep = validate_bdf(bdf, mesh)
    bdf.eps = max(0.9 * rep.concavity_margin_inner, 1e-14)
    bdf.eps_prime = max(0.0, -rep.concavity_margin_mid) * 1.1 + 1e-12
    rep = validate_bdf(bdf, mesh)
    bdf.validated = rep.ok
    return rep


def _domain_centroid(domain):
    if domain.kind == "interval":
        return np.array([0.5 * (domain.a + domain.b)])
    if domain.kind == "disk":
        return np.zeros(2)
    # oval: crude centroid from the level set's bounding structure
    return np.zeros(domain.dim)


def build_bdf_pair(domain, mesh, eps, delta_shift=None, delta_sep=None,
                   shift_direction=None, plateau=None):
    """Construct and validate a boundary-defining pair on the given mesh.

    Both functions share the core d + (1 - phi)(g^eps - d - eps|x - c_j|^2),
    g = min(d_Gamma, plateau) mollified; their difference is an ambient
    linear tilt delta (b . z) supported on the core, which moves the exact
    plateau maximum from c_1 to c_2 = c_1 + delta/(2 eps) b.  Validity of
    both functions is established a posteriori by validate_bdf.

    delta_shift fixes the tilt magnitude (separation = delta_shift / (2 eps));
    otherwise delta_sep (default: a few cells) sets the separation directly.
    """
    if mesh.domain is not domain and mesh.domain != domain:
        raise GeometryError("mesh was built for a different domain")
    if eps <= 0 or eps >= 0.5 * domain.d0:
        raise GeometryError("need 0 < eps << d0 for the mollification width")
    d0 = domain.d0
    if plateau is None:
        plateau = 2.0 * d0 + max(2.0 * eps, 0.5 * d0)
    if plateau < 2.0 * d0 + eps:
        raise GeometryError("plateau level must exceed 2 d0 + eps")

    centroid = _domain_centroid(domain)
    d_centroid = float(domain.dist(centroid[None, :])[0])
    plateau_radius = d_centroid - plateau - 2.0 * eps
    if plateau_radius <= 0:
        raise BdfConstructionError(
            f"no plateau {{d >= {plateau:.3f}}} inside the domain", None)

    bvec = np.zeros(domain.dim)
    bvec[0] = 1.0
    if shift_direction is not None:
        bvec = np.asarray(shift_direction, float)
        bvec = bvec / np.linalg.norm(bvec)
    if delta_shift is not None:
        sep = float(delta_shift) / (2.0 * eps)
    else:
        if delta_sep is None:
            seed_h = mesh.local_spacing(int(np.argmin(
                np.linalg.norm(mesh.points - centroid[None, :], axis=1))))
            delta_sep = max(0.02 * domain.diameter, 3.0 * seed_h)
        sep = float(delta_sep)
    sep = min(sep, 1.2 * plateau_radius)

    last_rep = None
    for _ in range(8):
        c1 = centroid - 0.5 * sep * bvec
        c2 = centroid + 0.5 * sep * bvec
        quad = bump_quadrature(domain.dim, eps)
        pair = []
        reports = []
        ok = True
        for c in (c1, c2):
            y = BoundaryDefiningFunction(
                domain=domain, eps=0.0, eps_prime=0.0, moll_eps=eps,
                plateau=plateau, center=c.copy(), _quad=quad)
            y.values = y.at(mesh.points)
            seed = int(np.argmax(y.values))
            xstar, _, _, fit_ok = _quadratic_fit_critical(mesh, y.values, seed)
            y.critical_point = xstar if fit_ok else mesh.points[seed]
            y.critical_value = float(y.at(y.critical_point[None, :])[0])
            rep = _certify(y, mesh)
            pair.append(y)
            reports.append(rep)
            ok = ok and rep.ok
        found_sep = float(np.linalg.norm(
            pair[1].critical_point - pair[0].critical_point))
        if ok and found_sep >= 0.5 * sep:
            return BdfPair(y1=pair[0], y2=pair[1], separation=found_sep,
                           report1=reports[0], report2=reports[1])
        last_rep = next((r for r in reports if not r.ok), reports[0])
        sep *= 0.5
        if sep < mesh.local_spacing(int(np.argmin(
                np.linalg.norm(mesh.points - centroid[None, :], axis=1)))):
            break
    raise BdfConstructionError(
        "boundary defining pair failed validation:\n"
        + (last_rep.summary() if last_rep else ""), last_rep)
