"""Undetermined-coefficient ("moment") systems for compact stencils.

For every monomial ``m`` of total degree <= 4, centered at the master grid
point, the truncation functional

    T[m] = sum alpha m(o h) - sum beta T2[L m](o h) - sum gamma T3[B m](o h)

must vanish, where ``L`` is the PDE operator, ``B`` the flux operator and
``Tk`` the Taylor truncation to total degree ``k`` about the master point.
Together with ``sum beta = 1`` this gives one dense linear system per
(PDE, stencil geometry, h).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize

from .core import PdeSpec, face_from_normal
from .errors import InconsistentSystemError, InfeasibleError
from .stencil import FAMILIES, SchemeMode, StencilScheme

MAX_DEGREE = 4


# -- polynomials as {exponent tuple: coefficient} ---------------------------

def monomials(dim: int, max_degree: int = MAX_DEGREE) -> list:
    """Exponent tuples of total degree <= max_degree, graded, x-major."""
    out = []
    for d in range(max_degree + 1):
        level = [e for e in itertools.product(range(d + 1), repeat=dim)
                 if sum(e) == d]
        out.extend(sorted(level, reverse=True))
    return out


def degree(exps) -> int:
    return sum(exps)


def _add(poly, exps, c):
    if c:
        poly[exps] = poly.get(exps, 0.0) + c


def diff(poly: dict, axis: int) -> dict:
    out = {}
    for e, c in poly.items():
        if e[axis]:
            lowered = e[:axis] + (e[axis] - 1,) + e[axis + 1:]
            _add(out, lowered, c * e[axis])
    return out


def apply_pde(pde: PdeSpec, poly: dict) -> dict:
    """L[poly] = div(A grad poly) + adv . grad poly + K poly."""
    A = pde.diffusion()
    adv = pde.advection()
    dim = pde.dim
    out = {}
    grads = [diff(poly, k) for k in range(dim)]
    for i in range(dim):
        for j in range(dim):
            if A[i, j]:
                for e, c in diff(grads[j], i).items():
                    _add(out, e, A[i, j] * c)
        if adv[i]:
            for e, c in grads[i].items():
                _add(out, e, adv[i] * c)
    if pde.K:
        for e, c in poly.items():
            _add(out, e, pde.K * c)
    return out


def apply_flux(pde: PdeSpec, normal, sigma: float, poly: dict,
               conormal: str = "symmetric") -> dict:
    """B[poly] = (A grad poly) . n + sigma poly."""
    A = flux_matrix(pde, conormal)
    out = {}
    grads = [diff(poly, k) for k in range(pde.dim)]
    for i, n_i in enumerate(normal):
        if not n_i:
            continue
        for j in range(pde.dim):
            if A[i, j]:
                for e, c in grads[j].items():
                    _add(out, e, n_i * A[i, j] * c)
    if sigma:
        for e, c in poly.items():
            _add(out, e, sigma * c)
    return out


def flux_matrix(pde: PdeSpec, conormal: str = "symmetric") -> np.ndarray:
    """Diffusion matrix used in the flux operator.

    ``"symmetric"`` is [[A11, A12], [A12, A22]]. ``"upper"`` is
    [[A11, 2 A12], [0, A22]], which writes the same PDE but puts the whole
    cross term into the x-flux.
    """
    A = pde.diffusion()
    if conormal == "symmetric":
        return A
    if conormal == "upper":
        if pde.dim != 2:
            raise ValueError("the 'upper' conormal is defined in 2D only")
        return np.array([[A[0, 0], 2 * A[0, 1]], [0.0, A[1, 1]]])
    raise ValueError(f"unknown conormal {conormal!r}")


def normalize_flux(flux) -> tuple:
    """(normal, sigma[, conormal]) -> (normal tuple, float sigma, conormal)."""
    if len(flux) == 2:
        normal, sigma = flux
        conormal = "symmetric"
    else:
        normal, sigma, conormal = flux
    return tuple(int(v) for v in normal), float(sigma), conormal


def truncate(poly: dict, max_degree: int) -> dict:
    return {e: c for e, c in poly.items() if degree(e) <= max_degree}


def evaluate(poly: dict, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(points))
    for e, c in poly.items():
        out += c * np.prod(points ** np.asarray(e), axis=1)
    return out


# -- default stencil geometries ---------------------------------------------

def compact_offsets(dim: int, normal=None, include_exterior=True, corners=True):
    """Offsets in {-1,0,1}^dim; with ``normal`` the exterior layer
    (o . n > 0) is dropped unless ``include_exterior``. ``corners=False``
    removes offsets with all components nonzero (19-point 3D shape)."""
    offs = []
    for o in itertools.product((-1, 0, 1), repeat=dim):
        if normal is not None and not include_exterior and np.dot(o, normal) > 0:
            continue
        if not corners and dim == 3 and all(o):
            continue
        offs.append(o)
    return offs


def face_offsets(dim: int, normal):
    return [o for o in itertools.product((-1, 0, 1), repeat=dim)
            if np.dot(o, normal) == 0]


# -- the system -------------------------------------------------------------

@dataclass
class MomentSystem:
    """Dense equality system for the stencil coefficients.

    Rows: one per retained monomial (in ``monomials`` order) followed by the
    ``sum beta = 1`` constraint row. Columns: ``columns[c] = (family, offset)``.
    ``col_scale``/``row_scale`` map the physical system to a dimensionless
    one (``diag(row_scale) @ matrix @ diag(col_scale)``) in which all
    entries are O(1) independently of h.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    columns: list
    monomials: list
    dropped: list
    pde: PdeSpec
    h: float
    flux: Optional[tuple] = None
    sign_pattern: Optional[dict] = None
    col_scale: np.ndarray = field(default=None, repr=False)
    row_scale: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    def column_index(self) -> dict:
        return {col: c for c, col in enumerate(self.columns)}

    def scaled(self):
        A = self.row_scale[:, None] * self.matrix * self.col_scale[None, :]
        return A, self.row_scale * self.rhs

    def family_columns(self, name) -> list:
        return [c for c, (fam, _) in enumerate(self.columns) if fam == name]

    @property
    def face(self) -> Optional[str]:
        return face_from_normal(self.flux[0]) if self.flux else None


def build_moment_system(pde: PdeSpec, alpha_offsets, beta_offsets, h: float,
                        flux=None, gamma_offsets=None, drop=()) -> MomentSystem:
    """Assemble the moment system.

    ``flux`` is ``(outward normal, sigma[, conormal])`` for a boundary
    master point (see :func:`flux_matrix` for ``conormal``); the
    gamma family then lives on the face through the master point
    (``gamma_offsets`` defaults to all compact offsets on that face).
    ``drop`` lists monomial exponent tuples whose rows are omitted.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if pde.is_zero:
        raise ValueError("PDE operator is identically zero")
    dim = pde.dim
    alpha_offsets = [tuple(o) for o in alpha_offsets]
    beta_offsets = [tuple(o) for o in beta_offsets]
    for o in alpha_offsets + beta_offsets + [tuple(o) for o in gamma_offsets or ()]:
        if len(o) != dim:
            raise ValueError(f"offset {o} does not match dim={dim}")
        if any(v not in (-1, 0, 1) for v in o):
            raise ValueError(f"offset {o} is not compact")
    if flux is None:
        if gamma_offsets:
            raise ValueError("gamma offsets require a flux boundary operator")
        gamma_offsets = []
    else:
        normal, sigma, conormal = normalize_flux(flux)
        if len(normal) != dim:
            raise ValueError(f"normal {normal} does not match dim={dim}")
        face_from_normal(normal)  # raises for non axis-aligned normals
        flux_matrix(pde, conormal)
        flux = (normal, sigma, conormal)
        if gamma_offsets is None:
            gamma_offsets = face_offsets(dim, normal)
        gamma_offsets = [tuple(o) for o in gamma_offsets]
        for o in gamma_offsets:
            if np.dot(o, normal) != 0:
                raise ValueError(f"gamma offset {o} is not on the face")

    drop = [tuple(d) for d in drop]
    kept = [m for m in monomials(dim) if m not in drop]
    columns = ([("alpha", o) for o in alpha_offsets]
               + [("beta", o) for o in beta_offsets]
               + [("gamma", o) for o in gamma_offsets])
    pa = np.array(alpha_offsets, dtype=float).reshape(-1, dim) * h
    pb = np.array(beta_offsets, dtype=float).reshape(-1, dim) * h
    pg = np.array(gamma_offsets, dtype=float).reshape(-1, dim) * h

    rows = []
    for m in kept:
        mono = {m: 1.0}
        row = [evaluate(mono, pa) if len(pa) else np.zeros(0),
               -evaluate(truncate(apply_pde(pde, mono), 2), pb) if len(pb) else np.zeros(0)]
        if flux is not None and len(pg):
            bm = truncate(apply_flux(pde, *flux[:2], mono, flux[2]), 3)
            row.append(-evaluate(bm, pg))
        else:
            row.append(np.zeros(len(pg)))
        rows.append(np.concatenate(row))
    constraint = np.array([1.0 if fam == "beta" else 0.0 for fam, _ in columns])
    matrix = np.vstack(rows + [constraint])
    rhs = np.zeros(len(kept) + 1)
    rhs[-1] = 1.0

    col_scale = np.array([{"alpha": h ** -2, "beta": 1.0, "gamma": h ** -1}[fam]
                          for fam, _ in columns])
    row_scale = np.array([h ** (2 - degree(m)) for m in kept] + [1.0])

    center = (0,) * dim
    sign = {}
    for c, (fam, off) in enumerate(columns):
        if fam == "alpha":
            sign[c] = "nonpos" if off == center else "nonneg"
        else:
            sign[c] = "free"
    return MomentSystem(matrix, rhs, columns, kept, drop, pde, float(h), flux,
                        sign, col_scale, row_scale)


def interior_system(pde: PdeSpec, h: float, drop=()) -> MomentSystem:
    """Full compact interior stencil: 9 (2D) or 19 (3D) alpha, 9/27 beta."""
    corners = pde.dim == 2
    alpha = compact_offsets(pde.dim, corners=corners)
    beta = compact_offsets(pde.dim)
    return build_moment_system(pde, alpha, beta, h, drop=drop)


def flux_system(pde: PdeSpec, h: float, normal, sigma: float,
                super_third: bool = False, drop=None,
                conormal: str = "symmetric") -> MomentSystem:
    """Boundary stencil on the face with outward ``normal``.

    Fourth-order form: alpha on the face and first inner layer, beta on all
    three layers (one exterior, needs f-extension). Super-third form: beta
    without the exterior layer and the pure normal/tangential quartic rows
    dropped.
    """
    normal = tuple(normal)
    alpha = compact_offsets(pde.dim, normal, include_exterior=False)
    beta = compact_offsets(pde.dim, normal, include_exterior=not super_third)
    if drop is None:
        drop = pure_quartics(pde.dim) if super_third else ()
    return build_moment_system(pde, alpha, beta, h, flux=(normal, sigma, conormal),
                               drop=drop)


def pure_quartics(dim: int) -> list:
    """x^4, y^4 (2D) or x^4, y^4, z^4 (3D)."""
    out = []
    for k in range(dim):
        e = [0] * dim
        e[k] = 4
        out.append(tuple(e))
    return out


# -- solving ----------------------------------------------------------------

def _mode_for(sys: MomentSystem) -> SchemeMode:
    if sys.flux is None:
        return SchemeMode.INTERIOR
    normal = sys.flux[0]
    exterior = any(np.dot(off, normal) > 0
                   for fam, off in sys.columns if fam == "beta")
    return SchemeMode.FOURTH_FEXT if exterior else SchemeMode.SUPER_THIRD


def scheme_from_vector(sys: MomentSystem, x, residual=None) -> StencilScheme:
    fams = {name: {} for name in FAMILIES}
    for (fam, off), v in zip(sys.columns, x):
        fams[fam][off] = float(v)
    return StencilScheme(fams["alpha"], fams["beta"], fams["gamma"],
                         mode=_mode_for(sys), face=sys.face, h=sys.h,
                         residual=residual)


def vector_from_scheme(sys: MomentSystem, scheme: StencilScheme) -> np.ndarray:
    index = sys.column_index()
    x = np.zeros(len(sys.columns))
    for name in FAMILIES:
        for off, v in scheme.family(name).items():
            if (name, off) not in index:
                if v == 0.0:
                    continue
                raise ValueError(
                    f"scheme coefficient {name}{off} has no column in the system")
            x[index[(name, off)]] = v
    return x


def _scaled_residual(A, b, x):
    r = np.abs(A @ x - b)
    scale = max(np.max(np.abs(b)), np.max(np.abs(A) @ np.abs(x)), 1e-300)
    return float(np.max(r)), float(np.max(r) / scale)


def solve_min_norm(sys: MomentSystem, allow_least_squares: bool = False,
                   tol: float = 1e-9) -> StencilScheme:
    """Minimum-norm least-squares coefficients.

    The norm is taken in the dimensionless variables (alpha h^2, beta,
    gamma h) so the selected solution depends on h only through K h^2,
    a h, b h and sigma h. Raises InconsistentSystemError if the system
    has no exact solution and ``allow_least_squares`` is false.
    """
    A, b = sys.scaled()
    y, *_ = np.linalg.lstsq(A, b, rcond=None)
    _, rel = _scaled_residual(A, b, y)
    if rel > tol:
        if not allow_least_squares:
            raise InconsistentSystemError(
                f"moment system is inconsistent (relative residual {rel:.3e})", rel)
        y = _graded_least_squares(sys, A, b, tol)
    x = y * sys.col_scale
    res = moment_residual(sys, scheme_from_vector(sys, x))
    return scheme_from_vector(sys, x, residual=res)


def _graded_least_squares(sys: MomentSystem, A, b, tol):
    """Least squares that keeps the defect on the top-degree rows.

    Rows below the highest degree (and the beta constraint) are enforced
    exactly; the remaining rows are fitted in the least-squares sense and
    the minimum-norm minimizer is returned. A defect on a degree-d row
    costs O(h^(d-2)) in truncation error, so this is the cheapest place
    to put it. Falls back to the plain least-squares solution if the
    lower rows are themselves inconsistent.
    """
    deg = np.array([sum(m) for m in sys.monomials] + [-1])
    top = deg == deg.max()
    C, d, E, e = A[~top], b[~top], A[top], b[top]
    y0, *_ = np.linalg.lstsq(C, d, rcond=None)
    if _scaled_residual(C, d, y0)[1] > tol:
        return np.linalg.lstsq(A, b, rcond=None)[0]
    Z, _ = _null_space(C)
    z, *_ = np.linalg.lstsq(E @ Z, e - E @ y0, rcond=None)
    return y0 + Z @ z


def _null_space(A, rtol=1e-12):
    U, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * s[0])) if len(s) else 0
    return Vt[rank:].T, rank


def solve_sign_constrained(sys: MomentSystem, delta: Optional[float] = None,
                           tol: float = 1e-9) -> StencilScheme:
    """Minimum-norm coefficients subject to the M-matrix sign pattern.

    Off-center alpha >= 0, center alpha <= -delta (default 1/h^2), beta and
    gamma free. The equality rows are eliminated through an orthonormal
    null-space basis, which turns the problem into a least-distance program
    ``min |z|  s.t.  G z >= r`` solved exactly through NNLS.
    """
    if sys.sign_pattern is None:
        raise ValueError("system carries no sign pattern")
    h = sys.h
    delta = 1.0 / h ** 2 if delta is None else float(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    A, b = sys.scaled()
    xp, *_ = np.linalg.lstsq(A, b, rcond=None)
    _, rel = _scaled_residual(A, b, xp)
    if rel > tol:
        raise InconsistentSystemError(
            f"equality rows are inconsistent (relative residual {rel:.3e})", rel)
    Z, _ = _null_space(A)

    # bounds in scaled variables, written as s_i * y_i >= lo_i
    rows, lo = [], []
    for c, kind in sys.sign_pattern.items():
        if kind == "nonneg":
            rows.append((c, 1.0))
            lo.append(0.0)
        elif kind == "nonpos":
            rows.append((c, -1.0))
            lo.append(delta / sys.col_scale[c])
    idx = np.array([c for c, _ in rows], dtype=int)
    sgn = np.array([s for _, s in rows])
    lo = np.array(lo)
    # y = xp + Z z  =>  sgn*(Z z)[idx] >= lo - sgn*xp[idx]
    G = sgn[:, None] * Z[idx]
    r = lo - sgn * xp[idx]

    if Z.shape[1] == 0:
        z = np.zeros(0)
        feasible = bool(np.all(r <= tol))
    else:
        z, feasible = _least_distance(G, r)
    if not feasible:
        violation = _best_violation(G, r)
        raise InfeasibleError(
            f"sign-constrained system is infeasible (best max violation "
            f"{violation:.3e})", violation)
    y = xp + Z @ z
    # clean roundoff on active bounds
    bounded = sgn * y[idx]
    slack = bounded - lo
    if np.min(slack, initial=0.0) < -tol * max(1.0, np.max(np.abs(y))):
        violation = float(-np.min(slack))
        raise InfeasibleError(
            f"sign constraints violated by {violation:.3e}", violation)
    x = y * sys.col_scale
    scheme = scheme_from_vector(sys, x)
    return scheme_from_vector(sys, x, residual=moment_residual(sys, scheme))


def _least_distance(G, r):
    """Lawson-Hanson LDP: min |z| s.t. G z >= r via NNLS."""
    m, n = G.shape
    E = np.vstack([G.T, r[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = scipy.optimize.nnls(E, f, maxiter=50 * (m + n + 1))
    res = E @ u - f
    if np.linalg.norm(res) < 1e-12:
        return None, False
    z = -res[:n] / res[n]
    return z, True


def _best_violation(G, r):
    """Smallest achievable max violation t of G z + t >= r (t >= 0)."""
    m, n = G.shape
    if n == 0:
        return float(max(np.max(r), 0.0))
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = -np.hstack([G, np.ones((m, 1))])
    bounds = [(None, None)] * n + [(0, None)]
    res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=-r, bounds=bounds,
                                 method="highs")
    return float(res.x[-1]) if res.success else float("inf")


# -- checks -----------------------------------------------------------------

def moment_residual(sys: MomentSystem, scheme: StencilScheme) -> float:
    """max_i |row_i . x - rhs_i|, constraint row included."""
    if scheme.dim != sys.pde.dim:
        raise ValueError("scheme and system dimensions differ")
    x = vector_from_scheme(sys, scheme)
    return float(np.max(np.abs(sys.matrix @ x - sys.rhs)))


def residual_scale(sys: MomentSystem, scheme: StencilScheme) -> float:
    """Magnitude of the largest row contribution, max_i sum_j |A_ij x_j|."""
    x = vector_from_scheme(sys, scheme)
    return float(max(np.max(np.abs(sys.matrix) @ np.abs(x)), 1.0))


def relative_moment_residual(sys: MomentSystem, scheme: StencilScheme) -> float:
    return moment_residual(sys, scheme) / residual_scale(sys, scheme)


def exactness_probe(scheme: StencilScheme, pde: PdeSpec, flux=None,
                    monomials_: Optional[Sequence] = None) -> float:
    """max over monomials of the untruncated truncation functional."""
    if scheme.gamma and flux is None:
        raise ValueError("scheme has gamma weights; pass the flux operator")
    if monomials_ is None:
        monomials_ = monomials(pde.dim)
    h = scheme.h
    worst = 0.0
    for m in monomials_:
        m = tuple(m)
        if len(m) != pde.dim or degree(m) > MAX_DEGREE:
            raise ValueError(f"monomial {m} invalid for dim={pde.dim}")
        mono = {m: 1.0}
        t = 0.0
        for off, c in scheme.alpha.items():
            t += c * evaluate(mono, np.array(off) * h)[0]
        lm = apply_pde(pde, mono)
        for off, c in scheme.beta.items():
            t -= c * evaluate(lm, np.array(off) * h)[0]
        if scheme.gamma:
            normal, sigma, conormal = normalize_flux(flux)
            bm = apply_flux(pde, normal, sigma, mono, conormal)
            for off, c in scheme.gamma.items():
                t -= c * evaluate(bm, np.array(off) * h)[0]
        worst = max(worst, abs(t))
    return worst


def factorial_weight(exps) -> int:
    """p! q! (r!) - the factor between a monomial row and the row of the
    matching derivative coefficient in a Taylor-expansion presentation."""
    return math.prod(math.factorial(e) for e in exps)
