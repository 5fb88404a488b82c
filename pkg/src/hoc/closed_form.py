"""Analytic coefficient sets for the common cases.

The printed matrices list rows ``j+1, j, j-1`` top to bottom and columns
in increasing ``i``; here they are normalized into offset maps. Flux sets
are for the west face (outward normal -x) and are carried to other faces
with :func:`orient_scheme`.
"""

from __future__ import annotations

import enum

from .errors import SingularParameterError
from .stencil import SchemeMode, StencilScheme, orient_scheme  # noqa: F401


class SchemeKind(enum.Enum):
    INTERIOR_2D = "interior2d"
    ROBIN_2D = "robin2d"
    SUPER_THIRD_2D = "superthird2d"
    ANIS_INTERIOR_2D = "anisinterior2d"
    ANIS_ROBIN_2D = "anisrobin2d"
    INTERIOR_3D = "interior3d"
    ROBIN_3D = "robin3d"
    GUPTA_RHS_2D = "guptarhs2d"


def _check_h(h):
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")


def _grid(rows, cols, values, scale):
    """Map a printed matrix (rows j+1..j-1, given column offsets) to offsets."""
    out = {}
    for r, dj in enumerate((1, 0, -1)):
        for c, di in enumerate(cols):
            v = values[r][c]
            if v:
                out[(di, dj)] = v * scale
    return out


def interior_2d(h, K=0.0) -> StencilScheme:
    """Classical nine-point scheme (L_h + K M_h) U = M_h f."""
    _check_h(h)
    e = 4.0 / (6 * h * h) + K / 12.0
    c = 1.0 / (6 * h * h)
    alpha = {(0, 0): -20.0 / (6 * h * h) + 8.0 * K / 12.0}
    beta = {(0, 0): 8.0 / 12.0}
    for o in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        alpha[o] = e
        beta[o] = 1.0 / 12.0
    for o in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        alpha[o] = c
    return StencilScheme(alpha, beta, mode=SchemeMode.INTERIOR, h=h)


def robin_2d(h, K=0.0, sigma=0.0) -> StencilScheme:
    """Fourth-order west-face Helmholtz/Robin set (uses f one layer outside)."""
    _check_h(h)
    lam = 12.0 - K * h * h
    if lam == 0:
        raise SingularParameterError("12 - K h^2 vanishes")
    center = 4 * sigma * K * h ** 3 + lam * K * h * h - 24 * sigma * h - 40
    alpha = _grid(3, (0, 1), [[8, 4], [center, 16], [8, 4]], 1.0 / (lam * h * h))
    beta = _grid(3, (-1, 0, 1), [[0, 1, 0], [-1, 8 - K * h * h, 3], [0, 1, 0]], 1.0 / lam)
    gamma = {(0, 0): (4 * K * h * h - 24) / (lam * h)}
    return StencilScheme(alpha, beta, gamma, mode=SchemeMode.FOURTH_FEXT,
                         face="west", h=h)


def super_third_2d(h, K=0.0, sigma=0.0) -> StencilScheme:
    """West-face set without f-extension; exact up to x^4, y^4 at K=sigma=0."""
    _check_h(h)
    lam = 6.0 - K * h * h
    if lam == 0:
        raise SingularParameterError("6 - K h^2 vanishes")
    kh2 = K * h * h
    center = 2 * sigma * K * h ** 3 + (lam + 2) * kh2 - 12 * sigma * h - 20
    alpha = _grid(3, (0, 1), [[4 - kh2, 2], [center, 8], [4 - kh2, 2]],
                  1.0 / (lam * h * h))
    beta = {(0, 0): (4 - kh2) / lam, (1, 0): 2.0 / lam}
    gamma = {(0, 0): -2.0 / h}
    return StencilScheme(alpha, beta, gamma, mode=SchemeMode.SUPER_THIRD,
                         face="west", h=h)


def anis_interior_2d(h, A11=1.0, A12=0.0, K=0.0) -> StencilScheme:
    """Interior set for A11 u_xx + 2 A12 u_xy + A11 u_yy + K u = f."""
    _check_h(h)
    lam = 12.0 * A11 - K * h * h
    if lam == 0:
        raise SingularParameterError("12 A11 - K h^2 vanishes")
    p = 2 * (A11 + A12) * (A11 + 2 * A12)
    m = 2 * (A11 - 2 * A12) * (A11 - A12)
    e = 8 * (A11 ** 2 - A12 ** 2)
    center = lam * K * h * h - 8 * (5 * A11 ** 2 - 2 * A12 ** 2)
    alpha = _grid(3, (-1, 0, 1), [[m, e, p], [e, center, e], [p, e, m]],
                  1.0 / (lam * h * h))
    beta = _grid(3, (-1, 0, 1),
                 [[A11 - A12, 0, A11 + A12],
                  [0, 20 * A11 - 2 * K * h * h, 0],
                  [A11 + A12, 0, A11 - A12]], 1.0 / (2 * lam))
    return StencilScheme(alpha, beta, mode=SchemeMode.INTERIOR, h=h)


def anis_robin_2d(h, A11=1.0, A12=0.0, sigma=0.0) -> StencilScheme:
    """West-face anisotropic Robin set (K = a = b = 0, A22 = A11).

    Satisfies the moment system with the x^4 and y^4 rows dropped.
    """
    _check_h(h)
    den = A11 ** 2 - 2 * A12 ** 2
    if A11 == 0 or abs(den) <= 1e-14 * A11 ** 2:
        raise SingularParameterError("A11^2 - 2 A12^2 vanishes")
    s = A11 * sigma * h
    a2, b2, ab = A11 ** 2, A12 ** 2, A11 * A12
    alpha = _grid(3, (0, 1), [
        [-s + (3 * a2 + 6 * ab - 4 * b2), 3 * a2 + 6 * ab + 4 * b2],
        [-10 * s + (8 * b2 - 18 * a2), 6 * a2 - 8 * b2],
        [-s + (3 * a2 - 6 * ab - 4 * b2), 3 * a2 - 6 * ab + 4 * b2],
    ], 1.0 / (6 * A11 * h * h))
    lam = -A11 ** 3 + 4 * A11 * b2
    mu = 3 * a2 * A12 - 4 * A12 ** 3
    zeta = 7 * A11 ** 3 - 12 * A11 * b2
    eta = 5 * a2 * A12 - 12 * A12 ** 3
    beta = _grid(3, (-1, 0, 1), [
        [lam + mu, 0, zeta + eta],
        [0, 4 * A11 * (9 * a2 - 20 * b2), 0],
        [lam - mu, 0, zeta - eta],
    ], 1.0 / (48 * A11 * den))
    gamma = {(0, 1): -1.0 / (6 * h), (0, 0): -10.0 / (6 * h), (0, -1): -1.0 / (6 * h)}
    return StencilScheme(alpha, beta, gamma, mode=SchemeMode.FOURTH_FEXT,
                         face="west", h=h)


def interior_3d(h, K=0.0) -> StencilScheme:
    """19-point scheme; K u handled as a source (K times the f weights
    moved to the left-hand side)."""
    _check_h(h)
    h2 = h * h
    alpha = {(0, 0, 0): -4.0 / h2 + K * 6.0 / 12.0}
    beta = {(0, 0, 0): 6.0 / 12.0}
    for ax in range(3):
        for s in (-1, 1):
            o = [0, 0, 0]
            o[ax] = s
            alpha[tuple(o)] = 1.0 / (3 * h2) + K / 12.0
            beta[tuple(o)] = 1.0 / 12.0
    for a1 in range(3):
        for a2 in range(a1 + 1, 3):
            for s1 in (-1, 1):
                for s2 in (-1, 1):
                    o = [0, 0, 0]
                    o[a1], o[a2] = s1, s2
                    alpha[tuple(o)] = 1.0 / (6 * h2)
    return StencilScheme(alpha, beta, mode=SchemeMode.INTERIOR, h=h)


def robin_3d(h, sigma=0.0, center="consistent") -> StencilScheme:
    """West-face 3D Robin set.

    ``center='consistent'`` uses -(24 + 12 sigma h)/(6 h^2) on the diagonal,
    i.e. the Neumann value plus -2 sigma/h. ``center='printed'`` keeps the
    -12 (2 + sigma)/(6 h^2) form, which only agrees at h = 1.
    """
    _check_h(h)
    h2 = h * h
    if center == "consistent":
        c = -(24 + 12 * sigma * h) / (6 * h2)
    elif center == "printed":
        c = -12 * (2 + sigma) / (6 * h2)
    else:
        raise ValueError(f"unknown center variant {center!r}")
    alpha = {(0, 0, 0): c, (1, 0, 0): 4.0 / (6 * h2)}
    beta = {(0, 0, 0): 6.0 / 12.0, (-1, 0, 0): -1.0 / 12.0, (1, 0, 0): 3.0 / 12.0}
    for dj, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        alpha[(0, dj, dk)] = 2.0 / (6 * h2)
        alpha[(1, dj, dk)] = 2.0 / (6 * h2)
        beta[(0, dj, dk)] = 1.0 / 12.0
    for dj in (-1, 1):
        for dk in (-1, 1):
            alpha[(0, dj, dk)] = 1.0 / (6 * h2)
    gamma = {(0, 0, 0): -2.0 / h}
    return StencilScheme(alpha, beta, gamma, mode=SchemeMode.FOURTH_FEXT,
                         face="west", h=h)


def gupta_rhs_2d(h, a=0.0, b=0.0) -> dict:
    """Right-hand-side weights of the classical convection-diffusion scheme
    (K = 0), with cell Reynolds numbers a h/2 and b h/2."""
    _check_h(h)
    g, d = a * h / 2.0, b * h / 2.0
    return {
        (0, 0): 8.0 / 12.0,
        (1, 0): (1 + g) / 12.0,
        (-1, 0): (1 - g) / 12.0,
        (0, 1): (1 + d) / 12.0,
        (0, -1): (1 - d) / 12.0,
    }


CONSTRUCTORS = {
    SchemeKind.INTERIOR_2D: interior_2d,
    SchemeKind.ROBIN_2D: robin_2d,
    SchemeKind.SUPER_THIRD_2D: super_third_2d,
    SchemeKind.ANIS_INTERIOR_2D: anis_interior_2d,
    SchemeKind.ANIS_ROBIN_2D: anis_robin_2d,
    SchemeKind.INTERIOR_3D: interior_3d,
    SchemeKind.ROBIN_3D: robin_3d,
    SchemeKind.GUPTA_RHS_2D: gupta_rhs_2d,
}
