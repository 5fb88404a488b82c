"""Manufactured solutions, error norms, truncation probes and grid
refinement studies."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import moments
from .assembly import assemble
from .core import FaceCondition, Grid, PdeSpec, face_normal, faces_for
from .errors import HocError
from .schemes import SchemeOptions, build_schemes
from .solvers import solve


class ExampleKind(enum.Enum):
    SMOOTH_2D = "smooth2d"
    OSCILLATORY_2D = "oscillatory2d"
    OSCILLATORY_3D = "oscillatory3d"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact ``u`` with first and second derivatives.

    ``d1(*x)`` returns the gradient components and ``d2(*x)`` the Hessian
    as nested lists; ``f`` and ``g`` are built from them for a given PDE.
    """

    kind: ExampleKind
    pde: PdeSpec
    u: Callable
    d1: Callable
    d2: Callable
    params: dict = field(default_factory=dict)

    def f(self, *x):
        g1, g2 = self.d1(*x), self.d2(*x)
        p = self.pde
        if p.dim == 3:
            return g2[0][0] + g2[1][1] + g2[2][2] + p.K * self.u(*x)
        return (p.A11 * g2[0][0] + 2 * p.A12 * g2[0][1] + p.A22 * g2[1][1]
                + p.a * g1[0] + p.b * g1[1] + p.K * self.u(*x))

    def flux(self, face: str, sigma: float, conormal: str = "symmetric") -> Callable:
        """g = (A grad u) . n + sigma u on ``face``."""
        n = face_normal(face, self.pde.dim)
        A = moments.flux_matrix(self.pde, conormal)
        w = np.asarray(n, dtype=float) @ A

        def g(*x):
            g1 = self.d1(*x)
            return sum(w[k] * g1[k] for k in range(len(w)) if w[k]) + sigma * self.u(*x)
        return g

    def with_bcs(self, bcs: Mapping[str, FaceCondition]) -> dict:
        """Attach exact data: u on Dirichlet faces, g on flux faces."""
        out = {}
        for face, bc in bcs.items():
            if bc.is_flux:
                out[face] = replace(bc, data=self.flux(face, bc.sigma, bc.conormal))
            else:
                out[face] = replace(bc, data=self.u)
        return out


def _smooth2d(pde, params):
    pi = math.pi

    def u(x, y):
        return np.exp(-x) * np.sin(pi * y)

    def d1(x, y):
        e, s, c = np.exp(-x), np.sin(pi * y), np.cos(pi * y)
        return [-e * s, pi * e * c]

    def d2(x, y):
        e, s, c = np.exp(-x), np.sin(pi * y), np.cos(pi * y)
        xy = -pi * e * c
        return [[e * s, xy], [xy, -pi * pi * e * s]]
    return u, d1, d2


def _osc2d(pde, params):
    k1, k2 = params["k1"], params["k2"]

    def u(x, y):
        return np.sin(k1 * x) * np.cos(k2 * y)

    def d1(x, y):
        return [k1 * np.cos(k1 * x) * np.cos(k2 * y),
                -k2 * np.sin(k1 * x) * np.sin(k2 * y)]

    def d2(x, y):
        sx, cx = np.sin(k1 * x), np.cos(k1 * x)
        sy, cy = np.sin(k2 * y), np.cos(k2 * y)
        xy = -k1 * k2 * cx * sy
        return [[-k1 * k1 * sx * cy, xy], [xy, -k2 * k2 * sx * cy]]
    return u, d1, d2


def _osc3d(pde, params):
    k = (params["k1"], params["k2"], params["k3"])

    def u(x, y, z):
        return np.sin(k[0] * x) * np.sin(k[1] * y) * np.sin(k[2] * z)

    def _parts(x):
        s = [np.sin(kk * xx) for kk, xx in zip(k, x)]
        c = [np.cos(kk * xx) for kk, xx in zip(k, x)]
        return s, c

    def d1(*x):
        s, c = _parts(x)
        return [k[0] * c[0] * s[1] * s[2], k[1] * s[0] * c[1] * s[2],
                k[2] * s[0] * s[1] * c[2]]

    def d2(*x):
        s, c = _parts(x)
        H = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(3):
                term = 1.0
                for m in range(3):
                    if m == i and m == j:
                        term = term * (-k[m] * k[m] * s[m])
                    elif m in (i, j):
                        term = term * (k[m] * c[m])
                    else:
                        term = term * s[m]
                H[i][j] = term
        return H
    return u, d1, d2


def _polynomial(pde, params):
    poly = {tuple(e): float(c) for e, c in params["poly"].items()}
    dim = pde.dim
    grads = [moments.diff(poly, k) for k in range(dim)]
    hess = [[moments.diff(grads[i], j) for j in range(dim)] for i in range(dim)]

    def _ev(p, x):
        x = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in x])
        out = np.zeros(x[0].shape)
        for e, c in p.items():
            term = c * np.ones(x[0].shape)
            for xi, ei in zip(x, e):
                term = term * xi ** ei
            out = out + term
        return out

    def u(*x):
        return _ev(poly, x)

    def d1(*x):
        return [_ev(g, x) for g in grads]

    def d2(*x):
        return [[_ev(hij, x) for hij in row] for row in hess]
    return u, d1, d2


_BUILDERS = {
    ExampleKind.SMOOTH_2D: (_smooth2d, 2, ()),
    ExampleKind.OSCILLATORY_2D: (_osc2d, 2, ("k1", "k2")),
    ExampleKind.OSCILLATORY_3D: (_osc3d, 3, ("k1", "k2", "k3")),
    ExampleKind.POLYNOMIAL: (_polynomial, None, ("poly",)),
}


def make_manufactured(kind, pde: Optional[PdeSpec] = None, **params) -> ManufacturedSolution:
    """Exact solution of a named example for ``pde`` (Laplacian by default).

    ``f`` is recomputed as L[u] for the given PDE, so advection, K and
    anisotropy all carry over.
    """
    kind = ExampleKind(kind)
    builder, dim, required = _BUILDERS[kind]
    missing = [p for p in required if p not in params]
    if missing:
        raise ValueError(f"{kind.value} needs parameters {missing}")
    if pde is None:
        pde = PdeSpec(dim=dim or 2)
    if dim is not None and pde.dim != dim:
        raise ValueError(f"{kind.value} is a {dim}D example, got a {pde.dim}D PDE")
    u, d1, d2 = builder(pde, params)
    return ManufacturedSolution(kind, pde, u, d1, d2, dict(params))


# -- norms and orders --------------------------------------------------------

def error_inf(field_, exact: Callable, grid: Grid, mask=None) -> float:
    """max |field - exact| over grid points where ``mask`` is true."""
    field_ = np.asarray(field_, dtype=float)
    if field_.shape != grid.shape:
        raise ValueError(f"field shape {field_.shape} != grid shape {grid.shape}")
    pts = grid.coords(np.moveaxis(np.indices(grid.shape), 0, -1))
    err = np.abs(field_ - exact(*np.moveaxis(pts, -1, 0)))
    if mask is not None:
        err = err[np.asarray(mask, dtype=bool)]
    return float(err.max()) if err.size else 0.0


def convergence_order(e_coarse: float, e_fine: float) -> float:
    if not (e_coarse > 0 and e_fine > 0):
        raise ValueError("convergence order needs two positive errors")
    return math.log(e_coarse / e_fine) / math.log(2.0)


def truncation_probe(scheme, manufactured: ManufacturedSolution, grid: Grid,
                     points, sigma: float = 0.0, conormal: str = "symmetric") -> float:
    """max over ``points`` of |sum alpha u - sum beta f - sum gamma g|."""
    pts = np.atleast_2d(np.asarray(points, dtype=int))
    h = grid.h
    x0 = grid.coords(pts)
    t = np.zeros(len(pts))

    def at(fn, off):
        x = x0 + np.asarray(off) * h
        return np.asarray(fn(*x.T), dtype=float)
    for off, c in scheme.alpha.items():
        t += c * at(manufactured.u, off)
    for off, c in scheme.beta.items():
        t -= c * at(manufactured.f, off)
    if scheme.gamma:
        if scheme.face is None:
            raise ValueError("flux scheme without a face tag")
        g = manufactured.flux(scheme.face, sigma, conormal)
        for off, c in scheme.gamma.items():
            t -= c * at(g, off)
    return float(np.max(np.abs(t)))


def truncation_inf(schemes: Mapping, manufactured: ManufacturedSolution,
                   grid: Grid, bcs: Mapping[str, FaceCondition]) -> float:
    """Largest local truncation error over all unknown points."""
    from .core import classify_all
    classes = classify_all(grid, bcs)
    worst = 0.0
    for cls, pts in classes.items():
        if cls == "dirichlet" or not len(pts):
            continue
        bc = bcs.get(cls)
        sigma = bc.sigma if bc is not None else 0.0
        conormal = bc.conormal if bc is not None else "symmetric"
        worst = max(worst, truncation_probe(schemes[cls], manufactured, grid, pts,
                                            sigma, conormal))
    return worst


# -- refinement ---------------------------------------------------------------

@dataclass(frozen=True)
class RefinementRow:
    N: int
    h: float
    err_inf: float
    order: Optional[float] = None
    t_inf: Optional[float] = None
    t_order: Optional[float] = None


@dataclass(frozen=True)
class SolverOptions:
    method: str = "auto"
    tol: float = 1e-12
    max_iters: int = 10_000
    direct_threshold: int = 200_000


@dataclass(frozen=True)
class Study:
    """One refinement study: manufactured example, PDE, boundary kinds,
    scheme and solver choices, and the list of N."""

    example: ManufacturedSolution
    bcs: Mapping[str, FaceCondition]
    Ns: Sequence[int]
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)
    scheme: SchemeOptions = SchemeOptions()
    solver: SolverOptions = SolverOptions()
    truncation: bool = False


def check_doubling(Ns) -> None:
    Ns = list(Ns)
    if not Ns:
        raise ValueError("no grid sizes given")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise ValueError(f"grid sizes must double: {a} -> {b}")


def solve_level(study: Study, N: int):
    """Assemble and solve one level; returns (grid, schemes, system, x, stats)."""
    ex = study.example
    grid = Grid(study.lower, study.upper, N)
    bcs = ex.with_bcs(study.bcs)
    schemes = build_schemes(ex.pde, grid.h, bcs, study.scheme)
    system = assemble(grid, ex.pde, bcs, schemes, ex.f, u1=ex.u)
    x, stats = solve(system, method=study.solver.method, tol=study.solver.tol,
                     max_iters=study.solver.max_iters,
                     direct_threshold=study.solver.direct_threshold)
    return grid, schemes, system, x, stats


def _level(study: Study, N: int):
    ex = study.example
    try:
        grid, schemes, system, x, _ = solve_level(study, N)
    except HocError as exc:
        if exc.args:
            exc.args = (f"N={N}: {exc.args[0]}",) + exc.args[1:]
        exc.N = N
        raise
    err = error_inf(system.to_field(x, fill=ex.u), ex.u, grid, system.unknown_mask())
    t = truncation_inf(schemes, ex, grid, ex.with_bcs(study.bcs)) if study.truncation else None
    return grid.h, err, t


def run_refinement(study: Study, workers: int = 1) -> list:
    """Solve every level and chain the orders pairwise.

    With ``workers > 1`` levels run in a thread pool; rows still come back
    in ascending N and the first failing level (in N order) is raised.
    """
    check_doubling(study.Ns)
    Ns = sorted(study.Ns)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_level, study, N) for N in Ns]
            levels = [f.result() for f in futures]
    else:
        levels = [_level(study, N) for N in Ns]
    rows = []
    for N, (h, err, t) in zip(Ns, levels):
        order = t_order = None
        if rows:
            prev = rows[-1]
            order = convergence_order(prev.err_inf, err) if err > 0 and prev.err_inf > 0 else None
            if t is not None and t > 0 and prev.t_inf:
                t_order = convergence_order(prev.t_inf, t)
        rows.append(RefinementRow(N, h, err, order, t, t_order))
    return rows


def rows_to_csv(rows, truncation: bool = False) -> str:
    """``N,h,err_inf,order`` (+ ``t_inf,t_order``) in %.4e, order blank on
    the first row."""
    def fmt(v):
        return "" if v is None else f"{v:.4e}"
    header = ["N", "h", "err_inf", "order"]
    if truncation:
        header += ["t_inf", "t_order"]
    lines = [",".join(header)]
    for r in rows:
        cells = [str(r.N), fmt(r.h), fmt(r.err_inf), fmt(r.order)]
        if truncation:
            cells += [fmt(r.t_inf), fmt(r.t_order)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
