"""Global sparse assembly, Dirichlet elimination, f-extension and the
M-matrix certificate."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import FACE_AXIS, FaceCondition, Grid, PdeSpec, classify_all, faces_for
from .errors import UnsupportedConfigurationError
from .stencil import SchemeMode, StencilScheme, as_arrays


class Extension(enum.Enum):
    ANALYTIC = "analytic"
    QUADRATIC = "quadratic"


def quadratic_extrapolate(f0, f1, f2):
    """Value one step outside from three inward samples: 3 f0 - 3 f1 + f2."""
    return 3.0 * np.asarray(f0) - 3.0 * np.asarray(f1) + np.asarray(f2)


def source_extension(f, face: str, mode=Extension.QUADRATIC,
                     grid: Optional[Grid] = None) -> np.ndarray:
    """f on the layer one step outside ``face``.

    With ``mode=ANALYTIC`` ``f`` is a callable and ``grid`` gives the layer
    coordinates. With ``mode=QUADRATIC`` ``f`` is an array of samples whose
    axis normal to ``face`` holds at least three layers; the result drops
    that axis.
    """
    mode = Extension(mode)
    axis, side = FACE_AXIS[face]
    if mode is Extension.ANALYTIC:
        if not callable(f) or grid is None:
            raise ValueError("analytic extension needs a callable f and a grid")
        if axis >= grid.dim:
            raise ValueError(f"face {face!r} does not exist in {grid.dim}D")
        idx = np.indices(grid.shape)
        idx[axis] = -1 if side == 0 else grid.N + 1
        layer = np.take(idx, 0, axis=axis + 1)
        pts = grid.coords(np.moveaxis(layer, 0, -1))
        return np.asarray(f(*np.moveaxis(pts, -1, 0)), dtype=float)
    values = np.asarray(f, dtype=float)
    if axis >= values.ndim or values.shape[axis] < 3:
        raise ValueError("quadratic extrapolation needs three layers of f")
    picks = (0, 1, 2) if side == 0 else (-1, -2, -3)
    layers = [np.take(values, k, axis=axis) for k in picks]
    return quadratic_extrapolate(*layers)


@dataclass(frozen=True)
class SparseSystem:
    """Assembled ``A U = rhs`` over the unknown grid points.

    ``unknowns[r]`` is the grid index of row ``r``; ``row_of`` is the inverse
    map on the full grid with -1 at Dirichlet-known points.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    unknowns: np.ndarray
    row_of: np.ndarray
    grid: Grid
    symmetric: bool
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def to_field(self, x, fill: Optional[Callable] = None) -> np.ndarray:
        """Scatter a solution vector onto the grid; Dirichlet points get
        ``fill`` (callable of coordinates) or NaN."""
        out = np.full(self.grid.shape, np.nan)
        if fill is not None:
            pts = self.grid.coords(np.moveaxis(np.indices(self.grid.shape), 0, -1))
            out[...] = fill(*np.moveaxis(pts, -1, 0))
        out[tuple(self.unknowns.T)] = x
        return out

    def unknown_mask(self) -> np.ndarray:
        return self.row_of >= 0


def _callable_on(grid, fn, idx):
    pts = grid.coords(idx)
    return np.asarray(fn(*pts.T), dtype=float) * np.ones(len(idx))


def _inside(grid, idx):
    return np.all((idx >= 0) & (idx <= grid.N), axis=1)


def _dirichlet_values(grid, bcs, u1, idx):
    if u1 is not None:
        return _callable_on(grid, u1, idx)
    vals = np.full(len(idx), np.nan)
    for face in faces_for(grid.dim):
        bc = bcs[face]
        if bc.is_flux or bc.data is None:
            continue
        axis, side = FACE_AXIS[face]
        on = (idx[:, axis] == (grid.N if side else 0)) & np.isnan(vals)
        if on.any():
            vals[on] = _callable_on(grid, bc.data, idx[on])
    if np.isnan(vals).any():
        raise ValueError("Dirichlet data missing for some boundary points")
    return vals


def _source_values(grid, f, idx, extension):
    """f at grid-index points, some possibly one layer outside."""
    if callable(f):
        return _callable_on(grid, f, idx)
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"f array shape {f.shape} != grid shape {grid.shape}")
    inside = _inside(grid, idx)
    out = np.empty(len(idx))
    out[inside] = f[tuple(idx[inside].T)]
    if (~inside).any():
        if extension is not Extension.QUADRATIC:
            raise UnsupportedConfigurationError(
                "exterior f values needed but f is given only on the grid")
        ext = idx[~inside]
        step = np.where(ext < 0, 1, np.where(ext > grid.N, -1, 0))
        layers = [f[tuple((ext + k * step).T)] for k in (1, 2, 3)]
        out[~inside] = quadratic_extrapolate(*layers)
    return out


def assemble(grid: Grid, pde: PdeSpec, bcs: Mapping[str, FaceCondition],
             schemes: Mapping[str, StencilScheme], f, u1=None,
             extension=None, pin=None) -> SparseSystem:
    """Assemble the global system for any dimension.

    ``schemes`` maps ``'interior'`` and each flux face name to a scheme
    already oriented for that face. ``f`` is a callable of coordinates
    (evaluated directly, also one layer outside) or a grid array (exterior
    values by quadratic extrapolation). ``u1`` gives Dirichlet values;
    when ``None`` each Dirichlet face's ``data`` is used. ``g`` comes from
    each flux face's ``data``. ``pin=(index, value)`` replaces that row by
    an identity row.
    """
    if pde.dim != grid.dim:
        raise ValueError(f"PDE dim {pde.dim} != grid dim {grid.dim}")
    if extension is None:
        extension = Extension.ANALYTIC if callable(f) else Extension.QUADRATIC
    extension = Extension(extension)
    classes = classify_all(grid, bcs)
    order = ["interior"] + [c for c in faces_for(grid.dim) if c in classes]
    unknowns = np.concatenate([classes[c] for c in order if len(classes[c])]
                              or [np.zeros((0, grid.dim), dtype=int)])
    row_of = np.full(grid.shape, -1, dtype=np.int64)
    row_of[tuple(unknowns.T)] = np.arange(len(unknowns))
    n = len(unknowns)

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for cls in order:
        pts = classes[cls]
        if not len(pts):
            continue
        if cls not in schemes:
            raise UnsupportedConfigurationError(f"no scheme for point class {cls!r}")
        scheme = schemes[cls]
        if scheme.dim != grid.dim:
            raise ValueError(f"scheme for {cls!r} has dim {scheme.dim}")
        if cls != "interior" and scheme.face not in (None, cls):
            raise ValueError(f"scheme for {cls!r} is oriented for {scheme.face!r}")
        r = row_of[tuple(pts.T)]

        offs, coef = as_arrays(scheme.alpha)
        for off, c in zip(offs, coef):
            nb = pts + off
            if not _inside(grid, nb).all():
                raise ValueError(f"alpha offset {tuple(off)} leaves the grid at {cls!r}")
            col = row_of[tuple(nb.T)]
            known = col < 0
            rows.append(r[~known])
            cols.append(col[~known])
            vals.append(np.full((~known).sum(), c))
            if known.any():
                np.subtract.at(rhs, r[known],
                               c * _dirichlet_values(grid, bcs, u1, nb[known]))

        offs, coef = as_arrays(scheme.beta)
        for off, c in zip(offs, coef):
            np.add.at(rhs, r, c * _source_values(grid, f, pts + off, extension))

        if scheme.gamma:
            bc = bcs[cls]
            if bc.data is None:
                raise ValueError(f"flux face {cls!r} has no g data")
            offs, coef = as_arrays(scheme.gamma)
            for off, c in zip(offs, coef):
                np.add.at(rhs, r, c * _callable_on(grid, bc.data, pts + off))

    A = sp.coo_matrix((np.concatenate(vals) if vals else np.zeros(0),
                       (np.concatenate(rows) if rows else np.zeros(0, int),
                        np.concatenate(cols) if cols else np.zeros(0, int))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()

    if pin is not None:
        index, value = pin
        p = int(row_of[tuple(index)])
        if p < 0:
            raise ValueError(f"pin point {tuple(index)} is not an unknown")
        A = A.tolil()
        A.rows[p] = [p]
        A.data[p] = [1.0]
        A = A.tocsr()
        rhs[p] = value
    A.sort_indices()

    diff = abs(A - A.T)
    symmetric = bool(diff.nnz == 0 or diff.max() <= 1e-14 * abs(A).max())
    meta = {"extension": extension.value, "pinned": pin is not None}
    return SparseSystem(A, rhs, unknowns, row_of, grid, symmetric, meta)


def assemble_2d(grid, pde, bcs, schemes, f, u1=None, extension=None, pin=None):
    if grid.dim != 2:
        raise ValueError("assemble_2d needs a 2D grid")
    return assemble(grid, pde, bcs, schemes, f, u1, extension, pin)


def assemble_3d(grid, pde, bcs, schemes, f, u1=None, extension=None, pin=None):
    if grid.dim != 3:
        raise ValueError("assemble_3d needs a 3D grid")
    return assemble(grid, pde, bcs, schemes, f, u1, extension, pin)


@dataclass(frozen=True)
class MMatrixReport:
    sign_ok: bool
    weakly_diagonally_dominant: bool
    has_strict_row: bool
    irreducible: bool
    violations: list
    strict_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    @property
    def is_m_matrix(self) -> bool:
        return (self.sign_ok and self.weakly_diagonally_dominant
                and self.has_strict_row and self.irreducible)


def m_matrix_check(sys, rtol=1e-13) -> MMatrixReport:
    """Sufficient M-matrix test on -A: positive diagonal, nonpositive
    off-diagonals, irreducible weak row dominance with a strict row.

    Accepts a SparseSystem or a square sparse matrix.
    """
    A = sys.matrix if isinstance(sys, SparseSystem) else sp.csr_matrix(sys)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    B = (-A).tocsr()
    n = B.shape[0]
    diag = B.diagonal()
    absB = abs(B)
    row_scale = np.asarray(absB.max(axis=1).todense()).ravel()
    tol = rtol * row_scale

    coo = B.tocoo()
    off = coo.row != coo.col
    bad = off & (coo.data > tol[coo.row])
    violations = [(int(i), int(j), float(v))
                  for i, j, v in zip(coo.row[bad], coo.col[bad], coo.data[bad])]
    bad_diag = np.flatnonzero(diag <= tol)
    violations += [(int(i), int(i), float(diag[i])) for i in bad_diag]
    sign_ok = not violations

    off_sum = np.asarray(absB.sum(axis=1)).ravel() - np.abs(diag)
    margin = np.abs(diag) - off_sum
    weak = bool(np.all(margin >= -tol))
    strict_rows = np.flatnonzero(margin > tol)

    pattern = sp.csr_matrix((np.ones_like(B.data), B.indices, B.indptr), shape=B.shape)
    ncomp, _ = connected_components(pattern, directed=True, connection="strong")
    return MMatrixReport(sign_ok, weak, bool(len(strict_rows)), ncomp == 1 or n == 0,
                         violations, strict_rows)


def export_matrix_market(sys: SparseSystem, path):
    """Write the matrix as ``%%MatrixMarket matrix coordinate real general``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # scipy's writer silently skips unopenable paths; hand it a file object
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, sys.matrix, symmetry="general")
