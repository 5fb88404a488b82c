"""Grids, PDE and boundary descriptions, and point classification."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import UnsupportedConfigurationError

FACES_2D = ("west", "east", "south", "north")
FACES_3D = FACES_2D + ("bottom", "top")

# face -> (axis, side); side 0 is the low end of the axis
FACE_AXIS = {
    "west": (0, 0),
    "east": (0, 1),
    "south": (1, 0),
    "north": (1, 1),
    "bottom": (2, 0),
    "top": (2, 1),
}


def faces_for(dim: int) -> tuple:
    if dim == 2:
        return FACES_2D
    if dim == 3:
        return FACES_3D
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def face_normal(face: str, dim: int) -> tuple:
    """Outward unit normal of ``face`` as an integer tuple."""
    if face not in faces_for(dim):
        raise ValueError(f"invalid face {face!r} for dim={dim}")
    axis, side = FACE_AXIS[face]
    n = [0] * dim
    n[axis] = 1 if side else -1
    return tuple(n)


def face_from_normal(normal) -> str:
    normal = tuple(int(v) for v in normal)
    if sorted(abs(v) for v in normal) != [0] * (len(normal) - 1) + [1]:
        raise UnsupportedConfigurationError(
            f"flux normal {normal} is not axis-aligned")
    axis = next(i for i, v in enumerate(normal) if v)
    for face, (ax, side) in FACE_AXIS.items():
        if ax == axis and (1 if side else -1) == normal[axis]:
            return face
    raise UnsupportedConfigurationError(f"no face with normal {normal}")


@dataclass(frozen=True)
class PdeSpec:
    """Constant-coefficient elliptic operator

    ``A11 u_xx + 2 A12 u_xy + A22 u_yy + a u_x + b u_y + K u`` in 2D, and
    ``u_xx + u_yy + u_zz + K u`` in 3D.
    """

    dim: int = 2
    A11: float = 1.0
    A12: float = 0.0
    A22: float = 1.0
    a: float = 0.0
    b: float = 0.0
    K: float = 0.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.dim == 3 and (self.A11 != 1.0 or self.A12 != 0.0
                              or self.A22 != 1.0 or self.a or self.b):
            raise UnsupportedConfigurationError(
                "3D problems are restricted to Laplacian + K u")

    @classmethod
    def poisson(cls, dim=2):
        return cls(dim=dim)

    @classmethod
    def helmholtz(cls, K, dim=2):
        return cls(dim=dim, K=K)

    @property
    def well_posed(self) -> bool:
        """Ellipticity test ``A12^2 - A11 A22 < 0`` (always true in 3D)."""
        if self.dim == 3:
            return True
        return self.A12 ** 2 - self.A11 * self.A22 < 0

    @property
    def is_zero(self) -> bool:
        return not any((self.A11, self.A12, self.A22, self.a, self.b, self.K))

    @property
    def isotropic(self) -> bool:
        return self.A11 == self.A22 and self.A12 == 0.0

    @property
    def has_advection(self) -> bool:
        return bool(self.a or self.b)

    def diffusion(self) -> np.ndarray:
        if self.dim == 3:
            return np.eye(3)
        return np.array([[self.A11, self.A12], [self.A12, self.A22]])

    def advection(self) -> np.ndarray:
        if self.dim == 3:
            return np.zeros(3)
        return np.array([self.a, self.b], dtype=float)


class BCKind(enum.Enum):
    DIRICHLET = "dirichlet"
    FLUX = "flux"


@dataclass(frozen=True)
class FaceCondition:
    """Boundary condition on one face.

    Flux faces impose ``(A grad u) . n + sigma u = g`` with ``n`` the outward
    normal; Neumann is ``sigma = 0``. ``data`` is ``u1`` (Dirichlet) or ``g``
    (flux) as a callable of the point coordinates; it may be left ``None``
    when the data is supplied separately.

    ``conormal`` picks how the cross-diffusion term enters the flux for
    anisotropic problems: ``"symmetric"`` uses A itself, ``"upper"`` uses
    [[A11, 2 A12], [0, A22]]. The two agree when A12 = 0.
    """

    kind: BCKind
    sigma: float = 0.0
    data: Optional[Callable] = field(default=None, compare=False)
    conormal: str = "symmetric"

    def __post_init__(self):
        if self.conormal not in ("symmetric", "upper"):
            raise ValueError(f"unknown conormal {self.conormal!r}")

    @classmethod
    def dirichlet(cls, data=None):
        return cls(BCKind.DIRICHLET, 0.0, data)

    @classmethod
    def flux(cls, sigma=0.0, data=None, conormal="symmetric"):
        return cls(BCKind.FLUX, float(sigma), data, conormal)

    @classmethod
    def neumann(cls, data=None, conormal="symmetric"):
        return cls(BCKind.FLUX, 0.0, data, conormal)

    @property
    def is_flux(self) -> bool:
        return self.kind is BCKind.FLUX


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a square/cubic box with ``N + 1`` lines per axis."""

    lower: tuple
    upper: tuple
    N: int

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or len(lower) not in (2, 3):
            raise ValueError("bounds must be 2D or 3D and match in length")
        if self.N < 2:
            raise ValueError(f"N must be at least 2, got {self.N}")
        lengths = [u - l for l, u in zip(lower, upper)]
        if min(lengths) <= 0:
            raise ValueError("upper bounds must exceed lower bounds")
        if not np.allclose(lengths, lengths[0], rtol=1e-14, atol=0):
            raise UnsupportedConfigurationError(
                "only square/cubic domains with a single h are supported")

    @classmethod
    def unit(cls, N, dim=2):
        return cls((0.0,) * dim, (1.0,) * dim, N)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def h(self) -> float:
        return (self.upper[0] - self.lower[0]) / self.N

    @property
    def shape(self) -> tuple:
        return (self.N + 1,) * self.dim

    def axis(self, k) -> np.ndarray:
        i = np.arange(self.N + 1)
        return self.lower[k] + i * self.h

    def coords(self, index) -> np.ndarray:
        """Vectorized coordinates for an index array of shape (..., dim)."""
        index = np.asarray(index)
        lo = np.asarray(self.lower)
        return lo + index * self.h


def point_coords(grid: Grid, index) -> tuple:
    index = tuple(int(i) for i in index)
    if len(index) != grid.dim:
        raise ValueError(f"index {index} does not match grid dim {grid.dim}")
    for i in index:
        if not 0 <= i <= grid.N:
            raise IndexError(f"index {index} outside [0, {grid.N}]")
    return tuple(lo + i * grid.h for lo, i in zip(grid.lower, index))


class PointClass(enum.Enum):
    INTERIOR = "interior"
    FLUX = "flux"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Classification:
    kind: PointClass
    face: Optional[str] = None


def _faces_at(grid: Grid, index) -> list:
    out = []
    for face in faces_for(grid.dim):
        axis, side = FACE_AXIS[face]
        if index[axis] == (grid.N if side else 0):
            out.append(face)
    return out


def classify_point(grid: Grid, bcs: Mapping[str, FaceCondition], index) -> Classification:
    """Interior, FluxBoundary(face) or DirichletKnown.

    Edges and corners shared with a Dirichlet face are Dirichlet-known.
    A point shared by two flux faces is rejected.
    """
    index = tuple(int(i) for i in index)
    if any(not 0 <= i <= grid.N for i in index):
        raise IndexError(f"index {index} outside grid")
    on = _faces_at(grid, index)
    if not on:
        return Classification(PointClass.INTERIOR)
    flux = [f for f in on if bcs[f].is_flux]
    if len(flux) < len(on):
        return Classification(PointClass.DIRICHLET)
    if len(flux) > 1:
        raise UnsupportedConfigurationError(
            f"point {index} lies on flux faces {flux}; corner flux stencils "
            "are not defined")
    return Classification(PointClass.FLUX, flux[0])


def check_boundary_conditions(dim: int, bcs: Mapping[str, FaceCondition]):
    """Reject missing faces and flux faces that share an edge."""
    faces = faces_for(dim)
    missing = [f for f in faces if f not in bcs]
    if missing:
        raise ValueError(f"missing boundary conditions for {missing}")
    extra = [f for f in bcs if f not in faces]
    if extra:
        raise ValueError(f"unknown faces {extra}")
    flux = [f for f in faces if bcs[f].is_flux]
    for f1, f2 in itertools.combinations(flux, 2):
        if FACE_AXIS[f1][0] != FACE_AXIS[f2][0]:
            raise UnsupportedConfigurationError(
                f"adjacent flux faces {f1} and {f2} share a corner")


def classify_all(grid: Grid, bcs: Mapping[str, FaceCondition]) -> dict:
    """Vectorized classification: maps 'interior', flux face names and
    'dirichlet' to integer index arrays of shape (n, dim)."""
    check_boundary_conditions(grid.dim, bcs)
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    interior = np.all((idx > 0) & (idx < grid.N), axis=1)
    dirichlet = np.zeros(len(idx), dtype=bool)
    flux_hits = {}
    for face in faces_for(grid.dim):
        axis, side = FACE_AXIS[face]
        on = idx[:, axis] == (grid.N if side else 0)
        if bcs[face].is_flux:
            flux_hits[face] = on
        else:
            dirichlet |= on
    out = {"interior": idx[interior]}
    for face, on in flux_hits.items():
        out[face] = idx[on & ~dirichlet]
    out["dirichlet"] = idx[dirichlet]
    return out
