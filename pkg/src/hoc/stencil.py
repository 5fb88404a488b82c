"""Stencil coefficient containers, orientation and CSV serialization."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import faces_for


class SchemeMode(enum.Enum):
    INTERIOR = "interior"
    FOURTH_FEXT = "fourth_fext"
    SUPER_THIRD = "super_third"


FAMILIES = ("alpha", "beta", "gamma")


@dataclass(frozen=True)
class StencilScheme:
    """Coefficients of ``sum alpha U = sum beta f + sum gamma g``.

    Offsets are integer tuples relative to the master grid point. ``alpha``
    carries units of 1/length^2, ``beta`` is dimensionless and ``gamma``
    has units of 1/length.
    """

    alpha: dict
    beta: dict
    gamma: dict = field(default_factory=dict)
    mode: SchemeMode = SchemeMode.INTERIOR
    face: Optional[str] = None
    h: float = 1.0
    residual: Optional[float] = None

    def __post_init__(self):
        for name in FAMILIES:
            coeffs = {tuple(int(v) for v in k): float(c)
                      for k, c in getattr(self, name).items()}
            for off in coeffs:
                if any(abs(v) > 1 for v in off):
                    raise ValueError(f"{name} offset {off} is not compact")
            object.__setattr__(self, name, coeffs)
        dims = {len(k) for name in FAMILIES for k in getattr(self, name)}
        if len(dims) > 1:
            raise ValueError(f"mixed offset dimensions {sorted(dims)}")
        if self.mode is SchemeMode.INTERIOR and self.gamma:
            raise ValueError("interior schemes carry no gamma weights")

    @property
    def dim(self) -> int:
        return len(next(iter(self.alpha)))

    @property
    def center(self) -> tuple:
        return (0,) * self.dim

    def beta_sum(self) -> float:
        return float(sum(self.beta.values()))

    def family(self, name) -> dict:
        return getattr(self, name)

    def nonzero(self, tol=0.0) -> "StencilScheme":
        """Drop coefficients with magnitude <= tol (relative to family max)."""
        kept = {}
        for name in FAMILIES:
            coeffs = self.family(name)
            scale = max((abs(c) for c in coeffs.values()), default=0.0)
            kept[name] = {k: c for k, c in coeffs.items()
                          if abs(c) > tol * scale}
        return replace(self, **kept)

    def scaled(self, c) -> "StencilScheme":
        return replace(self, **{name: {k: c * v for k, v in self.family(name).items()}
                                for name in FAMILIES})

    def max_abs_diff(self, other: "StencilScheme") -> float:
        diff = 0.0
        for name in FAMILIES:
            a, b = self.family(name), other.family(name)
            for k in set(a) | set(b):
                diff = max(diff, abs(a.get(k, 0.0) - b.get(k, 0.0)))
        return diff

    def to_csv(self) -> str:
        return scheme_to_csv(self)


def _orientation(face, dim):
    """Map a west-face offset to the corresponding offset on ``face``."""
    if face not in faces_for(dim):
        raise ValueError(f"invalid face {face!r} for dim={dim}")
    if dim == 2:
        table = {
            "west": lambda i, j: (i, j),
            "east": lambda i, j: (-i, j),
            "south": lambda i, j: (j, i),
            "north": lambda i, j: (j, -i),
        }
    else:
        table = {
            "west": lambda i, j, k: (i, j, k),
            "east": lambda i, j, k: (-i, j, k),
            "south": lambda i, j, k: (j, i, k),
            "north": lambda i, j, k: (j, -i, k),
            "bottom": lambda i, j, k: (k, j, i),
            "top": lambda i, j, k: (k, j, -i),
        }
    return table[face]


def orient_scheme(scheme: StencilScheme, face: str) -> StencilScheme:
    """Carry a west-face scheme over to ``face`` by reflection/permutation.

    Only valid when the PDE is invariant under the same map (isotropic
    diffusion, no advection). Applying ``east`` twice is the identity.
    """
    f = _orientation(face, scheme.dim)
    moved = {name: {f(*k): v for k, v in scheme.family(name).items()}
             for name in FAMILIES}
    return replace(scheme, face=face, **moved)


def scheme_to_csv(scheme: StencilScheme) -> str:
    """Serialize as ``family,di,dj,dk,value`` rows (dk empty in 2D)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "di", "dj", "dk", "value"])
    for name in FAMILIES:
        for off in sorted(scheme.family(name)):
            dk = off[2] if len(off) == 3 else ""
            w.writerow([name, off[0], off[1], dk,
                        repr(float(scheme.family(name)[off]))])
    return buf.getvalue()


def scheme_from_csv(text: str, mode=SchemeMode.INTERIOR, face=None, h=1.0) -> StencilScheme:
    fams = {name: {} for name in FAMILIES}
    for row in csv.DictReader(io.StringIO(text)):
        off = (int(row["di"]), int(row["dj"]))
        if row["dk"] not in ("", None):
            off = off + (int(row["dk"]),)
        fams[row["family"]][off] = float(row["value"])
    return StencilScheme(fams["alpha"], fams["beta"], fams["gamma"],
                         mode=mode, face=face, h=h)


def as_arrays(coeffs: dict):
    """(offsets int array (n, dim), values array (n,)) in sorted order."""
    keys = sorted(coeffs)
    if not keys:
        return np.zeros((0, 0), dtype=int), np.zeros(0)
    return np.array(keys, dtype=int), np.array([coeffs[k] for k in keys])
