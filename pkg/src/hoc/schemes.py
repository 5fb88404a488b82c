"""Pick a stencil for every point class of a problem.

Modes:

``closed_form``
    printed coefficient sets only; anything without one is rejected.
``fourth_fext``
    closed-form interior where one exists; 2D flux faces from the min-norm
    moment solution (3D faces closed form), using f one layer outside.
``super_third``
    flux faces without f-extension (x^4, y^4 rows dropped), closed form
    when printed, interior as in ``fourth_fext``.
``derived``
    every class from the moment engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from . import closed_form as cf
from . import moments
from .core import FaceCondition, PdeSpec, face_normal, faces_for
from .errors import UnsupportedConfigurationError
from .stencil import StencilScheme, orient_scheme

MODES = ("closed_form", "fourth_fext", "super_third", "derived")


@dataclass(frozen=True)
class SchemeOptions:
    mode: str = "fourth_fext"
    sign_constrained: bool = False
    delta: Optional[float] = None
    allow_least_squares: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown scheme mode {self.mode!r}; expected one of {MODES}")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")


def _symmetric_pde(pde: PdeSpec) -> bool:
    # invariant under the west->face maps
    return pde.isotropic and not pde.has_advection


def closed_interior(pde: PdeSpec, h: float, classical: bool = False) -> Optional[StencilScheme]:
    """Printed interior set for ``pde`` or None.

    For the 2D Helmholtz operator the classical stencil only satisfies
    every degree-4 moment at K = 0; elsewhere the general set is used
    unless ``classical`` asks for the classical one.
    """
    if pde.has_advection:
        return None
    if pde.dim == 3:
        return cf.interior_3d(h, pde.K)
    if pde.isotropic and pde.A11 == 1.0 and (pde.K == 0.0 or classical):
        return cf.interior_2d(h, pde.K)
    if pde.A11 == pde.A22:
        return cf.anis_interior_2d(h, pde.A11, pde.A12, pde.K)
    return None


def closed_flux(pde: PdeSpec, h: float, face: str, bc: FaceCondition,
                super_third: bool) -> Optional[StencilScheme]:
    if pde.has_advection:
        return None
    if pde.dim == 3:
        if super_third or pde.K != 0.0:
            return None
        return orient_scheme(cf.robin_3d(h, bc.sigma), face)
    if _symmetric_pde(pde) and pde.A11 == 1.0:
        make = cf.super_third_2d if super_third else cf.robin_2d
        return orient_scheme(make(h, pde.K, bc.sigma), face)
    if (not super_third and face == "west" and pde.K == 0.0
            and pde.A11 == pde.A22 and bc.conormal == "upper"):
        # the printed anisotropic set drops the x^4, y^4 rows
        return cf.anis_robin_2d(h, pde.A11, pde.A12, bc.sigma)
    return None


def _solve(sys, opts: SchemeOptions, pde: PdeSpec) -> StencilScheme:
    if opts.sign_constrained:
        return moments.solve_sign_constrained(sys, delta=opts.delta)
    # advection leaves a small inconsistency (O(h^2) interior with A12 != 0,
    # O(h^3) on faces with tangential drift); take the SVD solution there
    lsq = opts.allow_least_squares or pde.has_advection
    return moments.solve_min_norm(sys, allow_least_squares=lsq)


def derived_interior(pde: PdeSpec, h: float, opts: SchemeOptions) -> StencilScheme:
    return _solve(moments.interior_system(pde, h), opts, pde)


def derived_flux(pde: PdeSpec, h: float, face: str, bc: FaceCondition,
                 super_third: bool, opts: SchemeOptions) -> StencilScheme:
    sys = moments.flux_system(pde, h, face_normal(face, pde.dim), bc.sigma,
                              super_third=super_third, conormal=bc.conormal)
    return _solve(sys, opts, pde)


def build_schemes(pde: PdeSpec, h: float, bcs: Mapping[str, FaceCondition],
                  opts: SchemeOptions = SchemeOptions()) -> dict:
    """Map 'interior' and every flux face to an oriented scheme."""
    if pde.is_zero:
        raise ValueError("the PDE operator is identically zero")
    super_third = opts.mode == "super_third"
    use_closed = opts.mode != "derived" and not opts.sign_constrained
    # 2D fourth_fext takes flux faces from the min-norm solve; in 3D the
    # printed face set is kept
    closed_faces = use_closed and (opts.mode != "fourth_fext" or pde.dim == 3)
    out = {}
    classical = opts.mode == "closed_form"
    interior = closed_interior(pde, h, classical) if use_closed else None
    if interior is None:
        if opts.mode == "closed_form":
            raise UnsupportedConfigurationError(
                "no closed-form interior scheme for this PDE")
        interior = derived_interior(pde, h, opts)
    out["interior"] = interior
    for face in faces_for(pde.dim):
        bc = bcs[face]
        if not bc.is_flux:
            continue
        s = closed_flux(pde, h, face, bc, super_third) if closed_faces else None
        if s is None:
            if opts.mode == "closed_form":
                raise UnsupportedConfigurationError(
                    f"no closed-form flux scheme for face {face!r}")
            s = derived_flux(pde, h, face, bc, super_third, opts)
        out[face] = s
    return out
