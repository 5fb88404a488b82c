"""TOML run configuration for the command-line front end.

Every table and key is checked against a fixed schema; anything unknown is
rejected rather than ignored. A minimal file::

    [pde]
    K = 0.0

    [domain]
    N = [16, 32, 64]

    [bc.west]
    kind = "neumann"

    [study]
    example = "smooth2d"

Faces without a ``[bc.<face>]`` table are Dirichlet with exact data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from .core import FaceCondition, PdeSpec, check_boundary_conditions, faces_for
from .errors import ConfigError, HocError
from .schemes import MODES, SchemeOptions
from .verification import ExampleKind, SolverOptions, check_doubling

SOLVER_METHODS = ("auto", "direct", "cg", "bicgstab")
BC_KINDS = ("dirichlet", "neumann", "robin", "flux")

_SCHEMA = {
    "pde": {"dim", "A11", "A12", "A22", "a", "b", "K"},
    "domain": {"lower", "upper", "N"},
    "scheme": {"mode", "sign_constrained", "delta", "allow_least_squares"},
    "solver": {"method", "tol", "max_iters", "direct_threshold"},
    "study": {"example", "params", "output", "truncation"},
    "derive": {"target", "kind", "h", "sigma", "center"},
}
_BC_KEYS = {"kind", "sigma", "conormal"}


@dataclass(frozen=True)
class DeriveOptions:
    target: str = "interior"
    kind: Optional[str] = None
    h: float = 1.0
    sigma: Optional[float] = None
    center: str = "consistent"


@dataclass(frozen=True)
class RunConfig:
    pde: PdeSpec
    lower: tuple
    upper: tuple
    Ns: tuple
    bcs: dict
    scheme: SchemeOptions = SchemeOptions()
    solver: SolverOptions = SolverOptions()
    example: Optional[str] = None
    params: dict = field(default_factory=dict)
    output: Optional[str] = None
    truncation: bool = False
    derive: DeriveOptions = DeriveOptions()
    source: Optional[str] = None


def _number(table, key, name, default, kind=float):
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{name}.{key} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _flag(table, key, name, default=False):
    v = table.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{name}.{key} must be true or false, got {v!r}")
    return v


def _string(table, key, name, default=None, choices=None):
    v = table.get(key, default)
    if v is None:
        return None
    if not isinstance(v, str):
        raise ConfigError(f"{name}.{key} must be a string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(f"{name}.{key} = {v!r}; expected one of {list(choices)}")
    return v


def _check_keys(raw: dict):
    unknown = [k for k in raw if k not in _SCHEMA and k != "bc"]
    if unknown:
        raise ConfigError(f"unknown table(s) {unknown}")
    for name, allowed in _SCHEMA.items():
        table = raw.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = sorted(set(table) - allowed)
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {extra}")


def _parse_bcs(raw_bc, dim) -> dict:
    if not isinstance(raw_bc, dict):
        raise ConfigError("[bc] must be a table of faces")
    faces = faces_for(dim)
    bad = [f for f in raw_bc if f not in faces]
    if bad:
        raise ConfigError(f"unknown face(s) in [bc]: {bad}; valid faces are {list(faces)}")
    out = {}
    for face in faces:
        t = raw_bc.get(face, {"kind": "dirichlet"})
        name = f"bc.{face}"
        if not isinstance(t, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = sorted(set(t) - _BC_KEYS)
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {extra}")
        kind = _string(t, "kind", name, "dirichlet", BC_KINDS)
        sigma = _number(t, "sigma", name, 0.0)
        conormal = _string(t, "conormal", name, "symmetric", ("symmetric", "upper"))
        if kind == "dirichlet":
            if "sigma" in t or "conormal" in t:
                raise ConfigError(f"{name}: sigma/conormal only apply to flux faces")
            out[face] = FaceCondition.dirichlet()
        elif kind == "neumann":
            if sigma != 0.0:
                raise ConfigError(f"{name}: a Neumann face has sigma = 0")
            out[face] = FaceCondition.neumann(conormal=conormal)
        else:
            out[face] = FaceCondition.flux(sigma, conormal=conormal)
    return out


def build_config(raw: dict, source: Optional[str] = None) -> RunConfig:
    """Validate a decoded TOML document."""
    _check_keys(raw)
    p = raw.get("pde", {})
    dim = _number(p, "dim", "pde", 2, int)
    try:
        pde = PdeSpec(dim=dim, **{k: _number(p, k, "pde", d) for k, d in
                                  (("A11", 1.0), ("A12", 0.0), ("A22", 1.0),
                                   ("a", 0.0), ("b", 0.0), ("K", 0.0))})
    except (ValueError, HocError) as exc:
        raise ConfigError(f"pde: {exc}") from exc
    if pde.is_zero:
        raise ConfigError("pde: the operator is identically zero")
    if not pde.well_posed:
        raise ConfigError("pde: diffusion matrix is not elliptic (A12^2 >= A11 A22)")

    d = raw.get("domain", {})
    lower = tuple(float(v) for v in d.get("lower", [0.0] * dim))
    upper = tuple(float(v) for v in d.get("upper", [1.0] * dim))
    if len(lower) != dim or len(upper) != dim:
        raise ConfigError(f"domain.lower/upper need {dim} entries")
    if any(u - l <= 0 for l, u in zip(lower, upper)):
        raise ConfigError("domain.upper must exceed domain.lower")
    N = d.get("N", 16)
    Ns = tuple(N) if isinstance(N, list) else (N,)
    if not Ns or any(isinstance(n, bool) or not isinstance(n, int) or n < 2 for n in Ns):
        raise ConfigError(f"domain.N must be an integer >= 2 or a list of them, got {N!r}")
    if len(Ns) > 1:
        try:
            check_doubling(Ns)
        except ValueError as exc:
            raise ConfigError(f"domain.N: {exc}") from exc

    bcs = _parse_bcs(raw.get("bc", {}), dim)
    try:
        check_boundary_conditions(dim, bcs)
    except (ValueError, HocError) as exc:
        raise ConfigError(f"bc: {exc}") from exc

    s = raw.get("scheme", {})
    try:
        scheme = SchemeOptions(
            mode=_string(s, "mode", "scheme", "fourth_fext", MODES),
            sign_constrained=_flag(s, "sign_constrained", "scheme"),
            delta=_number(s, "delta", "scheme", None),
            allow_least_squares=_flag(s, "allow_least_squares", "scheme"))
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from exc

    v = raw.get("solver", {})
    solver = SolverOptions(
        method=_string(v, "method", "solver", "auto", SOLVER_METHODS),
        tol=_number(v, "tol", "solver", 1e-12),
        max_iters=_number(v, "max_iters", "solver", 10_000, int),
        direct_threshold=_number(v, "direct_threshold", "solver", 200_000, int))
    if solver.tol <= 0 or solver.max_iters <= 0 or solver.direct_threshold < 0:
        raise ConfigError("solver: tol and max_iters must be positive")

    st = raw.get("study", {})
    example = _string(st, "example", "study", None, [k.value for k in ExampleKind])
    params = st.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("study.params must be a table")

    dv = raw.get("derive", {})
    derive = DeriveOptions(
        target=_string(dv, "target", "derive", "interior", ("interior",) + faces_for(dim)),
        kind=_string(dv, "kind", "derive", None),
        h=_number(dv, "h", "derive", 1.0),
        sigma=_number(dv, "sigma", "derive", None),
        center=_string(dv, "center", "derive", "consistent", ("consistent", "printed")))
    if derive.h <= 0:
        raise ConfigError("derive.h must be positive")

    return RunConfig(pde=pde, lower=lower, upper=upper, Ns=Ns, bcs=bcs,
                     scheme=scheme, solver=solver, example=example,
                     params=dict(params), output=_string(st, "output", "study"),
                     truncation=_flag(st, "truncation", "study"), derive=derive,
                     source=source)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # the message already carries "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from exc
    return build_config(raw, str(path))
