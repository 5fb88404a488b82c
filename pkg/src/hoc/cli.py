"""``hoc`` command-line front end.

    hoc derive     --config run.toml [--out DIR]
    hoc check      --config run.toml [--out DIR] [--export-matrix mm]
    hoc solve      --config run.toml [--out DIR] [--export-matrix mm]
    hoc refine     --config run.toml [--out DIR]
    hoc truncation --config run.toml [--out DIR]

Exit codes: 0 ok, 2 configuration, 3 infeasible/inconsistent derivation,
4 singular or non-convergent solve, 5 unsupported configuration, 1 other.
``HOC_THREADS`` caps BLAS threads and concurrent refinement levels
(default 1, the deterministic reference path).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DERIVE, EXIT_SOLVE, EXIT_UNSUPPORTED = 0, 1, 2, 3, 4, 5
COMMANDS = ("derive", "check", "solve", "refine", "truncation")


def threads_from_env() -> int:
    raw = os.environ.get("HOC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise SystemExit(f"hoc: HOC_THREADS must be a positive integer, got {raw!r}")
    return n


def exit_code(exc: BaseException) -> int:
    from . import errors as E
    if isinstance(exc, E.ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (E.InfeasibleError, E.InconsistentSystemError)):
        return EXIT_DERIVE
    if isinstance(exc, (E.SingularMatrixError, E.ConvergenceError)):
        return EXIT_SOLVE
    if isinstance(exc, E.UnsupportedConfigurationError):
        return EXIT_UNSUPPORTED
    return EXIT_OTHER


def write_atomic(path: Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _report(pairs) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


# -- derive -------------------------------------------------------------------

def _closed_by_kind(cfg, kind, h, sigma):
    from . import closed_form as cf
    from .errors import UnsupportedConfigurationError
    p = cfg.pde
    try:
        k = cf.SchemeKind(kind)
    except ValueError:
        raise UnsupportedConfigurationError(
            f"unknown closed-form kind {kind!r}; expected one of "
            f"{[s.value for s in cf.SchemeKind if s is not cf.SchemeKind.GUPTA_RHS_2D]}")
    calls = {
        cf.SchemeKind.INTERIOR_2D: lambda: cf.interior_2d(h, p.K),
        cf.SchemeKind.ROBIN_2D: lambda: cf.robin_2d(h, p.K, sigma),
        cf.SchemeKind.SUPER_THIRD_2D: lambda: cf.super_third_2d(h, p.K, sigma),
        cf.SchemeKind.ANIS_INTERIOR_2D: lambda: cf.anis_interior_2d(h, p.A11, p.A12, p.K),
        cf.SchemeKind.ANIS_ROBIN_2D: lambda: cf.anis_robin_2d(h, p.A11, p.A12, sigma),
        cf.SchemeKind.INTERIOR_3D: lambda: cf.interior_3d(h, p.K),
        cf.SchemeKind.ROBIN_3D: lambda: cf.robin_3d(h, sigma, cfg.derive.center),
    }
    if k not in calls:
        raise UnsupportedConfigurationError(f"{kind!r} is not a stencil")
    return k, calls[k]()


def run_derive(cfg, out: Path, echo=print) -> int:
    from . import closed_form as cf
    from . import moments
    from . import schemes as S
    from .core import FaceCondition, face_normal
    from .errors import UnsupportedConfigurationError
    from .stencil import orient_scheme

    d = cfg.derive
    h, target, pde, opts = d.h, d.target, cfg.pde, cfg.scheme
    is_face = target != "interior"
    bc = cfg.bcs.get(target) if is_face else None
    sigma = d.sigma if d.sigma is not None else (bc.sigma if bc is not None else 0.0)
    conormal = bc.conormal if (bc is not None and bc.is_flux) else "symmetric"
    face_bc = FaceCondition.flux(sigma, conormal=conormal)
    super_third = opts.mode == "super_third"
    lines = [("target", target), ("mode", opts.mode), ("h", repr(h))]

    kind = None
    if d.kind is not None:
        if opts.mode != "closed_form":
            raise UnsupportedConfigurationError("derive.kind needs scheme.mode = 'closed_form'")
        kind, scheme = _closed_by_kind(cfg, d.kind, h, sigma)
        flux_kind = scheme.gamma != {}
        if flux_kind != is_face:
            raise UnsupportedConfigurationError(
                f"kind {d.kind!r} does not fit target {target!r}")
        if is_face:
            scheme = orient_scheme(scheme, target)
        super_third = kind in (cf.SchemeKind.SUPER_THIRD_2D, cf.SchemeKind.ANIS_ROBIN_2D)
        if kind is cf.SchemeKind.ANIS_ROBIN_2D:
            conormal = "upper"
        other = None
    else:
        use_closed = opts.mode != "derived" and not opts.sign_constrained
        closed = None
        if is_face:
            closed = S.closed_flux(pde, h, target, face_bc, super_third) if use_closed else None
            derived = S.derived_flux(pde, h, target, face_bc, super_third, opts)
        else:
            closed = (S.closed_interior(pde, h, opts.mode == "closed_form")
                      if use_closed else None)
            derived = S.derived_interior(pde, h, opts)
        if opts.mode == "closed_form":
            if closed is None:
                raise UnsupportedConfigurationError(f"no closed-form scheme for {target!r}")
            scheme, other = closed, derived
        else:
            scheme = derived
            other = closed if closed is not None else (
                S.closed_flux(pde, h, target, face_bc, super_third) if is_face
                else S.closed_interior(pde, h))

    if is_face:
        system = moments.flux_system(pde, h, face_normal(target, pde.dim), sigma,
                                     super_third=super_third, conormal=conormal)
    else:
        system = moments.interior_system(pde, h)
    if kind is not None:
        other = moments.solve_min_norm(system, allow_least_squares=True)
    lines.append(("moment_residual", f"{moments.relative_moment_residual(system, scheme):.4e}"))
    lines.append(("beta_sum", repr(scheme.beta_sum())))
    if other is not None:
        label = "derived" if opts.mode == "closed_form" else "closed_form"
        lines.append((f"max_abs_diff_vs_{label}", f"{scheme.max_abs_diff(other):.4e}"))
    if kind is cf.SchemeKind.ROBIN_3D:
        for variant in ("consistent", "printed"):
            s = orient_scheme(cf.robin_3d(h, sigma, variant), target)
            lines.append((f"moment_residual_center_{variant}",
                          f"{moments.relative_moment_residual(system, s):.4e}"))

    write_atomic(out / "stencil.csv", scheme.to_csv())
    report = _report(lines)
    write_atomic(out / "derive.txt", report)
    echo(scheme.to_csv() + report, end="")
    return EXIT_OK


# -- grid commands -------------------------------------------------------------

def _manufactured(cfg):
    from .errors import ConfigError
    from .verification import make_manufactured
    if cfg.example is None:
        raise ConfigError("study.example is required for this command")
    try:
        return make_manufactured(cfg.example, cfg.pde, **cfg.params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"study: {exc}") from exc


def _study(cfg, truncation=False):
    from .verification import Study
    return Study(_manufactured(cfg), cfg.bcs, cfg.Ns, cfg.lower, cfg.upper,
                 cfg.scheme, cfg.solver, truncation)


def _export(system, out, N, fmt):
    from .assembly import export_matrix_market
    if fmt == "mm":
        export_matrix_market(system, out / f"matrix_N{N}.mtx")


def run_check(cfg, out: Path, export=None, echo=print) -> int:
    from .assembly import assemble, m_matrix_check
    from .core import Grid
    from .schemes import build_schemes
    ex = _manufactured(cfg)
    bcs = ex.with_bcs(cfg.bcs)
    lines = []
    for N in cfg.Ns:
        grid = Grid(cfg.lower, cfg.upper, N)
        schemes = build_schemes(cfg.pde, grid.h, bcs, cfg.scheme)
        system = assemble(grid, cfg.pde, bcs, schemes, ex.f, u1=ex.u)
        r = m_matrix_check(system)
        if export:
            _export(system, out, N, export)
        lines += [(f"N{N}.{k}", v) for k, v in (
            ("is_m_matrix", r.is_m_matrix), ("sign_ok", r.sign_ok),
            ("weakly_diagonally_dominant", r.weakly_diagonally_dominant),
            ("has_strict_row", r.has_strict_row), ("irreducible", r.irreducible),
            ("violations", len(r.violations)))]
        for i, j, v in r.violations[:10]:
            lines.append((f"N{N}.violation", f"row {i} col {j} value {v:.4e}"))
    report = _report(lines)
    write_atomic(out / "check.txt", report)
    echo(report, end="")
    return EXIT_OK


def run_solve(cfg, out: Path, export=None, echo=print) -> int:
    from .verification import error_inf, solve_level
    study = _study(cfg)
    ex = study.example
    rows = ["N,h,unknowns,method,iterations,residual,err_inf"]
    for N in cfg.Ns:
        grid, _, system, x, stats = solve_level(study, N)
        if export:
            _export(system, out, N, export)
        err = error_inf(system.to_field(x, fill=ex.u), ex.u, grid, system.unknown_mask())
        rows.append(f"{N},{grid.h:.4e},{system.n},{stats.method},{stats.iterations},"
                    f"{stats.residual:.4e},{err:.4e}")
    text = "\n".join(rows) + "\n"
    write_atomic(out / (cfg.output or "solve.csv"), text)
    echo(text, end="")
    return EXIT_OK


def run_study(cfg, out: Path, truncation: bool, threads: int = 1, echo=print) -> int:
    from .verification import rows_to_csv, run_refinement
    rows = run_refinement(_study(cfg, truncation), workers=threads)
    text = rows_to_csv(rows, truncation)
    default = "truncation.csv" if truncation else "refine.csv"
    write_atomic(out / (cfg.output or default), text)
    echo(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hoc", description=(
        "High-order compact finite differences: derive stencils, certify "
        "M-matrices, solve and run refinement studies."))
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--out", default=".", help="output directory (default: .)")
    ap.add_argument("--export-matrix", choices=("mm",), default=None,
                    help="also write the assembled matrix (Matrix Market)")
    return ap


def run_command(cmd: str, cfg, out: Path, export=None, threads: int = 1, echo=print) -> int:
    out = Path(out)
    if cmd == "derive":
        return run_derive(cfg, out, echo)
    if cmd == "check":
        return run_check(cfg, out, export, echo)
    if cmd == "solve":
        return run_solve(cfg, out, export, echo)
    if cmd in ("refine", "truncation"):
        if cmd == "truncation":
            cfg = replace(cfg, truncation=True)
        return run_study(cfg, out, cfg.truncation, threads, echo)
    raise ValueError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = threads_from_env()

    from threadpoolctl import threadpool_limits

    from .config import parse_config
    from .errors import HocError
    try:
        cfg = parse_config(args.config)
        with threadpool_limits(limits=threads):
            return run_command(args.command, cfg, Path(args.out), args.export_matrix, threads)
    except HocError as exc:
        print(f"hoc: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"hoc: error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
