"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary and
on stdout) before asserting, so a failing criterion still reports what
was measured.
"""

import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from hoc import closed_form as cf
from hoc import moments
from hoc.assembly import assemble, m_matrix_check, quadratic_extrapolate
from hoc.core import FaceCondition, Grid, PdeSpec, face_normal
from hoc.errors import InfeasibleError
from hoc.schemes import SchemeOptions, build_schemes
from hoc.solvers import solve
from hoc.verification import (SolverOptions, Study, convergence_order, error_inf,
                              make_manufactured, run_refinement)

from conftest import ACCEPTANCE, face_bcs

BIG = SolverOptions(direct_threshold=300_000)
NEU = FaceCondition.neumann()


def record(k, checks):
    """checks: list of (label, ok, measured) tuples."""
    ok = all(c[1] for c in checks)
    bad = [f"{label} [{measured}]" for label, good, measured in checks if not good]
    detail = "; ".join(bad) if bad else "; ".join(f"{label} [{m}]" for label, _, m in checks)
    ACCEPTANCE[k] = (ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def refine(kind, pde, bcs, Ns, mode="fourth_fext", dim=2, solver=BIG, truncation=False, **params):
    ex = make_manufactured(kind, pde, **params)
    st = Study(ex, bcs, Ns, lower=(0.0,) * dim, upper=(1.0,) * dim,
               scheme=SchemeOptions(mode), solver=solver, truncation=truncation)
    return {r.N: r for r in run_refinement(st)}


def within(value, target, factor):
    return target / factor <= value <= target * factor


def fmt_orders(rows, Ns, attr="order"):
    return ", ".join(f"{N}:{getattr(rows[N], attr):.3f}" for N in Ns)


# -- 1 -----------------------------------------------------------------------

def test_criterion_01_exactness_oracle():
    rng = np.random.default_rng(1)
    W, W3 = (-1, 0), (-1, 0, 0)
    worst = {}

    def check(name, sys, scheme):
        worst[name] = max(worst.get(name, 0.0), moments.relative_moment_residual(sys, scheme))

    for h in (1.0, 0.1):
        check("interior K=0", moments.interior_system(PdeSpec(), h), cf.interior_2d(h))
        check("face K=0", moments.flux_system(PdeSpec(), h, W, 0.0), cf.robin_2d(h))
    for _ in range(5):
        K, sigma, h = -rng.uniform(0, 100), rng.uniform(-10, 10), rng.uniform(0.005, 0.5)
        check("helmholtz robin", moments.flux_system(PdeSpec(K=K), h, W, sigma), cf.robin_2d(h, K, sigma))
    for _ in range(5):
        K, sigma, h = -rng.uniform(0, 100), rng.uniform(0, 10), rng.uniform(0.005, 0.5)
        check("super-third", moments.flux_system(PdeSpec(K=K), h, W, sigma, super_third=True),
              cf.super_third_2d(h, K, sigma))
    for _ in range(5):
        A12 = rng.uniform(-1, 1)
        A11 = 2 * abs(A12) + rng.uniform(0.05, 2)
        K, h = -rng.uniform(0, 50), rng.uniform(0.005, 0.5)
        pde = PdeSpec(A11=A11, A12=A12, A22=A11, K=K)
        check("anisotropic interior", moments.interior_system(pde, h), cf.anis_interior_2d(h, A11, A12, K))
    for A11, A12, sigma in ((1.0, 0.0, 0.0), (3.0, 0.5, 2.0), (2.0, -0.6, -1.5)):
        h = rng.uniform(0.01, 0.5)
        pde = PdeSpec(A11=A11, A12=A12, A22=A11)
        sys = moments.flux_system(pde, h, W, sigma, drop=moments.pure_quartics(2), conormal="upper")
        check("anisotropic robin", sys, cf.anis_robin_2d(h, A11, A12, sigma))
    for sigma in (0.0, 2.0):
        for h in (1.0, 0.25, 0.05):
            check("3d interior", moments.interior_system(PdeSpec(dim=3), h), cf.interior_3d(h))
            check("3d robin", moments.flux_system(PdeSpec(dim=3), h, W3, sigma), cf.robin_3d(h, sigma))
    record(1, [(name, r <= 1e-10, f"{r:.1e}") for name, r in worst.items()])


# -- 2 -----------------------------------------------------------------------

def _end_to_end(dim, mono, bcs, mode):
    pde = PdeSpec(dim=dim)
    ex = make_manufactured("polynomial", pde, poly={mono: 1.0})
    grid = Grid.unit(16, dim=dim)
    data = ex.with_bcs(bcs)
    schemes = build_schemes(pde, grid.h, data, SchemeOptions(mode))
    system = assemble(grid, pde, data, schemes, ex.f, u1=ex.u)
    x, _ = solve(system)
    return error_inf(system.to_field(x, fill=ex.u), ex.u, grid, system.unknown_mask())


def test_criterion_02_quartic_exactness():
    checks = []
    cases = [
        ("2d interior", 2, face_bcs()),
        ("2d robin face", 2, face_bcs(west=NEU)),
        ("3d interior", 3, face_bcs(3)),
        ("3d robin face", 3, face_bcs(3, west=NEU)),
    ]
    for name, dim, bcs in cases:
        worst = max(_end_to_end(dim, m, bcs, "closed_form") for m in moments.monomials(dim))
        checks.append((name, worst <= 1e-9, f"{worst:.1e}"))
    pure = [(4, 0), (0, 4)]
    mixed = max(_end_to_end(2, m, face_bcs(west=NEU), "super_third")
                for m in moments.monomials(2) if m not in pure)
    x4 = _end_to_end(2, (4, 0), face_bcs(west=NEU), "super_third")
    checks.append(("super-third 13 quartics", mixed <= 1e-9, f"{mixed:.1e}"))
    checks.append(("super-third misses x^4", x4 > 1e-9, f"{x4:.1e}"))
    record(2, checks)


# -- 3 -----------------------------------------------------------------------

def test_criterion_03_table1_top():
    neu = refine("smooth2d", PdeSpec(), face_bcs(west=NEU), [16, 32, 64, 128, 256])
    rob = refine("smooth2d", PdeSpec(), face_bcs(west=FaceCondition.flux(-20.0)), [16, 32, 64])
    record(3, [
        ("neumann err(64) ~ 8.7602e-08", abs(neu[64].err_inf / 8.7602e-08 - 1) <= 0.25,
         f"{neu[64].err_inf:.4e}"),
        ("neumann orders in [3.9,4.1]", all(3.9 <= neu[N].order <= 4.1 for N in (32, 64, 128, 256)),
         fmt_orders(neu, (32, 64, 128, 256))),
        ("robin -20 err(64) ~ 6.6187e-08", abs(rob[64].err_inf / 6.6187e-08 - 1) <= 0.25,
         f"{rob[64].err_inf:.4e}"),
    ])


# -- 4 -----------------------------------------------------------------------

def test_criterion_04_table1_bottom():
    rows = refine("oscillatory2d", PdeSpec(K=2000.0), face_bcs(west=NEU), [64, 128, 256, 512],
                  k1=5, k2=50)
    record(4, [
        ("err(256) within 2x of 1.0539e-05", within(rows[256].err_inf, 1.0539e-05, 2.0),
         f"{rows[256].err_inf:.4e}, ratio {rows[256].err_inf / 1.0539e-05:.3f}"),
        ("orders >= 3.9", all(rows[N].order >= 3.9 for N in (128, 256, 512)),
         fmt_orders(rows, (128, 256, 512))),
    ])


# -- 5 -----------------------------------------------------------------------

def test_criterion_05_table3():
    b = refine("oscillatory2d", PdeSpec(K=2000.0), face_bcs(west=NEU), [16, 32, 64, 128, 256, 512],
               mode="super_third", k1=5, k2=50)
    a = refine("smooth2d", PdeSpec(K=200.0), face_bcs(west=NEU), [8, 16, 32, 64, 128, 256, 512],
               mode="super_third")
    avg = float(np.mean([r.order for r in a.values() if r.order is not None]))
    record(5, [
        ("3(b) orders in [3.9,4.6]", all(3.9 <= b[N].order <= 4.6 for N in (32, 64, 128, 256, 512)),
         fmt_orders(b, (32, 64, 128, 256, 512))),
        ("3(a) average order >= 3.0", avg >= 3.0, f"{avg:.3f}"),
    ])


# -- 6 -----------------------------------------------------------------------

def test_criterion_06_tables4_5():
    t4 = refine("smooth2d", PdeSpec(K=20.0, a=1.0, b=2.0), face_bcs(), [16, 32, 64, 128, 256])
    t5 = refine("oscillatory2d", PdeSpec(K=50.0, a=1.0, b=-5.0), face_bcs(west=FaceCondition.flux(20.0)),
                [16, 32, 64, 128, 256], k1=5, k2=50)
    record(6, [
        ("4(a) err(64) within 2x of 4.1993e-07", within(t4[64].err_inf, 4.1993e-07, 2.0),
         f"{t4[64].err_inf:.4e}, ratio {t4[64].err_inf / 4.1993e-07:.3f}"),
        ("4(a) orders >= 3.95", all(t4[N].order >= 3.95 for N in (32, 64, 128, 256)),
         fmt_orders(t4, (32, 64, 128, 256))),
        ("5 robin orders >= 3.95", all(t5[N].order >= 3.95 for N in (32, 64, 128, 256)),
         fmt_orders(t5, (32, 64, 128, 256))),
    ])


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_table6():
    d = refine("oscillatory2d", PdeSpec(A11=3.0, A12=0.5, A22=3.0, K=20.0, a=50.0, b=-1.0),
               face_bcs(), [16, 32, 64, 128, 256], truncation=True, k1=3, k2=15)
    r = refine("oscillatory2d", PdeSpec(A11=1.0, A12=0.25, A22=1.0, K=-2.0, a=1.0, b=-5.0),
               face_bcs(west=FaceCondition.flux(-3.0)), [16, 32, 64, 128, 256], k1=2, k2=1)
    record(7, [
        ("dirichlet orders >= 3.85", all(d[N].order >= 3.85 for N in (64, 128, 256)),
         fmt_orders(d, (64, 128, 256))),
        ("dirichlet T_h orders >= 3.9", all(d[N].t_order >= 3.9 for N in (64, 128, 256)),
         fmt_orders(d, (64, 128, 256), "t_order")),
        ("robin orders >= 3.4", all(r[N].order >= 3.4 for N in (32, 64, 128, 256)),
         fmt_orders(r, (32, 64, 128, 256))),
    ])


# -- 8 -----------------------------------------------------------------------

def test_criterion_08_table7():
    solver = SolverOptions(method="bicgstab")
    bcs = face_bcs(3, west=FaceCondition.flux(2.0))
    with threadpool_limits(limits=1):
        rows = refine("oscillatory3d", PdeSpec(dim=3), bcs, [8, 16, 32], dim=3, solver=solver,
                      k1=1, k2=2, k3=10)
        t0 = time.perf_counter()
        last = refine("oscillatory3d", PdeSpec(dim=3), bcs, [64], dim=3, solver=solver,
                      k1=1, k2=2, k3=10)
        elapsed = time.perf_counter() - t0
    rows[64] = last[64]
    o64 = convergence_order(rows[32].err_inf, rows[64].err_inf)
    record(8, [
        ("err(32) ~ 2.3691e-05", abs(rows[32].err_inf / 2.3691e-05 - 1) <= 0.25, f"{rows[32].err_inf:.4e}"),
        ("orders >= 3.9", rows[16].order >= 3.9 and rows[32].order >= 3.9 and o64 >= 3.9,
         f"16:{rows[16].order:.3f}, 32:{rows[32].order:.3f}, 64:{o64:.3f}"),
        ("N=64 <= 60 s", elapsed <= 60.0, f"{elapsed:.1f} s"),
    ])


# -- 9 -----------------------------------------------------------------------

def _mm_report(pde, bcs, N, mode):
    grid = Grid.unit(N)
    ex = make_manufactured("smooth2d", pde)
    data = ex.with_bcs(bcs)
    schemes = build_schemes(pde, grid.h, data, SchemeOptions(mode))
    return m_matrix_check(assemble(grid, pde, data, schemes, ex.f, u1=ex.u))


def test_criterion_09_m_matrix():
    cases = [
        ("poisson dirichlet", PdeSpec(), face_bcs(), "fourth_fext"),
        ("poisson west neumann", PdeSpec(), face_bcs(west=NEU), "fourth_fext"),
        ("helmholtz K=-5 robin 1", PdeSpec(K=-5.0), face_bcs(west=FaceCondition.flux(1.0)), "fourth_fext"),
        ("super-third K=-1 robin 2", PdeSpec(K=-1.0), face_bcs(west=FaceCondition.flux(2.0)), "super_third"),
        ("anisotropic A12=0.3", PdeSpec(A11=1.0, A12=0.3, A22=1.0), face_bcs(), "fourth_fext"),
    ]
    checks = []
    for name, pde, bcs, mode in cases:
        ok = all(_mm_report(pde, bcs, N, mode).is_m_matrix for N in (16, 32))
        checks.append((name, ok, "certified" if ok else "not certified"))
    rep = _mm_report(PdeSpec(K=2000.0), face_bcs(), 16, "closed_form")
    checks.append(("helmholtz K=2000 sign violation", not rep.sign_ok and bool(rep.violations),
                   f"{len(rep.violations)} violations"))
    record(9, checks)


# -- 10 ----------------------------------------------------------------------

def test_criterion_10_properties():
    rng = np.random.default_rng(7)
    gap = 0.0
    for dim in (2, 3):
        pde = PdeSpec(dim=dim)
        for face in (None, "west", "north"):
            h = rng.uniform(0.01, 1.0)
            flux = None if face is None else (face_normal(face, dim), 0.0)
            sys = (moments.interior_system(pde, h) if face is None
                   else moments.flux_system(pde, h, flux[0], 0.0))
            for _ in range(5):
                x = rng.normal(size=len(sys.columns))
                cols = sys.family_columns("beta")
                x[cols[0]] += 1.0 - x[cols].sum()
                s = moments.scheme_from_vector(sys, x)
                scale = moments.residual_scale(sys, s)
                gap = max(gap, abs(moments.exactness_probe(s, pde, flux=flux)
                                   - moments.moment_residual(sys, s)) / scale)

    sign_ok, tried = True, 0
    for _ in range(10):
        h, K, sigma = rng.uniform(0.02, 0.5), -rng.uniform(0, 50), rng.uniform(0, 5)
        sys = moments.flux_system(PdeSpec(K=K), h, (-1, 0), sigma, super_third=bool(rng.integers(2)))
        try:
            s = moments.solve_sign_constrained(sys)
        except InfeasibleError:
            continue
        tried += 1
        tol = 1e-9 / h ** 2
        sign_ok &= s.alpha[(0, 0)] <= -1 / h ** 2 + tol
        sign_ok &= all(c >= -tol for off, c in s.alpha.items() if off != (0, 0))
        sign_ok &= moments.relative_moment_residual(sys, s) <= 1e-9

    ext = 0.0
    for _ in range(20):
        c0, c1, c2 = rng.normal(size=3)
        h = rng.uniform(0.01, 1.0)
        q = lambda x: c0 + c1 * x + c2 * x * x
        ext = max(ext, abs(quadratic_extrapolate(q(0), q(h), q(2 * h)) - q(-h)))

    order = convergence_order(1.4127e-06, 8.7602e-08)
    record(10, [
        ("two-path equivalence", gap <= 1e-12, f"{gap:.1e}"),
        ("sign constraints hold", sign_ok and tried > 0, f"{tried} feasible cases"),
        ("quadratic extension exact", ext <= 1e-12, f"{ext:.1e}"),
        ("order 4.0114 from printed errors", abs(order - 4.0114) <= 1e-4, f"{order:.5f}"),
    ])
