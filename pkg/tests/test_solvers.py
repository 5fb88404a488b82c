import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from hoc.assembly import assemble_2d
from hoc.core import FaceCondition, Grid, PdeSpec
from hoc.errors import ConvergenceError, SingularMatrixError
from hoc.schemes import SchemeOptions, build_schemes
from hoc.solvers import solve, solve_direct, solve_iterative
from hoc.verification import Study, SolverOptions, error_inf, make_manufactured, run_refinement

from conftest import face_bcs


def _system(N, pde, bcs, kind="smooth2d", mode="fourth_fext", f=None, u=None, **params):
    grid = Grid.unit(N)
    ex = make_manufactured(kind, pde, **params)
    data = ex.with_bcs(bcs)
    schemes = build_schemes(pde, grid.h, data, SchemeOptions(mode))
    return grid, ex, assemble_2d(grid, pde, data, schemes, f or ex.f, u1=u or ex.u)


def test_one_by_one():
    x = solve_direct((sp.csr_matrix([[2.0]]), np.array([4.0])))
    assert x == pytest.approx([2.0])


def test_quartic_dirichlet_is_exact():
    pde = PdeSpec()
    u = lambda x, y: x ** 4 - 2 * x ** 2 * y ** 2 + x * y ** 3 + y + 1
    f = lambda x, y: 12 * x ** 2 - 4 * y ** 2 - 4 * x ** 2 + 6 * x * y
    grid, _, sys = _system(16, pde, face_bcs(), f=f, u=u)
    x = solve_direct(sys)
    assert error_inf(sys.to_field(x, fill=u), u, grid, sys.unknown_mask()) <= 1e-10


def test_singular_matrix_detected():
    bcs = face_bcs()
    _, _, s0 = _system(8, PdeSpec(), bcs, mode="closed_form")
    _, _, s1 = _system(8, PdeSpec(K=1.0), bcs, mode="closed_form")
    L = s0.matrix.toarray()
    M = s1.matrix.toarray() - L
    lam = scipy.linalg.eigvals(L, M)
    K = -float(np.real(lam[np.argmin(np.abs(lam))]))
    _, _, sing = _system(8, PdeSpec(K=K), bcs, mode="closed_form")
    with pytest.raises(SingularMatrixError):
        solve_direct(sing)


def test_exactly_singular_pair():
    A = sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularMatrixError):
        solve_direct((A, np.array([1.0, 2.0])))


def test_cg_poisson_converges():
    _, _, sys = _system(64, PdeSpec(), face_bcs(), mode="closed_form")
    assert sys.symmetric
    x, stats = solve_iterative(sys, tol=1e-12, method="cg")
    assert stats.residual <= 1e-12
    assert stats.method == "cg" and stats.iterations > 0


def test_cg_rejects_nonsymmetric():
    _, _, sys = _system(16, PdeSpec(a=5.0, b=-100.0), face_bcs())
    assert not sys.symmetric
    with pytest.raises(ValueError):
        solve_iterative(sys, method="cg")


def test_iteration_cap():
    _, _, sys = _system(32, PdeSpec(), face_bcs(), mode="closed_form")
    with pytest.raises(ConvergenceError) as info:
        solve_iterative(sys, tol=1e-14, max_iters=3, method="bicgstab")
    assert info.value.stats.iterations == 3


@pytest.mark.parametrize("pde, bcs", [
    (PdeSpec(), face_bcs(west=FaceCondition.neumann())),
    (PdeSpec(K=-5.0), face_bcs(west=FaceCondition.flux(1.0))),
    (PdeSpec(K=20.0, a=1.0, b=2.0), face_bcs()),
])
def test_direct_and_iterative_agree(pde, bcs):
    tol = 1e-12
    _, _, sys = _system(32, pde, bcs)
    xd = solve_direct(sys)
    xi, _ = solve_iterative(sys, tol=tol, method="bicgstab")
    assert np.max(np.abs(xd - xi)) <= 10 * tol * np.max(np.abs(xd))


def test_auto_dispatch():
    _, _, sys = _system(16, PdeSpec(), face_bcs(), mode="closed_form")
    _, stats = solve(sys)
    assert stats.method == "direct"
    _, stats = solve(sys, direct_threshold=10)
    assert stats.method == "cg"


def test_tolerance_does_not_change_orders():
    ex = make_manufactured("smooth2d", PdeSpec())
    orders = []
    for tol in (1e-12, 1e-13):
        st = Study(ex, face_bcs(west=FaceCondition.neumann()), [16, 32, 64],
                   solver=SolverOptions(method="bicgstab", tol=tol))
        orders.append([r.order for r in run_refinement(st)[1:]])
    assert np.max(np.abs(np.subtract(*orders))) < 0.01
