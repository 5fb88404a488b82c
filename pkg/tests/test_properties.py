import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from hoc import closed_form as cf
from hoc import moments
from hoc.assembly import quadratic_extrapolate, source_extension
from hoc.core import Grid, PdeSpec, face_normal
from hoc.errors import InfeasibleError
from hoc.stencil import orient_scheme, scheme_from_csv
from hoc.verification import convergence_order

FAST = settings(max_examples=40, deadline=None,
                suppress_health_check=[HealthCheck.too_slow])

hs = st.floats(0.01, 1.0)
coef = st.floats(-10.0, 10.0, allow_nan=False)


def _random_scheme(sys, values):
    x = np.resize(np.asarray(values, dtype=float), len(sys.columns))
    beta = sys.family_columns("beta")
    x[beta[0]] += 1.0 - x[beta].sum()
    return moments.scheme_from_vector(sys, x)


@FAST
@given(h=hs, values=st.lists(coef, min_size=5, max_size=60),
       dim=st.sampled_from([2, 3]), face=st.sampled_from([None, "west", "north", "top"]))
def test_two_path_equivalence_at_K0(h, values, dim, face):
    if face == "top" and dim == 2:
        face = "east"
    pde = PdeSpec(dim=dim)
    if face is None:
        sys = moments.interior_system(pde, h)
        flux = None
    else:
        flux = (face_normal(face, dim), 0.0)
        sys = moments.flux_system(pde, h, flux[0], 0.0)
    s = _random_scheme(sys, values)
    probe = moments.exactness_probe(s, pde, flux=flux)
    res = moments.moment_residual(sys, s)
    assert abs(probe - res) <= 1e-12 * max(1.0, moments.residual_scale(sys, s))


@FAST
@given(h=st.floats(0.02, 0.5), K=st.floats(-50.0, 0.0), sigma=st.floats(0.0, 5.0),
       super_third=st.booleans())
def test_sign_constrained_respects_constraints(h, K, sigma, super_third):
    sys = moments.flux_system(PdeSpec(K=K), h, (-1, 0), sigma, super_third=super_third)
    try:
        s = moments.solve_sign_constrained(sys)
    except InfeasibleError:
        return
    delta = 1.0 / h ** 2
    tol = 1e-9 * delta
    assert s.alpha[(0, 0)] <= -delta + tol
    assert all(c >= -tol for off, c in s.alpha.items() if off != (0, 0))
    assert moments.relative_moment_residual(sys, s) <= 1e-9


@FAST
@given(c=st.tuples(coef, coef, coef, coef), h=hs, face=st.sampled_from(["west", "east", "south", "north"]))
def test_quadratic_extension_is_exact(c, h, face):
    N = 6
    grid = Grid((0.0, 0.0), (N * h, N * h), N)
    f = lambda x, y: c[0] + c[1] * x + c[2] * y * y + c[3] * x * x
    X, Y = np.meshgrid(grid.axis(0), grid.axis(1), indexing="ij")
    got = source_extension(f(X, Y), face)
    exact = source_extension(f, face, "analytic", grid)
    assert np.allclose(got, exact, rtol=1e-10, atol=1e-10 * max(1.0, max(map(abs, c))))


@FAST
@given(v=st.floats(-1e3, 1e3))
def test_constant_extension(v):
    assert quadratic_extrapolate(v, v, v) == pytest.approx(v, abs=1e-12 * max(1.0, abs(v)))


@FAST
@given(C=st.floats(1e-6, 1e6), h=st.floats(1e-3, 0.5), p=st.floats(1.0, 6.0))
def test_convergence_order_recovers_power(C, h, p):
    assert convergence_order(C * h ** p, C * (h / 2) ** p) == pytest.approx(p, abs=1e-9)


@FAST
@given(h=hs, K=st.floats(-100.0, 0.0), sigma=st.floats(-5.0, 5.0))
def test_printed_robin_sets_satisfy_their_systems(h, K, sigma):
    pde = PdeSpec(K=K)
    sys = moments.flux_system(pde, h, (-1, 0), sigma)
    assert moments.relative_moment_residual(sys, cf.robin_2d(h, K, sigma)) <= 1e-10
    st3 = moments.flux_system(pde, h, (-1, 0), sigma, super_third=True)
    assert moments.relative_moment_residual(st3, cf.super_third_2d(h, K, sigma)) <= 1e-10


@FAST
@given(h=hs, A12=st.floats(-1.0, 1.0), extra=st.floats(0.05, 3.0), K=st.floats(-50.0, 0.0))
def test_printed_anisotropic_interior(h, A12, extra, K):
    A11 = 2 * abs(A12) + extra
    pde = PdeSpec(A11=A11, A12=A12, A22=A11, K=K)
    s = cf.anis_interior_2d(h, A11, A12, K)
    assert s.beta_sum() == pytest.approx(1.0)
    assert moments.relative_moment_residual(moments.interior_system(pde, h), s) <= 1e-10


@FAST
@given(h=hs, face=st.sampled_from(["east", "south", "north"]), K=st.floats(-20.0, 0.0),
       sigma=st.floats(0.0, 4.0))
def test_oriented_sets_satisfy_face_systems(h, face, K, sigma):
    pde = PdeSpec(K=K)
    s = orient_scheme(cf.robin_2d(h, K, sigma), face)
    sys = moments.flux_system(pde, h, face_normal(face, 2), sigma)
    assert moments.relative_moment_residual(sys, s) <= 1e-10


@FAST
@given(h=hs, K=st.floats(-20.0, 20.0), sigma=st.floats(-5.0, 5.0))
def test_csv_round_trip(h, K, sigma):
    assume(abs(12 - K * h * h) > 1e-3)
    s = cf.robin_2d(h, K, sigma)
    assert scheme_from_csv(s.to_csv(), s.mode, s.face, h).max_abs_diff(s) == 0.0


@FAST
@given(h=hs, K=st.floats(-50.0, 0.0))
def test_min_norm_solution_satisfies_system(h, K):
    for sys in (moments.interior_system(PdeSpec(K=K), h),
                moments.flux_system(PdeSpec(K=K), h, (-1, 0), 1.0)):
        s = moments.solve_min_norm(sys)
        assert s.beta_sum() == pytest.approx(1.0, abs=1e-12)
        assert moments.relative_moment_residual(sys, s) <= 1e-10


@FAST
@given(face=st.sampled_from(["east", "south", "north", "bottom", "top"]))
def test_orientation_preserves_coefficients(face):
    w = cf.robin_3d(0.5, 2.0)
    s = orient_scheme(w, face)
    for name in ("alpha", "beta", "gamma"):
        assert sorted(s.family(name).values()) == sorted(w.family(name).values())
    n = face_normal(face, 3)
    assert all(np.dot(off, n) <= 0 for off in s.alpha)
