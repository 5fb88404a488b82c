"""Direct and Jacobi-preconditioned Krylov solvers for assembled systems."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BreakdownError, ConvergenceError, SingularMatrixError

DIRECT_THRESHOLD = 200_000
MAX_ITERS = 10_000
# reciprocal condition estimates below this are treated as singular
RCOND_MIN = 1e-14


@dataclass(frozen=True)
class SolveStats:
    method: str
    iterations: int
    residual: float
    elapsed: float

    def as_dict(self) -> dict:
        return {"method": self.method, "iterations": self.iterations,
                "residual": self.residual, "elapsed": self.elapsed}


def _unpack(sys):
    if hasattr(sys, "matrix"):
        return sp.csr_matrix(sys.matrix), np.asarray(sys.rhs, dtype=float), \
            bool(getattr(sys, "symmetric", False))
    A, b = sys
    A = sp.csr_matrix(A)
    return A, np.asarray(b, dtype=float), False


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def solve_direct(sys, threshold: int = DIRECT_THRESHOLD, return_stats=False):
    """Sparse LU solve. ``sys`` is a SparseSystem or a ``(A, b)`` pair."""
    A, b, _ = _unpack(sys)
    n = A.shape[0]
    if n > threshold:
        raise ValueError(f"{n} unknowns exceed the direct-solve threshold {threshold}")
    t0 = time.perf_counter()
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularMatrixError(f"factorization failed: {exc}") from exc
    if n:
        Ainv = spla.LinearOperator(A.shape, matvec=lu.solve,
                                   rmatvec=lambda v: lu.solve(v, trans="T"))
        rcond = 1.0 / (spla.onenormest(A) * spla.onenormest(Ainv))
        if not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise SingularMatrixError(f"matrix is numerically singular (rcond ~ {rcond:.1e})")
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("direct solve produced non-finite values")
    stats = SolveStats("direct", 1, relative_residual(A, x, b),
                       time.perf_counter() - t0)
    return (x, stats) if return_stats else x


def _pcg(A, b, dinv, tol, max_iters, x0):
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    nb = np.linalg.norm(b) or 1.0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iters + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp == 0:
            raise BreakdownError("CG breakdown: p.Ap vanished")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        if np.linalg.norm(r) <= tol * nb:
            # confirm with the true residual before stopping
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, -max_iters


def _bicgstab(A, b, dinv, tol, max_iters, x0):
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    nb = np.linalg.norm(b) or 1.0
    if np.linalg.norm(r) <= tol * nb:
        return x, 0
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = np.finfo(float).tiny
    for it in range(1, max_iters + 1):
        rho_new = r_hat @ r
        if abs(rho_new) < tiny:
            raise BreakdownError("BiCGStab breakdown: rho vanished")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = dinv * p
        v = A @ phat
        alpha = rho_new / (r_hat @ v)
        s = r - alpha * v
        if np.linalg.norm(s) <= tol * nb:
            x += alpha * phat
            if np.linalg.norm(b - A @ x) <= tol * nb:
                return x, it
        shat = dinv * s
        t = A @ shat
        tt = t @ t
        if tt == 0:
            raise BreakdownError("BiCGStab breakdown: t vanished")
        omega = (t @ s) / tt
        if abs(omega) < tiny:
            raise BreakdownError("BiCGStab breakdown: omega vanished")
        x += alpha * phat + omega * shat
        r = s - omega * t
        rho = rho_new
        if np.linalg.norm(r) <= tol * nb:
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it
    return x, -max_iters


def solve_iterative(sys, tol: float = 1e-12, max_iters: int = MAX_ITERS,
                    method: str = "bicgstab", x0=None):
    """Jacobi-preconditioned CG (symmetric systems only) or BiCGStab.

    Returns ``(x, SolveStats)``; the reported residual is the true
    ``||b - A x|| / ||b||``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b, symmetric = _unpack(sys)
    method = method.lower()
    if method in ("cg", "conjugate_gradient"):
        if not symmetric:
            raise ValueError("CG requires a symmetric system; use BiCGStab")
        kernel, tag = _pcg, "cg"
    elif method == "bicgstab":
        kernel, tag = _bicgstab, "bicgstab"
    else:
        raise ValueError(f"unknown iterative method {method!r}")
    d = A.diagonal()
    if np.any(d == 0):
        raise SingularMatrixError("zero diagonal entry; Jacobi undefined")
    # work with a positive diagonal so the CG preconditioner is SPD
    sign = -1.0 if np.all(d < 0) else 1.0
    As, bs = sign * A, sign * b
    t0 = time.perf_counter()
    x, it = kernel(As, bs, 1.0 / (sign * d), tol, max_iters,
                   None if x0 is None else np.asarray(x0, dtype=float))
    stats = SolveStats(tag, abs(it), relative_residual(A, x, b),
                       time.perf_counter() - t0)
    if it < 0:
        raise ConvergenceError(
            f"{tag} did not reach tol={tol:g} in {max_iters} iterations "
            f"(residual {stats.residual:.3e})", stats)
    return x, stats


def solve(sys, method: str = "auto", tol: float = 1e-12,
          max_iters: int = MAX_ITERS, direct_threshold: int = DIRECT_THRESHOLD):
    """Dispatch: ``auto`` goes direct below the threshold, else CG when the
    system is symmetric and BiCGStab otherwise."""
    A, _, symmetric = _unpack(sys)
    if method == "auto":
        if A.shape[0] <= direct_threshold:
            method = "direct"
        else:
            method = "cg" if symmetric else "bicgstab"
    if method == "direct":
        return solve_direct(sys, threshold=direct_threshold, return_stats=True)
    return solve_iterative(sys, tol=tol, max_iters=max_iters, method=method)
