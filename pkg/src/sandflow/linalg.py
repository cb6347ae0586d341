"""Deterministic sparse SPD solves: direct factorization and PCG.

The direct path factorizes once and is reused across many right-hand sides
(the surface solver's matrix is fixed for a whole run); the conjugate
gradient path with Jacobi preconditioning serves the flux solver, whose
matrix changes every iteration.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, NumericalError


@dataclass
class SolveOptions:
    """Method selection and CG controls."""

    method: str = "direct-cholesky"
    cg_rel_tol: float = 1e-10
    cg_max_iter: int = 10000

    def __post_init__(self):
        if self.method not in ("direct-cholesky", "conjugate-gradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.cg_rel_tol < 1.0:
            raise ValueError("cg_rel_tol must lie in (0, 1)")
        if self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be at least 1")


class SPDFactor:
    """Immutable triangular factorization of an SPD matrix."""

    def __init__(self, A):
        csc = A.matrix.tocsc()
        try:
            self._lu = spla.splu(
                csc,
                diag_pivot_thresh=0.0,
                permc_spec="MMD_AT_PLUS_A",
                options={"SymmetricMode": True},
            )
        except RuntimeError as err:
            raise NumericalError(f"factorization failed: {err}") from None
        if (self._lu.U.diagonal() <= 0.0).any():
            raise NumericalError("matrix is not positive definite (pivot <= 0)")
        self.matrix = A.matrix

    def solve(self, b):
        x = self._lu.solve(np.asarray(b, dtype=np.float64))
        if __debug__:
            r = np.linalg.norm(self.matrix @ x - b)
            assert r <= 1e-8 * max(np.linalg.norm(b), 1e-300) + 1e-12, (
                f"direct solve residual {r:g} unexpectedly large"
            )
        return x


def factorize(A):
    """Factor an SPD matrix for repeated solves."""
    return SPDFactor(A)


def _pcg(A, b, rel_tol, max_iter):
    diag = A.diagonal()
    if (diag <= 0.0).any():
        raise NumericalError("matrix has a nonpositive diagonal entry")
    inv_diag = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        Ap = A.matvec(p)
        curv = p @ Ap
        if curv <= 0.0:
            raise NumericalError("non-positive curvature: matrix not SPD")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rel_tol * bnorm:
            return x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach {rel_tol:g} within {max_iter} iterations",
        residual=float(np.linalg.norm(r) / bnorm),
    )


def solve_spd(A, b, opts=SolveOptions()):
    """Solve ``A x = b`` for an SPD matrix per the selected method.

    Direct solves reach machine-level residuals; CG stops at
    ``cg_rel_tol`` relative residual reduction (Jacobi preconditioned).
    """
    b = np.asarray(b, dtype=np.float64)
    if A.dim != len(b):
        raise ValueError("dimension mismatch")
    if opts.method == "direct-cholesky":
        return SPDFactor(A).solve(b)
    x = _pcg(A, b, opts.cg_rel_tol, opts.cg_max_iter)
    if __debug__:
        r = np.linalg.norm(A.matvec(x) - b)
        assert r <= 10.0 * opts.cg_rel_tol * max(np.linalg.norm(b), 1e-300), (
            f"CG residual {r:g} above tolerance"
        )
    return x
