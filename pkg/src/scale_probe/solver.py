"""Linear solves: Jacobi-preconditioned CG, a general direct fallback, and local Galerkin problems."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .fespace import FEFunction, LagrangeSpace, interpolate, interior_dofs
from .forms import EmptySpaceError
from .mesh import Rect, cells_in

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 2000


class ConvergenceError(RuntimeError):
    pass


class DefinitenessError(ValueError):
    pass


class SingularError(ValueError):
    pass


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    method: str


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve_spd(A, rhs, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients with diagonal preconditioning."""
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    x = np.zeros(n)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x, SolveReport(0, 0.0, "pcg")
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise DefinitenessError("nonpositive diagonal entry")
    dinv = 1.0 / diag
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for k in range(1, 10 * n + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise DefinitenessError(f"p^T A p = {pAp} <= 0 at iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * nb:
            # guard against drift between the recursive and true residual
            res = _relres(A, x, b)
            if res <= tol:
                return x, SolveReport(k, res, "pcg")
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach {tol} within {10 * n} iterations")


def solve_general(A, rhs, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, SolveReport]:
    """Dense LU up to DENSE_LIMIT unknowns, sparse LU above."""
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    if n <= DENSE_LIMIT:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        with warnings.catch_warnings():
            # singularity is reported below as SingularError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(Ad, check_finite=True)
        if np.any(np.abs(np.diag(lu)) <= np.finfo(float).eps * max(1.0, np.abs(Ad).max()) * n):
            raise SingularError("matrix is numerically singular")
        x = sla.lu_solve((lu, piv), b)
        method = "dense-lu"
    else:
        As = sp.csc_matrix(A)
        try:
            x = spla.spsolve(As, b)
        except RuntimeError as exc:
            raise SingularError(str(exc)) from exc
        method = "sparse-lu"
    if not np.all(np.isfinite(x)):
        raise SingularError("solution is not finite")
    res = _relres(A, x, b)
    if res > tol:
        raise SingularError(f"residual {res} exceeds {tol}; system is ill-conditioned or singular")
    return x, SolveReport(1, res, method)


def _is_symmetric(A) -> bool:
    d = abs(A - A.T)
    m = d.max() if sp.issparse(d) else np.max(d)
    return m <= 1e-14 * abs(A).max()


def solve_local_galerkin(space: LagrangeSpace, coeffs, f, G: Rect, tol: float = DEFAULT_TOL,
                         exterior=None, zero_trace: bool = False, system=None) -> FEFunction:
    """Find w with a(w, phi_i) = f(phi_i) for every phi_i in S_h^0(G).

    Unknowns are ``interior_dofs(space, G)``.  The remaining DOFs of cells in G
    take the values of ``exterior`` (an FE function or field; zero by default);
    every other coefficient is zero.  ``f`` is a field, a load vector or None.
    ``system`` may pass a prebuilt (A0, N) pair.
    """
    idx = interior_dofs(space, G, zero_trace=zero_trace)
    if idx.size == 0:
        raise EmptySpaceError(f"no interior DOFs in {G}")
    A0, N = system if system is not None else (forms.assemble_a0(space, coeffs), forms.assemble_N(space, coeffs))
    A = (A0 + N).tocsr()
    if f is None:
        load = np.zeros(space.dim)
    elif isinstance(f, np.ndarray):
        load = f
    else:
        load = forms.assemble_load(space, f)

    w = np.zeros(space.dim)
    if exterior is not None:
        fixed = np.setdiff1d(space.dofs_of_cells(cells_in(space.mesh, G)), idx)
        g = exterior.coefficients if isinstance(exterior, FEFunction) else interpolate(space, exterior).coefficients
        w[fixed] = g[fixed]
    rhs = load[idx] - (A @ w)[idx]
    AII = A[idx][:, idx]
    if _is_symmetric(AII):
        sol, _ = solve_spd(AII, rhs, tol)
    else:
        sol, _ = solve_general(AII, rhs, tol)
    w[idx] = sol
    return FEFunction(space, w)


def solve_dirichlet(space: LagrangeSpace, coeffs, f, tol: float = DEFAULT_TOL, system=None) -> FEFunction:
    """Global problem with homogeneous Dirichlet data on the mesh domain."""
    return solve_local_galerkin(space, coeffs, f, space.mesh.domain, tol, system=system)
