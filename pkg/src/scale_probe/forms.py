"""
Bilinear forms, mass/load assembly, norms and the discrete H^{-1} norm.

Matrices are scipy CSR; entry (i, j) holds the form evaluated at (phi_j, phi_i).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fespace import CellData, Field, FEFunction, LagrangeSpace, ScalarField, cell_data, interior_dofs, \
    random_fefunction
from .mesh import Rect, cells_in


class EllipticityError(ValueError):
    pass


class EmptySpaceError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Operator data for  -div(a grad u) + b.grad u + phi u.

    ``a(x, y)`` returns (..., 2, 2), ``b(x, y)`` returns (..., 2), ``phi(x, y)``
    returns (...).  ``div_a(x, y)`` returns the vector sum_j d_j a_ij and is only
    needed to manufacture right-hand sides.
    """
    name: str
    a: Callable
    b: Callable
    phi: Callable
    ellipticity_floor: float
    div_a: Callable | None = None

    def validate(self, domain: Rect, num_points: int = 1000, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        x = rng.uniform(domain.xmin, domain.xmax, num_points)
        y = rng.uniform(domain.ymin, domain.ymax, num_points)
        A = self.a(x, y)
        if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=0, atol=1e-14):
            raise EllipticityError(f"{self.name}: a(x) is not symmetric")
        lam = np.linalg.eigvalsh(A)[..., 0]
        if np.any(lam < self.ellipticity_floor):
            raise EllipticityError(f"{self.name}: smallest eigenvalue {lam.min()} below the certified floor")
        if np.any(self.phi(x, y) < 0):
            raise EllipticityError(f"{self.name}: phi must be nonnegative")

    def operator(self, u: ScalarField) -> ScalarField:
        """Manufactured source f = L u for a field with analytic derivatives."""
        def f(x, y):
            H = u.hessian(x, y)
            g = u.gradient(x, y)
            A = self.a(x, y)
            val = -np.einsum("...ij,...ij->...", A, H)
            if self.div_a is not None:
                val = val - np.einsum("...i,...i->...", self.div_a(x, y), g)
            val = val + np.einsum("...i,...i->...", self.b(x, y), g) + self.phi(x, y) * u(x, y)
            return val
        return ScalarField(f, name=f"L[{u.name}]")


def _identity(x, y):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    return out


def _zero_vec(x, y):
    return np.zeros(np.shape(x) + (2,))


def _zero(x, y):
    return np.zeros(np.shape(x))


def laplace() -> CoefficientSet:
    return CoefficientSet("laplace", _identity, _zero_vec, _zero, 1.0, div_a=_zero_vec)


def variable() -> CoefficientSet:
    def a(x, y):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = 1.0 + 0.5 * x ** 2
        out[..., 1, 1] = 1.0 + 0.5 * np.asarray(y) ** 2
        return out

    def b(x, y):
        out = np.zeros(np.shape(x) + (2,))
        out[..., 0] = 0.1
        out[..., 1] = -0.1
        return out

    def div_a(x, y):
        return np.stack(np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), axis=-1)

    return CoefficientSet("variable", a, b, lambda x, y: np.asarray(x) + np.asarray(y), 1.0, div_a=div_a)


PRESETS = {"laplace": laplace, "variable": variable}


def preset(name: str) -> CoefficientSet:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown coefficient preset {name!r}; choose from {sorted(PRESETS)}") from None


def scaled(coeffs: CoefficientSet, c: float) -> CoefficientSet:
    """Coefficient set with every entry multiplied by ``c``."""
    return CoefficientSet(f"{c}*{coeffs.name}", lambda x, y: c * coeffs.a(x, y), lambda x, y: c * coeffs.b(x, y),
                          lambda x, y: c * coeffs.phi(x, y), c * coeffs.ellipticity_floor)


def summed(c1: CoefficientSet, c2: CoefficientSet) -> CoefficientSet:
    return CoefficientSet(f"{c1.name}+{c2.name}", lambda x, y: c1.a(x, y) + c2.a(x, y),
                          lambda x, y: c1.b(x, y) + c2.b(x, y), lambda x, y: c1.phi(x, y) + c2.phi(x, y),
                          c1.ellipticity_floor + c2.ellipticity_floor)


# ---------------------------------------------------------------------------
# assembly

def matrix_degree(space: LagrangeSpace) -> int:
    return 2 * space.degree + 2


def norm_degree(space: LagrangeSpace) -> int:
    return 2 * space.degree + 4


def _scatter(space: LagrangeSpace, cd: CellData, local: np.ndarray) -> sp.csr_matrix:
    nl = cd.dofs.shape[1]
    rows = np.repeat(cd.dofs, nl, axis=1).ravel()
    cols = np.tile(cd.dofs, (1, nl)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.dim, space.dim)).tocsr()


def assemble_a0(space: LagrangeSpace, coeffs: CoefficientSet, degree: int | None = None) -> sp.csr_matrix:
    cd = cell_data(space.mesh, degree or matrix_degree(space), space=space)
    A = coeffs.a(cd.x[..., 0], cd.x[..., 1])
    local = np.einsum("cq,cqkl,cqjk,cqil->cij", cd.w, A, cd.grads, cd.grads, optimize=True)
    return _scatter(space, cd, local)


def assemble_N(space: LagrangeSpace, coeffs: CoefficientSet, degree: int | None = None) -> sp.csr_matrix:
    cd = cell_data(space.mesh, degree or matrix_degree(space), space=space)
    X, Y = cd.x[..., 0], cd.x[..., 1]
    b = coeffs.b(X, Y)
    phi = coeffs.phi(X, Y)
    local = (np.einsum("cq,cqk,cqjk,qi->cij", cd.w, b, cd.grads, cd.basis, optimize=True)
             + np.einsum("cq,cq,qj,qi->cij", cd.w, phi, cd.basis, cd.basis, optimize=True))
    return _scatter(space, cd, local)


def assemble_mass(space: LagrangeSpace, degree: int | None = None) -> sp.csr_matrix:
    cd = cell_data(space.mesh, degree or matrix_degree(space), space=space)
    local = np.einsum("cq,qj,qi->cij", cd.w, cd.basis, cd.basis)
    return _scatter(space, cd, local)


def assemble_stiffness(space: LagrangeSpace, degree: int | None = None) -> sp.csr_matrix:
    """The a = I stiffness matrix, i.e. the H^1 seminorm Gram matrix."""
    return assemble_a0(space, laplace(), degree)


def assemble_load(space: LagrangeSpace, f, degree: int | None = None, region: Rect | None = None) -> np.ndarray:
    """Load vector (f, phi_i); with ``region`` only the cells of that subdomain contribute."""
    cd = region_data(space, region, degree)
    vals = f(cd.x[..., 0], cd.x[..., 1]) * np.ones(cd.w.shape)
    local = np.einsum("cq,cq,qi->ci", cd.w, vals, cd.basis)
    return np.bincount(cd.dofs.ravel(), weights=local.ravel(), minlength=space.dim)


def apply_form(A0, N, u: FEFunction, v: FEFunction) -> float:
    """v^T (A0 + N) u, i.e. a(u, v)."""
    n = A0.shape[0]
    if N.shape != A0.shape or u.coefficients.shape[0] != n or v.coefficients.shape[0] != n:
        raise DimensionError("matrix and function dimensions do not match")
    return float(v.coefficients @ (A0 @ u.coefficients + N @ u.coefficients))


# ---------------------------------------------------------------------------
# integrals of general fields over aligned regions

def region_data(space: LagrangeSpace, region: Rect | None, degree: int | None = None) -> CellData:
    cells = None if region is None else cells_in(space.mesh, region)
    return cell_data(space.mesh, degree or norm_degree(space), cells, space=space)


def squared_norms(f: Field, region: Rect | None = None, space: LagrangeSpace | None = None,
                  degree: int | None = None, cd: CellData | None = None) -> tuple[float, float]:
    """(||f||_0^2, |f|_1^2) over the cells of ``region``."""
    if cd is None:
        space = space or f.space
        cd = region_data(space, region, degree)
    v, g = f.on_cells(cd)
    return float(np.sum(cd.w * v * v)), float(np.sum(cd.w * np.sum(g * g, axis=-1)))


def norm_L2(f: Field, region: Rect | None = None, **kw) -> float:
    return float(np.sqrt(squared_norms(f, region, **kw)[0]))


def seminorm_H1(f: Field, region: Rect | None = None, **kw) -> float:
    return float(np.sqrt(squared_norms(f, region, **kw)[1]))


def norm_H1(f: Field, region: Rect | None = None, **kw) -> float:
    l2, h1 = squared_norms(f, region, **kw)
    return float(np.sqrt(l2 + h1))


def form_a0(coeffs: CoefficientSet, u: Field, v: Field, cd: CellData) -> float:
    """a_0(u, v) = int sum_ij a_ij d_i u d_j v, by quadrature on ``cd``."""
    _, gu = u.on_cells(cd)
    _, gv = v.on_cells(cd)
    A = coeffs.a(cd.x[..., 0], cd.x[..., 1])
    return float(np.sum(cd.w * np.einsum("cqij,cqi,cqj->cq", A, gu, gv)))


def form_N(coeffs: CoefficientSet, u: Field, v: Field, cd: CellData) -> float:
    """N(u, v) = int (b . grad u) v + phi u v."""
    vu, gu = u.on_cells(cd)
    vv, _ = v.on_cells(cd)
    X, Y = cd.x[..., 0], cd.x[..., 1]
    integrand = np.einsum("cqi,cqi->cq", coeffs.b(X, Y), gu) * vv + coeffs.phi(X, Y) * vu * vv
    return float(np.sum(cd.w * integrand))


def form_a(coeffs: CoefficientSet, u: Field, v: Field, cd: CellData) -> float:
    return form_a0(coeffs, u, v, cd) + form_N(coeffs, u, v, cd)


# ---------------------------------------------------------------------------
# dual norm and empirical constants

def h1_gram(space: LagrangeSpace) -> sp.csr_matrix:
    return (assemble_mass(space) + assemble_stiffness(space)).tocsr()


def dual_norm_Hm1(space: LagrangeSpace, G: Rect, fload: np.ndarray, zero_trace: bool = False,
                  gram: sp.spmatrix | None = None) -> float:
    """sup f(phi)/||phi||_1 over span(interior_dofs(G)), via the Riesz representative."""
    from .solver import solve_general

    idx = interior_dofs(space, G, zero_trace=zero_trace)
    if idx.size == 0:
        raise EmptySpaceError(f"no interior DOFs in {G}")
    fI = np.asarray(fload, dtype=float)[idx]
    if not np.any(fI):
        return 0.0
    K = (gram if gram is not None else h1_gram(space))[idx][:, idx]
    # direct factorization: CG stalls near roundoff on the finer meshes
    z, _ = solve_general(K, fI, tol=1e-12)
    return float(np.sqrt(max(fI @ z, 0.0)))


def empirical_coercivity_continuity(space: LagrangeSpace, coeffs: CoefficientSet, num_samples: int,
                                    seed) -> tuple[float, float, float]:
    """Sampled (min a0(w,w)/||w||_1^2, max a0(u,v)/(||u||_1||v||_1), max |N(u,v)|/(||u||_0||v||_1))."""
    idx = interior_dofs(space, space.mesh.domain)
    if idx.size == 0:
        raise EmptySpaceError("zero-boundary subspace is empty")
    A0 = assemble_a0(space, coeffs)
    N = assemble_N(space, coeffs)
    M = assemble_mass(space)
    K = M + assemble_stiffness(space)
    children = np.random.SeedSequence(seed).spawn(3 * num_samples)
    coer, cont, cN = np.inf, 0.0, 0.0
    for k in range(num_samples):
        u, v, w = (random_fefunction(space, children[3 * k + i], idx).coefficients for i in range(3))
        a_ww = w @ A0 @ w
        if a_ww <= 0:
            raise EllipticityError(f"a0(w, w) = {a_ww} <= 0 for a nonzero sample")
        n1 = lambda z: np.sqrt(z @ K @ z)
        coer = min(coer, a_ww / n1(w) ** 2)
        cont = max(cont, abs(v @ A0 @ u) / (n1(u) * n1(v)))
        cN = max(cN, abs(v @ N @ u) / (np.sqrt(u @ M @ u) * n1(v)))
    return float(coer), float(cont), float(cN)


def measure_inverse_estimate(space: LagrangeSpace, G: Rect, num_samples: int, seed) -> float:
    """max over random v in S_h(G) of ||v||_{1,G} h / ||v||_{0,G}."""
    cells = cells_in(space.mesh, G)
    support = space.dofs_of_cells(cells)
    cd = region_data(space, G)
    h = space.mesh.h
    best = 0.0
    for child in np.random.SeedSequence(seed).spawn(num_samples):
        v = random_fefunction(space, child, support)
        l2, semi = squared_norms(v, cd=cd)
        best = max(best, np.sqrt(l2 + semi) * h / np.sqrt(l2))
    return float(best)
