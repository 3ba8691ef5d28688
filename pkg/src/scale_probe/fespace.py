"""
Lagrange spaces of degree 1 and 2 on structured meshes, and the fields living on them.

DOFs are vertex nodes for P1 plus edge midpoints for P2.  On the structured
mesh the P2 nodes are exactly the half-grid points, which is how they are
indexed internally.  Ordering is lexicographic by (y, x), vertices first.

Anything that can be integrated cell by cell implements ``on_cells(cd)`` and
returns values ``(nc, nq)`` and gradients ``(nc, nq, 2)`` at the quadrature
points of a :class:`CellData`.  That covers FE functions, analytic fields and
products such as ``omega * w``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Rect, StructuredMesh, cells_in
from .quadrature import QuadratureRule, triangle_rule


class DegreeError(ValueError):
    pass


class OutOfDomainError(ValueError):
    pass


class EmptySupportError(ValueError):
    pass


_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def reference_basis(degree: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Basis values (nq, nl) and reference gradients (nq, nl, 2) at reference points."""
    pts = np.atleast_2d(pts)
    lam = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    nq = lam.shape[0]
    if degree == 1:
        return lam, np.broadcast_to(_DLAMBDA, (nq, 3, 2)).copy()
    if degree == 2:
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _DLAMBDA[i]
        for k, (a, b) in enumerate(_P2_EDGES):
            vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, 3 + k] = 4.0 * (lam[:, b, None] * _DLAMBDA[a] + lam[:, a, None] * _DLAMBDA[b])
        return vals, grads
    raise DegreeError(f"unsupported degree {degree}; use 1 or 2")


@dataclass(frozen=True, eq=False)
class LagrangeSpace:
    mesh: StructuredMesh
    degree: int
    dof_coords: np.ndarray = field(repr=False)
    cell_dofs: np.ndarray = field(repr=False)
    boundary_dofs: np.ndarray = field(repr=False)
    cell_nodes: np.ndarray = field(repr=False)  # half-grid (i, j) of every P2 node of every cell

    @property
    def dim(self) -> int:
        return self.dof_coords.shape[0]

    @property
    def r(self) -> int:
        return self.degree

    def dofs_of_cells(self, cells: np.ndarray) -> np.ndarray:
        """All DOFs touching the given cells, i.e. the DOF set of S_h restricted to them."""
        return np.unique(self.cell_dofs[np.asarray(cells, dtype=np.int64)])


def _cell_half_nodes(mesh: StructuredMesh) -> np.ndarray:
    nx, ny = mesh.nx, mesh.ny
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i2 = 2 * ii.ravel()
    j2 = 2 * jj.ravel()
    lower = np.stack([np.column_stack([i2, j2]), np.column_stack([i2 + 2, j2]),
                      np.column_stack([i2 + 2, j2 + 2])], axis=1)
    upper = np.stack([np.column_stack([i2, j2]), np.column_stack([i2 + 2, j2 + 2]),
                      np.column_stack([i2, j2 + 2])], axis=1)
    verts = np.empty((2 * nx * ny, 3, 2), dtype=np.int64)
    verts[0::2] = lower
    verts[1::2] = upper
    mids = np.stack([(verts[:, a] + verts[:, b]) // 2 for a, b in _P2_EDGES], axis=1)
    return np.concatenate([verts, mids], axis=1)


def build_space(mesh: StructuredMesh, r: int) -> LagrangeSpace:
    if r not in (1, 2):
        raise DegreeError(f"unsupported degree {r}; use 1 or 2")
    nx, ny = mesh.nx, mesh.ny
    nodes = _cell_half_nodes(mesh)
    if r == 1:
        coords = mesh.vertices.copy()
        cell_dofs = mesh.triangles.copy()
        boundary = np.flatnonzero(mesh.boundary_vertex_flags)
    else:
        table = -np.ones((2 * ny + 1, 2 * nx + 1), dtype=np.int64)
        table[0::2, 0::2] = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
        odd = table < 0
        nv = (nx + 1) * (ny + 1)
        table[odd] = nv + np.arange(odd.sum())  # row-major: lexicographic by (y, x)
        J, I = np.nonzero(table >= 0)
        order = np.argsort(table[J, I])
        I, J = I[order], J[order]
        coords = np.column_stack([mesh.domain.xmin + 0.5 * I * mesh.hx,
                                  mesh.domain.ymin + 0.5 * J * mesh.hy])
        cell_dofs = table[nodes[..., 1], nodes[..., 0]]
        boundary = np.flatnonzero((I == 0) | (I == 2 * nx) | (J == 0) | (J == 2 * ny))
    for arr in (coords, cell_dofs, boundary, nodes):
        arr.setflags(write=False)
    return LagrangeSpace(mesh, r, coords, cell_dofs, boundary, nodes)


def interior_dofs(space: LagrangeSpace, G: Rect, zero_trace: bool = False) -> np.ndarray:
    """DOFs spanning S_h^0(G): basis supports inside G that stay off ∂G \\ ∂Ω.

    DOFs on ∂Ω are dropped when ``G`` is the whole domain, or whenever
    ``zero_trace`` is set (the H_0^1(Ω) ∩ S_h^0(G) reading).
    """
    mesh = space.mesh
    i0, j0, i1, j1 = mesh.grid_box(G)
    inside = np.zeros(mesh.num_cells, dtype=bool)
    inside[cells_in(mesh, G)] = True
    if not inside.any():
        return np.empty(0, dtype=np.int64)

    hi = space.cell_nodes[..., 0]
    hj = space.cell_nodes[..., 1]
    I0, J0, I1, J1 = 2 * i0, 2 * j0, 2 * i1, 2 * j1
    on_dG = ((((hi == I0) | (hi == I1)) & (hj >= J0) & (hj <= J1))
             | (((hj == J0) | (hj == J1)) & (hi >= I0) & (hi <= I1)))
    on_dOmega = (hi == 0) | (hi == 2 * mesh.nx) | (hj == 0) | (hj == 2 * mesh.ny)
    touching = inside & np.any(on_dG & ~on_dOmega, axis=1)

    excluded = np.zeros(space.dim, dtype=bool)
    excluded[space.cell_dofs[~inside].ravel()] = True
    excluded[space.cell_dofs[touching].ravel()] = True
    whole = (i0, j0, i1, j1) == (0, 0, mesh.nx, mesh.ny)
    if zero_trace or whole:
        excluded[space.boundary_dofs] = True
    candidate = np.zeros(space.dim, dtype=bool)
    candidate[space.cell_dofs[inside].ravel()] = True
    return np.flatnonzero(candidate & ~excluded)


# ---------------------------------------------------------------------------
# cell-wise quadrature data

@dataclass(frozen=True, eq=False)
class CellData:
    """Physical quadrature points, weights and basis data on a set of cells."""
    cells: np.ndarray
    x: np.ndarray        # (nc, nq, 2)
    w: np.ndarray        # (nc, nq) weights including |det B|
    basis: np.ndarray | None = None   # (nq, nl)
    grads: np.ndarray | None = None   # (nc, nq, nl, 2)
    dofs: np.ndarray | None = None    # (nc, nl)


def cell_data(mesh: StructuredMesh, rule: QuadratureRule | int, cells: np.ndarray | None = None,
              space: LagrangeSpace | None = None) -> CellData:
    if isinstance(rule, (int, np.integer)):
        rule = triangle_rule(int(rule))
    if cells is None:
        cells = np.arange(mesh.num_cells)
    cells = np.asarray(cells, dtype=np.int64)
    p = mesh.vertices[mesh.triangles[cells]]
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    x = p[:, None, 0, :] + np.einsum("cij,qj->cqi", B, rule.points)
    w = np.abs(det)[:, None] * rule.weights[None, :]
    if space is None:
        return CellData(cells, x, w)
    vals, dref = reference_basis(space.degree, rule.points)
    inv = np.empty_like(B)
    inv[:, 0, 0] = B[:, 1, 1] / det
    inv[:, 1, 1] = B[:, 0, 0] / det
    inv[:, 0, 1] = -B[:, 0, 1] / det
    inv[:, 1, 0] = -B[:, 1, 0] / det
    grads = np.einsum("cba,qlb->cqla", inv, dref)  # B^{-T} applied to reference gradients
    return CellData(cells, x, w, vals, grads, space.cell_dofs[cells])


# ---------------------------------------------------------------------------
# fields

class Field:
    """Mixin giving fields a small algebra: sums, differences and products."""

    def on_cells(self, cd: CellData) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def space(self):
        """The Lagrange space of the first FE operand, if any."""
        for part in getattr(self, "_parts", ()):
            sp = getattr(part, "space", None)
            if sp is not None:
                return sp
        return None

    def __add__(self, other):
        return SumField(self, other, 1.0)

    def __sub__(self, other):
        return SumField(self, other, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return ScaledField(self, float(other))
        return ProductField(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return ScaledField(self, -1.0)


class SumField(Field):
    def __init__(self, a: Field, b: Field, sign: float):
        self.a, self.b, self.sign = a, b, sign
        self._parts = (a, b)

    def on_cells(self, cd):
        va, ga = self.a.on_cells(cd)
        vb, gb = self.b.on_cells(cd)
        return va + self.sign * vb, ga + self.sign * gb


class ScaledField(Field):
    def __init__(self, a: Field, c: float):
        self.a, self.c = a, c
        self._parts = (a,)

    def on_cells(self, cd):
        v, g = self.a.on_cells(cd)
        return self.c * v, self.c * g


class ProductField(Field):
    def __init__(self, a: Field, b: Field):
        self.a, self.b = a, b
        self._parts = (a, b)

    def on_cells(self, cd):
        va, ga = self.a.on_cells(cd)
        vb, gb = self.b.on_cells(cd)
        return va * vb, va[..., None] * gb + vb[..., None] * ga


class ScalarField(Field):
    """An analytic field with optional analytic gradient and Hessian.

    All callables take broadcastable coordinate arrays ``(x, y)``.  Missing
    derivatives fall back to central differences.
    """

    fd_step = 1e-6

    def __init__(self, value: Callable, grad: Callable | None = None, hess: Callable | None = None,
                 name: str = ""):
        self._value = value
        self._grad = grad
        self._hess = hess
        self.name = name

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(self._value(x, y), dtype=float) * np.ones_like(x)

    def gradient(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self._grad is not None:
            gx, gy = self._grad(x, y)
            return np.stack(np.broadcast_arrays(gx * np.ones_like(x), gy * np.ones_like(x)), axis=-1)
        s = self.fd_step
        return np.stack([(self(x + s, y) - self(x - s, y)) / (2 * s),
                         (self(x, y + s) - self(x, y - s)) / (2 * s)], axis=-1)

    def hessian(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self._hess is not None:
            hxx, hxy, hyy = (np.asarray(v, dtype=float) * np.ones_like(x) for v in self._hess(x, y))
            return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        s = 1e-4
        gxp, gxm = self.gradient(x + s, y), self.gradient(x - s, y)
        gyp, gym = self.gradient(x, y + s), self.gradient(x, y - s)
        return np.stack([(gxp - gxm) / (2 * s), (gyp - gym) / (2 * s)], axis=-2)

    def derivative(self, alpha: tuple[int, int], x, y) -> np.ndarray:
        """D^alpha of the field for |alpha| <= 2."""
        a1, a2 = alpha
        order = a1 + a2
        if order == 0:
            return self(x, y)
        if order == 1:
            return self.gradient(x, y)[..., 0 if a1 else 1]
        if order == 2:
            H = self.hessian(x, y)
            if a1 == 2:
                return H[..., 0, 0]
            if a2 == 2:
                return H[..., 1, 1]
            return H[..., 0, 1]
        raise ValueError("derivatives above order 2 are not supported")

    def on_cells(self, cd):
        X, Y = cd.x[..., 0], cd.x[..., 1]
        return self(X, Y), self.gradient(X, Y)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return _scalar_product(self, other)
        return super().__mul__(other)


def _scalar_product(f: ScalarField, g: ScalarField) -> ScalarField:
    def value(x, y):
        return f(x, y) * g(x, y)

    def grad(x, y):
        gf, gg = f.gradient(x, y), g.gradient(x, y)
        fv, gv = f(x, y), g(x, y)
        return gf[..., 0] * gv + fv * gg[..., 0], gf[..., 1] * gv + fv * gg[..., 1]

    def hess(x, y):
        fv, gv = f(x, y), g(x, y)
        gf, gg = f.gradient(x, y), g.gradient(x, y)
        Hf, Hg = f.hessian(x, y), g.hessian(x, y)
        H = (Hf * gv[..., None, None] + fv[..., None, None] * Hg
             + gf[..., :, None] * gg[..., None, :] + gg[..., :, None] * gf[..., None, :])
        return H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]

    return ScalarField(value, grad, hess, name=f"({f.name})*({g.name})")


def constant_field(c: float) -> ScalarField:
    return ScalarField(lambda x, y: c + 0.0 * x, lambda x, y: (0.0 * x, 0.0 * x),
                       lambda x, y: (0.0 * x, 0.0 * x, 0.0 * x), name=str(c))


class FEFunction(Field):
    """Coefficient vector in a Lagrange space."""

    space = None  # shadows Field.space; set per instance

    def __init__(self, space: LagrangeSpace, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (space.dim,):
            raise ValueError(f"expected {space.dim} coefficients, got shape {coefficients.shape}")
        self.space = space
        self.coefficients = coefficients

    def on_cells(self, cd):
        c = self.coefficients[cd.dofs]
        return np.einsum("ql,cl->cq", cd.basis, c), np.einsum("cqla,cl->cqa", cd.grads, c)

    def __add__(self, other):
        if isinstance(other, FEFunction) and other.space is self.space:
            return FEFunction(self.space, self.coefficients + other.coefficients)
        return super().__add__(other)

    def __sub__(self, other):
        if isinstance(other, FEFunction) and other.space is self.space:
            return FEFunction(self.space, self.coefficients - other.coefficients)
        return super().__sub__(other)

    def __mul__(self, other):
        if np.isscalar(other):
            return FEFunction(self.space, float(other) * self.coefficients)
        return super().__mul__(other)

    def __neg__(self):
        return FEFunction(self.space, -self.coefficients)

    def __call__(self, points):
        return evaluate(self, points)

    def gradient(self, points):
        return evaluate_gradient(self, points)


def _locate(space: LagrangeSpace, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = space.mesh
    d = mesh.domain
    tol = 1e-12 * max(d.width, d.height)
    if not np.all(d.contains_points(pts[:, 0], pts[:, 1], tol)):
        raise OutOfDomainError("point outside the mesh domain")
    s = (pts[:, 0] - d.xmin) / mesh.hx
    t = (pts[:, 1] - d.ymin) / mesh.hy
    i = np.clip(np.floor(s).astype(np.int64), 0, mesh.nx - 1)
    j = np.clip(np.floor(t).astype(np.int64), 0, mesh.ny - 1)
    ls, lt = s - i, t - j
    upper = lt > ls
    cell = 2 * (j * mesh.nx + i) + upper
    # reference coordinates inside the chosen triangle
    xi = np.where(upper, ls, ls - lt)
    eta = np.where(upper, lt - ls, lt)
    return cell, np.column_stack([xi, eta]), pts


def _basis_at(space: LagrangeSpace, points):
    cell, ref, _ = _locate(space, points)
    vals, dref = reference_basis(space.degree, ref)
    p = space.mesh.vertices[space.mesh.triangles[cell]]
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    invT = np.transpose(np.linalg.inv(B), (0, 2, 1))
    grads = np.einsum("pab,plb->pla", invT, dref)
    return cell, vals, grads


def evaluate(f: FEFunction, points) -> np.ndarray:
    cell, vals, _ = _basis_at(f.space, points)
    return np.einsum("pl,pl->p", vals, f.coefficients[f.space.cell_dofs[cell]])


def evaluate_gradient(f: FEFunction, points) -> np.ndarray:
    cell, _, grads = _basis_at(f.space, points)
    return np.einsum("pla,pl->pa", grads, f.coefficients[f.space.cell_dofs[cell]])


def interpolate(space: LagrangeSpace, u) -> FEFunction:
    """Nodal interpolant of a field evaluable as ``u(x, y)``."""
    X, Y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    if isinstance(u, FEFunction):
        vals = evaluate(u, space.dof_coords)
    else:
        vals = np.asarray(u(X, Y), dtype=float) * np.ones_like(X)
    return FEFunction(space, vals)


def random_fefunction(space: LagrangeSpace, seed, support) -> FEFunction:
    """i.i.d. uniform[-1, 1] coefficients on ``support``, zero elsewhere."""
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        raise EmptySupportError("cannot sample on an empty DOF set")
    rng = np.random.default_rng(seed)
    c = np.zeros(space.dim)
    c[support] = rng.uniform(-1.0, 1.0, support.size)
    return FEFunction(space, c)


def random_smooth_fefunction(space: LagrangeSpace, seed, region: Rect, support, modes: int = 3) -> FEFunction:
    """Interpolant of a random low-frequency sine series vanishing on ∂region, restricted to ``support``."""
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        raise EmptySupportError("cannot sample on an empty DOF set")
    rng = np.random.default_rng(seed)
    amp = rng.uniform(-1.0, 1.0, (modes, modes))
    X = (space.dof_coords[support, 0] - region.xmin) / region.width
    Y = (space.dof_coords[support, 1] - region.ymin) / region.height
    k = np.arange(1, modes + 1)
    sx = np.sin(np.pi * np.outer(X, k))
    sy = np.sin(np.pi * np.outer(Y, k))
    c = np.zeros(space.dim)
    c[support] = np.einsum("pk,kl,pl->p", sx, amp, sy)
    return FEFunction(space, c)
