"""
Structured triangulations of axis-aligned rectangles.

Every grid square is cut along its bottom-left to top-right diagonal, so each
square contributes a "lower" triangle (v00, v10, v11) and an "upper" triangle
(v00, v11, v01).  Vertices are numbered lexicographically by (y, x).

Subdomains are plain :class:`Rect` values whose corners must sit on grid lines
of the owning mesh; nothing is ever snapped silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SNAP_TOL = 1e-12


class MeshError(ValueError):
    """Base class for mesh construction and subdomain errors."""


class InvalidSubdivisionError(MeshError):
    pass


class AlignmentError(MeshError):
    pass


class DegenerateSubdomainError(MeshError):
    pass


class ContainmentError(MeshError):
    pass


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise DegenerateSubdomainError(f"empty or inverted rectangle {self}")

    @classmethod
    def square(cls, x0: float, y0: float, side: float) -> "Rect":
        return cls(x0, y0, x0 + side, y0 + side)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)

    def contains(self, other: "Rect", tol: float = 0.0) -> bool:
        return (other.xmin >= self.xmin - tol and other.xmax <= self.xmax + tol
                and other.ymin >= self.ymin - tol and other.ymax <= self.ymax + tol)

    def contains_points(self, x, y, tol: float = 0.0):
        x = np.asarray(x)
        y = np.asarray(y)
        return ((x >= self.xmin - tol) & (x <= self.xmax + tol)
                & (y >= self.ymin - tol) & (y <= self.ymax + tol))


# A subdomain is just a rectangle aligned with the mesh.
SubdomainSpec = Rect


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    domain: Rect
    nx: int
    ny: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_vertex_flags: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.nx

    @property
    def hx(self) -> float:
        return self.domain.width / self.nx

    @property
    def hy(self) -> float:
        return self.domain.height / self.ny

    @property
    def num_cells(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def h(self) -> float:
        return mesh_size(self)

    def cell_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def cell_diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return np.max(lengths, axis=0)

    def grid_index(self, value: float, axis: int) -> int:
        """Index of the grid line through ``value``; raises if it is not on one."""
        lo = self.domain.xmin if axis == 0 else self.domain.ymin
        step = self.hx if axis == 0 else self.hy
        count = self.nx if axis == 0 else self.ny
        t = (value - lo) / step
        k = round(t)
        if abs(t - k) > SNAP_TOL * max(1.0, abs(t)) or k < 0 or k > count:
            raise AlignmentError(
                f"coordinate {value!r} is not on a grid line of the {'x' if axis == 0 else 'y'} axis "
                f"(step {step!r})")
        return int(k)

    def grid_box(self, sub: Rect) -> tuple[int, int, int, int]:
        """Grid-line indices (i0, j0, i1, j1) of an aligned subdomain."""
        i0 = self.grid_index(sub.xmin, 0)
        i1 = self.grid_index(sub.xmax, 0)
        j0 = self.grid_index(sub.ymin, 1)
        j1 = self.grid_index(sub.ymax, 1)
        return i0, j0, i1, j1

    def rect_from_box(self, i0: int, j0: int, i1: int, j1: int) -> Rect:
        d = self.domain
        return Rect(d.xmin + i0 * self.hx, d.ymin + j0 * self.hy,
                    d.xmin + i1 * self.hx, d.ymin + j1 * self.hy)

    def enclosing_box(self, sub: Rect) -> Rect:
        """Smallest aligned rectangle containing ``sub`` (grid lines snapped outward)."""
        d = self.domain

        def snap(v, lo, step, count, up):
            t = (v - lo) / step
            k = round(t)
            if abs(t - k) > SNAP_TOL * max(1.0, abs(t)):
                k = np.ceil(t) if up else np.floor(t)
            return int(min(max(k, 0), count))

        return self.rect_from_box(snap(sub.xmin, d.xmin, self.hx, self.nx, False),
                                  snap(sub.ymin, d.ymin, self.hy, self.ny, False),
                                  snap(sub.xmax, d.xmin, self.hx, self.nx, True),
                                  snap(sub.ymax, d.ymin, self.hy, self.ny, True))

    def boundary_sides(self, sub: Rect) -> tuple[bool, bool, bool, bool]:
        """Which sides (left, bottom, right, top) of ``sub`` lie on the domain boundary."""
        i0, j0, i1, j1 = self.grid_box(sub)
        return i0 == 0, j0 == 0, i1 == self.nx, j1 == self.ny


def build_mesh(domain: Rect, n: int, ny: int | None = None) -> StructuredMesh:
    """Uniform triangulation with ``n`` squares along x (and ``ny`` along y, default ``n``)."""
    ny = n if ny is None else ny
    if int(n) != n or int(ny) != ny or n < 1 or ny < 1:
        raise InvalidSubdivisionError(f"subdivisions must be positive integers, got n={n}, ny={ny}")
    n, ny = int(n), int(ny)
    xs = np.linspace(domain.xmin, domain.xmax, n + 1)
    ys = np.linspace(domain.ymin, domain.ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # rows are y: lexicographic by (y, x)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(n), indexing="ij")
    v00 = (jj * (n + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    triangles = np.empty((2 * n * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    vi = np.tile(np.arange(n + 1), ny + 1)
    vj = np.repeat(np.arange(ny + 1), n + 1)
    boundary = (vi == 0) | (vi == n) | (vj == 0) | (vj == ny)

    for arr in (vertices, triangles, boundary):
        arr.setflags(write=False)
    return StructuredMesh(domain, n, ny, vertices, triangles, boundary)


def mesh_size(mesh: StructuredMesh) -> float:
    """Largest cell diameter."""
    return math.hypot(mesh.hx, mesh.hy)


def cells_in(mesh: StructuredMesh, sub: Rect) -> np.ndarray:
    """Indices of the triangles whose closure lies in ``sub``."""
    i0, j0, i1, j1 = mesh.grid_box(sub)
    if i1 <= i0 or j1 <= j0:
        return np.empty(0, dtype=np.int64)
    jj, ii = np.meshgrid(np.arange(j0, j1), np.arange(i0, i1), indexing="ij")
    sq = (jj * mesh.nx + ii).ravel()
    return np.sort(np.concatenate([2 * sq, 2 * sq + 1]))


def shrink_by_layers(mesh: StructuredMesh, sub: Rect, j: int, keep_boundary: bool = False) -> Rect:
    """Move every side of ``sub`` inward by ``j`` grid steps.

    With ``keep_boundary`` the sides lying on the domain boundary stay put, which
    is the ``dist(∂D \\ ∂Ω, ∂G \\ ∂Ω) > 0`` reading of compact containment.
    """
    if j < 0:
        raise ValueError("layer count must be nonnegative")
    i0, j0, i1, j1 = mesh.grid_box(sub)
    left, bottom, right, top = mesh.boundary_sides(sub) if keep_boundary else (False,) * 4
    i0n = i0 if left else i0 + j
    j0n = j0 if bottom else j0 + j
    i1n = i1 if right else i1 - j
    j1n = j1 if top else j1 - j
    if i1n <= i0n or j1n <= j0n:
        raise DegenerateSubdomainError(f"shrinking {sub} by {j} layers leaves nothing")
    return mesh.rect_from_box(i0n, j0n, i1n, j1n)


def layer_count(mesh: StructuredMesh, inner: Rect, outer: Rect, keep_boundary: bool = False) -> int:
    """Largest p such that ``shrink_by_layers(outer, p)`` still contains ``inner``."""
    a = mesh.grid_box(inner)
    b = mesh.grid_box(outer)
    sides = mesh.boundary_sides(outer) if keep_boundary else (False,) * 4
    gaps = [a[0] - b[0], a[1] - b[1], b[2] - a[2], b[3] - a[3]]
    if min(gaps) < 0:
        raise ContainmentError(f"{inner} is not contained in {outer}")
    active = [g for g, fixed in zip(gaps, sides) if not fixed]
    if not active:
        raise ContainmentError(f"{outer} has no side off the domain boundary to count layers across")
    p = min(active)
    if p < 1:
        raise ContainmentError(f"{inner} is not compactly contained in {outer}")
    return int(p)
