"""
Measurements of the local inequalities.

Each experiment returns an :class:`EstimateRecord` holding the measured left
side and the named right-side terms with unit constants; empirical constants
and scaling exponents are fitted afterwards from lists of records.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import forms
from .fespace import FEFunction, LagrangeSpace, ScalarField, build_space, cell_data, interior_dofs
from .forms import CoefficientSet
from .mesh import ContainmentError, Rect, build_mesh, cells_in, layer_count
from .scaling import CutoffFunction, epsilon, layered_sum
from .solver import solve_dirichlet, solve_local_galerkin


class SupportError(ValueError):
    pass


class LayerError(ValueError):
    pass


class SampleError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class EstimateRecord:
    experiment: str
    h: float
    d: float
    r: int
    p: int
    seed: int
    preset: str
    lhs: float
    rhs_terms: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))

    @property
    def ratio(self) -> float:
        """Positive part of lhs over the unit-constant right side (0 when both vanish)."""
        top = max(self.lhs, 0.0)
        if top == 0.0:
            return 0.0
        return top / self.rhs if self.rhs > 0 else math.inf

    def key(self):
        return (self.experiment, self.h, self.d, self.p, self.seed)


@dataclass(frozen=True)
class IdentityBreakdown:
    a0_term: float
    a_term: float
    N_term: float
    T1: float
    T2: float
    defect: float


@dataclass(frozen=True)
class FitResult:
    C_emp: float
    slope: float | None
    slope_ci: float | None
    samples: int
    monotone: bool | None = None


def sample_seed(base: int, grid_index: int, sample_index: int) -> np.random.SeedSequence:
    """Counter-based stream for one sample of one grid point."""
    return np.random.SeedSequence(int(base), spawn_key=(int(grid_index), int(sample_index)))


# ---------------------------------------------------------------------------
# fitting

def loglog_slope(x, y) -> tuple[float | None, float | None]:
    """Least-squares slope of log y against log x and its 95% half-width.

    Undefined (None, None) with fewer than 3 distinct abscissae or any
    nonpositive value.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("non-finite data in log-log fit")
    if np.unique(x).size < 3 or np.any(x <= 0) or np.any(y <= 0):
        return None, None
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    dof = lx.size - 2
    return float(res.slope), float(stats.t.ppf(0.975, dof) * res.stderr)


def fit_constant(records: list[EstimateRecord], parameter: str = "h", quantity: str = "lhs") -> FitResult:
    """C_emp = max ratio; slope of log ``quantity`` against log ``parameter``."""
    if not records:
        raise SampleError("no records to fit")
    ratios = np.array([r.ratio for r in records])
    if not np.all(np.isfinite(ratios)):
        raise DataError("non-finite ratio in records")
    slope, ci = loglog_slope([getattr(r, parameter) for r in records], [getattr(r, quantity) for r in records])
    return FitResult(float(ratios.max()), slope, ci, len(records))


def kendall_tau(x, y) -> float:
    tau = stats.kendalltau(x, y).statistic
    return 0.0 if np.isnan(tau) else float(tau)


# ---------------------------------------------------------------------------
# inverse estimate

def inverse_estimate_experiment(space: LagrangeSpace, G: Rect, v: FEFunction, seed: int = 0) -> EstimateRecord:
    """lhs = h ||v||_{1,G}, rhs = ||v||_{0,G}; the ratio is the sampled inverse constant."""
    l2_sq, semi_sq = forms.squared_norms(v, cd=forms.region_data(space, G))
    h = space.mesh.h
    return EstimateRecord("inverse", h, G.diameter, space.degree, 0, seed, "none",
                          h * math.sqrt(l2_sq + semi_sq), {"l2_norm": math.sqrt(l2_sq)})


# ---------------------------------------------------------------------------
# superapproximation

def cutoff_dofs(space: LagrangeSpace, omega: CutoffFunction) -> np.ndarray:
    return interior_dofs(space, space.mesh.enclosing_box(omega.support))


def superapprox_interpolant(space: LagrangeSpace, omega: CutoffFunction, w: FEFunction) -> FEFunction:
    """Nodal interpolant of omega*w with every DOF outside S_h^0(supp omega) set to zero.

    An unaligned support is first widened to the enclosing grid box.
    """
    X, Y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    keep = cutoff_dofs(space, omega)
    c = np.zeros(space.dim)
    c[keep] = omega(X[keep], Y[keep]) * w.coefficients[keep]
    return FEFunction(space, c)


def _quadrature_delta(space, field_, cells, degree, fraction=0.05) -> float:
    """Relative change of the squared H1 norm on a cell subsample when the rule is raised by 2."""
    m = max(1, int(round(fraction * cells.size)))
    sub = cells[np.linspace(0, cells.size - 1, m).astype(np.int64)]
    lo = forms.squared_norms(field_, cd=cell_data(space.mesh, degree, sub, space=space))
    hi = forms.squared_norms(field_, cd=cell_data(space.mesh, degree + 2, sub, space=space))
    top = sum(hi)
    return abs(sum(lo) - top) / top if top > 0 else 0.0


def superapprox_experiment(space: LagrangeSpace, G: Rect, omega: CutoffFunction, w: FEFunction,
                           omega0: Rect | None = None, seed: int = 0, preset: str = "") -> EstimateRecord:
    omega0 = omega0 or G
    if not G.contains(omega.support):
        raise SupportError("cutoff support must lie inside G")
    allowed = space.dofs_of_cells(cells_in(space.mesh, G))
    stray = np.setdiff1d(np.flatnonzero(w.coefficients), allowed)
    if stray.size:
        raise SupportError(f"w has {stray.size} coefficients outside S_h(G)")

    v = superapprox_interpolant(space, omega, w)
    keep = cutoff_dofs(space, omega)
    outside = np.setdiff1d(np.arange(space.dim), keep)
    err = omega * w - v
    cells = cells_in(space.mesh, G)
    degree = forms.norm_degree(space)
    lhs = forms.norm_H1(err, cd=cell_data(space.mesh, degree, cells, space=space))
    n0_sq, n1_sq = forms.squared_norms(w, cd=forms.region_data(space, omega0))
    n0, n1 = math.sqrt(n0_sq), math.sqrt(n0_sq + n1_sq)
    d, h, r = omega0.diameter, space.mesh.h, space.degree
    return EstimateRecord(
        "superapprox", h, d, r, 0, seed, preset, lhs,
        {"low_order": (h / d) ** r / d * n0, "gradient": (h / d) * n1},
        {"norm0_w": n0, "norm1_w": n1,
         "outside_nonzero": float(np.count_nonzero(v.coefficients[outside])),
         "quad_delta": _quadrature_delta(space, err, cells, degree)})


# ---------------------------------------------------------------------------
# cutoff energy lemma and the underlying identity

def technique_lemma_experiment(space: LagrangeSpace, coeffs: CoefficientSet, omega: CutoffFunction,
                               w: FEFunction, omega0: Rect | None = None, seed: int = 0) -> EstimateRecord:
    """lhs = a0(omega w, omega w) - 2 a(w, omega^2 w), rhs = ||w||_{0,Omega0}^2."""
    omega0 = omega0 or space.mesh.domain
    if not omega0.contains(omega.support):
        raise SupportError("cutoff support must lie inside Omega0")
    cd = forms.region_data(space, omega.support)
    ow = omega * w
    o2w = (omega * omega) * w
    a0_term = forms.form_a0(coeffs, ow, ow, cd)
    a_term = forms.form_a(coeffs, w, o2w, cd)
    rhs = forms.squared_norms(w, omega0)[0]
    return EstimateRecord(
        "technique", space.mesh.h, omega0.diameter, space.degree, 0, seed, coeffs.name,
        a0_term - 2.0 * a_term, {"l2_squared": rhs}, {"a0_term": a0_term, "a_term": a_term})


def identity_check(u: ScalarField, omega: CutoffFunction, coeffs: CoefficientSet, quad_degree: int = 10,
                   level: int = 1) -> IdentityBreakdown:
    """All terms of the cutoff identity by quadrature on a ``level`` x ``level`` grid over supp omega."""
    grid = build_mesh(omega.support, level)
    cd = cell_data(grid, quad_degree)
    X, Y = cd.x[..., 0], cd.x[..., 1]
    uv, gu = u(X, Y), u.gradient(X, Y)
    ov, go = omega(X, Y), omega.gradient(X, Y)
    ow = ov * uv
    g_ow = ov[..., None] * gu + uv[..., None] * go
    o2w = ov * ov * uv
    g_o2w = ov[..., None] ** 2 * gu + 2.0 * (ov * uv)[..., None] * go
    A = coeffs.a(X, Y)
    b = coeffs.b(X, Y)
    phi = coeffs.phi(X, Y)

    def quad(integrand):
        return float(np.sum(cd.w * integrand))

    i_a0 = np.einsum("...ij,...i,...j->...", A, g_ow, g_ow)
    i_a = (np.einsum("...ij,...i,...j->...", A, gu, g_o2w)
           + np.einsum("...i,...i->...", b, gu) * o2w + phi * uv * o2w)
    i_N = np.einsum("...i,...i->...", b, g_ow) * ow + phi * ow * ow
    i_T1 = np.einsum("...j,...j->...", b, go) * ov * uv * uv
    anti = (np.einsum("...ij,...i,...j->...", A, go, g_ow) - np.einsum("...ij,...j,...i->...", A, go, g_ow))
    i_T2 = anti * uv + np.einsum("...ij,...i,...j->...", A, go, go) * uv * uv
    a0_term, a_term, N_term, T1, T2 = (quad(i) for i in (i_a0, i_a, i_N, i_T1, i_T2))
    return IdentityBreakdown(a0_term, a_term, N_term, T1, T2, a0_term - (a_term - N_term + T1 + T2))


# ---------------------------------------------------------------------------
# layered local estimate

def local_estimate_experiment(space: LagrangeSpace, coeffs: CoefficientSet, f, D: Rect, omega0: Rect,
                              exterior=None, system=None, gram=None, seed: int = 0,
                              keep_boundary: bool = True) -> EstimateRecord:
    """Solve the local problem on Omega0 and compare ||w||_{1,D} with the layered bound.

    ``exterior`` supplies w on the DOFs of Omega0 that are not test DOFs; sides
    of Omega0 on the domain boundary carry zero data and count no layers.
    """
    mesh = space.mesh
    try:
        p = layer_count(mesh, D, omega0, keep_boundary=keep_boundary)
    except ContainmentError as exc:
        raise LayerError(str(exc)) from exc
    if system is None:
        system = (forms.assemble_a0(space, coeffs), forms.assemble_N(space, coeffs))
    load = forms.assemble_load(space, f, region=omega0) if f is not None else np.zeros(space.dim)
    w = solve_local_galerkin(space, coeffs, load, omega0, exterior=exterior, zero_trace=True, system=system)
    lhs = forms.norm_H1(w, D)
    n0 = forms.norm_L2(w, omega0)
    fdual = forms.dual_norm_Hm1(space, omega0, load, zero_trace=True, gram=gram)
    d, h, r = omega0.diameter, mesh.h, space.degree
    eps = epsilon(d, h, r)
    layer = eps ** ((p + 1) / 2) / h * n0
    data = layered_sum(eps, p) * (fdual + n0)
    layer_full = eps ** (p + 1) / h * n0
    data_half = layered_sum(eps, p, half_powers=True) * (fdual + n0)
    naive = lhs / (n0 + fdual) if n0 + fdual > 0 else 0.0
    return EstimateRecord(
        "local-estimate", h, d, r, p, seed, coeffs.name, lhs, {"layer": layer, "data": data},
        {"eps": eps, "norm0_w": n0, "fdual": fdual, "naive_ratio": naive,
         "ratio_full_layer_power": lhs / (layer_full + data) if lhs > 0 else 0.0,
         "ratio_half_sum_powers": lhs / (layer + data_half) if lhs > 0 else 0.0})


def naive_constant_sweep(records: list[EstimateRecord]) -> FitResult:
    """Fit the naive constant ||w||_{1,D} / (||w||_0 + ||f||_-1) against d."""
    ds = np.array([r.d for r in records])
    if np.unique(ds).size < 3 or np.unique(ds).size != ds.size:
        raise SampleError("naive sweep needs at least 3 distinct d values, one record each")
    order = np.argsort(ds)
    ds = ds[order]
    naive = np.array([records[i].extras["naive_ratio"] for i in order])
    slope, ci = loglog_slope(ds, naive)
    # strictly increasing as d decreases
    monotone = bool(np.all(np.diff(naive) < 0))
    return FitResult(float(naive.max()), slope, ci, len(records), monotone)


# ---------------------------------------------------------------------------
# global convergence

def convergence_experiment(coeffs: CoefficientSet, u: ScalarField, r: int, n_values,
                           domain: Rect = Rect(0.0, 0.0, 1.0, 1.0)) -> tuple[list[EstimateRecord], dict]:
    if len(set(n_values)) < 3:
        raise SampleError("convergence needs at least 3 mesh sizes")
    f = coeffs.operator(u)
    records = []
    for n in sorted(set(n_values)):
        space = build_space(build_mesh(domain, n), r)
        uh = solve_dirichlet(space, coeffs, f)
        l2_sq, h1_sq = forms.squared_norms(uh - u, space=space)
        e0, e1 = math.sqrt(l2_sq), math.sqrt(l2_sq + h1_sq)
        h = space.mesh.h
        records.append(EstimateRecord("convergence", h, domain.diameter, r, 0, 0, coeffs.name, e1,
                                      {"h_power_r": h ** r}, {"l2_error": e0, "h1_error": e1}))
    hs = [rec.h for rec in records]
    s1, c1 = loglog_slope(hs, [rec.extras["h1_error"] for rec in records])
    s0, c0 = loglog_slope(hs, [rec.extras["l2_error"] for rec in records])
    fits = {"H1": FitResult(max(rec.extras["h1_error"] for rec in records), s1, c1, len(records)),
            "L2": FitResult(max(rec.extras["l2_error"] for rec in records), s0, c0, len(records))}
    return records, fits
