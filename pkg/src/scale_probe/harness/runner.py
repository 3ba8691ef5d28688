"""Experiment orchestration: grid points, fits, invariant checks and CSV output."""
from __future__ import annotations

import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy

from .. import __version__, estimates, forms
from ..estimates import EstimateRecord, sample_seed
from ..fespace import build_space, interior_dofs, random_fefunction, random_smooth_fefunction
from ..mesh import Rect, build_mesh, cells_in, shrink_by_layers
from ..scaling import default_cutoff
from ..solutions import corner_harmonic, random_source, sine
from .config import ExperimentConfig
from .tables import ResultTable

UNIT = Rect(0.0, 0.0, 1.0, 1.0)
# local problems sit in the corner of [0, 2]^2 so that two sides of every
# subdomain are free to lose layers while the other two stay on the boundary
LOCAL_DOMAIN = Rect(0.0, 0.0, 2.0, 2.0)
IDENTITY_FLOOR = 1e-12
LEMMA_MODES = 2

BASE_COLUMNS = ("experiment", "preset", "r", "h", "d", "p", "seed", "lhs", "rhs", "ratio")
FIT_COLUMNS = ("experiment", "series", "statistic", "value")
PLOT_COLUMNS = ("log10_x", "log10_y", "series")

# rhs term names and extras, in column order
SCHEMAS = {
    "convergence": (("h_power_r",), ("l2_error", "h1_error")),
    "inverse": (("l2_norm",), ()),
    "superapprox": (("low_order", "gradient"), ("side", "norm0_w", "norm1_w", "outside_nonzero", "quad_delta")),
    "technique": (("l2_squared",), ("a0_term", "a_term")),
    "identity": (("a0_abs",), ("level", "a0_term", "a_term", "N_term", "T1", "T2", "defect")),
    "local-estimate": (("layer", "data"), ("side", "eps", "norm0_w", "fdual", "naive_ratio",
                                          "ratio_full_layer_power", "ratio_half_sum_powers")),
    "naive-sweep": (("layer", "data"), ("side", "eps", "norm0_w", "fdual", "naive_ratio",
                                       "ratio_full_layer_power", "ratio_half_sum_powers")),
}


class ExperimentError(RuntimeError):
    pass


def record_columns(experiment: str) -> tuple[str, ...]:
    terms, extras = SCHEMAS[experiment]
    return BASE_COLUMNS + tuple(f"rhs_{t}" for t in terms) + tuple(extras)


def schema_text() -> str:
    lines = []
    for name in SCHEMAS:
        lines.append(f"{name}")
        lines.append(f"  records.csv: {','.join(record_columns(name))}")
        lines.append(f"  fits.csv: {','.join(FIT_COLUMNS)}")
        lines.append(f"  plotdata.csv: {','.join(PLOT_COLUMNS)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# grid points

@dataclass(frozen=True)
class Task:
    experiment: str
    index: int
    params: tuple


def make_tasks(cfg: ExperimentConfig) -> list[Task]:
    e = cfg.experiment
    if e == "convergence":
        grid = list(product(cfg.preset, cfg.r))
    elif e == "identity":
        grid = list(product(cfg.preset, cfg.levels))
    elif e in ("technique", "local-estimate"):
        grid = list(product(cfg.preset, cfg.r, cfg.n))
    elif e in ("inverse", "superapprox"):
        grid = list(product(cfg.r, cfg.n))
    else:
        grid = list(product(cfg.preset, cfg.r))
    return [Task(e, i, params) for i, params in enumerate(grid)]


def _seed(cfg, task, sub, s):
    # counter-based: (grid point, sub-point) x sample
    return sample_seed(cfg.seed, task.index * 1000 + sub, s)


def _run_convergence(cfg, task):
    name, r = task.params
    records, _ = estimates.convergence_experiment(forms.preset(name), sine(), r, cfg.n)
    return records


def _run_inverse(cfg, task):
    r, n = task.params
    space = build_space(build_mesh(UNIT, n), r)
    support = space.dofs_of_cells(cells_in(space.mesh, UNIT))
    return [estimates.inverse_estimate_experiment(space, UNIT, random_fefunction(space, _seed(cfg, task, 0, s), support), s)
            for s in range(cfg.seeds)]


def _run_superapprox(cfg, task):
    r, n = task.params
    space = build_space(build_mesh(UNIT, n), r)
    out = []
    for k, side in enumerate(cfg.d):
        G = Rect(0.0, 0.0, side, side)
        omega = default_cutoff(G)
        support = space.dofs_of_cells(cells_in(space.mesh, G))
        for s in range(cfg.seeds):
            seed = _seed(cfg, task, k, s)
            if s % 2 == 0:
                w = random_fefunction(space, seed, support)
            else:
                w = random_smooth_fefunction(space, seed, G, support)
            rec = estimates.superapprox_experiment(space, G, omega, w, seed=s, preset="none")
            out.append(_with_extras(rec, side=side))
    return out


def _run_technique(cfg, task):
    name, r, n = task.params
    coeffs = forms.preset(name)
    space = build_space(build_mesh(UNIT, n), r)
    omega = default_cutoff(UNIT)
    idx = interior_dofs(space, UNIT)
    out = []
    for s in range(cfg.seeds):
        seed = _seed(cfg, task, 0, s)
        if s % 2 == 0:
            w = random_fefunction(space, seed, idx)
        else:
            w = random_smooth_fefunction(space, seed, UNIT, idx, modes=LEMMA_MODES)
        out.append(estimates.technique_lemma_experiment(space, coeffs, omega, w, UNIT, seed=s))
    return out


def _run_identity(cfg, task):
    name, level = task.params
    omega = default_cutoff(UNIT)
    b = estimates.identity_check(sine(), omega, forms.preset(name), cfg.quad_degree, level)
    support = omega.support
    return [EstimateRecord(
        "identity", support.diameter / level, support.diameter, 0, 0, 0, name, abs(b.defect),
        {"a0_abs": abs(b.a0_term)},
        {"level": float(level), "a0_term": b.a0_term, "a_term": b.a_term, "N_term": b.N_term,
         "T1": b.T1, "T2": b.T2, "defect": b.defect})]


def _local_setup(name, r, n):
    coeffs = forms.preset(name)
    space = build_space(build_mesh(LOCAL_DOMAIN, 2 * n), r)
    system = (forms.assemble_a0(space, coeffs), forms.assemble_N(space, coeffs))
    return coeffs, space, system, forms.h1_gram(space)


def _run_local(cfg, task):
    name, r, n = task.params
    coeffs, space, system, gram = _local_setup(name, r, n)
    out = []
    for k, (side, p) in enumerate(product(cfg.d, cfg.p)):
        omega0 = Rect(0.0, 0.0, side, side)
        D = shrink_by_layers(space.mesh, omega0, p, keep_boundary=True)
        for s in range(cfg.seeds):
            f = random_source(_seed(cfg, task, k, s), omega0)
            rec = estimates.local_estimate_experiment(space, coeffs, f, D, omega0, system=system, gram=gram, seed=s)
            out.append(_with_extras(rec, side=side))
    return out


def _run_naive(cfg, task):
    name, r = task.params
    (n,), (p,) = cfg.n, cfg.p
    coeffs, space, system, gram = _local_setup(name, r, n)
    out = []
    for side in cfg.d:
        omega0 = Rect(0.0, 0.0, side, side)
        D = shrink_by_layers(space.mesh, omega0, p, keep_boundary=True)
        rec = estimates.local_estimate_experiment(space, coeffs, None, D, omega0, exterior=corner_harmonic(omega0),
                                                  system=system, gram=gram)
        out.append(_with_extras(rec, experiment="naive-sweep", side=side))
    return out


def _with_extras(rec: EstimateRecord, experiment: str | None = None, **extra) -> EstimateRecord:
    return EstimateRecord(experiment or rec.experiment, rec.h, rec.d, rec.r, rec.p, rec.seed, rec.preset,
                          rec.lhs, rec.rhs_terms, {**extra, **rec.extras})


RUNNERS = {
    "convergence": _run_convergence,
    "inverse": _run_inverse,
    "superapprox": _run_superapprox,
    "technique": _run_technique,
    "identity": _run_identity,
    "local-estimate": _run_local,
    "naive-sweep": _run_naive,
}


def execute_task(args) -> list[EstimateRecord]:
    cfg, task = args
    try:
        return RUNNERS[task.experiment](cfg, task)
    except Exception as exc:
        raise ExperimentError(f"{task.experiment} at grid point {task.params}: {type(exc).__name__}: {exc}") from exc


def sort_records(records: list[EstimateRecord]) -> list[EstimateRecord]:
    return sorted(records, key=EstimateRecord.key)


# ---------------------------------------------------------------------------
# fits

def _group(records, key):
    groups: dict = {}
    for rec in records:
        groups.setdefault(key(rec), []).append(rec)
    return groups


def _cemp_by_h(recs):
    by_h = _group(recs, lambda rec: rec.h)
    return {h: estimates.fit_constant(rs).C_emp for h, rs in sorted(by_h.items())}


def _ratio_spread(values) -> float:
    values = list(values)
    lo = min(values)
    return max(values) / lo if lo > 0 else math.inf


def compute_fits(cfg: ExperimentConfig, records: list[EstimateRecord]):
    """Rows of (series, statistic, value) and plot rows of (x, y, series)."""
    e = cfg.experiment
    fits, plot = [], []
    if e == "convergence":
        for (name, r), recs in sorted(_group(records, lambda x: (x.preset, x.r)).items()):
            hs = [x.h for x in recs]
            for label, key in (("H1", "h1_error"), ("L2", "l2_error")):
                ys = [x.extras[key] for x in recs]
                slope, ci = estimates.loglog_slope(hs, ys)
                series = f"{name} r={r}"
                if slope is not None:
                    fits += [(series, f"{label}_slope", slope), (series, f"{label}_slope_ci", ci)]
                fits.append((series, f"{label}_max_error", max(ys)))
                plot += [(h, y, f"{label} {series}") for h, y in zip(hs, ys)]
    elif e in ("inverse", "superapprox", "technique"):
        if e == "superapprox":
            key = lambda x: (x.r, x.extras["side"])
            label = lambda k: f"r={k[0]} d={k[1]!r}"
        elif e == "technique":
            key = lambda x: (x.preset, x.r)
            label = lambda k: f"{k[0]} r={k[1]}"
        else:
            key = lambda x: x.r
            label = lambda k: f"r={k}"
        for k, recs in sorted(_group(records, key).items()):
            series = label(k)
            cemp = _cemp_by_h(recs)
            for h, c in cemp.items():
                fits.append((series, f"C_emp h={h!r}", c))
                plot.append((h, c, series))
            fits.append((series, "C_emp", estimates.fit_constant(recs).C_emp))
            if e != "technique":
                fits.append((series, "max_over_min", _ratio_spread(cemp.values())))
            else:
                coarse = max(cemp)
                c0 = cemp[coarse]
                worst = max(x.ratio for x in recs if x.h != coarse) if len(cemp) > 1 else c0
                fits.append((series, "C_emp_coarsest", c0))
                fits.append((series, "validation_max_ratio", worst))
                if c0 > 0:
                    fits.append((series, "validation_max_over_C_emp", worst / c0))
            if e == "superapprox":
                fits.append((series, "outside_nonzero_max", max(x.extras["outside_nonzero"] for x in recs)))
        if e == "superapprox":
            # d-sweep at each fixed h against the d = 1 constant at that h
            for (r, h), recs in sorted(_group(records, lambda x: (x.r, x.h)).items()):
                ref = [x for x in recs if x.extras["side"] == 1.0]
                if ref and len({x.extras["side"] for x in recs}) > 1:
                    c1 = estimates.fit_constant(ref).C_emp
                    fits.append((f"r={r} h={h!r}", "d_sweep_max_over_C_emp_d1", max(x.ratio for x in recs) / c1))
    elif e == "identity":
        for name, recs in sorted(_group(records, lambda x: x.preset).items()):
            recs = sorted(recs, key=lambda x: x.extras["level"])
            defects = [x.lhs for x in recs]
            fits.append((name, "defect_finest", defects[-1]))
            fits.append((name, "defect_max", max(defects)))
            tail = [max(v, IDENTITY_FLOOR) for v in defects[-3:]]
            fits.append((name, "nonincreasing_last3", all(b <= a for a, b in zip(tail, tail[1:]))))
            plot += [(x.h, x.lhs, name) for x in recs]
    elif e == "local-estimate":
        for (name, r), recs in sorted(_group(records, lambda x: (x.preset, x.r)).items()):
            ratios = [x.ratio for x in recs]
            fits.append((f"{name} r={r}", "grid_max_over_min", _ratio_spread(ratios)))
            fits.append((f"{name} r={r}", "all_finite", all(math.isfinite(v) for v in ratios)))
            for (side, p), sub in sorted(_group(recs, lambda x: (x.extras["side"], x.p)).items()):
                series = f"{name} r={r} d={side!r} p={p}"
                fits.append((series, "C_emp", estimates.fit_constant(sub).C_emp))
                hs = [x.h for x in sub]
                fits.append((series, "kendall_tau_h", estimates.kendall_tau(hs, [x.ratio for x in sub])))
                # the same trend test for the two alternative exponent readings
                for variant in ("ratio_full_layer_power", "ratio_half_sum_powers"):
                    fits.append((series, f"kendall_tau_h_{variant}",
                                 estimates.kendall_tau(hs, [x.extras[variant] for x in sub])))
                for h, c in _cemp_by_h(sub).items():
                    fits.append((series, f"C_emp h={h!r}", c))
                plot += [(x.h, x.ratio, series) for x in sub]
    elif e == "naive-sweep":
        for (name, r), recs in sorted(_group(records, lambda x: (x.preset, x.r)).items()):
            series = f"{name} r={r}"
            fit = estimates.naive_constant_sweep(recs)
            fits += [(series, "naive_max", fit.C_emp), (series, "monotone_increasing_as_d_decreases", fit.monotone)]
            if fit.slope is not None:
                fits += [(series, "slope", fit.slope), (series, "slope_ci", fit.slope_ci),
                         (series, "ci_excludes_zero", abs(fit.slope) > fit.slope_ci)]
            fits.append((series, "C_emp", estimates.fit_constant(recs).C_emp))
            plot += [(x.d, x.extras["naive_ratio"], series) for x in recs]
    return fits, plot


# ---------------------------------------------------------------------------
# invariants

def check_invariants(cfg: ExperimentConfig, records, fits) -> list[str]:
    out = []
    e = cfg.experiment
    for i, rec in enumerate(records):
        vals = [rec.lhs, rec.ratio, *rec.rhs_terms.values(), *rec.extras.values()]
        if not all(math.isfinite(v) for v in vals):
            out.append(f"VIOLATION experiment={e} invariant=finite row={i}")
        if not rec.ratio >= 0:
            out.append(f"VIOLATION experiment={e} invariant=ratio_nonnegative row={i} value={rec.ratio!r}")
        if e == "superapprox" and rec.extras["outside_nonzero"] != 0:
            out.append(f"VIOLATION experiment={e} invariant=v_in_Sh0 row={i} count={rec.extras['outside_nonzero']!r}")
        if e == "identity" and rec.preset == "laplace" and rec.extras["T1"] != 0.0:
            out.append(f"VIOLATION experiment={e} invariant=T1_zero_without_advection row={i}")
    for j, (series, stat, value) in enumerate(fits):
        if isinstance(value, float) and not math.isfinite(value):
            out.append(f"VIOLATION experiment={e} invariant=finite_fit row={j} series={series!r} statistic={stat!r}")
    return out


# ---------------------------------------------------------------------------
# run

@dataclass
class RunResult:
    records: ResultTable
    fits: ResultTable
    plot: ResultTable
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _metadata(cfg: ExperimentConfig):
    return [("config", cfg.echo().rstrip("\n")),
            ("version", f"scale-probe {__version__}"),
            ("platform", f"python {platform.python_version()} numpy {np.__version__} scipy {scipy.__version__}")]


def run(cfg: ExperimentConfig, out: str | None = None, jobs: int = 1) -> RunResult:
    """Execute every grid point, fit, check invariants and (if ``out`` is set) write the CSVs."""
    out = cfg.out if out is None else out
    if out is not None:
        if not str(out).strip():
            raise FileNotFoundError("output directory path is empty")
        os.makedirs(out, exist_ok=True)
    tasks = make_tasks(cfg)
    args = [(cfg, t) for t in tasks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(execute_task, args))
    else:
        chunks = [execute_task(a) for a in args]
    records = sort_records([rec for chunk in chunks for rec in chunk])
    fits, plot = compute_fits(cfg, records)
    violations = check_invariants(cfg, records, fits)

    meta = _metadata(cfg)
    rec_table = ResultTable(record_columns(cfg.experiment), metadata=meta)
    terms, extras = SCHEMAS[cfg.experiment]
    for rec in records:
        rec_table.add((rec.experiment, rec.preset, rec.r, rec.h, rec.d, rec.p, rec.seed, rec.lhs, rec.rhs, rec.ratio,
                       *(rec.rhs_terms[t] for t in terms), *(float(rec.extras[x]) for x in extras)))
    fit_table = ResultTable(FIT_COLUMNS, metadata=meta)
    for series, stat, value in fits:
        fit_table.add((cfg.experiment, series, stat, value if isinstance(value, bool) else float(value)))
    plot_table = ResultTable(PLOT_COLUMNS, metadata=meta)
    for x, y, series in plot:
        # log-log pairs; nonpositive values have no logarithm and are skipped
        if x > 0 and y > 0:
            plot_table.add((math.log10(x), math.log10(y), series))

    if out is not None:
        rec_table.write(os.path.join(out, "records.csv"))
        fit_table.write(os.path.join(out, "fits.csv"))
        plot_table.write(os.path.join(out, "plotdata.csv"))
        with open(os.path.join(out, "run.cfg"), "w", encoding="utf-8") as fh:
            fh.write(cfg.echo())
    for line in violations:
        print(line, file=sys.stderr)
    return RunResult(rec_table, fit_table, plot_table, violations)
