"""
The isotropic scale map onto a unit-size reference subdomain, smooth cutoffs,
the per-layer contraction factor and the closed-form right-hand sides of the
superapproximation and layered local bounds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fespace import ScalarField
from .mesh import Rect


class ScaleError(ValueError):
    pass


class ScaleOrderingError(ValueError):
    pass


class GapError(ValueError):
    pass


class MultiIndex(NamedTuple):
    a1: int
    a2: int

    @property
    def order(self) -> int:
        return self.a1 + self.a2


@dataclass(frozen=True)
class AffineScaleMap:
    x0: tuple[float, float]
    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ScaleError(f"scale must be positive, got {self.d}")

    @classmethod
    def for_region(cls, region: Rect) -> "AffineScaleMap":
        return cls(region.center, region.diameter)

    def forward(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.x0)) / self.d

    def backward(self, xi) -> np.ndarray:
        return np.asarray(self.x0) + self.d * np.asarray(xi, dtype=float)

    def pullback(self, u: ScalarField) -> ScalarField:
        """The field u-hat(xi) = u(x0 + d xi)."""
        x0, y0 = self.x0
        d = self.d
        return ScalarField(lambda s, t: u(x0 + d * s, y0 + d * t), name=f"hat[{u.name}]")


def map_forward(m: AffineScaleMap, x) -> np.ndarray:
    return m.forward(x)


def map_backward(m: AffineScaleMap, xi) -> np.ndarray:
    return m.backward(xi)


# 8th-order central stencils
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_OFFSETS = np.arange(-4, 5)


def finite_difference(f, alpha: tuple[int, int], s, t, step: float = 1e-2) -> np.ndarray:
    """D^alpha f at (s, t) by tensor-product 8th-order central differences."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    stencils = {0: np.array([1.0]), 1: _D1, 2: _D2}
    offs = {0: np.array([0]), 1: _OFFSETS, 2: _OFFSETS}
    cx, cy = stencils[alpha[0]], stencils[alpha[1]]
    ox, oy = offs[alpha[0]], offs[alpha[1]]
    acc = np.zeros(np.broadcast(s, t).shape)
    for wx, kx in zip(cx, ox):
        if wx == 0.0:
            continue
        for wy, ky in zip(cy, oy):
            if wy == 0.0:
                continue
            acc = acc + wx * wy * f(s + kx * step, t + ky * step)
    return acc / step ** (alpha[0] + alpha[1])


def verify_derivative_scaling(u: ScalarField, m: AffineScaleMap, alpha, points, step: float = 1e-2) -> float:
    """Max relative mismatch between D-hat^alpha u-hat(xi) and d^|alpha| D^alpha u(x).

    The left side is a finite difference of the pulled-back field in mapped
    coordinates; the right side uses the analytic derivatives of ``u``.
    """
    alpha = MultiIndex(*alpha)
    if alpha.order > 2:
        raise ValueError("only |alpha| <= 2 is supported")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi = m.forward(pts)
    uhat = m.pullback(u)
    if alpha.order == 0:
        lhs = uhat(xi[:, 0], xi[:, 1])
    else:
        lhs = finite_difference(uhat, alpha, xi[:, 0], xi[:, 1], step)
    rhs = m.d ** alpha.order * u.derivative(alpha, pts[:, 0], pts[:, 1])
    return float(np.max(np.abs(lhs - rhs) / (np.abs(rhs) + 1e-14)))


@dataclass(frozen=True)
class EpsilonParams:
    d: float
    h: float
    r: int

    def __post_init__(self):
        if not (0 < self.h <= self.d):
            raise ScaleOrderingError(f"need 0 < h <= d, got h={self.h}, d={self.d}")


def epsilon(d: float, h: float, r: int) -> float:
    """(d^-2 (h/d)^(2r) + h/d)^(1/2)."""
    p = EpsilonParams(d, h, r)
    q = p.h / p.d
    return float(np.sqrt(p.d ** -2 * q ** (2 * p.r) + q))


def rhs_bound_superapprox(d: float, h: float, r: int, norm0_w: float, norm1_w: float, C: float = 1.0) -> float:
    q = h / d
    return C * q ** r / d * norm0_w + C * q * norm1_w


def layered_sum(eps: float, p: int, half_powers: bool = False) -> float:
    """sum_{j=0}^{p} eps^j (or eps^{j/2}), with 0^0 = 1."""
    exps = np.arange(p + 1) / (2.0 if half_powers else 1.0)
    return float(sum(1.0 if e == 0 else eps ** e for e in exps))


def rhs_bound_local_estimate(eps: float, p: int, h: float, norm0_w: float, fdual: float, C: float = 1.0) -> float:
    if p < 0:
        raise ValueError("layer count must be nonnegative")
    return C * (eps ** ((p + 1) / 2) / h * norm0_w + layered_sum(eps, p) * (fdual + norm0_w))


# ---------------------------------------------------------------------------
# cutoff functions

def _smoothstep(t):
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d1(t):
    return 30.0 * t * t * (1.0 - t) ** 2


def _smoothstep_d2(t):
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


def _profile(x, s0, p0, p1, s1, der: int):
    """1D cutoff profile (0 outside [s0, s1], 1 on [p0, p1]) or its derivatives."""
    x = np.asarray(x, dtype=float)
    left = (x > s0) & (x < p0)
    right = (x > p1) & (x < s1)
    tl = np.clip((x - s0) / (p0 - s0), 0.0, 1.0)
    tr = np.clip((s1 - x) / (s1 - p1), 0.0, 1.0)
    if der == 0:
        out = np.where((x >= p0) & (x <= p1), 1.0, 0.0)
        return np.where(left, _smoothstep(tl), np.where(right, _smoothstep(tr), out))
    if der == 1:
        return np.where(left, _smoothstep_d1(tl) / (p0 - s0),
                        np.where(right, -_smoothstep_d1(tr) / (s1 - p1), 0.0))
    return np.where(left, _smoothstep_d2(tl) / (p0 - s0) ** 2,
                    np.where(right, _smoothstep_d2(tr) / (s1 - p1) ** 2, 0.0))


class CutoffFunction(ScalarField):
    """Tensor-product quintic smoothstep: 1 on ``plateau``, 0 outside ``support``, C^2 in between."""

    smoothness = 2

    def __init__(self, plateau: Rect, support: Rect):
        gaps = (plateau.xmin - support.xmin, plateau.ymin - support.ymin,
                support.xmax - plateau.xmax, support.ymax - plateau.ymax)
        if min(gaps) <= 0:
            raise GapError(f"plateau {plateau} must sit strictly inside support {support}")
        self.plateau = plateau
        self.support = support
        self.min_gap = min(gaps)
        self.derivative_bound = (15.0 / 8.0) / self.min_gap
        xs = (support.xmin, plateau.xmin, plateau.xmax, support.xmax)
        ys = (support.ymin, plateau.ymin, plateau.ymax, support.ymax)

        def value(x, y):
            return _profile(x, *xs, 0) * _profile(y, *ys, 0)

        def grad(x, y):
            px, py = _profile(x, *xs, 0), _profile(y, *ys, 0)
            return _profile(x, *xs, 1) * py, px * _profile(y, *ys, 1)

        def hess(x, y):
            px, py = _profile(x, *xs, 0), _profile(y, *ys, 0)
            dx, dy = _profile(x, *xs, 1), _profile(y, *ys, 1)
            return _profile(x, *xs, 2) * py, dx * dy, px * _profile(y, *ys, 2)

        super().__init__(value, grad, hess, name="omega")


def build_cutoff(plateau: Rect, support: Rect, smoothness: int = 2) -> CutoffFunction:
    if smoothness != 2:
        raise ValueError("only the C^2 quintic profile is available")
    return CutoffFunction(plateau, support)


def default_cutoff(region: Rect, support_inset: float = 1 / 8, plateau_inset: float = 1 / 4) -> CutoffFunction:
    """Cutoff whose geometry scales with ``region``: insets are fractions of its side lengths."""
    w, h = region.width, region.height
    support = Rect(region.xmin + support_inset * w, region.ymin + support_inset * h,
                   region.xmax - support_inset * w, region.ymax - support_inset * h)
    plateau = Rect(region.xmin + plateau_inset * w, region.ymin + plateau_inset * h,
                   region.xmax - plateau_inset * w, region.ymax - plateau_inset * h)
    return CutoffFunction(plateau, support)
