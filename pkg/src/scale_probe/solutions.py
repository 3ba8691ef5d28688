"""Analytic test fields with exact first and second derivatives."""
from __future__ import annotations

import numpy as np

from .fespace import ScalarField
from .mesh import Rect


def sine(k: float = 1.0) -> ScalarField:
    """sin(k pi x) sin(k pi y)."""
    a = k * np.pi

    def value(x, y):
        return np.sin(a * x) * np.sin(a * y)

    def grad(x, y):
        return a * np.cos(a * x) * np.sin(a * y), a * np.sin(a * x) * np.cos(a * y)

    def hess(x, y):
        s = np.sin(a * x) * np.sin(a * y)
        return -a * a * s, a * a * np.cos(a * x) * np.cos(a * y), -a * a * s

    return ScalarField(value, grad, hess, name=f"sin({k}pi x)sin({k}pi y)")


def linear(cx: float, cy: float, c0: float = 0.0) -> ScalarField:
    return ScalarField(lambda x, y: cx * x + cy * y + c0,
                       lambda x, y: (cx + 0.0 * x, cy + 0.0 * x),
                       lambda x, y: (0.0 * x, 0.0 * x, 0.0 * x), name=f"{cx}x+{cy}y+{c0}")


def trig(kx: float, ky: float, phase: float = 0.3) -> ScalarField:
    """cos(kx x + phase) sin(ky y), a smooth field without symmetry."""
    def value(x, y):
        return np.cos(kx * x + phase) * np.sin(ky * y)

    def grad(x, y):
        return -kx * np.sin(kx * x + phase) * np.sin(ky * y), ky * np.cos(kx * x + phase) * np.cos(ky * y)

    def hess(x, y):
        return (-kx * kx * np.cos(kx * x + phase) * np.sin(ky * y),
                -kx * ky * np.sin(kx * x + phase) * np.cos(ky * y),
                -ky * ky * np.cos(kx * x + phase) * np.sin(ky * y))

    return ScalarField(value, grad, hess, name=f"cos({kx}x+{phase})sin({ky}y)")


def harmonic_series(coefficients, region: Rect) -> ScalarField:
    """sum_k c_k Im(z^(2k)) with z = ((x - x0) + i(y - y0)) / L, anchored at the lower-left corner.

    Each term is harmonic and vanishes on the two sides through the anchor.
    """
    c = np.asarray(coefficients, dtype=float)
    powers = 2 * np.arange(1, c.size + 1)
    x0, y0, L = region.xmin, region.ymin, region.width

    def z(x, y):
        return ((np.asarray(x) - x0) + 1j * (np.asarray(y) - y0)) / L

    def F(x, y, der):
        zz = z(x, y)
        out = np.zeros(np.shape(zz), dtype=complex)
        for ck, m in zip(c, powers):
            coef = ck
            for j in range(der):
                coef = coef * (m - j)
            out = out + coef * zz ** (m - der)
        return out / L ** der

    def value(x, y):
        return F(x, y, 0).imag

    def grad(x, y):
        g = F(x, y, 1)
        return g.imag, g.real

    def hess(x, y):
        g = F(x, y, 2)
        return g.imag, g.real, -g.imag

    return ScalarField(value, grad, hess, name="harmonic")


def random_harmonic(seed, region: Rect, terms: int = 3) -> ScalarField:
    rng = np.random.default_rng(seed)
    return harmonic_series(rng.uniform(-1.0, 1.0, terms), region)


def corner_harmonic(region: Rect) -> ScalarField:
    """2 x y / L^2 relative to the lower-left corner of ``region``."""
    return harmonic_series([1.0], region)


def random_source(seed, region: Rect, modes: int = 2) -> ScalarField:
    """Random sine series on ``region``, scaled by 1/side^2 so the induced solution is O(1)."""
    amp = np.random.default_rng(seed).uniform(-1.0, 1.0, (modes, modes))
    k = np.arange(1, modes + 1)

    def value(x, y):
        X = (np.asarray(x, dtype=float) - region.xmin) / region.width
        Y = (np.asarray(y, dtype=float) - region.ymin) / region.height
        sx = np.sin(np.pi * k * X[..., None])
        sy = np.sin(np.pi * k * Y[..., None])
        return np.einsum("...k,kl,...l->...", sx, amp, sy) / region.width ** 2

    return ScalarField(value, name="source")
