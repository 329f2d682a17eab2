"""Smooth bumps and their Laplace-type transforms.

The standard compactly supported bump exp(-1/(1-t^2)) scaled to unit mass
is used everywhere a step has to be smoothed.  Because all spectral
formulas probe profiles through integrals of the form
int f(y) exp(-p y) dy, each bump carries fixed Gauss-Legendre nodes over
its own support so transforms stay spectrally accurate for any p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _unit_bump_mass():
    # the kernel is C-infinity on the closed interval, so Gauss-Legendre
    # converges spectrally; 400 nodes is far past double precision
    x, w = np.polynomial.legendre.leggauss(400)
    return float(np.sum(w * np.exp(-1.0 / (1.0 - x * x))))


_BUMP_MASS = _unit_bump_mass()


def bump_kernel(t):
    """Unnormalized C-infinity bump on (-1,1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def mollifier(eps, y):
    """Unit-mass mollifier of half-width eps evaluated at y (y=0 is the center)."""
    if eps <= 0:
        raise ValueError("mollifier half-width must be positive")
    return bump_kernel(np.asarray(y, dtype=float) / eps) / (eps * _BUMP_MASS)


def mollifier_derivative(eps, y):
    """d/dy of the unit-mass mollifier (used for the derivative-bound checks)."""
    y = np.asarray(y, dtype=float)
    t = y / eps
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti)) * (-2.0 * ti / (1.0 - ti * ti) ** 2)
    return out / (eps * eps * _BUMP_MASS)


@dataclass(frozen=True)
class MollifierSpec:
    """Bump kernel identifier + half-width; only the standard kernel is shipped."""

    eps: float
    shape: str = "bump"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.shape != "bump":
            raise ValueError(f"unknown mollifier shape {self.shape!r}")


def gauss_panel(a, b, n):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


class BumpTransform:
    """Unit-mass bump at depth `center` with half-width `width`.

    transform(p)  = int delta(y - center) exp(-p y) dy
    defect(p)     = transform(p) - 1, evaluated cancellation-free via expm1
                    so it stays accurate for |p·center| << 1.
    Both accept real or complex p, scalar or array.
    """

    def __init__(self, center, width, n_nodes=96):
        if center - width <= 0:
            raise ValueError("bump support must stay inside y > 0")
        self.center = float(center)
        self.width = float(width)
        y, w = gauss_panel(center - width, center + width, n_nodes)
        self.nodes = y
        self.weights = w * mollifier(width, y - center)

    def transform(self, p):
        p = np.asarray(p)
        scalar = p.ndim == 0
        E = np.exp(-np.multiply.outer(np.atleast_1d(p), self.nodes))
        out = E @ self.weights
        return out[0] if scalar else out

    def defect(self, p):
        p = np.asarray(p)
        scalar = p.ndim == 0
        arg = -np.multiply.outer(np.atleast_1d(p), self.nodes)
        E = np.expm1(arg) if not np.iscomplexobj(arg) else np.exp(arg) - 1.0
        out = E @ self.weights
        return out[0] if scalar else out

    def density(self, y):
        return mollifier(self.width, np.asarray(y, dtype=float) - self.center)

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)
