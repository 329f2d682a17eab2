"""Physical parameters and eigenvalue bookkeeping for the linearized layer problem."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class MarangoniError(Exception):
    """Base class for all package errors."""


class ValidationError(MarangoniError):
    """Invalid user input or configuration."""


class ConvergenceError(MarangoniError):
    """Iteration failed; carries the last iterate and residual."""

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class DesignError(MarangoniError):
    """Profile design could not meet its targets."""


def check_wave_number(k):
    """Wave numbers are positive reals (negative k is redundant by symmetry)."""
    k = float(k)
    if not k > 0.0:
        raise ValidationError(f"wave number must be > 0, got {k}")
    return k


def branch_sqrt(z):
    """Square root on the branch Re >= 0, ties (negative real axis) to Im >= 0.

    This is numpy's principal branch; spelled out here because every
    spectral formula depends on it staying fixed.
    """
    r = complex(z) ** 0.5
    if r.real < 0.0:
        r = -r
    return r


@dataclass(frozen=True)
class FluidParams:
    """Dimensionless fluid layer parameters.

    nu : viscosity; D_thermal : thermal diffusivity; b : Marangoni number
    (the bifurcation parameter); h : layer depth.  With the asymptotic
    regime flag the depth is slaved to viscosity, h = 10 ln(nu).
    """

    nu: float
    D_thermal: float = 1.0
    b: float = 1.0
    h: float | None = None
    asymptotic_regime: bool = False

    def __post_init__(self):
        if self.nu <= 0 or self.D_thermal <= 0 or self.b <= 0:
            raise ValidationError("nu, D_thermal and b must be positive")
        if self.asymptotic_regime:
            object.__setattr__(self, "h", 10.0 * math.log(self.nu))
        if self.h is None or self.h <= 0:
            raise ValidationError("layer depth h must be positive (or set asymptotic_regime)")

    @property
    def Dbar(self):
        return self.D_thermal / self.b

    def with_b(self, b):
        return FluidParams(nu=self.nu, D_thermal=self.D_thermal, b=b, h=self.h)

    @property
    def lambda_cap(self):
        """Search domain bound |lambda| <= nu^(3/4); no roots exist beyond it."""
        return self.nu ** 0.75


@dataclass(frozen=True)
class ComplexEigenvalue:
    """A root of the dispersion relation, stored with its p-variable twin.

    p = k + sqrt(k^2 + lambda), so lam == p*(p - 2k) identically.
    """

    lam: complex
    p: complex
    k: float
    residual: complex
    mode: str = "limit"
    iterations: int = 0
    converged: bool = True

    @classmethod
    def from_p(cls, p, k, residual, **kw):
        p = complex(p)
        return cls(lam=p * (p - 2.0 * k), p=p, k=float(k), residual=complex(residual), **kw)

    @classmethod
    def from_lambda(cls, lam, k, residual, **kw):
        lam = complex(lam)
        return cls(lam=lam, p=k + branch_sqrt(k * k + lam), k=float(k),
                   residual=complex(residual), **kw)
