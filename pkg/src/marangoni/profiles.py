"""Vertical temperature profiles: smoothed steps plus designed corrections.

Profiles enter the spectral problem two ways and both are kept exact here:

* the dispersion limit probes the combination
  S(p) = mu*G(p) + g_kappa(p), where g_kappa is the smoothed-step defect
  and G is the Laplace-type transform of the correction;
* the finite-viscosity residual integrates V_y(y) against mode profiles.

Families shipped: an ideal step (limit equation only), a mollified step, the
product-form polynomial correction whose transform has prescribed zeros, and
the mollifier-comb correction used by the desk-scale designer.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mollify import BumpTransform, MollifierSpec, gauss_panel, mollifier
from .params import ValidationError


# --------------------------------------------------------------------------
# smoothed-step defect
# --------------------------------------------------------------------------

def g_kappa(p, spec: MollifierSpec, z0):
    """Defect of the smoothed-step weight: -1 + int delta_eps(y-z0) e^{-py} dy.

    Evaluates through expm1 so g_kappa(0) == 0 holds to rounding even for
    tiny p*z0.  Support must stay inside y > 0 (z0 > eps).
    """
    return BumpTransform(z0, spec.eps).defect(p)


# --------------------------------------------------------------------------
# product-form polynomial correction (transform with zeros at p = 2j + d_j)
# --------------------------------------------------------------------------

def _elementary_symmetric(values):
    """e_0..e_n of the given values, by the stable recurrence."""
    e = np.zeros(len(values) + 1)
    e[0] = 1.0
    for v in values:
        e[1:] = e[1:] + v * e[:-1]
    return e


def polynomial_coefficients(d):
    """Coefficients b_0..b_M of the polynomial whose y-weighted transform is
    the product form below.

    int_0^inf y * sum_j b_j y^j * e^{-py} dy  ==  transform_closed_form(p, d)

    Matching powers of 1/p gives b_j = (-1)^(j+1) e_{M-j}(alpha) / (j+1)! with
    alpha_j = 1/(2j + d_j).
    """
    d = np.asarray(d, dtype=float)
    M = len(d)
    if np.any(np.abs(d) >= 0.5):
        raise ValidationError("product-form parameters require |d_j| < 1/2")
    alpha = 1.0 / (2.0 * np.arange(1, M + 1) + d)
    e = _elementary_symmetric(alpha)
    b = np.empty(M + 1)
    for j in range(M + 1):
        b[j] = (-1.0) ** (j + 1) * e[M - j] / math.factorial(j + 1)
    return b


def transform_closed_form(p, d):
    """Closed form p^{-2} (-1)^{M+1} prod_j (1/p - 1/(2j + d_j)).

    Vanishes exactly at p = 2j + d_j; works for complex p.
    """
    d = np.asarray(d, dtype=float)
    M = len(d)
    p = np.asarray(p)
    scalar = p.ndim == 0
    pv = np.atleast_1d(p).astype(complex if np.iscomplexobj(p) else float)
    a = 2.0 * np.arange(1, M + 1) + d
    out = pv ** -2.0 * (-1.0) ** (M + 1)
    for aj in a:
        out = out * (1.0 / pv - 1.0 / aj)
    return out[0] if scalar else out


# --------------------------------------------------------------------------
# profile parameter block
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileParams:
    """Design-scale parameter block: z0 = 5*kappa and mu = kappa^(2/3) exactly."""

    kappa: float
    M: int
    d: tuple = ()
    family: str = "comb"

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValidationError("kappa must be positive")
        if self.M < 1:
            raise ValidationError("M must be a positive integer")
        d = tuple(float(x) for x in self.d) if len(self.d) else (0.0,) * self.M
        if len(d) != self.M:
            raise ValidationError("len(d) must equal M")
        if any(abs(x) >= 0.5 for x in d):
            raise ValidationError("|d_j| < 1/2 is required")
        object.__setattr__(self, "d", d)

    @property
    def z0(self):
        return 5.0 * self.kappa

    @property
    def mu(self):
        return self.kappa ** (2.0 / 3.0)

    @property
    def delta1(self):
        return self.z0 - self.kappa


# --------------------------------------------------------------------------
# profile families
# --------------------------------------------------------------------------

class StepProfile:
    """Ideal surface step at depth z0 (limit dispersion only; V_y is a Dirac)."""

    family = "step"

    def __init__(self, z0):
        if z0 <= 0:
            raise ValidationError("step depth must be positive")
        self.z0 = float(z0)
        self.delta1 = float(z0)

    def S_transform(self, p):
        p = np.asarray(p)
        if np.iscomplexobj(p):
            return np.exp(-p * self.z0) - 1.0
        return np.expm1(-p * self.z0)

    def V_y(self, y):
        raise ValidationError("the ideal step has no pointwise V_y; "
                              "use a mollified profile for finite-nu work")

    def panel_breaks(self, h):
        return [0.0, min(self.z0, h), h]

    def to_dict(self):
        return {"family": self.family, "z0": self.z0}


class SampledProfile:
    """Profile given only through a V_y callable (oracle/test plumbing)."""

    family = "sampled"

    def __init__(self, V_y, delta1=0.0, breaks=()):
        self._vy = V_y
        self.delta1 = float(delta1)
        self._breaks = tuple(float(b) for b in breaks)

    def V_y(self, y):
        return np.asarray(self._vy(np.asarray(y, dtype=float)))

    def panel_breaks(self, h):
        pts = [0.0, h] + [b for b in self._breaks if 0.0 < b < h]
        return sorted(set(pts))


class TemperatureProfile:
    """Smoothed step at z0 plus a compactly supported correction.

    V_y(y) = 2 y^{-1} [ delta_kappa(y - z0)
                        + mu * sum_q c_q delta_kappa(y - a_q) ]   (comb family)
    V_y(y) = 2 y^{-1} delta_kappa(y - z0) + 2 mu P_M(y, d)        (gpd family)

    In both cases  int y V_y e^{-py} dy = 2 (1 + S(p))  holds exactly with
    S = g_kappa + mu*G, which is what the dispersion limit consumes.
    """

    def __init__(self, params: ProfileParams, comb_centers=(), comb_coeffs=(),
                 design_meta=None):
        self.params = params
        self.spec = MollifierSpec(params.kappa)
        self.main = BumpTransform(params.z0, params.kappa)
        self.family = params.family
        self.delta1 = params.delta1
        self.design_meta = dict(design_meta or {})
        if params.family == "comb":
            self.comb_centers = tuple(float(a) for a in comb_centers)
            self.comb_coeffs = tuple(float(c) for c in comb_coeffs)
            self._comb = [BumpTransform(a, params.kappa) for a in self.comb_centers]
            self._poly = None
        elif params.family == "gpd":
            self.comb_centers = ()
            self.comb_coeffs = ()
            self._comb = []
            self._poly = polynomial_coefficients(params.d)
        elif params.family == "mollified_step":
            self.comb_centers = ()
            self.comb_coeffs = ()
            self._comb = []
            self._poly = None
        else:
            raise ValidationError(f"unknown profile family {params.family!r}")

    # -- transforms ---------------------------------------------------------

    def g_defect(self, p):
        return self.main.defect(p)

    def correction_transform(self, p):
        """G(p): transform of the correction (zero for a plain mollified step)."""
        p = np.asarray(p)
        scalar = p.ndim == 0
        pv = np.atleast_1d(p)
        if self._poly is not None:
            out = transform_closed_form(pv, self.params.d)
        elif self._comb:
            out = np.zeros(pv.shape, dtype=complex if np.iscomplexobj(pv) else float)
            for c, bumpq in zip(self.comb_coeffs, self._comb):
                out = out + c * bumpq.transform(pv)
        else:
            out = np.zeros(pv.shape)
        return out[0] if scalar else out

    def S_transform(self, p):
        return self.g_defect(p) + self.params.mu * self.correction_transform(p)

    # -- real space ---------------------------------------------------------

    def V_y(self, y):
        y = np.asarray(y, dtype=float)
        safe_y = np.where(y > 0, y, 1.0)  # densities vanish there anyway
        out = 2.0 / safe_y * self.main.density(y)
        mu = self.params.mu
        if self._comb:
            for c, bumpq in zip(self.comb_coeffs, self._comb):
                out = out + 2.0 * mu * c * bumpq.density(y) / safe_y
        if self._poly is not None:
            out = out + 2.0 * mu * np.polynomial.polynomial.polyval(y, self._poly)
        return out

    def V_grid(self, h, min_support_points=40):
        """Cumulative profile V on a grid resolving every bump support."""
        breaks = self.panel_breaks(h)
        dy_cap = 2.0 * self.params.kappa / min_support_points
        pieces = [np.array([0.0])]
        for a, b in zip(breaks[:-1], breaks[1:]):
            n = max(16, int(math.ceil((b - a) / dy_cap)) if (b - a) < 1.0 else 256)
            pieces.append(np.linspace(a, b, n + 1)[1:])
        y = np.concatenate(pieces)
        vy = self.V_y(y)
        V = np.concatenate([[0.0], np.cumsum(0.5 * (vy[1:] + vy[:-1]) * np.diff(y))])
        return y, V, vy

    def panel_breaks(self, h):
        pts = {0.0, h}
        for bumpq in [self.main, *self._comb]:
            lo, hi = bumpq.support
            if lo < h:
                pts.add(lo)
            if hi < h:
                pts.add(hi)
        if self._poly is not None:
            pts.add(min(self.delta1, h))
        return sorted(pts)

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        doc = {
            "family": self.family,
            "kappa": self.params.kappa,
            "z0": self.params.z0,
            "mu": self.params.mu,
            "M": self.params.M,
            "d": list(self.params.d),
            "comb_centers": list(self.comb_centers),
            "comb_coeffs": list(self.comb_coeffs),
            "design_meta": self.design_meta,
        }
        return doc

    @classmethod
    def from_dict(cls, doc):
        params = ProfileParams(kappa=doc["kappa"], M=doc["M"], d=tuple(doc["d"]),
                               family=doc["family"])
        return cls(params, comb_centers=doc.get("comb_centers", ()),
                   comb_coeffs=doc.get("comb_coeffs", ()),
                   design_meta=doc.get("design_meta"))

    def save(self, path, h=10.0):
        doc = self.to_dict()
        y, V, vy = self.V_grid(h)
        doc["grid"] = {"y": y.tolist(), "V": V.tolist(), "V_y": vy.tolist()}
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def mollified_step(kappa):
    """Plain smoothed step: the zero-correction member of the design family."""
    return TemperatureProfile(ProfileParams(kappa=kappa, M=1, family="mollified_step"))
