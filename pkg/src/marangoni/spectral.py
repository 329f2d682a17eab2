"""Closed-form mode profiles and the complex dispersion relation.

All hyperbolic ratios are evaluated in the overflow-free form
sinh(q(h-y))/sinh(qh) = e^{-qy} (1-e^{-2q(h-y)})/(1-e^{-2qh}), valid for
Re q > 0, so depths h ~ 10 ln(nu) never overflow.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .mollify import gauss_panel
from .params import (ComplexEigenvalue, ConvergenceError, FluidParams,
                     ValidationError, branch_sqrt, check_wave_number)


# --------------------------------------------------------------------------
# hyperbolic building blocks
# --------------------------------------------------------------------------

def _sinh_ratio(q, h, y):
    """sinh(q(h-y))/sinh(qh), stable for Re q > 0 and any magnitude of qh."""
    u = np.exp(-2.0 * q * (h - y))
    v = np.exp(-2.0 * q * h)
    return np.exp(-q * y) * (1.0 - u) / (1.0 - v)


def _sinh_ratio_dq(q, h, y):
    """d/dq of _sinh_ratio at fixed (h, y); same stable scaling."""
    u = np.exp(-2.0 * q * (h - y))
    v = np.exp(-2.0 * q * h)
    num = -y * (1.0 - u) * (1.0 - v) + 2.0 * (h - y) * u * (1.0 - v) - 2.0 * h * v * (1.0 - u)
    return np.exp(-q * y) * num / (1.0 - v) ** 2


def _require_positive_real(q, what):
    if np.real(q) <= 0.0:
        raise ValidationError(f"{what} needs Re > 0 (branch boundary); got {q}")
    return q


# --------------------------------------------------------------------------
# mode profiles (beta_k = 1 normalization)
# --------------------------------------------------------------------------

def vorticity_profile(k, lam, params: FluidParams, y):
    """omega_k(y, lambda)/beta_k = sinh(k_nu (h - y)) / sinh(k_nu h).

    k_nu^2 = k^2 + lambda/nu on the Re > 0 branch.  Equals 1 at y = 0 and
    0 at y = h exactly.
    """
    k = check_wave_number(k)
    k_nu = branch_sqrt(k * k + lam / params.nu)
    _require_positive_real(k_nu, "k_nu")
    return _sinh_ratio(k_nu, params.h, np.asarray(y))


def stream_profile(k, lam, params: FluidParams, y):
    """psi_k(y, lambda)/beta_k for the vorticity above, vanishing at y = 0, h.

    psi = -(nu/lambda) (F(k_nu) - F(k)) with F(q) = sinh(q(h-y))/sinh(qh).
    Since lambda/nu = (k_nu - k)(k_nu + k), the removable lambda -> 0 limit
    is taken through the divided difference; below the switch threshold
    |lambda| < 1e-4 nu k the midpoint-derivative form is used, which is
    exact at lambda = 0 and has O((k_nu-k)^2) error otherwise.
    """
    k = check_wave_number(k)
    h = params.h
    y = np.asarray(y)
    k_nu = branch_sqrt(k * k + lam / params.nu)
    _require_positive_real(k_nu, "k_nu")
    if abs(lam) < 1e-4 * params.nu * k:
        mid = 0.5 * (k_nu + k)
        dd = _sinh_ratio_dq(mid, h, y)
    else:
        dd = (_sinh_ratio(k_nu, h, y) - _sinh_ratio(k, h, y)) / (k_nu - k)
    return -dd / (k_nu + k)


def stream_profile_dy(k, lam, params: FluidParams, y):
    """d/dy of stream_profile (needed by the overlap integrals)."""
    k = check_wave_number(k)
    h = params.h
    y = np.asarray(y)
    k_nu = branch_sqrt(k * k + lam / params.nu)
    eps = 1e-7 * max(k, 1.0)
    if abs(k_nu - k) < 10 * eps:
        mid = 0.5 * (k_nu + k)
        # d/dy of dF/dq via central difference in q of dF/dy
        def dF_dy(q):
            u = np.exp(-2.0 * q * (h - y))
            v = np.exp(-2.0 * q * h)
            return -q * np.exp(-q * y) * (1.0 + u) / (1.0 - v)
        dd = (dF_dy(mid + eps) - dF_dy(mid - eps)) / (2.0 * eps)
    else:
        def dF_dy(q):
            u = np.exp(-2.0 * q * (h - y))
            v = np.exp(-2.0 * q * h)
            return -q * np.exp(-q * y) * (1.0 + u) / (1.0 - v)
        dd = (dF_dy(k_nu) - dF_dy(k)) / (k_nu - k)
    return -dd / (k_nu + k)


def greens_weight(kbar, params: FluidParams, y):
    """Surface-response weight rho(y) = cosh(kbar (h-y)) / (kbar sinh(kbar h))."""
    _require_positive_real(kbar, "kbar")
    h = params.h
    y = np.asarray(y)
    u = np.exp(-2.0 * kbar * (h - y))
    v = np.exp(-2.0 * kbar * h)
    return np.exp(-kbar * y) * (1.0 + u) / (kbar * (1.0 - v))


# --------------------------------------------------------------------------
# dispersion residuals
# --------------------------------------------------------------------------

def _profile_panels(profile, h, n_nodes=64):
    breaks = list(profile.panel_breaks(h))
    # split long stretches into geometrically growing chunks so the
    # exp(-p y) kernels stay resolved
    refined = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        width = 1.0
        pos = a
        while b - pos > 2.0 * width:
            pos += width
            refined.append(pos)
            width *= 2.0
        refined.append(b)
    ys, ws = [], []
    for a, b in zip(refined[:-1], refined[1:]):
        yq, wq = gauss_panel(a, b, n_nodes)
        ys.append(yq)
        ws.append(wq)
    return np.concatenate(ys), np.concatenate(ws)


def dispersion_residual_exact(k, lam, params: FluidParams, profile):
    """Exact-mode residual  k^2 D^{-1} int_0^h psi_k rho_kbar U_y dy  -  1/b.

    A root in lambda is an eigenvalue of the linearized operator.  The
    integrand's spike at the profile bumps is handled by panel splitting at
    every bump support.
    """
    k = check_wave_number(k)
    D = params.D_thermal
    kbar = branch_sqrt(k * k + lam / D)
    _require_positive_real(kbar, "kbar")
    y, w = _profile_panels(profile, params.h)
    psi = stream_profile(k, lam, params, y)
    rho = greens_weight(kbar, params, y)
    uy = profile.V_y(y)
    integral = np.sum(w * psi * rho * uy)
    return k * k / D * integral - 1.0 / params.b


def dispersion_residual_limit(k, p, Dbar, profile):
    """Infinite-viscosity residual  Dbar p / k - 1 - Dbar - S(p).

    S is the profile's transform combination; the designed family keeps it
    in closed/quadrature form so roots can be pinned exactly.
    """
    k = check_wave_number(k)
    return Dbar * np.asarray(p) / k - 1.0 - Dbar - profile.S_transform(p)


# --------------------------------------------------------------------------
# two-point solver for the temperature mode
# --------------------------------------------------------------------------

@dataclass
class ModeProfiles:
    """Sampled mode triple (omega, psi, theta) at one (k, lambda)."""

    y: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    k: float
    lam: complex


def theta_profile(k, lam, params: FluidParams, profile, n=4000):
    """Solve the Neumann two-point problem for the temperature mode theta_k.

    theta'' - kbar^2 theta = D^{-1} i k U_y(y) psi_k(y),  theta'(0)=theta'(h)=0,
    by second-order finite differences with ghost-point boundary closure.
    The surface value matches -int f rho dy to solver tolerance.
    """
    from scipy.linalg import solve_banded

    k = check_wave_number(k)
    h, D = params.h, params.D_thermal
    kbar2 = k * k + lam / D
    y = np.linspace(0.0, h, n + 1)
    dy = y[1] - y[0]
    psi = stream_profile(k, lam, params, y)
    f = (1j * k / D) * profile.V_y(y) * psi

    ab = np.zeros((3, n + 1), dtype=complex)
    ab[1, :] = -2.0 / dy ** 2 - kbar2
    ab[0, 1:] = 1.0 / dy ** 2
    ab[2, :-1] = 1.0 / dy ** 2
    # ghost-point Neumann closure keeps second order
    ab[0, 1] = 2.0 / dy ** 2
    ab[2, n - 1] = 2.0 / dy ** 2
    theta = solve_banded((1, 1), ab, f)

    omega = vorticity_profile(k, lam, params, y)
    return ModeProfiles(y=y, omega=omega, psi=psi, theta=theta, k=k, lam=complex(lam))


# --------------------------------------------------------------------------
# eigenvalue search
# --------------------------------------------------------------------------

def _residual_in_p(p, k, params, profile, mode):
    if mode == "limit":
        return dispersion_residual_limit(k, p, params.Dbar, profile)
    lam = p * (p - 2.0 * k)
    return dispersion_residual_exact(k, lam, params, profile)


def solve_eigenvalue(k, params: FluidParams, profile, guess, mode="limit",
                     tol=None, max_iter=80, deflate=()):
    """Find one dispersion root near `guess` (a lambda value).

    Secant iteration in the p variable with optional deflation of already
    found roots; the search is restricted to Re p > k and |lambda| <= nu^(3/4).
    """
    k = check_wave_number(k)
    if mode not in ("limit", "exact"):
        raise ValidationError(f"unknown mode {mode!r}")
    if tol is None:
        tol = 1e-12 if mode == "limit" else 1e-9
    guess = complex(guess)
    if guess.real <= -0.5:
        raise ValidationError("guess must lie in the search half-plane Re > -1/2")

    def fn(p):
        r = complex(_residual_in_p(p, k, params, profile, mode))
        for pr in deflate:
            r /= (p - pr)
        return r

    p0 = k + branch_sqrt(k * k + guess)
    p1 = p0 * (1.0 + 1e-4) + 1e-6
    f0, f1 = fn(p0), fn(p1)
    p_last, r_last = p1, f1
    for it in range(max_iter):
        denom = f1 - f0
        if denom == 0:
            break
        p2 = p1 - f1 * (p1 - p0) / denom
        # keep the iterate in the admissible half-plane
        if np.real(p2) <= k:
            p2 = k + 0.5 * abs(np.real(p1) - k) + 1j * np.imag(p2)
        f2 = fn(p2)
        p0, f0, p1, f1 = p1, f1, p2, f2
        p_last, r_last = p2, f2
        if abs(f2) < tol and abs(p2 - p0) < 1e-10 * max(1.0, abs(p2)):
            break
    residual = complex(_residual_in_p(p_last, k, params, profile, mode))
    lam = p_last * (p_last - 2.0 * k)
    if abs(residual) >= tol:
        raise ConvergenceError(
            f"no dispersion root near guess for k={k} (mode={mode}); "
            f"last p={p_last}, |residual|={abs(residual):.3e}",
            last=p_last, residual=residual)
    if abs(lam) > params.lambda_cap:
        raise ConvergenceError(
            f"root lambda={lam} outside the search domain |lambda| <= nu^(3/4)",
            last=p_last, residual=residual)
    return ComplexEigenvalue.from_p(p_last, k, residual, mode=mode,
                                    iterations=it + 1, converged=True)


def real_axis_roots(k, params: FluidParams, profile, p_lo=None, p_hi=None,
                    n_scan=4000, mode="limit"):
    """All real-p dispersion roots for one k, by sign-change scan + brentq.

    The designed profiles have purely real transforms on the real axis, so
    the roots relevant to the stability diagram are captured here.
    """
    k = check_wave_number(k)
    lo = k * (1.0 + 1e-5) if p_lo is None else p_lo
    hi = 3.2 * k if p_hi is None else p_hi
    ps = np.linspace(lo, hi, n_scan)
    if mode == "limit":
        res = np.real(dispersion_residual_limit(k, ps, params.Dbar, profile))
    else:
        res = np.array([np.real(_residual_in_p(p, k, params, profile, mode))
                        for p in ps])
    roots = []
    for i in range(n_scan - 1):
        if res[i] == 0.0:
            roots.append(ps[i])
        elif res[i] * res[i + 1] < 0.0:
            fn = lambda p: float(np.real(_residual_in_p(p, k, params, profile, mode)))
            roots.append(brentq(fn, ps[i], ps[i + 1], xtol=1e-15, rtol=8.9e-16))
    out = []
    for pr in roots:
        residual = complex(_residual_in_p(pr, k, params, profile, mode))
        out.append(ComplexEigenvalue.from_p(pr, k, residual, mode=mode))
    return out


def spectrum_scan(k_range, params: FluidParams, profile, mode="limit"):
    """lambda(k) over a wave-number list, with continuation seeding in p.

    Returns a list of ComplexEigenvalue (converged flag set on failures);
    deterministic for identical inputs, ordered by k.
    """
    k_range = sorted(check_wave_number(k) for k in k_range)
    rows = []
    p_prev, k_prev = None, None
    for k in k_range:
        seed_p = 2.0 * k if p_prev is None else 2.0 * k + (p_prev - 2.0 * k_prev)
        try:
            roots = real_axis_roots(k, params, profile, mode=mode)
            if not roots:
                raise ConvergenceError(f"no real-axis root for k={k}", last=seed_p,
                                       residual=None)
            # spectral abscissa: the root with the largest lambda
            best = max(roots, key=lambda r: r.lam.real)
            rows.append(best)
            p_prev, k_prev = best.p.real, k
        except ConvergenceError as err:
            rows.append(ComplexEigenvalue.from_p(
                err.last if err.last is not None else seed_p, k,
                err.residual if err.residual is not None else np.nan,
                mode=mode, converged=False))
    return rows


def scan_to_csv(rows):
    """Serialize a spectrum scan with the stable 17-significant-digit contract."""
    buf = io.StringIO()
    buf.write("k,re_lambda,im_lambda,re_p,im_p,residual_abs,converged\n")
    for r in rows:
        buf.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n" % (
            r.k, r.lam.real, r.lam.imag, r.p.real, r.p.imag,
            abs(r.residual), int(r.converged)))
    return buf.getvalue()
