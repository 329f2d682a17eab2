"""Independent numerical oracles used only by the tests.

Everything here deliberately avoids the closed forms in the package: the
boundary-value problems are solved by Numerov / finite-difference schemes on
their own grids, so agreement with the production formulas is a genuine
dual-route check.
"""
import numpy as np
from scipy.linalg import solve_banded


def numerov_dirichlet(q2, source, a, b, ya, yb, n):
    """Solve y'' = q2*y + source(x) on [a,b], y(a)=ya, y(b)=yb (4th order)."""
    x = np.linspace(a, b, n + 1)
    h = x[1] - x[0]
    s = source(x) if callable(source) else np.asarray(source)
    c = h * h / 12.0
    diag = np.full(n - 1, -2.0 * (1.0 + 5.0 * c * q2), dtype=complex)
    off = np.full(n - 2, 1.0 - c * q2, dtype=complex)
    rhs = c * (s[2:] + 10.0 * s[1:-1] + s[:-2]).astype(complex)
    rhs[0] -= (1.0 - c * q2) * ya
    rhs[-1] -= (1.0 - c * q2) * yb
    ab = np.zeros((3, n - 1), dtype=complex)
    ab[1, :] = diag
    ab[0, 1:] = off
    ab[2, :-1] = off
    inner = solve_banded((1, 1), ab, rhs)
    return x, np.concatenate([[ya], inner, [yb]])


def neumann_fd(q2, source, a, b, n):
    """Solve y'' = q2*y + source(x), y'(a)=y'(b)=0, 2nd-order ghost points."""
    x = np.linspace(a, b, n + 1)
    h = x[1] - x[0]
    s = (source(x) if callable(source) else np.asarray(source)).astype(complex)
    ab = np.zeros((3, n + 1), dtype=complex)
    ab[1, :] = -2.0 / h ** 2 - q2
    ab[0, 1:] = 1.0 / h ** 2
    ab[2, :-1] = 1.0 / h ** 2
    ab[0, 1] = 2.0 / h ** 2
    ab[2, n - 1] = 2.0 / h ** 2
    return x, solve_banded((1, 1), ab, s)


def neumann_fd_richardson(q2, source, a, b, n):
    """Richardson-extrapolated Neumann solve (4th order on the shared grid)."""
    x2, y2 = neumann_fd(q2, source, a, b, 2 * n)
    x1, y1 = neumann_fd(q2, source, a, b, n)
    return x1, (4.0 * y2[::2] - y1) / 3.0


def dispersion_residual_bvp(k, lam, params, profile, n=6000):
    """Eigenvalue-condition residual via direct numerical BVP chain.

    Numerov for the vorticity and stream problems, finite differences with
    Richardson for the Neumann temperature problem; the residual is
    i b k w(0) - 1 scaled to the production normalization (divide by b).
    """
    h, nu, D, b = params.h, params.nu, params.D_thermal, params.b
    k_nu2 = k * k + lam / nu
    kbar2 = k * k + lam / D
    n_om = n
    x, omega = numerov_dirichlet(k_nu2, lambda yy: np.zeros_like(yy), 0.0, h,
                                 1.0 + 0.0j, 0.0j, n_om)
    x, psi = numerov_dirichlet(k * k + 0.0j, -omega, 0.0, h, 0.0j, 0.0j, n_om)
    f = (1j * k / D) * profile.V_y(x) * psi
    x, w = neumann_fd_richardson(kbar2, f, 0.0, h, n)
    return (1j * b * k * w[0] - 1.0) / b


def quad_transform_oracle(poly_coeffs, p, y_max=200.0, n=4000):
    """int_0^inf y P(y) e^{-p y} dy by wide-interval Gauss-Legendre."""
    xg, wg = np.polynomial.legendre.leggauss(n)
    y = 0.5 * y_max * (xg + 1.0)
    w = 0.5 * y_max * wg
    P = np.polynomial.polynomial.polyval(y, poly_coeffs)
    return np.sum(w * y * P * np.exp(-p * y))


def bracket_overlap_2d(a, b, conj, y, wy, n_x=512):
    """<{a,b}, conj> with the x integral done numerically (trapezoid on the
    periodic grid), as an independent check of the analytic-x production path.

    Each argument is a modes.Field; profiles are taken on the shared y grid.
    """
    x = np.linspace(0.0, 2.0 * np.pi, n_x, endpoint=False)
    dx = x[1] - x[0]

    def trig(kind, m):
        return np.cos(m * x) if kind == "cos" else np.sin(m * x)

    def dtrig(kind, m):
        return -m * np.sin(m * x) if kind == "cos" else m * np.cos(m * x)

    A = np.outer(a.f, trig(a.kind, a.m))
    Ay = np.outer(a.df, trig(a.kind, a.m))
    Ax = np.outer(a.f, dtrig(a.kind, a.m))
    B = np.outer(b.f, trig(b.kind, b.m))
    By = np.outer(b.df, trig(b.kind, b.m))
    Bx = np.outer(b.f, dtrig(b.kind, b.m))
    C = np.outer(conj.f, trig(conj.kind, conj.m))
    integrand = (Ay * Bx - Ax * By) * C
    return float(np.sum(wy[:, None] * integrand) * dx)
