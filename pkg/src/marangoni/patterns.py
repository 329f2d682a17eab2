"""Surface-pattern reconstruction from slow-mode amplitudes.

u(x, 0, t) = gamma * sum_j [X_j^+(t) cos(k_j x) + X_j^-(t) sin(k_j x)] * theta_j(0);
the full 2D fields add the stream/temperature depth profiles.  Wave numbers
may be non-integer (quasiperiodic patterns), in which case nothing here
assumes 2*pi periodicity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .params import ValidationError


@dataclass
class PatternSpec:
    """What to synthesize: modes, surface weights, x sampling, amplitudes."""

    wave_numbers: np.ndarray
    surface_weights: np.ndarray      # theta_j(0) per mode
    x_extent: float
    x_samples: int
    gamma: float = 1.0

    def __post_init__(self):
        self.wave_numbers = np.asarray(self.wave_numbers, dtype=float)
        self.surface_weights = np.asarray(self.surface_weights, dtype=float)
        if self.x_samples < 2:
            raise ValidationError("x_samples >= 2 required")
        if np.any(self.wave_numbers <= 0):
            raise ValidationError("wave numbers must be positive")
        if len(set(self.wave_numbers.tolist())) != len(self.wave_numbers):
            raise ValidationError("wave numbers must be distinct")
        if len(self.surface_weights) != len(self.wave_numbers):
            raise ValidationError("one surface weight per mode")

    @property
    def x(self):
        return np.linspace(0.0, self.x_extent, self.x_samples)


def split_amplitudes(state, n_modes):
    """[X0, X+..., X-...] -> (X+, X-); accepts bare (X+,) too."""
    state = np.asarray(state, dtype=float)
    if len(state) == 2 * n_modes + 1:
        return state[1:n_modes + 1], state[n_modes + 1:]
    if len(state) == n_modes:
        return state, np.zeros(n_modes)
    raise ValidationError(
        f"state length {len(state)} incompatible with {n_modes} modes")


def reconstruct_surface(spec: PatternSpec, state):
    """Sampled u(x, 0) for one amplitude snapshot."""
    Xp, Xm = split_amplitudes(state, len(spec.wave_numbers))
    x = spec.x
    out = np.zeros_like(x)
    for k, w, ap, am in zip(spec.wave_numbers, spec.surface_weights, Xp, Xm):
        out += w * (ap * np.cos(k * x) + am * np.sin(k * x))
    return spec.gamma * out


def reconstruct_field(basis, state, x_grid, y_grid, gamma=1.0):
    """2D stream function and temperature from a ModeBasis and amplitudes.

    Returns (psi, u) arrays of shape (len(y_grid), len(x_grid)); the y=0 row
    of u reproduces reconstruct_surface on the same x grid.
    """
    from scipy.interpolate import CubicSpline

    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    n = basis.N
    Xp, Xm = split_amplitudes(state, n)
    psi = np.zeros((len(y), len(x)))
    u = np.zeros((len(y), len(x)))
    for j, k in enumerate(basis.K_N):
        psi_y = CubicSpline(basis.y, basis.stream[j])(y)
        th_y = CubicSpline(*basis.theta_grid[j])(y)
        cos, sin = np.cos(k * x), np.sin(k * x)
        # e^+ carries (psi sin, theta cos); e^- carries (-psi cos, theta sin)
        psi += np.outer(psi_y, Xp[j] * sin - Xm[j] * cos)
        u += np.outer(th_y, Xp[j] * cos + Xm[j] * sin)
    return gamma * psi, gamma * u


# --------------------------------------------------------------------------
# pattern diagnostics (the structure tests of the reconstruction)
# --------------------------------------------------------------------------

def autocorrelation_periods(x, u, threshold=0.999):
    """Lags ell > 0 with normalized autocorrelation >= threshold.

    A single-mode pattern reports its 2*pi/k multiples; a quasiperiodic one
    reports nothing.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    uc = u - u.mean()
    denom = float(np.dot(uc, uc))
    if denom == 0.0:
        return []
    dx = x[1] - x[0]
    lags = []
    for shift in range(1, n // 2):
        a, b = uc[:-shift], uc[shift:]
        corr = float(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)))
        if corr >= threshold:
            lags.append(shift * dx)
    return lags


def normalized_l2_distance(u1, u2):
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    denom = 0.5 * (np.linalg.norm(u1) + np.linalg.norm(u2))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(u1 - u2) / denom)


# --------------------------------------------------------------------------
# portable graymap export
# --------------------------------------------------------------------------

def write_pgm(path, grid, sidecar=True):
    """P2 (text) graymap, values linearly mapped to 0..255.

    The (min, max) pair goes to `<path>.json` so the mapping is invertible.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo if hi > lo else 1.0
    pix = np.clip(np.round((grid - lo) / span * 255.0), 0, 255).astype(int)
    with open(path, "w") as fh:
        fh.write("P2\n%d %d\n255\n" % (pix.shape[1], pix.shape[0]))
        for row in pix:
            fh.write(" ".join(str(v) for v in row) + "\n")
    if sidecar:
        with open(str(path) + ".json", "w") as fh:
            json.dump({"min": lo, "max": hi}, fh)
