"""Mode basis and quadratic normal form at the bifurcation point.

The slow modes at criticality separate in x, so every coefficient of the
amplitude system is (trig triple integral in x) x (profile overlap in y).
The x factors are evaluated analytically through product-to-sum expansion;
resonance selection is therefore structural and the stored tensors contain
exact zeros off the resonance set.  Non-integer wave numbers are accepted in
quasiperiodic mode, where the x integral means 2*pi times the almost-periodic
mean and resonance requires exact wave-number matches.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .params import FluidParams, MarangoniError, ValidationError
from .profiles import TemperatureProfile
from .spectral import (_profile_panels, _sinh_ratio, _sinh_ratio_dq,
                       stream_profile, stream_profile_dy, theta_profile)

COS, SIN = "cos", "sin"


# --------------------------------------------------------------------------
# analytic trig integrals
# --------------------------------------------------------------------------

def _expand_product(t1, m1, t2, m2):
    """Product-to-sum: returns [(coeff, kind, m >= 0), ...] for t1(m1 x)*t2(m2 x)."""
    lo, hi = abs(m1 - m2), m1 + m2
    if t1 == COS and t2 == COS:
        terms = [(0.5, COS, lo), (0.5, COS, hi)]
    elif t1 == SIN and t2 == SIN:
        terms = [(0.5, COS, lo), (-0.5, COS, hi)]
    else:
        # sin(a)cos(b) = [sin(a+b) + sin(a-b)]/2 with sin(-x) = -sin(x)
        a, b = (m1, m2) if t1 == SIN else (m2, m1)
        sgn = 1.0 if a >= b else -1.0
        terms = [(0.5, SIN, hi), (0.5 * sgn, SIN, lo)]
    return [(c, t, m) for c, t, m in terms if c != 0.0]


def x_integral_pair(t1, m1, t2, m2):
    """int_0^{2pi} t1(m1 x) t2(m2 x) dx (2*pi * mean in quasiperiodic mode)."""
    total = 0.0
    for c, t, m in _expand_product(t1, m1, t2, m2):
        if t == COS and m == 0.0:
            total += c * 2.0 * math.pi
    return total


def x_integral_triple(t1, m1, t2, m2, t3, m3):
    """int_0^{2pi} of a trig triple product, exact by double expansion."""
    total = 0.0
    for c, t, m in _expand_product(t1, m1, t2, m2):
        total += c * x_integral_pair(t, m, t3, m3)
    return total


# --------------------------------------------------------------------------
# field = y-profile (samples + derivative samples) times a trig factor
# --------------------------------------------------------------------------

@dataclass
class Field:
    f: np.ndarray          # samples on the shared quadrature grid
    df: np.ndarray         # d/dy samples
    kind: str              # COS or SIN
    m: float               # wave number (>= 0)

    def x_derivative(self):
        if self.kind == COS:
            return Field(self.f, self.df, SIN, self.m), -self.m
        return Field(self.f, self.df, COS, self.m), self.m


def poisson_bracket_project(a: Field, b: Field, conj: Field, weights):
    """<{a, b}, conj> with {a,b} = a_y b_x - a_x b_y.

    The x part is analytic; the y part is one weighted dot product on the
    shared grid.  Exact zero (no quadrature touched) off resonance.
    """
    _, cb = b.x_derivative()
    _, ca = a.x_derivative()
    kb = SIN if b.kind == COS else COS
    ka = SIN if a.kind == COS else COS
    x1 = cb * x_integral_triple(a.kind, a.m, kb, b.m, conj.kind, conj.m)
    x2 = ca * x_integral_triple(ka, a.m, b.kind, b.m, conj.kind, conj.m)
    out = 0.0
    if x1 != 0.0:
        out += x1 * float(np.sum(weights * a.df * b.f * conj.f))
    if x2 != 0.0:
        out -= x2 * float(np.sum(weights * a.f * b.df * conj.f))
    return out


# --------------------------------------------------------------------------
# the mode basis
# --------------------------------------------------------------------------

@dataclass
class ModeBasis:
    K_N: tuple
    params: FluidParams
    profile: TemperatureProfile
    y: np.ndarray                   # shared quadrature nodes
    w: np.ndarray                   # shared quadrature weights
    stream: list                    # Psi_k samples (normalized)
    stream_dy: list
    theta: list                     # theta_k samples, theta_k(0) = 1
    theta_dy: list
    vorticity: list                 # omega_k samples (normalized)
    conj_theta: list                # a_k cosh(k(h-y)) samples
    conj_theta_dy: list
    conj_vorticity: list            # adjoint vorticity (O(1/nu) report only)
    A: np.ndarray                   # direct normalization constants
    a: np.ndarray                   # conjugate normalization constants
    closure_residual: np.ndarray    # |omega(0) + b k theta(0)| per mode
    quasiperiodic: bool
    theta_grid: list = field(repr=False, default=None)   # (y_uniform, theta) per mode

    @property
    def N(self):
        return len(self.K_N)

    def stream_field(self, j, sign):
        if sign == "+":
            return Field(self.stream[j], self.stream_dy[j], SIN, self.K_N[j])
        return Field(-self.stream[j], -self.stream_dy[j], COS, self.K_N[j])

    def theta_field(self, j, sign):
        kind = COS if sign == "+" else SIN
        return Field(self.theta[j], self.theta_dy[j], kind, self.K_N[j])

    def conj_theta_field(self, i, sign):
        kind = COS if sign == "+" else SIN
        return Field(self.conj_theta[i], self.conj_theta_dy[i], kind, self.K_N[i])


def build_mode_basis(K_N, params: FluidParams, profile, bvp_n=8000,
                     closure_tol=5e-3):
    """Sample eigen- and conjugate-eigenfunctions of the critical modes.

    All profiles are in the surface-unit normalization theta_k(0) = 1; the
    conjugate amplitudes a_k then make the Gram matrix the identity.  The
    linear closure |omega_k(0) + b k theta-chain| is checked per mode: it
    vanishes exactly when lambda = 0 is truly an eigenvalue, i.e. when the
    supplied profile was designed for these wave numbers at this b.
    """
    K_N = tuple(float(k) for k in K_N)
    if len(set(K_N)) != len(K_N) or any(k <= 0 for k in K_N):
        raise ValidationError("wave numbers must be positive and distinct")
    quasi = any(abs(k - round(k)) > 0.0 for k in K_N)
    h, b = params.h, params.b

    y, w = _profile_panels(profile, h, n_nodes=80)
    stream, stream_dy, theta, theta_dy = [], [], [], []
    vort, conj_t, conj_t_dy, conj_w = [], [], [], []
    A, a, closure = [], [], []
    theta_grids = []

    for k in K_N:
        mp = theta_profile(k, 0.0, params, profile, n=bvp_n)
        that = np.imag(mp.theta)            # theta_k = i * that at lambda = 0
        t0 = that[0]
        if t0 == 0.0:
            raise MarangoniError(f"degenerate temperature mode at k={k}")
        closure.append(abs(-b * k * t0 - 1.0))
        Ak = 1.0 / t0
        spl = CubicSpline(mp.y, Ak * that)
        theta.append(spl(y))
        theta_dy.append(spl(y, 1))
        theta_grids.append((mp.y, Ak * that))

        psi = np.real(stream_profile(k, 0.0, params, y))
        dpsi = np.real(stream_profile_dy(k, 0.0, params, y))
        stream.append(Ak * psi)
        stream_dy.append(Ak * dpsi)
        vort.append(Ak * np.real(_sinh_ratio(k, h, y)))

        C = np.cosh(np.minimum(k * (h - y), 700.0))
        scale = math.pi * float(np.sum(w * theta[-1] * C))
        if scale == 0.0:
            raise MarangoniError(f"conjugate normalization degenerate at k={k}")
        ak = 1.0 / scale
        conj_t.append(ak * C)
        conj_t_dy.append(ak * (-k) * np.sinh(np.minimum(k * (h - y), 700.0)))
        conj_w.append(_adjoint_vorticity(k, params, profile, y, w, ak * C))
        A.append(Ak)
        a.append(ak)

    basis = ModeBasis(K_N=K_N, params=params, profile=profile, y=y, w=w,
                      stream=stream, stream_dy=stream_dy, theta=theta,
                      theta_dy=theta_dy, vorticity=vort, conj_theta=conj_t,
                      conj_theta_dy=conj_t_dy, conj_vorticity=conj_w,
                      A=np.array(A), a=np.array(a),
                      closure_residual=np.array(closure),
                      quasiperiodic=quasi, theta_grid=theta_grids)
    gram = gram_matrix(basis)
    if np.abs(gram - np.eye(basis.N)).max() > 1e-8:
        raise MarangoniError(
            "biorthogonality failed; Gram matrix:\n" + np.array2string(gram))
    if np.max(closure) > closure_tol:
        raise MarangoniError(
            f"modes are not critical for this profile/b: closure residuals {closure}")
    return basis


def _adjoint_vorticity(k, params, profile, y, w, conj_theta):
    """Adjoint-problem vorticity component, explicitly O(1/nu).

    Solves the factored adjoint chain (two Dirichlet two-point solves) that a
    transpose null vector of the discrete linearization encodes; only used to
    report the size of the vorticity-pairing terms dropped from the tensors.
    """
    from scipy.linalg import solve_banded

    n = 2000
    h = params.h
    yy = np.linspace(0.0, h, n + 1)
    dy = yy[1] - yy[0]
    rhs = k * profile.V_y(yy) * np.interp(yy, y, conj_theta)

    ab = np.zeros((3, n - 1))
    ab[1, :] = -2.0 / dy ** 2 - k * k
    ab[0, 1:] = 1.0 / dy ** 2
    ab[2, :-1] = 1.0 / dy ** 2
    inner = solve_banded((1, 1), ab, rhs[1:-1])
    phi = np.concatenate([[0.0], inner, [0.0]])
    inner2 = solve_banded((1, 1), ab, phi[1:-1])
    omega_adj = np.concatenate([[0.0], inner2, [0.0]]) / params.nu
    return np.interp(y, yy, omega_adj)


def gram_matrix(basis: ModeBasis):
    """<e_j^+, conj e_i^+> over the temperature pairing (the identity test).

    Cross terms between distinct wave numbers and between +/- parities vanish
    analytically in x, so only the diagonal needs quadrature.
    """
    N = basis.N
    G = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            xi = x_integral_pair(COS, basis.K_N[j], COS, basis.K_N[i])
            if xi != 0.0:
                G[i, j] = xi * float(
                    np.sum(basis.w * basis.theta[j] * basis.conj_theta[i]))
    return G


def dropped_vorticity_pairing(basis: ModeBasis):
    """Max |<{psi_j, omega_l}, conj omega_i>| over resonant triples.

    These are the O(1/nu) tensor contributions left out of the normal form;
    reported so the truncation size is visible at the chosen viscosity.
    """
    worst = 0.0
    N = basis.N
    for i in range(N):
        conj = Field(basis.conj_vorticity[i], np.gradient(basis.conj_vorticity[i], basis.y),
                     SIN, basis.K_N[i])
        for j in range(N):
            for l in range(N):
                a = basis.stream_field(j, "+")
                omega_l = Field(basis.vorticity[l], np.gradient(basis.vorticity[l], basis.y),
                                SIN, basis.K_N[l])
                worst = max(worst, abs(poisson_bracket_project(a, omega_l, conj, basis.w)))
    return worst


# --------------------------------------------------------------------------
# coefficient tensors
# --------------------------------------------------------------------------

def compute_G_tensor(basis: ModeBasis):
    """Quadratic coefficients, three index families.

    G_ppp[i,j,l] = <{psi_j^+, theta_l^+}, conj theta_i^+>
    G_mmp[i,j,l] = <{psi_j^-, theta_l^-}, conj theta_i^+>
    G_pmm[i,j,l] = <{psi_j^+, theta_l^-} + {psi_l^-, theta_j^+}, conj theta_i^->
    """
    N = basis.N
    G_ppp = np.zeros((N, N, N))
    G_mmp = np.zeros((N, N, N))
    G_pmm = np.zeros((N, N, N))
    for i in range(N):
        cp = basis.conj_theta_field(i, "+")
        cm = basis.conj_theta_field(i, "-")
        for j in range(N):
            for l in range(N):
                G_ppp[i, j, l] = poisson_bracket_project(
                    basis.stream_field(j, "+"), basis.theta_field(l, "+"), cp, basis.w)
                G_mmp[i, j, l] = poisson_bracket_project(
                    basis.stream_field(j, "-"), basis.theta_field(l, "-"), cp, basis.w)
                G_pmm[i, j, l] = (
                    poisson_bracket_project(
                        basis.stream_field(j, "+"), basis.theta_field(l, "-"), cm, basis.w)
                    + poisson_bracket_project(
                        basis.stream_field(l, "-"), basis.theta_field(j, "+"), cm, basis.w))
    return {"ppp": G_ppp, "mmp": G_mmp, "pmm": G_pmm}


# --------------------------------------------------------------------------
# inhomogeneity (finite Fourier series in x)
# --------------------------------------------------------------------------

@dataclass
class Inhomogeneity:
    """u1(x, y) = sum over components of amp * trig(m x) * envelope(y)."""

    components: list     # [(kind, m, amplitude), ...]
    envelope: np.ndarray # shared-grid samples, zero below the support floor
    envelope_dy: np.ndarray
    support_floor: float

    def fields(self):
        return [(amp, Field(self.envelope, self.envelope_dy, kind, m))
                for kind, m, amp in self.components]

    def scaled(self, factor):
        return Inhomogeneity(
            components=[(t, m, factor * a) for t, m, a in self.components],
            envelope=self.envelope, envelope_dy=self.envelope_dy,
            support_floor=self.support_floor)


def default_envelope(basis: ModeBasis, margin=0.1):
    """Smooth bump on [delta1 + margin, 0.9 h]; unit peak."""
    h = basis.params.h
    lo = basis.profile.delta1 + margin
    hi = 0.9 * h
    if lo >= hi:
        raise ValidationError("no room for the inhomogeneity envelope")

    def smooth(t):
        t = np.clip(t, 0.0, 1.0)
        return t * t * t * (t * (6.0 * t - 15.0) + 10.0)

    ramp = 0.25 * (hi - lo)
    y = basis.y
    env = smooth((y - lo) / ramp) * smooth((hi - y) / ramp)
    denv = np.gradient(env, y)
    return env, denv, lo


def make_inhomogeneity(basis: ModeBasis, components, envelope=None):
    if envelope is None:
        env, denv, floor = default_envelope(basis)
    else:
        env, denv, floor = envelope
    if np.any(np.abs(env[basis.y < floor]) > 0):
        raise ValidationError("envelope must vanish below its support floor")
    return Inhomogeneity(components=list(components), envelope=env,
                         envelope_dy=denv, support_floor=floor)


def compute_M_matrix(basis: ModeBasis, u1: Inhomogeneity):
    """M blocks, linear in u1:  M[st][i, j] = <{psi_j^t, conj theta_i^s}, u1>."""
    N = basis.N
    blocks = {key: np.zeros((N, N)) for key in ("++", "+-", "-+", "--")}
    for (s, t), M in blocks.items():
        for i in range(N):
            conj = basis.conj_theta_field(i, s)
            for j in range(N):
                psi = basis.stream_field(j, t)
                total = 0.0
                for amp, fld in u1.fields():
                    total += amp * poisson_bracket_project(psi, conj, fld, basis.w)
                M[i, j] = total
    return blocks


def compute_f(basis: ModeBasis, eta1: Inhomogeneity):
    """f_i^s = <eta1, conj theta_i^s>."""
    N = basis.N
    f = {"+": np.zeros(N), "-": np.zeros(N)}
    for s in ("+", "-"):
        for i in range(N):
            conj = basis.conj_theta_field(i, s)
            total = 0.0
            for amp, fld in eta1.fields():
                xi = x_integral_pair(fld.kind, fld.m, conj.kind, conj.m)
                if xi != 0.0:
                    total += amp * xi * float(np.sum(basis.w * fld.f * conj.f))
            f[s][i] = total
    return f


def invert_M_design(basis: ModeBasis, target_blocks, envelope=None):
    """Least-squares u1 reproducing the target M blocks.

    One cosine/sine component per reachable wave number m in
    {k_i + k_j} U {|k_i - k_j|} \\ {0}; structurally unreachable target
    entries are reported through the residual (the achievable part is the
    orthogonal projection).
    """
    N = basis.N
    ms = set()
    for i in range(N):
        for j in range(N):
            ms.add(basis.K_N[i] + basis.K_N[j])
            dm = abs(basis.K_N[i] - basis.K_N[j])
            if dm > 0:
                ms.add(dm)
    comps = [(COS, m) for m in sorted(ms)] + [(SIN, m) for m in sorted(ms)]
    unit = [make_inhomogeneity(basis, [(kind, m, 1.0)], envelope)
            for kind, m in comps]
    cols, order = [], ("++", "+-", "-+", "--")
    for u in unit:
        Mb = compute_M_matrix(basis, u)
        cols.append(np.concatenate([Mb[key].ravel() for key in order]))
    A = np.column_stack(cols)
    rhs = np.concatenate([np.asarray(target_blocks[key], dtype=float).ravel()
                          for key in order])
    amps, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    achieved = A @ amps
    residual = float(np.linalg.norm(achieved - rhs))
    u1 = make_inhomogeneity(
        basis, [(kind, m, amp) for (kind, m), amp in zip(comps, amps)], envelope)
    return u1, residual


# --------------------------------------------------------------------------
# assembled normal form
# --------------------------------------------------------------------------

@dataclass
class QuadraticNormalForm:
    """dX_i^±/dt = gamma (G_i^±(X) + M_i^±(X) + f_i^±), dX_0/dt = 0.

    State layout: [X_0, X_1^+ .. X_N^+, X_1^- .. X_N^-].
    """

    K_N: tuple
    gamma: float
    G: dict
    M: dict
    f: dict

    @property
    def N(self):
        return len(self.K_N)

    @property
    def dim(self):
        return 2 * self.N + 1

    def split(self, X):
        N = self.N
        return X[0], np.asarray(X[1:N + 1]), np.asarray(X[N + 1:2 * N + 1])

    def rhs(self, X):
        N = self.N
        Xp, Xm = np.asarray(X[1:N + 1]), np.asarray(X[N + 1:2 * N + 1])
        dp = (np.einsum("ijl,j,l->i", self.G["ppp"], Xp, Xp)
              + np.einsum("ijl,j,l->i", self.G["mmp"], Xm, Xm)
              + self.M["++"] @ Xp + self.M["+-"] @ Xm + self.f["+"])
        dm = (np.einsum("ijl,j,l->i", self.G["pmm"], Xp, Xm)
              + self.M["-+"] @ Xp + self.M["--"] @ Xm + self.f["-"])
        out = np.empty(self.dim)
        out[0] = 0.0
        out[1:N + 1] = self.gamma * dp
        out[N + 1:] = self.gamma * dm
        return out

    def to_quadratic_system(self, R0=10.0):
        from .quadsys import QuadraticSystem
        N, dim, g = self.N, self.dim, self.gamma
        K = np.zeros((dim, dim, dim))
        for i in range(N):
            for j in range(N):
                for l in range(N):
                    ip, jp, lp = 1 + i, 1 + j, 1 + l
                    im, jm, lm = 1 + N + i, 1 + N + j, 1 + N + l
                    v = 0.5 * g * self.G["ppp"][i, j, l]
                    K[ip, jp, lp] += v
                    K[ip, lp, jp] += v
                    v = 0.5 * g * self.G["mmp"][i, j, l]
                    K[ip, jm, lm] += v
                    K[ip, lm, jm] += v
                    v = 0.5 * g * self.G["pmm"][i, j, l]
                    K[im, jp, lm] += v
                    K[im, lm, jp] += v
        Mm = np.zeros((dim, dim))
        Mm[1:N + 1, 1:N + 1] = g * self.M["++"]
        Mm[1:N + 1, N + 1:] = g * self.M["+-"]
        Mm[N + 1:, 1:N + 1] = g * self.M["-+"]
        Mm[N + 1:, N + 1:] = g * self.M["--"]
        gv = np.zeros(dim)
        gv[1:N + 1] = g * self.f["+"]
        gv[N + 1:] = g * self.f["-"]
        return QuadraticSystem(N=dim, K=K, M=Mm, g=gv, R0=R0)

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        def triples(T):
            out = []
            for (i, j, l), v in np.ndenumerate(T):
                if v != 0.0:
                    out.append([int(i), int(j), int(l), float(v)])
            return out
        return {
            "type": "quadratic_normal_form",
            "N": self.N, "K_N": list(self.K_N), "gamma": self.gamma,
            "G": {key: triples(T) for key, T in self.G.items()},
            "M": {key: np.asarray(Mb).tolist() for key, Mb in self.M.items()},
            "f": {key: np.asarray(v).tolist() for key, v in self.f.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        N = doc["N"]
        G = {}
        for key, items in doc["G"].items():
            T = np.zeros((N, N, N))
            for i, j, l, v in items:
                T[i, j, l] = v
            G[key] = T
        M = {key: np.array(v, dtype=float) for key, v in doc["M"].items()}
        f = {key: np.array(v, dtype=float) for key, v in doc["f"].items()}
        return cls(K_N=tuple(doc["K_N"]), gamma=doc["gamma"], G=G, M=M, f=f)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def assemble_normal_form(basis: ModeBasis, u1: Inhomogeneity,
                         eta1: Inhomogeneity, gamma=0.05):
    G = compute_G_tensor(basis)
    M = compute_M_matrix(basis, u1)
    f = compute_f(basis, eta1)
    return QuadraticNormalForm(K_N=basis.K_N, gamma=float(gamma), G=G, M=M, f=f)
