"""Quadratic ODE systems and the slow-fast realization embedding.

dX/dt = K(X) + M X + g with K a symmetric-in-(j,l) tensor.  Any quadratic
field F(Y) = D(Y) + R Y + f on R^p embeds into such a system of dimension
N >= p + p(p+1)/2: the fast block relaxes at rate 1/xi onto the graph
Z = xi * Ktilde(Y), and the through-coupling P = T/xi reconstructs D(Y)
there.  The canonical embedding keeps every non-mandated tensor block zero,
so the reduced field on the leading-order manifold equals the target
exactly and the correction enters only through the manifold's own O(xi)
curvature.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .params import MarangoniError, ValidationError


class BlowupError(MarangoniError):
    """State left the trust region during evaluation/integration."""


@dataclass
class QuadraticSystem:
    N: int
    K: np.ndarray          # (N, N, N), symmetrized in the last two slots
    M: np.ndarray          # (N, N)
    g: np.ndarray          # (N,)
    R0: float = 10.0

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if self.K.shape != (self.N, self.N, self.N) or self.M.shape != (self.N, self.N) \
                or self.g.shape != (self.N,):
            raise ValidationError("inconsistent tensor shapes")
        if not (np.all(np.isfinite(self.K)) and np.all(np.isfinite(self.M))
                and np.all(np.isfinite(self.g))):
            raise ValidationError("non-finite system entries")
        self.K = 0.5 * (self.K + np.swapaxes(self.K, 1, 2))
        # flattened quadratic form for the fast path
        self._K2 = self.K.reshape(self.N, self.N * self.N)

    def rhs(self, X):
        X = np.asarray(X, dtype=float)
        return self._K2 @ np.outer(X, X).ravel() + self.M @ X + self.g

    def jacobian(self, X):
        X = np.asarray(X, dtype=float)
        return 2.0 * (self.K @ X) + self.M

    def to_dict(self):
        trips = [[int(i), int(j), int(l), float(v)]
                 for (i, j, l), v in np.ndenumerate(self.K) if v != 0.0]
        return {"type": "quadratic_system", "N": self.N, "K": trips,
                "M": self.M.tolist(), "g": self.g.tolist(), "R0": self.R0}

    @classmethod
    def from_dict(cls, doc):
        if doc.get("type") == "quadratic_normal_form":
            from .modes import QuadraticNormalForm
            return QuadraticNormalForm.from_dict(doc).to_quadratic_system()
        N = doc["N"]
        K = np.zeros((N, N, N))
        for i, j, l, v in doc["K"]:
            K[i, j, l] = v
        return cls(N=N, K=K, M=np.array(doc["M"]), g=np.array(doc["g"]),
                   R0=doc.get("R0", 10.0))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def evaluate_rhs(sys: QuadraticSystem, X, guard=True):
    """K(X) + M X + g, with the 10*R0 trust-region guard."""
    X = np.asarray(X, dtype=float)
    if guard and float(np.linalg.norm(X)) > 10.0 * sys.R0:
        raise BlowupError(f"|X| = {np.linalg.norm(X):.3g} exceeds 10*R0 = {10 * sys.R0:.3g}")
    return sys.rhs(X)


# --------------------------------------------------------------------------
# decomposition and embedding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    p: int
    I_p: tuple
    J_p: tuple

    def __post_init__(self):
        I, J = set(self.I_p), set(self.J_p)
        if len(self.I_p) != self.p or I & J:
            raise ValidationError("index sets must be disjoint with |I_p| = p")

    @classmethod
    def leading(cls, p, N):
        return cls(p=p, I_p=tuple(range(p)), J_p=tuple(range(p, N)))


def symmetric_pairs(p):
    """Ordered list of (j, l), j <= l, indexing symmetric quadratic forms."""
    return [(j, l) for j in range(p) for l in range(j, p)]


def check_p_decomposition(sys: QuadraticSystem, dec: Decomposition, tol=1e-10):
    """Whether the fast block can synthesize every symmetric form on the slow block.

    Builds the p(p+1)/2 x (N-p) matrix A[(jl), i] = Ktilde^(1)_{ijl} and
    reports (full_row_rank, rank).
    """
    pairs = symmetric_pairs(dec.p)
    A = np.zeros((len(pairs), len(dec.J_p)))
    for r, (j, l) in enumerate(pairs):
        for c, i in enumerate(dec.J_p):
            jj, ll = dec.I_p[j], dec.I_p[l]
            A[r, c] = sys.K[i, jj, ll] + (sys.K[i, ll, jj] if j != l else 0.0)
    if A.size == 0:
        return False, 0
    rank = int(np.linalg.matrix_rank(A, tol=tol))
    return rank == len(pairs), rank


@dataclass
class ReducedField:
    """Target field F(Y) = D(Y) + R Y + f on the p-dimensional slow space."""

    p: int
    D: np.ndarray
    R: np.ndarray
    f: np.ndarray
    R0: float = 10.0

    def __post_init__(self):
        self.D = 0.5 * (np.asarray(self.D, float)
                        + np.swapaxes(np.asarray(self.D, float), 1, 2))
        self.R = np.asarray(self.R, float)
        self.f = np.asarray(self.f, float)

    def __call__(self, Y):
        Y = np.asarray(Y, dtype=float)
        return np.einsum("ijl,j,l->i", self.D, Y, Y) + self.R @ Y + self.f

    def jacobian(self, Y):
        Y = np.asarray(Y, dtype=float)
        return 2.0 * (self.D @ Y) + self.R

    def to_quadratic_system(self):
        return QuadraticSystem(N=self.p, K=self.D, M=self.R, g=self.f, R0=self.R0)


def lorenz_field(sigma=10.0, rho=28.0, beta=8.0 / 3.0, R0=60.0):
    """The Lorenz system written as a ReducedField (the canonical chaos target)."""
    D = np.zeros((3, 3, 3))
    D[1, 0, 2] = D[1, 2, 0] = -0.5          # -x z
    D[2, 0, 1] = D[2, 1, 0] = 0.5           # +x y
    R = np.array([[-sigma, sigma, 0.0], [rho, -1.0, 0.0], [0.0, 0.0, -beta]])
    return ReducedField(p=3, D=D, R=R, f=np.zeros(3), R0=R0)


def lipschitz_estimate(target: ReducedField, n_sample=200, seed=0):
    """Sampled sup of the target Jacobian norm over its design ball."""
    rng = np.random.default_rng(seed)
    worst = float(np.linalg.norm(target.jacobian(np.zeros(target.p)), 2))
    for _ in range(n_sample):
        v = rng.standard_normal(target.p)
        v *= rng.uniform(0.0, target.R0) / np.linalg.norm(v)
        worst = max(worst, float(np.linalg.norm(target.jacobian(v), 2)))
    return worst


def embed_target(target: ReducedField, xi, N=None, normalize_time=True):
    """Embed a p-dimensional quadratic target as the slow dynamics of a
    larger quadratic system.

    Fast block: one slot per symmetric pair (j, l), unit quadratic source and
    relaxation -1/xi; slow block reads the pairs back through T/xi so that on
    Z = xi*Ktilde(Y) the reduced right-hand side is exactly the target field.

    Realization is a statement about unit-Lipschitz fields, so the target is
    time-normalized internally: the embedded system runs in t_hat = t/tau
    with tau = min(1, 1/Lip) and carries `time_scale = tau`.  (Without this,
    xi * Lip >> 1 and the fast through-coupling amplifies the manifold lag
    into an order-one error.)  Slow-variable values are untouched;
    equilibria transport exactly.
    """
    if xi <= 0:
        raise ValidationError("xi must be positive")
    p = target.p
    pairs = symmetric_pairs(p)
    n_min = p + len(pairs)
    if N is None:
        N = n_min
    if N < n_min:
        raise ValidationError(f"need N >= {n_min} for p = {p}")
    tau = min(1.0, 1.0 / lipschitz_estimate(target)) if normalize_time else 1.0
    K = np.zeros((N, N, N))
    for slot, (j, l) in enumerate(pairs):
        i = p + slot
        if j == l:
            K[i, j, j] = 1.0
        else:
            K[i, j, l] = K[i, l, j] = 0.5      # Ktilde_i(Y) = Y_j Y_l
    T = np.zeros((p, len(pairs)))
    for slot, (j, l) in enumerate(pairs):
        T[:, slot] = tau * target.D[:, j, l] * (1.0 if j == l else 2.0)
    M = np.zeros((N, N))
    M[:p, :p] = tau * target.R
    M[:p, p:p + len(pairs)] = T / xi
    M[p:p + len(pairs), p:p + len(pairs)] = -np.eye(len(pairs)) / xi
    g = np.zeros(N)
    g[:p] = tau * target.f
    sys = QuadraticSystem(N=N, K=K, M=M, g=g, R0=target.R0)
    dec = Decomposition.leading(p, N)
    sys.time_scale = tau
    sys.theorem_window = (N / 2.0 < p * p + p <= N)
    return sys, dec


def slow_manifold(Y, sys: QuadraticSystem, dec: Decomposition, xi):
    """Leading-order manifold point Z = xi * Ktilde^(1)(Y)."""
    Y = np.asarray(Y, dtype=float)
    X = np.zeros(sys.N)
    X[list(dec.I_p)] = Y
    full = sys.rhs(X) - sys.M @ X - sys.g       # K(X) at (Y, 0)
    return xi * full[list(dec.J_p)]


def lift(Y, sys, dec, xi):
    """Compose the full state (Y, Z) on the leading-order manifold."""
    X = np.zeros(sys.N)
    X[list(dec.I_p)] = Y
    X[list(dec.J_p)] = slow_manifold(Y, sys, dec, xi)
    return X


def reduced_rhs(Y, sys, dec, xi):
    """Slow components of the full right-hand side on the manifold graph."""
    X = lift(Y, sys, dec, xi)
    return sys.rhs(X)[list(dec.I_p)]
