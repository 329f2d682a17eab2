"""Fixed-step integration and chaos diagnostics for quadratic systems.

Classical 4th-order one-step method with a constant dt: trajectories are
bit-reproducible for identical inputs, which is what the chaos diagnostics
(and the pipeline manifests) rely on.  Adaptivity is deliberately absent.

Long runs on QuadraticSystem objects go through a numba-compiled kernel when
numba is importable; the numpy fallback is semantically identical, just
slower.  Both are fixed-dt RK4, so results are deterministic within a path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import MarangoniError, ValidationError
from .quadsys import (BlowupError, Decomposition, QuadraticSystem, lift,
                      slow_manifold)

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:                                       # pragma: no cover
    _HAVE_NUMBA = False


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray        # (n_samples, N)
    dt: float
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def at_time(self, t):
        step = self.times[1] - self.times[0] if len(self.times) > 1 else self.dt
        idx = int(round((t - self.times[0]) / step))
        if idx < 0 or idx >= len(self.times):
            raise ValidationError(f"time {t} outside trajectory range")
        return self.states[idx]

    def to_csv(self, path):
        n = self.states.shape[1]
        header = "t," + ",".join(f"X{i + 1}" for i in range(n))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.times, self.states):
                fh.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")


# --------------------------------------------------------------------------
# RK4 kernels
# --------------------------------------------------------------------------

def _rk4_dense_py(K, M, g, X0, dt, n_steps, guard, store_every):
    N = len(X0)
    K2 = K.reshape(N, N * N)

    def f(X):
        return K2 @ np.outer(X, X).ravel() + M @ X + g

    X = X0.copy()
    n_out = n_steps // store_every + 1
    out = np.empty((n_out, N))
    out[0] = X
    half, sixth = 0.5 * dt, dt / 6.0
    stored, truncated = 1, False
    for step in range(1, n_steps + 1):
        k1 = f(X)
        k2 = f(X + half * k1)
        k3 = f(X + half * k2)
        k4 = f(X + dt * k3)
        X = X + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(X)) or np.linalg.norm(X) > guard:
            truncated = True
            break
        if step % store_every == 0:
            out[stored] = X
            stored += 1
    return out[:stored], stored - 1, truncated


def _benettin_py(K, M, g, X0, v0, dt, n_transient, n_windows, steps_per_window,
                 guard):
    N = len(X0)
    K2 = K.reshape(N, N * N)

    def f(X):
        return K2 @ np.outer(X, X).ravel() + M @ X + g

    def jv(X, v):
        return 2.0 * ((K @ X) @ v) + M @ v

    X, v = X0.copy(), v0.copy()
    half, sixth = 0.5 * dt, dt / 6.0

    def aug(X, v):
        k1 = f(X); j1 = jv(X, v)
        X2, v2 = X + half * k1, v + half * j1
        k2 = f(X2); j2 = jv(X2, v2)
        X3, v3 = X + half * k2, v + half * j2
        k3 = f(X3); j3 = jv(X3, v3)
        X4, v4 = X + dt * k3, v + dt * j3
        k4 = f(X4); j4 = jv(X4, v4)
        return (X + sixth * (k1 + 2.0 * (k2 + k3) + k4),
                v + sixth * (j1 + 2.0 * (j2 + j3) + j4))

    for _ in range(n_transient):
        X, v = aug(X, v)
        nv = np.linalg.norm(v)
        if nv > 1e6 or nv < 1e-6:
            v /= nv
        if np.linalg.norm(X) > guard:
            return np.nan, False
    v /= np.linalg.norm(v)
    log_sum = 0.0
    for _ in range(n_windows):
        for _ in range(steps_per_window):
            X, v = aug(X, v)
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv == 0.0 or np.linalg.norm(X) > guard:
            return np.nan, False
        log_sum += np.log(nv)
        v /= nv
    return log_sum, True


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _quad_f(K, M, g, X, out):
        N = X.shape[0]
        for i in range(N):
            acc = g[i]
            for j in range(N):
                acc += M[i, j] * X[j]
                kij = K[i, j]
                for l in range(N):
                    acc += kij[l] * X[j] * X[l]
            out[i] = acc

    @numba.njit(cache=True)
    def _quad_jv(K, M, X, v, out):
        N = X.shape[0]
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += M[i, j] * v[j]
                for l in range(N):
                    acc += K[i, j, l] * (v[j] * X[l] + X[j] * v[l])
            out[i] = acc

    @numba.njit(cache=True)
    def _rk4_dense_nb(K, M, g, X0, dt, n_steps, guard, store_every):
        N = X0.shape[0]
        n_out = n_steps // store_every + 1
        out = np.empty((n_out, N))
        X = X0.copy()
        out[0] = X
        k1 = np.empty(N); k2 = np.empty(N); k3 = np.empty(N); k4 = np.empty(N)
        tmp = np.empty(N)
        half = 0.5 * dt
        sixth = dt / 6.0
        stored = 1
        truncated = False
        for step in range(1, n_steps + 1):
            _quad_f(K, M, g, X, k1)
            for i in range(N):
                tmp[i] = X[i] + half * k1[i]
            _quad_f(K, M, g, tmp, k2)
            for i in range(N):
                tmp[i] = X[i] + half * k2[i]
            _quad_f(K, M, g, tmp, k3)
            for i in range(N):
                tmp[i] = X[i] + dt * k3[i]
            _quad_f(K, M, g, tmp, k4)
            nrm = 0.0
            ok = True
            for i in range(N):
                X[i] = X[i] + sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
                if not np.isfinite(X[i]):
                    ok = False
                nrm += X[i] * X[i]
            if not ok or nrm > guard * guard:
                truncated = True
                break
            if step % store_every == 0:
                out[stored] = X
                stored += 1
        return out[:stored], stored - 1, truncated

    @numba.njit(cache=True)
    def _benettin_nb(K, M, g, X0, v0, dt, n_transient, n_windows,
                     steps_per_window, guard):
        N = X0.shape[0]
        X = X0.copy()
        v = v0.copy()
        k1 = np.empty(N); k2 = np.empty(N); k3 = np.empty(N); k4 = np.empty(N)
        j1 = np.empty(N); j2 = np.empty(N); j3 = np.empty(N); j4 = np.empty(N)
        Xt = np.empty(N); vt = np.empty(N)
        half = 0.5 * dt
        sixth = dt / 6.0

        def _norm(a):
            s = 0.0
            for i in range(a.shape[0]):
                s += a[i] * a[i]
            return np.sqrt(s)

        total_steps = n_transient + n_windows * steps_per_window
        log_sum = 0.0
        window_step = 0
        windows_done = 0
        for step in range(total_steps):
            _quad_f(K, M, g, X, k1)
            _quad_jv(K, M, X, v, j1)
            for i in range(N):
                Xt[i] = X[i] + half * k1[i]; vt[i] = v[i] + half * j1[i]
            _quad_f(K, M, g, Xt, k2)
            _quad_jv(K, M, Xt, vt, j2)
            for i in range(N):
                Xt[i] = X[i] + half * k2[i]; vt[i] = v[i] + half * j2[i]
            _quad_f(K, M, g, Xt, k3)
            _quad_jv(K, M, Xt, vt, j3)
            for i in range(N):
                Xt[i] = X[i] + dt * k3[i]; vt[i] = v[i] + dt * j3[i]
            _quad_f(K, M, g, Xt, k4)
            _quad_jv(K, M, Xt, vt, j4)
            for i in range(N):
                X[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
                v[i] += sixth * (j1[i] + 2.0 * (j2[i] + j3[i]) + j4[i])
            if _norm(X) > guard:
                return np.nan, False
            if step < n_transient:
                nv = _norm(v)
                if nv > 1e6 or nv < 1e-6:
                    for i in range(N):
                        v[i] /= nv
                if step == n_transient - 1:
                    nv = _norm(v)
                    for i in range(N):
                        v[i] /= nv
                continue
            window_step += 1
            if window_step == steps_per_window:
                window_step = 0
                nv = _norm(v)
                if not np.isfinite(nv) or nv == 0.0:
                    return np.nan, False
                log_sum += np.log(nv)
                for i in range(N):
                    v[i] /= nv
                windows_done += 1
        return log_sum, True


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def _as_quadratic(system):
    if isinstance(system, QuadraticSystem):
        return system
    if hasattr(system, "to_quadratic_system"):
        return system.to_quadratic_system()
    return None


def integrate(system, X0, dt, T, store_every=1, t0=0.0):
    """RK4 with fixed dt on [t0, t0+T]; per-step guard |X| < 10*R0.

    Blow-up truncates the trajectory and sets the flag instead of raising,
    so parameter scans over unstable ranges stay usable.  `system` may be a
    QuadraticSystem, anything with .to_quadratic_system(), or a bare callable
    (in which case no guard applies unless it has an R0 attribute).
    """
    if dt <= 0 or T <= 0:
        raise ValidationError("dt and T must be positive")
    X0 = np.array(X0, dtype=float)
    if not np.all(np.isfinite(X0)):
        raise ValidationError("non-finite initial state")
    n_steps = int(round(T / dt))
    quad = _as_quadratic(system)
    if quad is not None:
        guard = 10.0 * quad.R0
        kernel = _rk4_dense_nb if _HAVE_NUMBA else _rk4_dense_py
        states, n_stored, truncated = kernel(quad.K, quad.M, quad.g, X0,
                                             float(dt), n_steps, guard,
                                             int(store_every))
        times = t0 + dt * store_every * np.arange(len(states))
        return Trajectory(times=times, states=np.asarray(states), dt=dt,
                          truncated=bool(truncated),
                          meta={"scheme": "rk4", "store_every": store_every})
    # generic callable path
    f = system if callable(system) else system.rhs
    guard = 10.0 * getattr(system, "R0", np.inf)
    X = X0.copy()
    times, states = [t0], [X.copy()]
    half, sixth = 0.5 * dt, dt / 6.0
    truncated = False
    for step in range(1, n_steps + 1):
        k1 = np.asarray(f(X))
        k2 = np.asarray(f(X + half * k1))
        k3 = np.asarray(f(X + half * k2))
        k4 = np.asarray(f(X + dt * k3))
        X = X + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(X)) or np.linalg.norm(X) > guard:
            truncated = True
            break
        if step % store_every == 0:
            times.append(t0 + step * dt)
            states.append(X.copy())
    return Trajectory(times=np.array(times), states=np.array(states), dt=dt,
                      truncated=truncated,
                      meta={"scheme": "rk4", "store_every": store_every})


def lyapunov_exponent(system, X0, T, renorm_dt=0.5, dt=1e-3, transient=20.0,
                      seed=0, time_scale=None):
    """Largest Lyapunov exponent by tangent-vector renormalization.

    T, renorm_dt and the returned exponent are in the system's *reported*
    time units: if the system carries a `time_scale` tau (an embedded,
    time-normalized realization), the run covers T/tau internal units and
    the exponent is scaled back by 1/tau.
    """
    quad = _as_quadratic(system)
    if quad is None:
        raise ValidationError("lyapunov_exponent needs a quadratic system")
    if time_scale is None:
        time_scale = getattr(quad, "time_scale", None) or getattr(
            system, "time_scale", 1.0) or 1.0
    if T < 200.0:
        raise ValidationError("need T >= 200 reported time units after the transient")
    T_int = T / time_scale
    transient_int = transient / time_scale
    renorm_int = renorm_dt / time_scale

    rng = np.random.default_rng(seed)
    X0 = np.array(X0, dtype=float)
    v0 = rng.standard_normal(len(X0))
    v0 /= np.linalg.norm(v0)
    n_transient = int(round(transient_int / dt))
    steps_per_window = max(1, int(round(renorm_int / dt)))
    n_windows = int(round(T_int / (steps_per_window * dt)))
    guard = 10.0 * quad.R0
    kernel = _benettin_nb if _HAVE_NUMBA else _benettin_py
    log_sum, ok = kernel(quad.K, quad.M, quad.g, X0, v0, float(dt),
                         n_transient, n_windows, steps_per_window, guard)
    if not ok:
        raise BlowupError("trajectory escaped or tangent degenerated "
                          "during Lyapunov averaging")
    lam_internal = log_sum / (n_windows * steps_per_window * dt)
    return lam_internal / time_scale


# --------------------------------------------------------------------------
# slow-fast diagnostics
# --------------------------------------------------------------------------

def manifold_deviation(traj: Trajectory, sys: QuadraticSystem,
                       dec: Decomposition, xi):
    """Time series |Z(t) - xi*Ktilde(Y(t))| over the fast coordinates."""
    I, J = list(dec.I_p), list(dec.J_p)
    out = np.empty(len(traj.times))
    for n, X in enumerate(traj.states):
        Z_pred = slow_manifold(X[I], sys, dec, xi)
        out[n] = float(np.linalg.norm(X[J] - Z_pred))
    return out


def fast_transient(xi):
    """Settling horizon 10 xi |log xi| of the fast block (internal time)."""
    return 10.0 * xi * abs(np.log(xi))


def reduced_rhs_target_units(Y, sys, dec, xi):
    """Slow right-hand side on the manifold graph, in target time units."""
    tau = getattr(sys, "time_scale", 1.0)
    X = lift(Y, sys, dec, xi)
    return sys.rhs(X)[list(dec.I_p)] / tau


def rhs_gap(sys, dec, xi, target, n_samples=100, dt=None, seed=1,
            sample_T=10.0, Y0=None):
    """sup |dY/dt - F_target(Y)| (target time units) along a trajectory.

    Sampling starts after the fast transient so the measured gap reflects the
    realized reduction, not the approach to the manifold.
    """
    tau = getattr(sys, "time_scale", 1.0)
    if dt is None:
        dt = xi / 10.0
    if Y0 is None:
        rng = np.random.default_rng(seed)
        Y0 = rng.uniform(-0.5, 0.5, dec.p)
    X0 = lift(np.asarray(Y0, dtype=float), sys, dec, xi)
    transient = fast_transient(xi)
    traj = integrate(sys, X0, dt, transient + sample_T / tau)
    if traj.truncated:
        raise BlowupError("sampling trajectory escaped")
    n_skip = int(np.searchsorted(traj.times, traj.times[0] + transient))
    idx = np.unique(np.linspace(n_skip, len(traj.times) - 1, n_samples).astype(int))
    I = list(dec.I_p)
    worst = 0.0
    for n in idx:
        X = traj.states[n]
        dY = sys.rhs(X)[I] / tau
        worst = max(worst, float(np.linalg.norm(dY - target(X[I]))))
    return worst


def realization_certificate(sys, dec, xi, target, eps, n_grid=30, n_random=70,
                            seed=2, fd_eps=1e-5, ball_frac=0.5):
    """Sampled C1 check of |reduced rhs - target| < eps (value and Jacobian).

    Grid plus random points in the target ball; Jacobians by central
    differences of the reduced right-hand side along the manifold graph.
    The whole-ball norm of the underlying statement is approximated by this
    finite sample.
    """
    rng = np.random.default_rng(seed)
    p = dec.p
    R = target.R0 * ball_frac
    pts = [np.zeros(p)]
    for i in range(p):
        for s in np.linspace(-R, R, max(2, n_grid // p)):
            e = np.zeros(p)
            e[i] = s
            pts.append(e)
    for _ in range(n_random):
        v = rng.standard_normal(p)
        v *= rng.uniform(0, R) / np.linalg.norm(v)
        pts.append(v)
    worst_val, worst_jac = 0.0, 0.0
    for Y in pts:
        worst_val = max(worst_val, float(np.linalg.norm(
            reduced_rhs_target_units(Y, sys, dec, xi) - target(Y))))
        for j in range(p):
            e = np.zeros(p)
            e[j] = fd_eps
            col = (reduced_rhs_target_units(Y + e, sys, dec, xi)
                   - reduced_rhs_target_units(Y - e, sys, dec, xi)) / (2 * fd_eps)
            tcol = (target(Y + e) - target(Y - e)) / (2 * fd_eps)
            worst_jac = max(worst_jac, float(np.max(np.abs(col - tcol))))
    return {"sup_value": worst_val, "sup_jacobian": worst_jac,
            "certified": bool(worst_val < eps and worst_jac < eps)}


def realize_to_accuracy(target, eps, xi_start=0.04, xi_floor=1e-5):
    """Pick xi by bisection on the measured rhs gap, then certify.

    The graph reduction of the canonical embedding is exact, so the binding
    measurement is the trajectory gap (manifold curvature); the sampled C1
    certificate is checked on top.  Returns (system, decomposition, xi,
    certificate).
    """
    from .quadsys import embed_target
    xi = xi_start
    for _ in range(24):
        sys, dec = embed_target(target, xi)
        gap = rhs_gap(sys, dec, xi, target)
        if gap < eps:
            cert = realization_certificate(sys, dec, xi, target, eps)
            cert["trajectory_gap"] = gap
            if cert["certified"]:
                return sys, dec, xi, cert
        xi *= 0.5
        if xi < xi_floor:
            break
    raise MarangoniError(f"could not certify eps={eps} above xi floor {xi_floor}")
