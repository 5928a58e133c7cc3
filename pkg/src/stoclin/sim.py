"""Monte-Carlo validation of second-moment dynamics.

The exact matrix-valued second moment X(t) = E[x(t) x(t)'] of the closed
loop solves the linear ODE

    dX/dt = Ac X + X Ac' + Cc X Cc',   X(0) = x0 x0',

integrated here by classical RK4 on symmetric-vectorized coordinates.  An
Euler--Maruyama ensemble of trajectories provides the empirical moments;
the two are compared entrywise in units of the Monte-Carlo standard error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .lift import SystemQuad, build_drift_operator, smat, svec

__all__ = [
    "SimConfig",
    "moment_trajectory",
    "euler_maruyama_ensemble",
    "compare_empirical_vs_exact",
]


@dataclass(frozen=True)
class SimConfig:
    x0: np.ndarray
    T: float = 1.0
    dt: float = 1e-3
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        object.__setattr__(self, "x0", x0)
        if not (self.T > 0 and self.dt > 0 and self.dt <= self.T):
            raise InvalidInputError("need 0 < dt <= T")
        if self.trials < 1:
            raise InvalidInputError("trials must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def _closed_loop(sys: SystemQuad, K) -> tuple[np.ndarray, np.ndarray]:
    if K is None:
        K = np.zeros((sys.m, sys.n))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    return sys.closed_loop(K)


def moment_trajectory(sys: SystemQuad, config: SimConfig, K=None, X0=None) -> dict:
    """Exact second-moment trajectory on the grid t_k = k dt, k = 0..steps.

    X0 defaults to x0 x0' from the config and must be symmetric PSD.
    Returns {"t": (steps+1,), "X": (steps+1, n, n), "diverged": bool}; the
    integration stops early (reporting the first bad step) if the moment
    blows up.
    """
    Ac, Cc = _closed_loop(sys, K)
    n = sys.n
    if config.x0.size != n:
        raise InvalidInputError(f"x0 must have length {n}")
    if X0 is None:
        X0 = np.outer(config.x0, config.x0)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape != (n, n) or np.linalg.norm(X0 - X0.T) > 1e-9 * max(1, np.linalg.norm(X0)):
        raise InvalidInputError(f"X0 must be symmetric {n} x {n}")
    if np.min(np.linalg.eigvalsh(0.5 * (X0 + X0.T))) < -1e-9 * max(1, np.linalg.norm(X0)):
        raise InvalidInputError("X0 must be positive semidefinite")
    L = build_drift_operator(Ac, [Cc]).M
    v = svec(0.5 * (X0 + X0.T), tol_sym=np.inf)
    steps = config.steps
    dt = config.dt
    t = np.arange(steps + 1) * dt
    out = np.empty((steps + 1, n, n))
    out[0] = smat(v)
    cap = 1e12 * (1.0 + np.linalg.norm(v))
    for k in range(steps):
        k1 = L @ v
        k2 = L @ (v + 0.5 * dt * k1)
        k3 = L @ (v + 0.5 * dt * k2)
        k4 = L @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) > cap:
            return {"t": t[: k + 1], "X": out[: k + 1], "diverged": True,
                    "first_bad_step": k + 1}
        X = smat(v)
        w = np.linalg.eigvalsh(X)
        floor = -1e-10 * max(1.0, np.linalg.norm(X))
        if np.min(w) < floor:
            # clip tiny negative modes introduced by the discretization
            wc, V = np.linalg.eigh(X)
            X = V @ np.diag(np.maximum(wc, 0.0)) @ V.T
            v = svec(X)
        out[k + 1] = X
    return {"t": t, "X": out, "diverged": False}


def euler_maruyama_ensemble(sys: SystemQuad, config: SimConfig, K=None) -> dict:
    """Ensemble of Euler--Maruyama paths of dx = Ac x dt + Cc x dw.

    Per-trial Wiener increments come from independently keyed generators
    (seed, trial), so results are bit-reproducible and independent of trial
    batching.  Returns second-moment means and standard errors on the grid.
    """
    Ac, Cc = _closed_loop(sys, K)
    n = sys.n
    if config.x0.size != n:
        raise InvalidInputError(f"x0 must have length {n}")
    steps, dt, trials = config.steps, config.dt, config.trials
    sq = np.sqrt(dt)
    dW = np.empty((trials, steps))
    for trial in range(trials):
        rng = np.random.default_rng([config.seed, trial])
        dW[trial] = rng.standard_normal(steps) * sq
    X = np.tile(config.x0.reshape(n, 1), (1, trials))
    t = np.arange(steps + 1) * dt
    mean2 = np.empty((steps + 1, n, n))
    se2 = np.empty((steps + 1, n, n))

    def record(k, Xs):
        prods = Xs[:, None, :] * Xs[None, :, :]       # (n, n, trials)
        mean2[k] = prods.mean(axis=2)
        if trials > 1:
            se2[k] = prods.std(axis=2, ddof=1) / np.sqrt(trials)
        else:
            se2[k] = 0.0

    record(0, X)
    diverged = False
    cap = 1e12 * (1.0 + np.linalg.norm(config.x0))
    for k in range(steps):
        X = X + dt * (Ac @ X) + (Cc @ X) * dW[:, k]
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > cap:
            diverged = True
            mean2[k + 1:] = np.nan
            se2[k + 1:] = np.nan
            t = t[: k + 1]
            mean2 = mean2[: k + 1]
            se2 = se2[: k + 1]
            break
        record(k + 1, X)
    return {"t": t, "mean": mean2, "stderr": se2, "diverged": diverged,
            "trials": trials}


def compare_empirical_vs_exact(sys: SystemQuad, config: SimConfig, K=None,
                               se_floor: float = 1e-12) -> dict:
    """Largest entrywise |empirical - exact| / stderr over the whole grid."""
    exact = moment_trajectory(sys, config, K)
    emp = euler_maruyama_ensemble(sys, config, K)
    if exact["diverged"] or emp["diverged"]:
        return {"diverged": True, "exact": exact, "empirical": emp}
    m = min(len(exact["t"]), len(emp["t"]))
    dev = np.abs(emp["mean"][:m] - exact["X"][:m])
    z = dev / np.maximum(emp["stderr"][:m], se_floor)
    idx = np.unravel_index(np.argmax(z), z.shape)
    return {"diverged": False, "max_standardized_deviation": float(z[idx]),
            "argmax": {"t": float(exact["t"][idx[0]]), "entry": (int(idx[1]), int(idx[2]))},
            "low_power": config.trials < 30,
            "exact": exact, "empirical": emp}
