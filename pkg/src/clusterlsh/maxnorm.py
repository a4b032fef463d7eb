"""Max-norm and centralized max-norm by low-rank factorization.

Each restart runs two stages on the matrix scaled to ``max|Z| = 1``:

1. penalty continuation: minimize ``softmax_beta(row norms^2) + lam * ||U V^T + theta J - Z||_F^2``
   for ``lam`` in (1e2, 1e4, 1e6) with L-BFGS, warm-starting each stage;
2. polish: ``min t  s.t.  ||w_i||^2 <= t, U V^T + theta J = Z`` with SLSQP from
   the stage-1 point, which drives the fit residual to round-off.

``theta`` is a variable only for the centralized problem. The best restart
that meets the fit tolerance wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import InternalInvariantViolation, SolverFailure
from .simcore import SimMatrix, as_sim

log = logging.getLogger(__name__)

PENALTY_SCHEDULE = (1e2, 1e4, 1e6)
SOFTMAX_BETA = 50.0
GOLDEN_ITERATIONS = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    rank: Optional[int] = None  # None -> n + m
    restarts: int = 8
    seed: int = 0
    fit_tol: float = 1e-6  # relative to max(1, max|Z|)


@dataclass(frozen=True)
class Factorization:
    U: np.ndarray
    V: np.ndarray
    t: float
    residual: float

    @property
    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.U, axis=1)

    @property
    def col_norms(self) -> np.ndarray:
        return np.linalg.norm(self.V, axis=1)

    def product(self) -> np.ndarray:
        return self.U @ self.V.T


@dataclass(frozen=True)
class CenteredMaxNorm:
    value: float
    theta: float
    inner: Factorization


def witness_t(U, V) -> float:
    """Largest squared row norm over both factors."""
    return float(max(np.max(np.sum(U * U, axis=1)), np.max(np.sum(V * V, axis=1))))


def _balance(U, V):
    a = float(np.max(np.linalg.norm(U, axis=1)))
    b = float(np.max(np.linalg.norm(V, axis=1)))
    if a > 0 and b > 0:
        s = math.sqrt(b / a)
        return U * s, V / s
    return U, V


def _make_witness(U, V, target) -> Factorization:
    U, V = _balance(U, V)
    U = np.array(U)
    V = np.array(V)
    U.setflags(write=False)
    V.setflags(write=False)
    residual = float(np.max(np.abs(U @ V.T - target)))
    return Factorization(U, V, witness_t(U, V), residual)


# -- stage 1 -------------------------------------------------------------------


def _penalty_objective(x, n, m, r, Z, lam, beta, centered):
    W = x[: (n + m) * r].reshape(n + m, r)
    theta = x[-1] if centered else 0.0
    U, V = W[:n], W[n:]
    sq = np.sum(W * W, axis=1)
    top = sq.max()
    e = np.exp(beta * (sq - top))
    smax = top + math.log(e.sum()) / beta
    p = e / e.sum()
    R = U @ V.T + theta - Z
    f = smax + lam * float(np.sum(R * R))
    gW = 2.0 * p[:, None] * W
    gW[:n] += 2.0 * lam * (R @ V)
    gW[n:] += 2.0 * lam * (R.T @ U)
    g = gW.ravel()
    if centered:
        g = np.r_[g, 2.0 * lam * R.sum()]
    return f, g


def _stage1(x0, n, m, r, Z, centered):
    x = x0
    for lam in PENALTY_SCHEDULE:
        res = minimize(_penalty_objective, x, args=(n, m, r, Z, lam, SOFTMAX_BETA, centered),
                       jac=True, method="L-BFGS-B", options={"maxiter": 3000, "gtol": 1e-10})
        x = res.x
    return x


# -- stage 2 -------------------------------------------------------------------


def _stage2(x1, n, m, r, Z, centered):
    N = n + m
    nw = N * r
    W1 = x1[:nw].reshape(N, r)
    t0 = float(np.max(np.sum(W1 * W1, axis=1)))
    y0 = np.r_[x1, t0]
    it = len(y0) - 1

    def unpack(y):
        W = y[:nw].reshape(N, r)
        theta = y[nw] if centered else 0.0
        return W, theta

    def eq(y):
        W, theta = unpack(y)
        return (W[:n] @ W[n:].T + theta - Z).ravel()

    def eq_jac(y):
        W, _ = unpack(y)
        U, V = W[:n], W[n:]
        J = np.zeros((n * m, len(y)))
        rows = np.arange(n * m).reshape(n, m)
        for i in range(n):
            for j in range(m):
                row = rows[i, j]
                J[row, i * r:(i + 1) * r] = V[j]
                J[row, (n + j) * r:(n + j + 1) * r] = U[i]
        if centered:
            J[:, nw] = 1.0
        return J

    def ineq(y):
        W, _ = unpack(y)
        return y[it] - np.sum(W * W, axis=1)

    def ineq_jac(y):
        W, _ = unpack(y)
        J = np.zeros((N, len(y)))
        for i in range(N):
            J[i, i * r:(i + 1) * r] = -2.0 * W[i]
        J[:, it] = 1.0
        return J

    obj_grad = np.zeros(len(y0))
    obj_grad[it] = 1.0
    res = minimize(lambda y: y[it], y0, jac=lambda y: obj_grad, method="SLSQP",
                   constraints=[{"type": "eq", "fun": eq, "jac": eq_jac},
                                {"type": "ineq", "fun": ineq, "jac": ineq_jac}],
                   options={"maxiter": 1000, "ftol": 1e-14})
    return res.x[:it]


def _solve(Zs: np.ndarray, config: SolverConfig, centered: bool):
    """Best factorization of a matrix already scaled to max|Z| = 1.

    Returns ``(U, V, theta, t, residual)`` in the scaled units.
    """
    n, m = Zs.shape
    r = config.rank or (n + m)
    tol = config.fit_tol
    best = None
    best_residual = math.inf
    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        x0 = rng.standard_normal((n + m) * r) * math.sqrt(1.0 / r)
        if centered:
            x0 = np.r_[x0, 0.0]
        x1 = _stage1(x0, n, m, r, Zs, centered)
        candidates = [x1]
        try:
            candidates.insert(0, _stage2(x1, n, m, r, Zs, centered))
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - defensive
            log.debug("polish failed on restart %d: %s", restart, exc)
        for x in candidates:
            W = x[: (n + m) * r].reshape(n + m, r)
            theta = float(x[-1]) if centered else 0.0
            U, V = _balance(W[:n], W[n:])
            residual = float(np.max(np.abs(U @ V.T + theta - Zs)))
            best_residual = min(best_residual, residual)
            if residual > tol:
                continue
            t = witness_t(U, V)
            if best is None or t < best[3]:
                best = (U, V, theta, t, residual)
            break
    if best is None:
        raise SolverFailure(f"no restart reached fit tolerance {tol:g}", best_residual)
    return best


def _scale(Z: SimMatrix):
    s = Z.max_abs
    return s, (Z.values / s if s > 0 else np.array(Z.values))


def max_norm(Z, config: SolverConfig = SolverConfig()) -> Factorization:
    """Upper estimate of ``||Z||_max`` with its factorization witness."""
    Z = as_sim(Z)
    s, Zs = _scale(Z)
    n, m = Z.shape
    r = config.rank or (n + m)
    if s == 0.0:
        return _make_witness(np.zeros((n, r)), np.zeros((m, r)), Z.values)
    U, V, _, _, _ = _solve(Zs, config, centered=False)
    fac = _make_witness(U * math.sqrt(s), V * math.sqrt(s), Z.values)
    _sanity(fac, Z, config)
    return fac


def _sanity(fac: Factorization, Z: SimMatrix, config: SolverConfig):
    limit = config.fit_tol * max(1.0, Z.max_abs)
    if fac.residual > limit:
        raise SolverFailure(f"fit residual {fac.residual:.3e} exceeds {limit:.1e}", fac.residual)
    if fac.t < Z.max_abs - 1e-9 - fac.residual:
        raise InternalInvariantViolation("max-norm estimate below the entrywise lower bound")


def _centered_joint(Z: SimMatrix, config: SolverConfig) -> CenteredMaxNorm:
    s, Zs = _scale(Z)
    U, V, theta, _, _ = _solve(Zs, config, centered=True)
    theta *= s
    shifted = Z.shifted(theta)
    fac = _make_witness(U * math.sqrt(s), V * math.sqrt(s), shifted.values)
    _sanity(fac, shifted, config)
    return CenteredMaxNorm(fac.t, float(theta), fac)


def _centered_golden(Z: SimMatrix, config: SolverConfig,
                     iterations: int = GOLDEN_ITERATIONS) -> CenteredMaxNorm:
    """Golden-section search over theta of the convex map theta -> ||Z - theta||_max."""
    cache = {}

    def f(theta):
        if theta not in cache:
            cache[theta] = max_norm(Z.shifted(theta), config)
        return cache[theta].t

    lo = float(Z.values.min()) - 1.0
    hi = float(Z.values.max()) + 1.0
    a = hi - _INVPHI * (hi - lo)
    b = lo + _INVPHI * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(iterations):
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - _INVPHI * (hi - lo)
            fa = f(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + _INVPHI * (hi - lo)
            fb = f(b)
    theta = min(cache, key=lambda th: cache[th].t)
    return CenteredMaxNorm(cache[theta].t, theta, cache[theta])


def centered_max_norm(Z, config: SolverConfig = SolverConfig(),
                      method: str = "joint") -> CenteredMaxNorm:
    """Centralized max-norm ``min_theta ||Z - theta||_max`` and its minimizer.

    ``method="joint"`` optimizes the shift together with the factors;
    ``method="golden"`` runs a golden-section search over the shift in
    ``[min Z - 1, max Z + 1]`` with a full max-norm solve per probe. The result
    never exceeds the uncentered estimate: if it would, the ``theta = 0``
    solution is returned instead.
    """
    Z = as_sim(Z)
    if Z.values.max() == Z.values.min():
        theta = float(Z.values.flat[0])
        inner = max_norm(Z.shifted(theta), config)
        return CenteredMaxNorm(inner.t, theta, inner)
    if method == "joint":
        out = _centered_joint(Z, config)
    elif method == "golden":
        out = _centered_golden(Z, config)
    else:
        raise ValueError(f"unknown method {method!r}")
    plain = max_norm(Z, config)
    if plain.t < out.value:
        return CenteredMaxNorm(plain.t, 0.0, plain)
    return out


def rank_entry_bound(Z) -> dict:
    """Closed-form max-norm upper bounds from size and entry magnitude.

    ``bound`` is ``min(n, m) * max|Z|^2``; ``sqrt_bound`` is the alternative
    reading ``sqrt(min(n, m)) * max|Z|``. Both dominate ``||Z||_max`` when the
    entries lie in [-1, 1].
    """
    Z = as_sim(Z)
    q = min(Z.shape)
    a = Z.max_abs
    return {"bound": q * a * a, "sqrt_bound": math.sqrt(q) * a}
