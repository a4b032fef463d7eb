"""Feasibility diagnostics for symmetric (generalized) LSH."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidArgument
from .ratio import min_symmetric_lsh_alpha
from .simcore import SimMatrix, as_sim, jacobi_eigh, spectrum

METRIC_SLACK = 1e-12
OBTUSE_SLACK = 1e-12
CUT_CONE_MAX_N = 14
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _require_symmetric_unit(Z: SimMatrix):
    if not Z.is_symmetric:
        raise InvalidArgument("matrix must be symmetric")
    if not np.allclose(np.diag(Z.values), 1.0, rtol=0, atol=1e-12):
        raise InvalidArgument("matrix must have unit diagonal")


def is_metric(Z) -> Tuple[bool, Optional[Tuple[int, int, int]]]:
    """Check every triangle inequality of ``D = (1 - Z) / 2``.

    Returns ``(True, None)`` or ``(False, (i, j, k))`` for the lexicographically
    first triple with ``D[i, j] > D[i, k] + D[k, j] + 1e-12``.
    """
    Z = as_sim(Z)
    _require_symmetric_unit(Z)
    D = (1.0 - Z.values) / 2.0
    viol = D[:, :, None] > D[:, None, :] + D.T[None, :, :] + METRIC_SLACK
    # viol[i, j, k]: D[i, j] > D[i, k] + D[k, j]
    hits = np.argwhere(viol)
    if hits.size == 0:
        return True, None
    i, j, k = (int(v) for v in hits[0])
    return False, (i, j, k)


def find_obtuse_triple(X) -> Optional[Tuple[int, int, int]]:
    """First ``(x, y, z)`` with ``<X[z] - X[x], X[z] - X[y]> < -1e-12``, else None."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.allclose(np.linalg.norm(X, axis=1), 1.0, rtol=0, atol=1e-9):
        raise InvalidArgument("find_obtuse_triple needs unit-norm rows")
    G = X @ X.T
    d = np.diag(G)
    # <z-x, z-y> = |z|^2 - <z,x> - <z,y> + <x,y>, indexed [x, y, z]
    val = d[None, None, :] - G[:, None, :] - G[None, :, :] + G[:, :, None]
    hits = np.argwhere(val < -OBTUSE_SLACK)
    if hits.size == 0:
        return None
    x, y, z = (int(v) for v in hits[0])
    lhs = (1.0 - G[z, x]) + (1.0 - G[z, y])
    if not lhs < (1.0 - G[x, y]) + 1e-9:
        raise AssertionError("obtuse triple does not violate the rewritten triangle inequality")
    return x, y, z


def generalized_alpha_upper(Z, C: float = 1.0) -> float:
    """``C * (1 - lambda_min) * ln n``; ``C`` stands in for an unspecified constant."""
    Z = as_sim(Z)
    _require_symmetric_unit(Z)
    lam = spectrum(Z).lambda_min
    return C * (1.0 - lam) * math.log(Z.n)


@dataclass(frozen=True)
class GeneralizedLowerBound:
    theta: float
    gamma: float

    @property
    def alpha_shift_sum(self) -> float:
        """The ``theta + gamma`` reading."""
        return self.theta + self.gamma

    @property
    def alpha_diagonal(self) -> float:
        """The ``1 + theta + gamma`` reading from the diagonal identity."""
        return 1.0 + self.theta + self.gamma


def _lambda_min(M) -> float:
    return float(jacobi_eigh(M, vectors=False)[0][0])


def generalized_alpha_lower(Z, iterations: int = 100) -> GeneralizedLowerBound:
    """Least ``theta + gamma`` with ``Z + theta J + gamma I`` positive semidefinite.

    For fixed ``theta`` the best ``gamma`` is ``-lambda_min(Z + theta J)``; the
    outer convex problem in ``theta`` is solved by golden-section search over
    ``[-max|Z| - n, max|Z| + n]``. This is a necessary condition only, so the
    result lower-bounds the alpha of any generalized LSH.
    """
    Z = as_sim(Z)
    _require_symmetric_unit(Z)
    n = Z.n
    J = np.ones((n, n))

    def objective(theta):
        return theta - _lambda_min(Z.values + theta * J)

    lo, hi = -Z.max_abs - n, Z.max_abs + n
    a = hi - _INVPHI * (hi - lo)
    b = lo + _INVPHI * (hi - lo)
    fa, fb = objective(a), objective(b)
    for _ in range(iterations):
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - _INVPHI * (hi - lo)
            fa = objective(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + _INVPHI * (hi - lo)
            fb = objective(b)
    theta = a if fa <= fb else b
    gamma = -_lambda_min(Z.values + theta * J)
    return GeneralizedLowerBound(float(theta), float(gamma))


@dataclass
class LshFeasibilityReport:
    triangle_ok: bool
    violating_triple: Optional[Tuple[int, int, int]]
    obtuse_triple: Optional[Tuple[int, int, int]]
    cut_cone_status: str  # feasible | infeasible | skipped
    symmetric_alpha: Optional[float]
    generalized_alpha_upper: float
    generalized_alpha_lower: float
    generalized_alpha_lower_diagonal: float
    generalized_theta: float
    generalized_gamma: float
    lambda_min: float

    def check_invariants(self):
        if self.obtuse_triple is not None:
            assert not self.triangle_ok, "obtuse triple present but D is a metric"
        if self.cut_cone_status == "feasible":
            assert self.triangle_ok, "cut-cone feasible but D is not a metric"


def gram_vectors(Z, tol: float = 1e-9) -> Optional[np.ndarray]:
    """Unit vectors whose Gram matrix is ``Z`` when ``Z`` is PSD, else None."""
    Z = as_sim(Z)
    w, Q = jacobi_eigh(Z.values)
    if w[0] < -tol:
        return None
    X = Q * np.sqrt(np.clip(w, 0.0, None))
    norms = np.linalg.norm(X, axis=1)
    return X / norms[:, None]


def check(Z, C: float = 1.0, cut_cone_max_n: int = CUT_CONE_MAX_N) -> LshFeasibilityReport:
    """Full symmetric-side report: metric test, obtuse triple, cut cone and alpha bounds.

    The obtuse-triple test runs only when ``Z`` is PSD (so that it is a Gram
    matrix of unit vectors); the cut-cone LP runs only for ``n <= cut_cone_max_n``.
    """
    Z = as_sim(Z)
    _require_symmetric_unit(Z)
    ok, triple = is_metric(Z)
    X = gram_vectors(Z)
    obtuse = find_obtuse_triple(X) if X is not None else None
    if Z.n <= cut_cone_max_n and Z.max_abs <= 1.0 + 1e-12:
        lsh = min_symmetric_lsh_alpha(Z, max_n=cut_cone_max_n)
        status, alpha = lsh.status, lsh.alpha
    else:
        status, alpha = "skipped", None
    low = generalized_alpha_lower(Z)
    report = LshFeasibilityReport(
        triangle_ok=ok,
        violating_triple=triple,
        obtuse_triple=obtuse,
        cut_cone_status=status,
        symmetric_alpha=alpha,
        generalized_alpha_upper=generalized_alpha_upper(Z, C),
        generalized_alpha_lower=low.alpha_shift_sum,
        generalized_alpha_lower_diagonal=low.alpha_diagonal,
        generalized_theta=low.theta,
        generalized_gamma=low.gamma,
        lambda_min=spectrum(Z).lambda_min,
    )
    return report
