"""Exact cluster ratio and centralized cluster ratio by linear programming.

Incidence matrices are enumerated exhaustively (deduplicated) and the ratio is
the optimum of ``min sum(mu)  s.t.  sum(mu * kappa) - theta * J = Z, mu >= 0``,
with ``theta`` free only in the centralized variant. ``k = None`` stands for a
countable alphabet; on an ``n x m`` instance that is exactly ``k = n + m``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidArgument, SolverFailure, TooLarge
from .simcore import IncidencePair, Labeling, SimMatrix, as_sim
from .simplex import solve_lp

DEFAULT_CAP = 2 ** 20
REPLAY_TOL = 1e-7
SUPPORT_TOL = 1e-12


def _stirling_partition_count(N: int, k: int) -> int:
    """Number of set partitions of N items into at most k blocks."""
    S = [[0] * (k + 1) for _ in range(N + 1)]
    S[0][0] = 1
    for i in range(1, N + 1):
        for j in range(1, min(i, k) + 1):
            S[i][j] = j * S[i - 1][j] + S[i - 1][j - 1]
    return sum(S[N][: k + 1])


def _restricted_growth_strings(N: int, k: int) -> np.ndarray:
    """All label strings of length N over [k] in canonical first-use order."""
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, N):
        new_rows, new_top = [], []
        for lab in range(min(k, N)):
            ok = lab <= top + 1
            if not ok.any():
                continue
            sel = rows[ok]
            new_rows.append(np.hstack([sel, np.full((sel.shape[0], 1), lab, dtype=np.int8)]))
            new_top.append(np.maximum(top[ok], lab).astype(np.int8))
        rows = np.vstack(new_rows)
        top = np.concatenate(new_top)
    return rows


def _kappa_rows(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.where(F[:, :, None] == G[:, None, :], 1.0, -1.0).reshape(F.shape[0], -1)


def _dedupe(F, G, K):
    signs = K > 0
    packed = np.packbits(signs, axis=1)
    _, first = np.unique(packed, axis=0, return_index=True)
    first = np.sort(first)
    return F[first], G[first], K[first]


def resolve_k(k: Optional[int], n: int, m: int) -> int:
    if k is None:
        return n + m
    if k < 2:
        raise InvalidArgument("alphabet size k must be >= 2")
    return int(k)


def incidence_table(n: int, m: int, k: Optional[int] = 2, cap: int = DEFAULT_CAP):
    """Deduplicated incidence patterns as arrays ``(F, G, K)``.

    ``F`` (p x n) and ``G`` (p x m) hold representative labelings and ``K``
    (p x n*m) the flattened ±1 incidence matrices, one row per distinct pattern.
    """
    if n < 1 or m < 1:
        raise InvalidArgument("n and m must be >= 1")
    kk = resolve_k(k, n, m)
    count = _stirling_partition_count(n + m, kk)
    if count > cap:
        raise TooLarge(f"{count} canonical labelings exceed the enumeration cap {cap}")
    L = _restricted_growth_strings(n + m, kk).astype(np.int64)
    F, G = L[:, :n], L[:, n:]
    return _dedupe(F, G, _kappa_rows(F, G))


def enumerate_incidence(n: int, m: int, k: Optional[int] = 2, cap: int = DEFAULT_CAP) -> List[IncidencePair]:
    """All distinct incidence pairs over ``[k]^n x [k]^m``.

    Enumeration runs over labelings in canonical first-use order, so the
    ``k!`` relabelings of each pattern are never generated; ``cap`` bounds the
    number of canonical labelings.
    """
    kk = resolve_k(k, n, m)
    F, G, _ = incidence_table(n, m, k, cap)
    return [IncidencePair(Labeling(f, kk), Labeling(g, kk)) for f, g in zip(F, G)]


def enumerate_incidence_bruteforce(n: int, m: int, k: int, cap: int = DEFAULT_CAP) -> List[IncidencePair]:
    """Every (f, g) in ``[k]^n x [k]^m``, deduplicated by incidence matrix."""
    if k ** (n + m) > cap:
        raise TooLarge(f"k^(n+m) = {k ** (n + m)} exceeds the enumeration cap {cap}")
    seen = {}
    for labels in itertools.product(range(k), repeat=n + m):
        pair = IncidencePair(Labeling(labels[:n], k), Labeling(labels[n:], k))
        key = pair.kappa.tobytes()
        if key not in seen:
            seen[key] = pair
    return list(seen.values())


@dataclass
class RatioCertificate:
    value: float
    weights: List[Tuple[IncidencePair, float]]
    theta: float
    k: int
    centralized: bool
    status: str = "optimal"
    dual: Optional[np.ndarray] = field(default=None, repr=False)
    target: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def support_size(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        n, m = self.target.shape
        out = np.zeros((n, m))
        for pair, mu in self.weights:
            out += mu * pair.kappa
        return out - self.theta

    def replay_residual(self) -> float:
        return float(np.max(np.abs(self.reconstruct() - self.target)))

    def check(self, tol: float = REPLAY_TOL) -> None:
        """Raise AssertionError when the certificate does not replay."""
        mus = np.array([mu for _, mu in self.weights])
        assert np.all(mus >= 0), "negative weight in certificate"
        assert abs(mus.sum() - self.value) <= 1e-9, "value differs from total weight"
        res = self.replay_residual()
        assert res <= tol, f"certificate replay residual {res:.3e} > {tol:.1e}"

    def dual_value(self) -> float:
        """``<Z, W>`` for the LP dual matrix ``W``; equals ``value`` at optimality."""
        return float(np.sum(self.dual * self.target))


def cluster_ratio(Z, k: Optional[int] = 2, centralized: bool = False,
                  cap: int = DEFAULT_CAP) -> RatioCertificate:
    """Exact (centralized) cluster ratio of ``Z`` for alphabet size ``k``."""
    Z = as_sim(Z)
    n, m = Z.shape
    kk = resolve_k(k, n, m)
    if not np.any(Z.values):
        return RatioCertificate(0.0, [], 0.0, kk, centralized, dual=np.zeros((n, m)),
                                target=np.array(Z.values))
    F, G, K = incidence_table(n, m, kk, cap)
    A = K.T
    ncol = A.shape[1]
    c = np.ones(ncol)
    if centralized:
        ones = np.ones((n * m, 1))
        A = np.hstack([A, -ones, ones])
        c = np.r_[c, 0.0, 0.0]
    res = solve_lp(A, Z.values.ravel(), c)
    if res.status != "optimal":
        raise SolverFailure(f"cluster-ratio LP ended with status {res.status}")
    mu = res.x[:ncol]
    theta = float(res.x[ncol] - res.x[ncol + 1]) if centralized else 0.0
    support = np.flatnonzero(mu > SUPPORT_TOL)
    weights = [(IncidencePair(Labeling(F[i], kk), Labeling(G[i], kk)), float(mu[i])) for i in support]
    value = float(sum(w for _, w in weights))
    cert = RatioCertificate(value, weights, theta, kk, centralized,
                            dual=res.dual.reshape(n, m), target=np.array(Z.values))
    try:
        cert.check()
    except AssertionError as exc:
        raise SolverFailure(f"certificate replay failed: {exc}") from None
    return cert


# -- symmetric LSH via the cut cone ---------------------------------------------


@dataclass
class SymmetricLsh:
    """Minimal-alpha binary symmetric LSH, or ``status='infeasible'``.

    ``cuts`` lists ``(S, weight)`` with ``S`` a tuple of item indices not
    containing 0; the hash puts ``S`` and its complement in different clusters.
    """

    status: str
    alpha: Optional[float]
    theta: Optional[float]
    cuts: List[Tuple[tuple, float]]
    n: int

    def distribution(self) -> List[Tuple[tuple, float]]:
        """Hash distribution: each cut with probability ``weight / alpha``, the
        trivial (single-cluster) hash taking the remaining mass."""
        if self.status != "feasible":
            raise InvalidArgument("no LSH exists for this matrix")
        dist = [(S, w / self.alpha) for S, w in self.cuts]
        rest = 1.0 - sum(p for _, p in dist)
        if rest > 1e-15:
            dist.append(((), rest))
        return dist

    def expected_similarity(self) -> np.ndarray:
        """``alpha * E[kappa] - theta`` computed exactly over the finite support."""
        E = np.zeros((self.n, self.n))
        for S, p in self.distribution():
            side = np.zeros(self.n, dtype=bool)
            side[list(S)] = True
            E += p * np.where(side[:, None] == side[None, :], 1.0, -1.0)
        return self.alpha * E - self.theta


def _check_symmetric_similarity(Z: SimMatrix):
    if not Z.is_symmetric:
        raise InvalidArgument("matrix must be symmetric")
    if not np.allclose(np.diag(Z.values), 1.0, rtol=0, atol=1e-12):
        raise InvalidArgument("matrix must have unit diagonal")
    if Z.max_abs > 1.0 + 1e-12:
        raise InvalidArgument("entries must lie in [-1, 1]")


def min_symmetric_lsh_alpha(Z, max_n: int = 14) -> SymmetricLsh:
    """Smallest alpha of a binary symmetric alpha-LSH, decided over the cut cone.

    Minimizes ``sum(lambda_S)`` subject to ``sum(lambda_S * delta_S) = (1 - Z) / 2``
    over off-diagonal pairs; infeasibility means the distance is not
    isometrically Hamming-embeddable and no alpha-LSH exists.
    """
    Z = as_sim(Z)
    _check_symmetric_similarity(Z)
    n = Z.n
    if n > max_n:
        raise TooLarge(f"cut-cone LP limited to n <= {max_n}, got {n}")
    iu = np.triu_indices(n, 1)
    D = (1.0 - Z.values[iu]) / 2.0
    if n == 1 or np.max(np.abs(D)) == 0.0:
        return SymmetricLsh("feasible", 1.0, 0.0, [], n)
    # Cut S <-> bitmask over items 1..n-1 (item 0 fixed outside S).
    masks = np.arange(1, 2 ** (n - 1))
    member = np.zeros((masks.size, n), dtype=bool)
    for item in range(1, n):
        member[:, item] = (masks >> (item - 1)) & 1
    delta = (member[:, iu[0]] != member[:, iu[1]]).astype(float)
    res = solve_lp(delta.T, D, np.ones(masks.size))
    if res.status == "infeasible":
        return SymmetricLsh("infeasible", None, None, [], n)
    if res.status != "optimal":
        raise SolverFailure(f"cut-cone LP ended with status {res.status}")
    lam = res.x
    cuts = [(tuple(np.flatnonzero(member[i]).tolist()), float(lam[i]))
            for i in np.flatnonzero(lam > SUPPORT_TOL)]
    alpha = float(sum(w for _, w in cuts))
    return SymmetricLsh("feasible", alpha, alpha - 1.0, cuts, n)
