"""Asymmetric LSH samplers built from max-norm factorizations.

A sampler is a seeded distribution over incidence pairs ``(f, g)`` with scale
``alpha`` and shift ``theta`` such that ``alpha * E[kappa] - theta`` equals the
target. Draw ``i`` lives in block ``i // BLOCK_SIZE``; every block has its own
PCG64 stream seeded by ``SeedSequence([seed, block])``, so any range of draws
can be regenerated independently of how the work was split.

The Krivine sampler normalizes each factor row, maps the directions through a
truncated odd-tensor-power series so that inner products become
``sin(c <u, v>)`` (``c = asinh(1)``), rounds with one shared Gaussian
hyperplane and flips each sign with bias ``1/2 + ||row|| / (2 sqrt(t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InternalInvariantViolation, InvalidArgument, TooLarge
from .maxnorm import Factorization, SolverConfig, centered_max_norm, max_norm
from .ratio import RatioCertificate
from .simcore import IncidencePair, Labeling, SimMatrix, approximation_error, as_sim, jacobi_eigh

KRIVINE_C = math.asinh(1.0)
K_R = math.pi / (2.0 * KRIVINE_C)
BLOCK_SIZE = 4096
TENSOR_CAP = 2 ** 24
BRUTEFORCE_CAP = 24  # max n * d


def norm_partial(K: int) -> float:
    """Partial sum ``sum_{k<=K} c^(2k+1) / (2k+1)!`` of ``sinh(c) = 1``."""
    return sum(KRIVINE_C ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(K + 1))


def _series_coefficients(K: int) -> np.ndarray:
    return np.array([KRIVINE_C ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(K + 1)])


def krivine_embed(unit_vectors, K: int = 2, side: str = "row", cap: int = TENSOR_CAP) -> np.ndarray:
    """Explicit truncated Krivine map of unit rows.

    Block ``k`` holds ``sqrt(c^(2k+1)/(2k+1)!) * u^(x)(2k+1)``, negated for odd
    ``k`` on the row side only; the concatenation is divided by
    ``sqrt(norm_partial(K))`` so every output row is a unit vector.
    """
    X = np.atleast_2d(np.asarray(unit_vectors, dtype=float))
    if side not in ("row", "col"):
        raise InvalidArgument("side must be 'row' or 'col'")
    if K < 0:
        raise InvalidArgument("K must be >= 0")
    if not np.allclose(np.linalg.norm(X, axis=1), 1.0, rtol=0, atol=1e-9):
        raise InvalidArgument("krivine_embed needs unit-norm rows")
    n, r = X.shape
    if r ** (2 * K + 1) > cap:
        raise TooLarge(f"tensor dimension {r}^{2 * K + 1} exceeds cap {cap}")
    coef = _series_coefficients(K)
    blocks = []
    power = X
    for k in range(K + 1):
        if k:
            for _ in range(2):
                power = (power[:, :, None] * X[:, None, :]).reshape(n, -1)
        sign = -1.0 if (side == "row" and k % 2) else 1.0
        blocks.append(sign * math.sqrt(coef[k]) * power)
    return np.hstack(blocks) / math.sqrt(coef.sum())


def krivine_gram(rows, cols, K: int = 2) -> np.ndarray:
    """Gram matrix of the stacked embedded ``[rows; cols]`` without materializing them."""
    W = np.vstack([rows, cols])
    n = len(rows)
    A = W @ W.T
    coef = _series_coefficients(K)
    side = np.r_[np.ones(n), -np.ones(len(cols))]
    cross = np.outer(side, side) < 0
    G = np.zeros_like(A)
    for k, a in enumerate(coef):
        term = a * A ** (2 * k + 1)
        G += np.where(cross & (k % 2 == 1), -term, term)
    return G / coef.sum()


def reduce_basis(U: np.ndarray, V: np.ndarray, tol: float = 1e-12):
    """Express the rows of ``U`` and ``V`` in an orthonormal basis of their joint span."""
    W = np.vstack([U, V])
    _, sv, Vt = np.linalg.svd(W, full_matrices=False)
    keep = sv > tol * max(1.0, sv[0] if sv.size else 0.0)
    if not keep.any():
        keep[0] = True
    coords = W @ Vt[keep].T
    return coords[: len(U)], coords[len(U):]


def _unit_rows(X: np.ndarray):
    norms = np.linalg.norm(X, axis=1)
    D = np.zeros_like(X)
    ok = norms > 0
    D[ok] = X[ok] / norms[ok, None]
    D[~ok, 0] = 1.0  # direction is irrelevant: the sign flip is then unbiased
    return D, norms


def hoeffding_band(alpha: float, n: int, m: int, N: int, delta: float = 0.01) -> float:
    """Uniform deviation bound over all ``n*m`` entries for means of ±alpha draws."""
    return alpha * math.sqrt(2.0 * math.log(2.0 * n * m / delta) / N)


# -- samplers ------------------------------------------------------------------


class Sampler:
    """Seeded distribution over incidence pairs; subclasses implement ``_block``."""

    alpha: float
    theta: float
    n: int
    m: int
    k: int
    seed: int

    def _block(self, block: int) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def block_labels(self, block: int):
        return self._block(block)

    def labels(self, start: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Row and column labels of draws ``start .. start+count-1``."""
        F = np.empty((count, self.n), dtype=np.int64)
        G = np.empty((count, self.m), dtype=np.int64)
        pos = 0
        idx = start
        while pos < count:
            block, off = divmod(idx, BLOCK_SIZE)
            take = min(BLOCK_SIZE - off, count - pos)
            bf, bg = self._block(block)
            F[pos:pos + take] = bf[off:off + take]
            G[pos:pos + take] = bg[off:off + take]
            pos += take
            idx += take
        return F, G

    def sample_pair(self, index: int = 0) -> IncidencePair:
        F, G = self.labels(index, 1)
        return IncidencePair(Labeling(F[0], self.k), Labeling(G[0], self.k))

    def mean_kappa(self, N: int, start: int = 0) -> np.ndarray:
        """Empirical mean incidence matrix over ``N`` consecutive draws."""
        total = np.zeros((self.n, self.m))
        pos = 0
        while pos < N:
            take = min(BLOCK_SIZE, N - pos)
            F, G = self.labels(start + pos, take)
            for lab in range(self.k):
                total += (F == lab).T.astype(float) @ (G == lab).astype(float)
            pos += take
        return 2.0 * total / N - 1.0


@dataclass(eq=False)
class AlshSampler(Sampler):
    """Binary Krivine-rounding sampler for ``alpha * E[kappa] - theta = target``.

    ``base`` factors ``target + theta``; labels 0/1 encode signs +1/-1.
    """

    alpha: float
    theta: float
    base: Factorization
    tensor_orders: Tuple[int, ...]
    norm_partial: float
    seed: int
    target: np.ndarray = field(repr=False, default=None)
    mode: str = "gram"
    status: str = "ok"

    def __post_init__(self):
        self.n, self.m = self.base.U.shape[0], self.base.V.shape[0]
        self.k = 2
        self.K = len(self.tensor_orders) - 1
        t = self.base.t
        if self.status == "exact-zero":
            return
        if abs(self.alpha - K_R * t) > 1e-12 * max(1.0, self.alpha):
            raise InternalInvariantViolation("alpha must equal K_R * t")
        Ud, nu = _unit_rows(np.asarray(self.base.U))
        Vd, nv = _unit_rows(np.asarray(self.base.V))
        root_t = math.sqrt(t)
        if nu.max() > root_t * (1 + 1e-12) or nv.max() > root_t * (1 + 1e-12):
            raise InternalInvariantViolation("factor row norm exceeds sqrt(t)")
        self._flip_p = np.clip(0.5 + np.r_[nu, nv] / (2.0 * root_t), 0.0, 1.0)
        self._scale = np.r_[nu, nv] / root_t
        self._gram = krivine_gram(Ud, Vd, self.K)
        if self.mode == "gram":
            w, Q = jacobi_eigh(self._gram)
            self._factor = Q * np.sqrt(np.clip(w, 0.0, None))
        elif self.mode == "dense":
            Ur, Vr = reduce_basis(Ud, Vd)
            Ur, _ = _unit_rows(Ur)
            Vr, _ = _unit_rows(Vr)
            self._embedded = np.vstack([krivine_embed(Ur, self.K, "row"),
                                        krivine_embed(Vr, self.K, "col")])
        else:
            raise InvalidArgument(f"unknown sampling mode {self.mode!r}")

    def _block(self, block: int):
        N = self.n + self.m
        if self.status == "exact-zero":
            return (np.zeros((BLOCK_SIZE, self.n), dtype=np.int64),
                    np.zeros((BLOCK_SIZE, self.m), dtype=np.int64))
        rng = np.random.default_rng([self.seed, block])
        if self.mode == "gram":
            proj = rng.standard_normal((BLOCK_SIZE, N)) @ self._factor.T
        else:
            D = self._embedded.shape[1]
            proj = np.empty((BLOCK_SIZE, N))
            chunk = max(1, min(BLOCK_SIZE, 2 ** 22 // D))
            for lo in range(0, BLOCK_SIZE, chunk):
                z = rng.standard_normal((min(chunk, BLOCK_SIZE - lo), D))
                proj[lo:lo + len(z)] = z @ self._embedded.T
        raw = proj >= 0.0
        keep = rng.random((BLOCK_SIZE, N)) < self._flip_p
        positive = raw == keep  # sign after flip is +1 iff raw and flip agree
        labels = (~positive).astype(np.int64)
        return labels[:, : self.n], labels[:, self.n:]

    def raw_expectation(self) -> np.ndarray:
        """Exact ``E[sign<u'_x, z> * sign<v'_y, z>]`` from the arcsine identity."""
        G = np.clip(self._gram[: self.n, self.n:], -1.0, 1.0)
        return (2.0 / math.pi) * np.arcsin(G)

    def exact_expectation(self) -> np.ndarray:
        """Exact ``E[kappa]`` of this sampler, truncation included."""
        if self.status == "exact-zero":
            return np.ones((self.n, self.m))
        s = self._scale
        return np.outer(s[: self.n], s[self.n:]) * self.raw_expectation()

    @property
    def truncation_bound(self) -> float:
        """Nominal truncation allowance ``alpha * (1 - norm_partial) / norm_partial``."""
        return self.alpha * (1.0 - self.norm_partial) / self.norm_partial

    @property
    def bias_bound(self) -> float:
        """Rigorous bound on ``|alpha * E[kappa] - theta - target|`` from truncation.

        The embedded inner product is off from ``sin(c x)`` by at most
        ``2 (1 - norm_partial)`` (series tail plus renormalization), and arcsin
        is Lipschitz with constant ``L`` on the reachable range. This can
        exceed :attr:`truncation_bound`, which ignores the arcsin slope.
        """
        delta = 2.0 * (1.0 - self.norm_partial)
        top = math.sin(KRIVINE_C) + delta
        if top >= 1.0:
            return self.alpha
        lip = 1.0 / math.sqrt(1.0 - top * top)
        return self.alpha * (2.0 / math.pi) * lip * delta


def _check_lsh_range(Z: SimMatrix):
    if Z.max_abs > 1.0 + 1e-12:
        raise InvalidArgument("LSH construction needs similarity entries in [-1, 1]")


def build_alsh(Z, centralized: bool = False, K: int = 2, seed: int = 0,
               config: Optional[SolverConfig] = None, mode: str = "gram") -> AlshSampler:
    """Binary ``alpha``-ALSH for ``Z`` with ``alpha = K_R * ||Z + theta||_max``."""
    Z = as_sim(Z)
    _check_lsh_range(Z)
    config = config or SolverConfig(seed=seed)
    if centralized:
        cm = centered_max_norm(Z, config)
        base, theta = cm.inner, -cm.theta
    else:
        base, theta = max_norm(Z, config), 0.0
    orders = tuple(2 * k + 1 for k in range(K + 1))
    status = "exact-zero" if base.t == 0.0 else "ok"
    return AlshSampler(alpha=K_R * base.t, theta=float(theta), base=base, tensor_orders=orders,
                       norm_partial=norm_partial(K), seed=seed, target=np.array(Z.values),
                       mode=mode, status=status)


@dataclass(eq=False)
class FiniteSampler(Sampler):
    """Sampler over an explicit finite support of incidence pairs."""

    support: List[IncidencePair]
    probabilities: np.ndarray
    alpha: float
    theta: float
    seed: int = 0
    target: Optional[np.ndarray] = field(repr=False, default=None)
    residual: float = 0.0

    def __post_init__(self):
        if not self.support:
            raise InvalidArgument("empty support")
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidArgument("probabilities must be non-negative and sum to 1")
        self.probabilities = p / p.sum()
        self.n = len(self.support[0].f)
        self.m = len(self.support[0].g)
        self.k = max(pair.k for pair in self.support)
        self._F = np.array([pair.f.labels for pair in self.support])
        self._G = np.array([pair.g.labels for pair in self.support])

    @classmethod
    def from_certificate(cls, cert: RatioCertificate, seed: int = 0) -> "FiniteSampler":
        """Normalize the LP weights into a distribution (``alpha`` = ratio value)."""
        pairs = [pair for pair, _ in cert.weights]
        mu = np.array([w for _, w in cert.weights])
        return cls(pairs, mu / mu.sum(), alpha=cert.value, theta=cert.theta, seed=seed,
                   target=cert.target, residual=cert.replay_residual())

    def _block(self, block: int):
        rng = np.random.default_rng([self.seed, block])
        idx = rng.choice(len(self.support), size=BLOCK_SIZE, p=self.probabilities)
        return self._F[idx], self._G[idx]

    def exact_expectation(self) -> np.ndarray:
        K = np.array([pair.kappa for pair in self.support])
        return np.tensordot(self.probabilities, K, axes=1)


@dataclass(eq=False)
class BinaryReducedSampler(Sampler):
    """Composes each draw of ``base`` with a fresh uniform map ``h: labels -> {+1, -1}``."""

    base: Sampler
    seed: int = 0

    def __post_init__(self):
        self.alpha = 2.0 * self.base.alpha
        self.theta = self.base.theta + self.base.alpha
        self.n, self.m, self.k = self.base.n, self.base.m, 2
        self.target = getattr(self.base, "target", None)
        self.residual = getattr(self.base, "residual", 0.0)

    def _block(self, block: int):
        F, G = self.base.block_labels(block)
        rng = np.random.default_rng([self.seed, block, 1])
        H = rng.integers(0, 2, size=(BLOCK_SIZE, self.base.k))
        rows = np.arange(BLOCK_SIZE)[:, None]
        return H[rows, F], H[rows, G]

    def exact_expectation(self) -> np.ndarray:
        # Equal labels always collide; distinct labels collide half the time.
        return (1.0 + self.base.exact_expectation()) / 2.0


def binary_reduce(sampler: Sampler, seed: int = 0) -> BinaryReducedSampler:
    """Binary sampler with ``alpha' = 2 alpha`` and ``theta' = theta + alpha``."""
    return BinaryReducedSampler(sampler, seed)


# -- verification and embedding ------------------------------------------------


@dataclass
class VerificationReport:
    alpha: float
    theta: float
    samples: int
    max_abs_deviation: float
    hoeffding_band: float
    truncation_bound: float
    residual: float
    delta: float
    status: str

    @property
    def allowed(self) -> float:
        return self.hoeffding_band + self.truncation_bound + self.residual

    @property
    def passed(self) -> bool:
        return self.status == "exact-zero" or self.max_abs_deviation <= self.allowed


def verify_sampler(sampler: Sampler, N: int = 100_000, delta: float = 0.01,
                   target=None, start: int = 0) -> VerificationReport:
    """Monte Carlo check of ``alpha * E[kappa] - theta = target``."""
    target = np.asarray(target if target is not None else sampler.target, dtype=float)
    status = getattr(sampler, "status", "ok")
    trunc = getattr(sampler, "truncation_bound", 0.0)
    base = getattr(sampler, "base", None)
    residual = base.residual if isinstance(base, Factorization) else getattr(sampler, "residual", 0.0)
    if status == "exact-zero":
        return VerificationReport(sampler.alpha, sampler.theta, 0, 0.0, 0.0, 0.0, residual, delta, status)
    est = sampler.alpha * sampler.mean_kappa(N, start) - sampler.theta
    dev = float(np.max(np.abs(est - target)))
    band = hoeffding_band(sampler.alpha, sampler.n, sampler.m, N, delta)
    return VerificationReport(sampler.alpha, sampler.theta, N, dev, band, trunc, residual, delta, status)


@dataclass(frozen=True)
class HammingEmbedding:
    F: np.ndarray
    G: np.ndarray
    alpha: float
    theta: float

    @property
    def d(self) -> int:
        return self.F.shape[1]

    def reconstruct(self) -> np.ndarray:
        """``(alpha / d) * sum_i kappa_i - theta`` for every (row, column)."""
        agree = np.zeros((self.F.shape[0], self.G.shape[0]))
        for i in range(self.d):
            agree += self.F[:, i][:, None] == self.G[:, i][None, :]
        kappa_sum = 2.0 * agree - self.d
        return self.alpha * kappa_sum / self.d - self.theta


def embed(sampler: Sampler, d: int, start: int = 0) -> HammingEmbedding:
    """Stack ``d`` consecutive draws (from index ``start``) into code matrices."""
    if d < 1:
        raise InvalidArgument("code length d must be >= 1")
    F, G = sampler.labels(start, d)
    return HammingEmbedding(F.T.copy(), G.T.copy(), sampler.alpha, sampler.theta)


def embedding_mse(sampler: Sampler, d: int, repetitions: int = 1, target=None) -> float:
    """Mean squared reconstruction error averaged over entries and repetitions."""
    target = np.asarray(target if target is not None else sampler.target, dtype=float)
    errs = [approximation_error(target, embed(sampler, d, start=rep * d).reconstruct(), "mse")
            for rep in range(repetitions)]
    return float(np.mean(errs))


def best_binary_embedding_bruteforce(Z, d: int, err: str = "mean_abs",
                                     chunk: int = 2 ** 16) -> Tuple[np.ndarray, float]:
    """Exhaustive best ``R in {±1}^(n x d)`` for ``Z ~ R R^T / d``.

    Sign matrices are visited in lexicographic order (-1 before +1, row-major),
    so the first minimizer found is the lexicographically smallest.
    """
    Z = as_sim(Z)
    if not Z.is_symmetric:
        raise InvalidArgument("binary embedding needs a symmetric matrix")
    n = Z.n
    bits = n * d
    if bits > BRUTEFORCE_CAP:
        raise TooLarge(f"n*d = {bits} exceeds the brute-force cap {BRUTEFORCE_CAP}")
    target = Z.values
    weights = 1 << np.arange(bits - 1, -1, -1, dtype=np.int64)
    best_err, best_code = math.inf, 0
    total = 1 << bits
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        R = np.where((codes[:, None] & weights) != 0, 1.0, -1.0).reshape(-1, n, d)
        X = np.einsum("bik,bjk->bij", R, R) / d
        diff = X - target
        if err == "mean_abs":
            e = np.abs(diff).mean(axis=(1, 2))
        elif err == "mse":
            e = (diff ** 2).mean(axis=(1, 2))
        elif err == "max_abs":
            e = np.abs(diff).max(axis=(1, 2))
        else:
            raise InvalidArgument(f"unknown metric {err!r}")
        i = int(np.flatnonzero(e <= e.min() + 1e-12)[0])
        if e[i] < best_err - 1e-12:
            best_err, best_code = float(e[i]), int(codes[i])
    R = np.where((best_code & weights) != 0, 1.0, -1.0).reshape(n, d)
    return R, best_err
