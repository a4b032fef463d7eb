"""Core matrix types, incidence algebra, the Jacobi eigensolver and error metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument, SolverFailure

__all__ = [
    "SimMatrix",
    "Labeling",
    "IncidencePair",
    "Spectrum",
    "MatrixFormatError",
    "as_sim",
    "incidence_from_labels",
    "incidence_from_signs",
    "theorem2_matrix",
    "jacobi_eigh",
    "spectrum",
    "approximation_error",
    "read_matrix_csv",
    "write_matrix_csv",
    "format_matrix_csv",
    "random_corpus",
]

ERROR_METRICS = ("mean_abs", "mse", "max_abs")


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimMatrix:
    """Dense real similarity matrix.

    ``is_symmetric`` is detected exactly when not given; passing ``True`` for a
    matrix that is not exactly equal to its transpose is an error.
    """

    values: np.ndarray
    is_symmetric: Optional[bool] = None
    row_labels: Optional[tuple] = None
    col_labels: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidArgument(f"expected a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("matrix entries must be finite")
        exact_sym = values.shape[0] == values.shape[1] and np.array_equal(values, values.T)
        if self.is_symmetric is None:
            object.__setattr__(self, "is_symmetric", bool(exact_sym))
        elif self.is_symmetric and not exact_sym:
            raise InvalidArgument("matrix flagged symmetric but differs from its transpose")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        for name, size in (("row_labels", values.shape[0]), ("col_labels", values.shape[1])):
            lab = getattr(self, name)
            if lab is not None:
                lab = tuple(lab)
                if len(lab) != size:
                    raise InvalidArgument(f"{name} has {len(lab)} entries, expected {size}")
                object.__setattr__(self, name, lab)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def has_unit_diagonal(self) -> bool:
        return self.n == self.m and bool(np.all(np.diag(self.values) == 1.0))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, theta: float) -> "SimMatrix":
        """Return ``Z - theta * J`` (J the all-ones matrix)."""
        return SimMatrix(self.values - theta)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_sim(Z) -> SimMatrix:
    return Z if isinstance(Z, SimMatrix) else SimMatrix(Z)


@dataclass(frozen=True)
class Labeling:
    """Assignment of each item to a cluster label in ``{0, ..., k-1}``."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if self.k < 1:
            raise InvalidArgument("alphabet size k must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise InvalidArgument(f"labels must lie in [0, {self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    def relabel(self, perm: Sequence[int]) -> "Labeling":
        perm = np.asarray(perm, dtype=np.int64)
        return Labeling(perm[self.labels], self.k)


@dataclass(frozen=True)
class IncidencePair:
    """Row labeling ``f``, column labeling ``g`` and their ±1 incidence matrix."""

    f: Labeling
    g: Labeling
    kappa: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kappa = np.where(self.f.labels[:, None] == self.g.labels[None, :], 1.0, -1.0)
        kappa.setflags(write=False)
        object.__setattr__(self, "kappa", kappa)

    @property
    def k(self) -> int:
        return max(self.f.k, self.g.k)


def incidence_from_labels(f, g, k: Optional[int] = None) -> IncidencePair:
    """Build the incidence pair for row labels ``f`` and column labels ``g``.

    ``f`` and ``g`` may be :class:`Labeling` objects or integer sequences, in
    which case ``k`` defaults to one more than the largest label (at least 2).
    """
    if not isinstance(f, Labeling) or not isinstance(g, Labeling):
        fa = f.labels if isinstance(f, Labeling) else np.asarray(f, dtype=np.int64)
        ga = g.labels if isinstance(g, Labeling) else np.asarray(g, dtype=np.int64)
        if k is None:
            top = max(int(fa.max(initial=0)), int(ga.max(initial=0)))
            k = max(2, top + 1)
        f = Labeling(fa, k) if not isinstance(f, Labeling) else f
        g = Labeling(ga, k) if not isinstance(g, Labeling) else g
    return IncidencePair(f, g)


def incidence_from_signs(u, v) -> IncidencePair:
    """Binary incidence pair from ±1 vectors; +1 is encoded as label 0."""
    u = np.asarray(u)
    v = np.asarray(v)
    if not (np.all(np.abs(u) == 1) and np.all(np.abs(v) == 1)):
        raise InvalidArgument("sign vectors must have entries in {-1, +1}")
    return IncidencePair(Labeling((u < 0).astype(int), 2), Labeling((v < 0).astype(int), 2))


def theorem2_matrix(n: int) -> SimMatrix:
    """``2I + B`` where ``B`` is -1 within each half of ``[n]`` and +1 across."""
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise InvalidArgument(f"n must be a positive even integer >= 2, got {n!r}")
    half = n // 2
    side = np.r_[np.ones(half), -np.ones(half)]
    Z = 2.0 * np.eye(n) - np.outer(side, side)
    return SimMatrix(Z, is_symmetric=True)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    lambda_min: float
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100, vectors: bool = True):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius mass falls
    below ``tol * ||A||_F``. Returns ``(w, V)`` with ``w`` ascending and
    ``A @ V = V @ diag(w)``; ``V`` is None when ``vectors`` is False.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise InvalidArgument("jacobi_eigh needs a square matrix")
    if not np.array_equal(A, A.T):
        if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
            raise InvalidArgument("jacobi_eigh needs a symmetric matrix")
        A = 0.5 * (A + A.T)
    V = np.eye(n) if vectors else None
    target = tol * np.linalg.norm(A)
    off_mask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(A[off_mask] ** 2)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                if V is not None:
                    vp = V[:, p].copy()
                    vq = V[:, q]
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
    else:
        raise SolverFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    if V is not None:
        V = V[:, order]
    return w, V


def spectrum(Z, vectors: bool = False) -> Spectrum:
    """Full spectrum of a symmetric similarity matrix (ascending)."""
    Z = as_sim(Z)
    if not Z.is_symmetric:
        raise InvalidArgument("spectrum requires a symmetric matrix")
    w, V = jacobi_eigh(Z.values, vectors=vectors)
    w.setflags(write=False)
    return Spectrum(eigenvalues=w, lambda_min=float(w[0]), eigenvectors=V)


def approximation_error(Z, Zhat, metric: str = "mean_abs") -> float:
    """Uniform average (or max) of the elementwise error between two matrices."""
    Z = np.asarray(as_sim(Z).values)
    Zhat = np.asarray(as_sim(Zhat).values)
    if Z.shape != Zhat.shape:
        raise InvalidArgument(f"shape mismatch: {Z.shape} vs {Zhat.shape}")
    diff = Z - Zhat
    if metric == "mean_abs":
        return float(np.mean(np.abs(diff)))
    if metric == "mse":
        return float(np.mean(diff ** 2))
    if metric == "max_abs":
        return float(np.max(np.abs(diff)))
    raise InvalidArgument(f"unknown metric {metric!r}; expected one of {ERROR_METRICS}")


# -- CSV I/O -----------------------------------------------------------------


class MatrixFormatError(InvalidArgument):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _parse_rows(lines: Iterable[str]) -> np.ndarray:
    rows = []
    width = None
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        vals = []
        for col, cell in enumerate(row, start=1):
            text = cell.strip()
            try:
                x = float(text)
            except ValueError:
                raise MatrixFormatError(f"non-numeric cell {cell!r}", lineno, col) from None
            if not math.isfinite(x):
                raise MatrixFormatError(f"non-finite cell {cell!r}", lineno, col)
            vals.append(x)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise MatrixFormatError(f"ragged row: {len(vals)} cells, expected {width}",
                                    lineno, min(len(vals), width) + 1)
        rows.append(vals)
    if not rows:
        raise MatrixFormatError("empty matrix", 1, 1)
    return np.array(rows, dtype=float)


def read_matrix_csv(source: Union[str, Path, io.TextIOBase]) -> SimMatrix:
    """Read a headerless comma-separated matrix, one row per line."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return SimMatrix(_parse_rows(fh))
    return SimMatrix(_parse_rows(source))


def format_matrix_csv(Z) -> str:
    Z = np.asarray(as_sim(Z).values)
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in Z)


def write_matrix_csv(Z, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_matrix_csv(Z))


def random_corpus(count: int, size, seed: int) -> list:
    """Seeded integer matrices with entries in {-2,...,2}, scaled by 1/2.

    Matrix ``i`` is drawn from its own substream ``SeedSequence([seed, i])``.
    """
    n, m = (size, size) if np.isscalar(size) else tuple(size)
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        out.append(SimMatrix(rng.integers(-2, 3, size=(n, m)) / 2.0))
    return out
