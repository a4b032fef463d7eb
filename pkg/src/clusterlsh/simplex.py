"""Dense two-phase revised simplex for small equality-form LPs.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0``. Pricing is Dantzig's rule
until a run of degenerate pivots is seen, after which Bland's smallest-index
rule takes over for the rest of the phase so cycling cannot occur.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SolverFailure

PIVOT_TOL = 1e-9
DEGENERATE_STREAK = 30


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    objective: Optional[float]
    dual: Optional[np.ndarray]
    basis: Optional[np.ndarray]
    iterations: int
    phase1_objective: float


def _run_phase(A, b, c, basis, allowed, max_iter, tol):
    """Iterate the revised simplex on the columns in ``allowed``.

    ``basis`` is modified in place. Returns (status, iterations).
    """
    m = A.shape[0]
    iters = 0
    bland = False
    degenerate = 0
    allowed_idx = np.flatnonzero(allowed)
    while iters < max_iter:
        B = A[:, basis]
        try:
            x_B = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            raise SolverFailure("singular basis encountered") from None
        red = c[allowed_idx] - y @ A[:, allowed_idx]
        in_basis = np.zeros(A.shape[1], dtype=bool)
        in_basis[basis] = True
        cand = (red < -tol) & ~in_basis[allowed_idx]
        if not cand.any():
            return "optimal", iters
        if bland:
            entering = int(allowed_idx[np.flatnonzero(cand)[0]])
        else:
            masked = np.where(cand, red, np.inf)
            entering = int(allowed_idx[int(np.argmin(masked))])
        w = np.linalg.solve(B, A[:, entering])
        pos = w > tol
        if not pos.any():
            return "unbounded", iters
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(x_B[pos], 0.0) / w[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        # Bland: among tied rows leave via the smallest variable index.
        leave_row = int(ties[np.argmin(basis[ties])]) if bland or len(ties) > 1 else int(ties[0])
        if best <= tol:
            degenerate += 1
            if degenerate >= DEGENERATE_STREAK:
                bland = True
        else:
            degenerate = 0
        basis[leave_row] = entering
        iters += 1
    raise SolverFailure(f"simplex iteration limit ({max_iter}) reached")


def solve_lp(A, b, c, max_iter: int = 50000, tol: float = PIVOT_TOL) -> LPResult:
    """Two-phase revised simplex on ``min c.x, A x = b, x >= 0``.

    The returned ``dual`` vector ``y`` satisfies ``c - A.T @ y >= -tol`` at
    optimality (redundant rows receive dual 0).
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float).ravel()
    c = np.array(c, dtype=float).ravel()
    m, nvar = A.shape
    if b.size != m or c.size != nvar:
        raise ValueError("inconsistent LP dimensions")

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # Phase 1: artificial identity block, minimize their sum.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.r_[np.zeros(nvar), np.ones(m)]
    basis = np.arange(nvar, nvar + m)
    allowed = np.ones(nvar + m, dtype=bool)
    status, it1 = _run_phase(A1, b, c1, basis, allowed, max_iter, tol)
    x_B = np.linalg.solve(A1[:, basis], b)
    phase1 = float(c1[basis] @ x_B)
    scale = max(1.0, float(np.abs(b).sum()))
    if phase1 > 1e-8 * scale:
        return LPResult("infeasible", None, None, None, None, it1, phase1)

    # Drive zero-level artificials out of the basis; drop redundant rows.
    rows = np.arange(m)
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] < nvar:
            continue
        Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[r])
        alpha = Binv_row @ A
        alpha[basis[basis < nvar]] = 0.0
        j = int(np.argmax(np.abs(alpha)))
        if abs(alpha[j]) > 1e-7:
            basis[r] = j
        else:
            keep[r] = False
    if not keep.all():
        kept_basis = basis[keep]
        A_red = A[keep]
        b_red = b[keep]
        rows = rows[keep]
        basis = kept_basis
    else:
        A_red, b_red = A, b

    # Phase 2 on the original columns.
    status, it2 = _run_phase(A_red, b_red, c, basis, np.ones(nvar, dtype=bool), max_iter, tol)
    iters = it1 + it2
    if status == "unbounded":
        return LPResult("unbounded", None, None, None, basis.copy(), iters, phase1)
    B = A_red[:, basis]
    x_B = np.linalg.solve(B, b_red)
    x = np.zeros(nvar)
    x[basis] = np.maximum(x_B, 0.0)
    y_red = np.linalg.solve(B.T, c[basis])
    y = np.zeros(m)
    y[rows] = y_red
    y[flip] *= -1.0
    return LPResult("optimal", x, float(c @ x), y, basis.copy(), iters, phase1)
