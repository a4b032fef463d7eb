"""Monte Carlo experiments on Gram matrices of random unit vectors.

Trial ``i`` of an experiment draws from ``default_rng([seed, i])``, so trials
are independent substreams and reports are reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .errors import InvalidArgument
from .simcore import SimMatrix, spectrum
from .symcheck import is_metric

PSD_TOL = 1e-9
MIN_METRIC_TRIALS = 100


@dataclass
class ExperimentReport:
    experiment: str
    n: int
    d: int
    trials: int
    seed: int
    fraction: float
    lambda_min_stats: tuple
    bound_params: Dict[str, float]
    passed: bool
    per_trial: List[dict] = field(default_factory=list, repr=False)

    @property
    def fraction_metric(self) -> float:
        return self.fraction

    def as_dict(self, include_trials: bool = False) -> dict:
        out = asdict(self)
        if not include_trials:
            out.pop("per_trial")
        out["lambda_min_stats"] = dict(zip(("min", "mean", "max"), self.lambda_min_stats))
        return out

    def write_trials_csv(self, path) -> None:
        if not self.per_trial:
            return
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(self.per_trial[0]))
            writer.writeheader()
            writer.writerows(self.per_trial)


def random_unit_vectors(n: int, d: int, seed=0) -> np.ndarray:
    """``n`` i.i.d. uniform points on the unit sphere in ``R^d`` (normalized Gaussians)."""
    if n < 1 or d < 1:
        raise InvalidArgument("n and d must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    while True:
        X = rng.standard_normal((n, d))
        norms = np.linalg.norm(X, axis=1)
        if np.all(norms > 0):
            return X / norms[:, None]


def random_gram(n: int, d: int, seed=0) -> SimMatrix:
    X = random_unit_vectors(n, d, seed)
    G = X @ X.T
    G = (G + G.T) / 2.0
    np.fill_diagonal(G, 1.0)
    return SimMatrix(G, is_symmetric=True)


def _trial_grams(n, d, trials, seed):
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    for i in range(trials):
        yield i, random_gram(n, d, np.random.default_rng([seed, i]))


def metric_threshold(n: int, delta: float) -> int:
    """Smallest integer ``d >= 72 ln n + ln(1/delta)``."""
    return math.ceil(72.0 * math.log(n) + math.log(1.0 / delta))


def _stats(values):
    a = np.asarray(values)
    return float(a.min()), float(a.mean()), float(a.max())


def metric_probability_experiment(n: int, d: int, trials: int = 500, seed: int = 0,
                                  delta: float = 0.1, spectra: bool = True) -> ExperimentReport:
    """Fraction of trials in which ``(1 - Gram) / 2`` satisfies every triangle inequality.

    ``passed`` asserts ``fraction >= 1 - delta`` when ``d`` meets the
    ``72 ln n + ln(1/delta)`` threshold; below it no claim is made and the
    flag only reflects that every Gram matrix was PSD.
    """
    if trials < MIN_METRIC_TRIALS:
        raise InvalidArgument(f"metric experiment needs at least {MIN_METRIC_TRIALS} trials")
    hits, lams, rows = 0, [], []
    for i, Z in _trial_grams(n, d, trials, seed):
        ok, _ = is_metric(Z)
        hits += ok
        lam = spectrum(Z).lambda_min if spectra else float("nan")
        lams.append(lam)
        rows.append({"trial": i, "metric": int(ok), "lambda_min": lam})
    fraction = hits / trials
    threshold = metric_threshold(n, delta) if n > 1 else 1
    psd = (not spectra) or min(lams) >= -PSD_TOL
    claim = d >= threshold
    passed = psd and (fraction >= 1.0 - delta if claim else True)
    params = {"delta": delta, "d_threshold": threshold, "threshold_met": claim}
    stats = _stats(lams) if spectra else (math.nan,) * 3
    return ExperimentReport("metric", n, d, trials, seed, fraction, stats, params, passed, rows)


def eigenvalue_experiment(n: int, d: int, t: float, trials: int = 100,
                          seed: int = 0) -> ExperimentReport:
    """Fraction of trials with every Gram eigenvalue within ``t`` of 1."""
    if not 0.0 < t < 1.0:
        raise InvalidArgument("t must lie in (0, 1)")
    hits, lams, rows = 0, [], []
    for i, Z in _trial_grams(n, d, trials, seed):
        w = spectrum(Z).eigenvalues
        ok = bool(np.all(np.abs(w - 1.0) <= t))
        hits += ok
        lams.append(float(w[0]))
        rows.append({"trial": i, "within_t": int(ok), "lambda_min": float(w[0]),
                     "lambda_max": float(w[-1])})
    params = {"t": t, "n_over_t2": n / t ** 2, "implied_C1": d * t ** 2 / n}
    passed = min(lams) >= -PSD_TOL
    return ExperimentReport("eigen", n, d, trials, seed, hits / trials, _stats(lams),
                            params, passed, rows)


def eigenvalue_sweep(n: int, ds: Sequence[int], t: float, trials: int = 100,
                     seed: int = 0) -> List[ExperimentReport]:
    return [eigenvalue_experiment(n, d, t, trials, seed) for d in ds]


def random_lsh_precondition(n: int, d: int, C0: float = 1.0, trials: int = 100,
                            seed: int = 0) -> ExperimentReport:
    """Fraction of trials with ``lambda_min(Gram) >= 1 - 1/(C0 ln n)``.

    That is the condition under which ``C0 ln n (Z - (1 - 1/(C0 ln n)) I)`` is
    PSD with unit diagonal.
    """
    if C0 <= 0:
        raise InvalidArgument("C0 must be positive")
    if n < 2:
        raise InvalidArgument("n must be >= 2")
    level = 1.0 - 1.0 / (C0 * math.log(n))
    hits, lams, rows = 0, [], []
    for i, Z in _trial_grams(n, d, trials, seed):
        lam = spectrum(Z).lambda_min
        ok = lam >= level
        hits += ok
        lams.append(lam)
        rows.append({"trial": i, "precondition": int(ok), "lambda_min": lam})
    params = {"C0": C0, "lambda_level": level, "implied_C": d / (n * math.log(n) ** 2)}
    passed = min(lams) >= -PSD_TOL
    return ExperimentReport("lsh-pre", n, d, trials, seed, hits / trials, _stats(lams),
                            params, passed, rows)
