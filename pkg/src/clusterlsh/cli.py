"""Command-line entry point.

Every command prints one JSON report on stdout (``gen`` without ``--output``
prints CSV instead). Exit status: 0 for ok/infeasible, 2 usage error,
3 too-large, 4 solver-failure, 5 internal invariant violation.
The default seed comes from ``$CLUSTERLSH_SEED`` (0 when unset).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import alsh, maxnorm, randexp, ratio, symcheck
from .errors import InternalInvariantViolation, InvalidArgument, SolverFailure, TooLarge
from .simcore import format_matrix_csv, random_corpus, read_matrix_csv, theorem2_matrix, write_matrix_csv

SCHEMA_VERSION = 1
SEED_ENV = "CLUSTERLSH_SEED"
EXIT_CODES = {"ok": 0, "infeasible": 0, "usage-error": 2, "too-large": 3,
              "solver-failure": 4, "internal-error": 5}
THEOREM1_TOL = 1e-3

log = logging.getLogger("clusterlsh")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {raw!r}") from None


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _load(args):
    if not args.input:
        raise UsageError("--input is required")
    try:
        return read_matrix_csv(args.input)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.input}") from None


def _solver_config(args) -> maxnorm.SolverConfig:
    return maxnorm.SolverConfig(rank=args.rank, restarts=args.restarts, seed=args.seed,
                                fit_tol=args.fit_tol)


def _parse_k(text):
    if text in ("inf", "infinity", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be an integer or 'inf', got {text!r}") from None


# -- command handlers ------------------------------------------------------------
# Each returns (results, status).


def cmd_maxnorm(args):
    Z = _load(args)
    fac = maxnorm.max_norm(Z, _solver_config(args))
    bounds = maxnorm.rank_entry_bound(Z)
    return {"t": fac.t, "residual": fac.residual, "entry_lower_bound": Z.max_abs,
            "rank_entry_bound": bounds["bound"], "rank_entry_bound_sqrt": bounds["sqrt_bound"],
            "tolerances": {"fit": args.fit_tol * max(1.0, Z.max_abs)}}, "ok"


def cmd_centered(args):
    Z = _load(args)
    cm = maxnorm.centered_max_norm(Z, _solver_config(args), method=args.method)
    return {"value": cm.value, "theta": cm.theta, "residual": cm.inner.residual,
            "tolerances": {"fit": args.fit_tol * max(1.0, Z.max_abs)}}, "ok"


def cmd_ratio(args):
    Z = _load(args)
    cert = ratio.cluster_ratio(Z, args.k, args.centralized, cap=args.cap)
    return {"value": cert.value, "theta": cert.theta, "k": cert.k,
            "support_size": cert.support_size, "status": cert.status,
            "dual_value": cert.dual_value(), "replay_residual": cert.replay_residual(),
            "tolerances": {"replay": ratio.REPLAY_TOL}}, "ok"


def cmd_alsh(args):
    Z = _load(args)
    sampler = alsh.build_alsh(Z, centralized=args.centralized, K=args.K, seed=args.seed,
                              config=_solver_config(args))
    res = {"alpha": sampler.alpha, "theta": sampler.theta, "t": sampler.base.t,
           "residual": sampler.base.residual, "norm_partial": sampler.norm_partial,
           "sampler_status": sampler.status,
           "tolerances": {"fit": args.fit_tol * max(1.0, Z.max_abs)}}
    if args.action == "sample":
        F, G = sampler.labels(args.start, args.count)
        res["draws"] = [{"index": args.start + i, "f": F[i], "g": G[i]} for i in range(args.count)]
    elif args.action == "verify":
        rep = alsh.verify_sampler(sampler, args.samples, args.delta)
        res.update({"samples": rep.samples, "max_abs_deviation": rep.max_abs_deviation,
                    "hoeffding_band": rep.hoeffding_band, "truncation_bound": rep.truncation_bound,
                    "passed": rep.passed})
        res["tolerances"].update({"delta": args.delta, "allowed": rep.allowed})
    elif args.action == "embed":
        emb = alsh.embed(sampler, args.d)
        mse = float(np.mean((emb.reconstruct() - Z.values) ** 2))
        res.update({"d": args.d, "mse": mse, "mse_bound": sampler.alpha ** 2 / args.d})
        if args.codes:
            prefix = Path(args.codes)
            write_matrix_csv(emb.F, f"{prefix}_rows.csv")
            write_matrix_csv(emb.G, f"{prefix}_cols.csv")
    return res, "ok"


def cmd_check(args):
    Z = _load(args)
    rep = symcheck.check(Z, C=args.C)
    out = dict(vars(rep))
    out["tolerances"] = {"metric_slack": symcheck.METRIC_SLACK, "obtuse_slack": symcheck.OBTUSE_SLACK}
    status = "infeasible" if rep.cut_cone_status == "infeasible" else "ok"
    return out, status


def cmd_randexp(args):
    if args.kind == "metric":
        rep = randexp.metric_probability_experiment(args.n, args.d, args.trials, args.seed, args.delta)
    elif args.kind == "eigen":
        rep = randexp.eigenvalue_experiment(args.n, args.d, args.t, args.trials, args.seed)
    else:
        rep = randexp.random_lsh_precondition(args.n, args.d, args.C0, args.trials, args.seed)
    if args.trials_csv:
        rep.write_trials_csv(args.trials_csv)
    out = rep.as_dict()
    out["tolerances"] = {"psd": randexp.PSD_TOL}
    return out, "ok"


def cmd_gen(args):
    if args.kind == "theorem2":
        Z = theorem2_matrix(args.n)
    else:
        Z = randexp.random_gram(args.n, args.d, args.seed)
    if args.output:
        write_matrix_csv(Z, args.output)
        return {"output": args.output, "shape": list(Z.shape)}, "ok"
    sys.stdout.write(format_matrix_csv(Z))
    return None, "ok"


def theorem1_row(Z, config: maxnorm.SolverConfig, tol: float = THEOREM1_TOL) -> dict:
    """Every max-norm / cluster-ratio sandwich inequality for one matrix, with the values involved."""
    n, m = Z.shape
    mx = maxnorm.max_norm(Z, config).t
    cmx = maxnorm.centered_max_norm(Z, config).value
    r2 = ratio.cluster_ratio(Z, 2).value
    r3 = ratio.cluster_ratio(Z, 3).value
    rinf = ratio.cluster_ratio(Z, None).value
    c2 = ratio.cluster_ratio(Z, 2, centralized=True).value
    c3 = ratio.cluster_ratio(Z, 3, centralized=True).value
    cinf = ratio.cluster_ratio(Z, None, centralized=True).value
    K = alsh.K_R
    checks = {
        "maxnorm_over_3_le_rho_inf": mx / 3.0 <= rinf + tol,
        "rho_inf_le_rho_3": rinf <= r3 + tol,
        "rho_3_le_rho_2": r3 <= r2 + tol,
        "rho_2_le_KR_maxnorm": r2 <= K * mx + tol,
        "maxnorm_le_rho_2": mx <= r2 + tol,
        "cmax_over_2_le_crho_2": cmx / 2.0 <= c2 + tol,
        "cmax_le_crho_2": cmx <= c2 + tol,
        "crho_2_over_2_le_crho_inf": c2 / 2.0 <= cinf + tol,
        "crho_inf_le_crho_3": cinf <= c3 + tol,
        "crho_3_le_crho_2": c3 <= c2 + tol,
        "crho_2_le_KR_cmax": c2 <= K * cmx + tol,
        "crho_2_le_rho_2": c2 <= r2 + tol,
    }
    return {"shape": [n, m], "maxnorm": mx, "centered_maxnorm": cmx,
            "rho_2": r2, "rho_3": r3, "rho_inf": rinf,
            "crho_2": c2, "crho_3": c3, "crho_inf": cinf,
            "checks": checks, "sandwich_ok": all(checks.values())}


def cmd_verify_theorem1(args):
    if args.corpus == "random":
        mats = random_corpus(args.count, args.size, args.seed)
    else:
        if not args.input:
            raise UsageError("--corpus files needs --input paths")
        mats = [read_matrix_csv(p) for p in args.input]
    config = maxnorm.SolverConfig(restarts=args.restarts, seed=args.seed, fit_tol=args.fit_tol)
    rows = [theorem1_row(Z, config, args.tol) for Z in mats]
    return {"matrices": rows, "all_ok": all(r["sandwich_ok"] for r in rows),
            "K_R": alsh.K_R, "tolerances": {"sandwich": args.tol}}, "ok"


# -- parser ----------------------------------------------------------------------


def _add_solver_flags(p):
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--fit-tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterlsh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, handler, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(handler=handler)
        p.add_argument("--seed", type=int, default=None)
        return p

    p = command("maxnorm", cmd_maxnorm, help="max-norm with factorization witness")
    p.add_argument("--input", required=True)
    _add_solver_flags(p)

    p = command("centered-maxnorm", cmd_centered, help="centralized max-norm")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("joint", "golden"), default="joint")
    _add_solver_flags(p)

    p = command("ratio", cmd_ratio, help="exact cluster ratio by LP")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=_parse_k, default=2, help="alphabet size or 'inf'")
    p.add_argument("--centralized", action="store_true")
    p.add_argument("--cap", type=int, default=ratio.DEFAULT_CAP)

    p = command("alsh", cmd_alsh, help="build, sample, verify or embed an ALSH")
    p.add_argument("action", choices=("build", "sample", "verify", "embed"))
    p.add_argument("--input", required=True)
    p.add_argument("--centralized", action="store_true")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--d", type=int, default=1024)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--codes", default=None, help="path prefix for embedding code CSVs")
    _add_solver_flags(p)

    p = command("check", cmd_check, help="symmetric LSH feasibility report")
    p.add_argument("--input", required=True)
    p.add_argument("--C", type=float, default=1.0)

    p = command("randexp", cmd_randexp, help="random Gram matrix experiments")
    p.add_argument("kind", choices=("metric", "eigen", "lsh-pre"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--t", type=float, default=0.2)
    p.add_argument("--C0", type=float, default=1.0)
    p.add_argument("--trials-csv", default=None)

    p = command("gen", cmd_gen, help="emit a matrix as CSV")
    p.add_argument("kind", choices=("theorem2", "gram"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--output", default=None)

    p = command("verify-theorem1", cmd_verify_theorem1, help="max-norm and cluster-ratio sandwich on a corpus")
    p.add_argument("--corpus", choices=("random", "files"), default="random")
    p.add_argument("--input", nargs="*", default=None)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--tol", type=float, default=THEOREM1_TOL)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--fit-tol", type=float, default=1e-6)
    return parser


def run(argv=None) -> tuple:
    """Parse ``argv`` and execute; returns ``(report_or_None, exit_code)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if getattr(args, "trials", "absent") is None:
            args.trials = 500 if args.kind == "metric" else 100
        results, status = args.handler(args)
    except (UsageError, InvalidArgument) as exc:
        print(f"clusterlsh: error: {exc}", file=sys.stderr)
        return None, EXIT_CODES["usage-error"]
    except TooLarge as exc:
        results, status = {"error": str(exc)}, "too-large"
    except SolverFailure as exc:
        results, status = {"error": str(exc), "best_residual": exc.best_residual}, "solver-failure"
    except InternalInvariantViolation as exc:
        results, status = {"error": str(exc)}, "internal-error"
    if results is None:
        return None, EXIT_CODES[status]
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "verbose")}
    report = {
        "schema": SCHEMA_VERSION,
        "command": args.command,
        "params": params,
        "results": results,
        "seed": args.seed,
        "wall_time_ms": int(round((time.perf_counter() - start) * 1000)),
        "status": status,
    }
    return _jsonable(report), EXIT_CODES[status]


def main(argv=None) -> int:
    report, code = run(argv)
    if report is not None:
        json.dump(report, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
