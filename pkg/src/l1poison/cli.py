"""Command line interface: solve, attack, gradcheck, and sweep.

Each subcommand maps onto one library entry point: ``solve`` fits a single
model to a CSV dataset, ``attack`` executes a scenario config end to end,
``gradcheck`` verifies the implicit-differentiation gradients against
central finite differences, and ``sweep`` runs a list of scenario configs,
optionally in parallel with per-config output directories.  Exit status is
0 on success, 1 on any failure, and 2 on argument errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, SensitivityError
from .gradients import grad_beta_wrt_X, grad_beta_wrt_y
from .model import Dataset, GroupPartition, ModelSpec, load_dataset
from .scenarios import gen_synthetic, metrics, run_scenario
from .solvers import solve_model

__all__ = ["main"]

SUPPORT_TOL = 1e-6


def _apply_threads(k: int | None) -> None:
    if k is None:
        return
    import threadpoolctl

    # Keep the limiter alive for the process lifetime.
    global _THREAD_LIMIT
    _THREAD_LIMIT = threadpoolctl.threadpool_limits(limits=k)
    try:
        import numba

        numba.set_num_threads(k)
    except ImportError:
        pass


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=False, help="dataset CSV (header y,x1..xm)")
    p.add_argument(
        "--model",
        required=True,
        choices=("lasso", "group", "sparse_group"),
        help="penalty family",
    )
    p.add_argument("--lam", type=float, help="penalty weight (lasso, group)")
    p.add_argument("--lam1", type=float, help="l1 weight (sparse_group)")
    p.add_argument("--lam2", type=float, help="group weight (sparse_group)")
    p.add_argument("--group-size", type=int, help="uniform group size")
    p.add_argument("--group-sizes", help="comma-separated group sizes")


def _build_spec(args, m: int) -> ModelSpec:
    part = None
    if args.model in ("group", "sparse_group"):
        if args.group_sizes:
            sizes = tuple(int(s) for s in args.group_sizes.split(","))
        elif args.group_size:
            if m % args.group_size:
                raise ValueError(f"{m} columns not divisible by group size {args.group_size}")
            sizes = (args.group_size,) * (m // args.group_size)
        else:
            raise ValueError("group models need --group-size or --group-sizes")
        part = GroupPartition(sizes=sizes)
        part.require_total(m)
    if args.model == "lasso":
        if args.lam is None:
            raise ValueError("lasso needs --lam")
        return ModelSpec.lasso_spec(args.lam)
    if args.model == "group":
        if args.lam is None:
            raise ValueError("group needs --lam")
        return ModelSpec.group_spec(args.lam, part)
    if args.lam1 is None or args.lam2 is None:
        raise ValueError("sparse_group needs --lam1 and --lam2")
    return ModelSpec.sparse_group_spec(args.lam1, args.lam2, part)


def _zscore(d: Dataset) -> Dataset:
    X = np.array(d.X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0.0] = 1.0
    return d.replace(X=(X - mean) / std)


def _cmd_solve(args) -> int:
    if not args.data:
        raise ValueError("solve needs --data")
    d = load_dataset(args.data)
    if args.zscore:
        d = _zscore(d)
    spec = _build_spec(args, d.m)
    s = solve_model(spec, d)
    out = Path(args.out or "solve_out")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "coefficients.csv", "w", newline="") as fh:
        fh.write("index,beta\n")
        for i, b in enumerate(s.beta):
            fh.write(f"{i + 1},{float(b)!r}\n")
    r2, rmse = metrics(d.y, d.X @ s.beta)
    summary = {
        "model": args.model,
        "objective": s.objective,
        "t_final": s.t_final,
        "kkt_norm": s.kkt_norm,
        "newton_iters": s.newton_iters,
        "support": [int(i) + 1 for i in np.flatnonzero(np.abs(s.beta) > SUPPORT_TOL)],
        "r2": r2,
        "rmse": rmse,
        "zscore": bool(args.zscore),
    }
    with open(out / "solution.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"solved: objective {s.objective:.6g}, support size {len(summary['support'])}, "
          f"artifacts in {out}")
    return 0


def _cmd_attack(args) -> int:
    out = args.out or f"{Path(args.config).stem}_out"
    rep = run_scenario(args.config, out_dir=out, seed=args.seed)
    print(f"status {rep.status} after {rep.iterations_used} iterations; "
          f"final objective {rep.final_objective:.6g}")
    print(f"outcomes: {json.dumps(rep.outcomes)}")
    print(f"artifacts in {out}")
    return 1 if rep.status == "solver_failure" else 0


def _central_fd_beta(spec, d: Dataset, eps: float):
    """Central differences of the solution map in every y and X coordinate."""
    n, m = d.X.shape
    dy = np.empty((m, n))
    for j in range(n):
        yp = np.array(d.y)
        yp[j] += eps
        bp = solve_model(spec, d.replace(y=yp)).beta
        ym = np.array(d.y)
        ym[j] -= eps
        bm = solve_model(spec, d.replace(y=ym)).beta
        dy[:, j] = (bp - bm) / (2.0 * eps)
    dX = np.empty((m, n * m))
    for j in range(n):
        for k in range(m):
            Xp = np.array(d.X)
            Xp[j, k] += eps
            bp = solve_model(spec, d.replace(X=Xp)).beta
            Xm = np.array(d.X)
            Xm[j, k] -= eps
            bm = solve_model(spec, d.replace(X=Xm)).beta
            dX[:, j * m + k] = (bp - bm) / (2.0 * eps)
    return dy, dX


def _rel_err(approx: np.ndarray, exact: np.ndarray, floor: float = 1e-6) -> float:
    mask = np.abs(exact) > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(approx[mask] - exact[mask]) / np.abs(exact[mask])))


def _cmd_gradcheck(args) -> int:
    if args.data:
        d = load_dataset(args.data)
    else:
        d, _ = gen_synthetic(10, 15, 5, 0.1, args.seed or 0)
    spec = _build_spec(args, d.m)
    s = solve_model(spec, d)
    gy = grad_beta_wrt_y(spec, d, s)
    gX = grad_beta_wrt_X(spec, d, s)
    fy, fX = _central_fd_beta(spec, d, args.eps)
    err_y = _rel_err(fy, gy)
    err_X = _rel_err(fX, gX)
    print(f"max relative error dbeta/dy: {err_y:.3e}")
    print(f"max relative error dbeta/dX: {err_X:.3e}")
    ok = err_y <= args.tol and err_X <= args.tol
    print("gradcheck PASS" if ok else f"gradcheck FAIL (tolerance {args.tol:g})")
    return 0 if ok else 1


def _sweep_one(config: str, out: str, seed: int | None):
    rep = run_scenario(config, out_dir=out, seed=seed)
    return config, rep.status, rep.iterations_used, rep.final_objective


def _cmd_sweep(args) -> int:
    out_root = Path(args.out or "sweep_out")
    jobs = [
        (str(cfg), str(out_root / Path(cfg).stem), args.seed) for cfg in args.configs
    ]
    if args.parallel and args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_sweep_one, *zip(*jobs)))
    else:
        results = [_sweep_one(*job) for job in jobs]
    failed = 0
    for config, status, iters, obj in results:
        print(f"{config}: {status} after {iters} iterations, objective {obj:.6g}")
        failed += status == "solver_failure"
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l1poison",
        description="Interior-point sparse regression and data-poisoning experiments.",
    )
    parser.add_argument("--threads", type=int, help="cap BLAS and kernel threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fit one model to a CSV dataset")
    _add_model_args(p)
    p.add_argument("--zscore", action="store_true", help="z-score feature columns first")
    p.add_argument("--out", help="output directory (default solve_out)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("attack", help="run a scenario config end to end")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", help="output directory (default <config stem>_out)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("gradcheck", help="verify implicit gradients against finite differences")
    _add_model_args(p)
    p.add_argument("--seed", type=int, help="seed for the built-in check problem")
    p.add_argument("--eps", type=float, default=1e-6, help="finite-difference step")
    p.add_argument("--tol", type=float, default=1e-3, help="max relative error allowed")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("sweep", help="run several scenario configs")
    p.add_argument("configs", nargs="+", help="scenario config JSON paths")
    p.add_argument("--out", help="output root (default sweep_out)")
    p.add_argument("--seed", type=int, help="override every config seed")
    p.add_argument("--parallel", type=int, help="worker processes (default serial)")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_threads(args.threads)
        return args.func(args)
    except (ConvergenceError, SensitivityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
