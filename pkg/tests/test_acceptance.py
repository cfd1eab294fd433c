"""Acceptance gate: nine numbered end-to-end guarantees, one line each.

Each test prints one ``criterion N: PASS/FAIL`` line with its measured
numbers.  Shared instance sets are built once and memoized; the timed
criteria measure their own first build, so this file is meant to run in
declaration order (plain ``pytest tests/test_acceptance.py``).
"""

import json
import time
from functools import lru_cache

import numpy as np
import pytest

from l1poison.attack import AttackConfig, StepSchedule, run_attack
from l1poison.errors import ConvergenceError
from l1poison.gradients import (
    assemble_jacobian,
    attack_gradients,
    grad_beta_wrt_X,
    grad_beta_wrt_y,
)
from l1poison.model import (
    AttackTarget,
    Budget,
    Dataset,
    GroupPartition,
    ModelSpec,
    compile_objective,
    objective_value,
)
from l1poison.projections import norm_value, project_l1, project_l2, project_linf
from l1poison.reference import (
    bcd_group_lasso,
    cd_lasso,
    fista_sparse_group,
    project_l1_sort,
)
from l1poison.scenarios import build_doa, gen_synthetic, run_scenario, select_targets
from l1poison.solvers import BarrierConfig, penalized_objective, solve_model

LAMBDAS = (0.5, 2.0, 8.0)
PART30 = GroupPartition(sizes=(3,) * 10)
PART15 = GroupPartition(sizes=(3,) * 5)
PART_DOA = GroupPartition(sizes=(2,) * 50)

# oracle-equivalence solves run the barrier further than the package default
# so the solution error sits well under the 1e-4 comparison tolerance
TIGHT = BarrierConfig(t_max=1e10, gap_tol=1e-8)
# the inverse-block identity is checked at a moderate stage where float64
# can still resolve both sides of the comparison; the identity itself holds
# at every stage
MODERATE = BarrierConfig(t_max=1e4, gap_tol=10.0)
# the gradient comparison runs every solve past the default Newton stop: the
# implicit-function gradient picks up a bias linear in the stationarity
# residual, which at the default stop drowns the smallest components the
# 1e-6 mask still admits
POLISH_TOL = 1e-8
SOFT = BarrierConfig(t_max=100.0, gap_tol=0.5)
SOFT_DOA = BarrierConfig(t_max=10.0, gap_tol=0.5)

SUPPORT_TOL = 1e-6


def _line(msg: str) -> None:
    print(msg, flush=True)


@lru_cache(maxsize=None)
def instances():
    """The shared 50-instance set: n=20, m=30, standard normal entries."""
    out = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        out.append(Dataset(y=rng.standard_normal(20), X=rng.standard_normal((20, 30))))
    return tuple(out)


@lru_cache(maxsize=None)
def lasso_fits():
    return {
        (i, lam): solve_model(ModelSpec.lasso_spec(lam), d, TIGHT)
        for i, d in enumerate(instances())
        for lam in LAMBDAS
    }


@lru_cache(maxsize=None)
def group_fits():
    return {
        (i, lam): solve_model(ModelSpec.group_spec(lam, PART30), d)
        for i, d in enumerate(instances())
        for lam in LAMBDAS
    }


@lru_cache(maxsize=None)
def sparse_fits():
    return {
        (i, lam): solve_model(ModelSpec.sparse_group_spec(lam, lam, PART30), d)
        for i, d in enumerate(instances())
        for lam in LAMBDAS
    }


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    """Compile the jit kernels before anything is timed."""
    d = instances()[0]
    cd_lasso(d.X, d.y, 2.0)
    bcd_group_lasso(d.X, d.y, 2.0, PART30)
    fista_sparse_group(d.X, d.y, 1.0, 1.0, PART30)
    project_l1(np.ones(8), 1.0)


def _rel_obj_gap(model, d, beta_ours, beta_oracle):
    ours = penalized_objective(model, d, beta_ours)
    ref = penalized_objective(model, d, beta_oracle)
    return (ours - ref) / max(abs(ref), 1e-300)


def test_criterion1_solver_oracle_equivalence():
    results = {}
    t0 = time.perf_counter()
    fits = lasso_fits()
    wb = wo = 0.0
    for i, d in enumerate(instances()):
        for lam in LAMBDAS:
            oracle = cd_lasso(d.X, d.y, lam)
            wb = max(wb, float(np.max(np.abs(fits[(i, lam)].beta - oracle))))
            wo = max(wo, _rel_obj_gap(ModelSpec.lasso_spec(lam), d, fits[(i, lam)].beta, oracle))
    results["lasso"] = (wb, wo, time.perf_counter() - t0, 1e-4)

    t0 = time.perf_counter()
    fits = group_fits()
    wb = wo = 0.0
    for i, d in enumerate(instances()):
        for lam in LAMBDAS:
            oracle = bcd_group_lasso(d.X, d.y, lam, PART30)
            model = ModelSpec.group_spec(lam, PART30)
            wb = max(wb, float(np.max(np.abs(fits[(i, lam)].beta - oracle))))
            wo = max(wo, _rel_obj_gap(model, d, fits[(i, lam)].beta, oracle))
    results["group"] = (wb, wo, time.perf_counter() - t0, 1e-3)

    t0 = time.perf_counter()
    fits = sparse_fits()
    wb = wo = 0.0
    for i, d in enumerate(instances()):
        for lam in LAMBDAS:
            oracle = fista_sparse_group(d.X, d.y, lam, lam, PART30)
            model = ModelSpec.sparse_group_spec(lam, lam, PART30)
            wb = max(wb, float(np.max(np.abs(fits[(i, lam)].beta - oracle))))
            wo = max(wo, _rel_obj_gap(model, d, fits[(i, lam)].beta, oracle))
    results["sparse_group"] = (wb, wo, time.perf_counter() - t0, 1e-3)

    ok = all(
        wb <= tol and wo <= 1e-6 and secs <= 10.0
        for wb, wo, secs, tol in results.values()
    )
    detail = "  ".join(
        f"{name}: dbeta {wb:.2e}<={tol:g} obj {wo:.2e}<=1e-6 {secs:.1f}s<=10s"
        for name, (wb, wo, secs, tol) in results.items()
    )
    _line(f"criterion 1: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _polished(model, d):
    """Solve with the Newton stop tightened to the float64 stall floor.

    A stall at the final barrier stage returns the floor point; a stall on
    the way there re-follows the whole path at a looser stop so the returned
    stage never varies across the finite-difference pair.
    """
    tol = POLISH_TOL
    while True:
        try:
            return solve_model(model, d, BarrierConfig(newton_tol=tol))
        except ConvergenceError as exc:
            s = exc.solution
            if s is not None and s.t_final >= BarrierConfig().t_max:
                return s
            tol *= 10.0
            if tol > 1e-6:
                raise


def _fd_gradients(model, d, obj, eps=1e-6):
    """Central differences of the solution map and the composite objective."""
    n, m = d.n, d.m
    y0, X0 = np.asarray(d.y), np.asarray(d.X)
    dy = np.empty((m, n))
    gy = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = eps
        bp = _polished(model, d.replace(y=y0 + e)).beta
        bm = _polished(model, d.replace(y=y0 - e)).beta
        dy[:, k] = (bp - bm) / (2 * eps)
        gy[k] = (objective_value(obj, bp) - objective_value(obj, bm)) / (2 * eps)
    dX = np.empty((m, n * m))
    gX = np.empty((n, m))
    for k in range(n):
        for l in range(m):
            E = np.zeros((n, m))
            E[k, l] = eps
            bp = _polished(model, d.replace(X=X0 + E)).beta
            bm = _polished(model, d.replace(X=X0 - E)).beta
            dX[:, k * m + l] = (bp - bm) / (2 * eps)
            gX[k, l] = (objective_value(obj, bp) - objective_value(obj, bm)) / (2 * eps)
    return dy, dX, gy, gX


def _rel_err(exact, fd, floor=1e-6):
    mask = np.abs(exact) > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(exact[mask] - fd[mask]) / np.abs(exact[mask])))


def test_criterion2_gradient_fidelity():
    specs = {
        "lasso": ModelSpec.lasso_spec(2.0),
        "group": ModelSpec.group_spec(2.0, PART15),
        "sparse_group": ModelSpec.sparse_group_spec(1.0, 0.5, PART15),
    }
    worst = {}
    for name, model in specs.items():
        errs = np.zeros(4)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            d = Dataset(y=rng.standard_normal(10), X=rng.standard_normal((10, 15)))
            s = _polished(model, d)
            target = AttackTarget(suppress=(0,), promote=(1,), keep=tuple(range(2, 15)))
            obj = compile_objective(target, s.beta)
            exact_dy = grad_beta_wrt_y(model, d, s)
            exact_dX = grad_beta_wrt_X(model, d, s)
            exact_gy, exact_gX = attack_gradients(obj, model, d, s)
            fd_dy, fd_dX, fd_gy, fd_gX = _fd_gradients(model, d, obj)
            errs = np.maximum(
                errs,
                [
                    _rel_err(exact_dy, fd_dy),
                    _rel_err(exact_dX, fd_dX),
                    _rel_err(exact_gy, fd_gy),
                    _rel_err(exact_gX, fd_gX),
                ],
            )
        worst[name] = errs
    ok = all(np.all(e <= 1e-3) for e in worst.values())
    detail = "  ".join(f"{k}: {np.max(v):.2e}<=1e-3" for k, v in worst.items())
    _line(f"criterion 2: {'PASS' if ok else 'FAIL'}  max rel err {detail}")
    assert ok, detail


def test_criterion3_inverse_top_left_identity():
    worst = 0.0
    for d in instances():
        for lam in LAMBDAS:
            model = ModelSpec.lasso_spec(lam)
            s = solve_model(model, d, MODERATE)
            jac = assemble_jacobian(model, d, s)
            m = d.m
            E = np.zeros((jac.dim, m))
            E[jac.beta_rows] = np.eye(m)
            block = np.linalg.solve(jac.J, E)[jac.beta_rows]
            D = np.diag(1.0 / (jac.t * (s.u**2 + s.beta**2)))
            direct = np.linalg.solve(2.0 * d.X.T @ d.X + 2.0 * D, np.eye(m))
            worst = max(worst, float(np.max(np.abs(block - direct))))
    ok = worst <= 1e-8
    _line(f"criterion 3: {'PASS' if ok else 'FAIL'}  max block deviation {worst:.2e} <= 1e-8 over 150 instances")
    assert ok, worst


def test_criterion4_projection_correctness():
    rng = np.random.default_rng(0)
    sort_exact = True
    for _ in range(1000):
        dim = int(rng.integers(1, 51))
        x = float(rng.uniform(0.1, 10.0)) * rng.standard_normal(dim)
        eta = float(rng.uniform(0.05, 5.0))
        if not np.array_equal(project_l1(x, eta), project_l1_sort(x, eta)):
            sort_exact = False
            break

    import cvxpy as cp

    qp_worst = 0.0
    for _ in range(1000):
        dim = int(rng.integers(1, 6))
        v = float(rng.uniform(0.1, 4.0)) * rng.standard_normal(dim)
        eta = float(rng.uniform(0.05, 3.0))
        x = cp.Variable(dim)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(x - v)), [cp.norm1(x) <= eta])
        # default conic tolerances leave the oracle ~1e-6 accurate, too loose
        # to referee a 1e-6 comparison
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
        qp_worst = max(qp_worst, float(np.max(np.abs(project_l1(v, eta) - x.value))))

    projections = {"l1": project_l1, "l2": project_l2, "linf": project_linf}
    props_ok = True
    for norm, proj in projections.items():
        for _ in range(200):
            dim = int(rng.integers(1, 40))
            x = float(rng.uniform(0.1, 10.0)) * rng.standard_normal(dim)
            z = float(rng.uniform(0.1, 10.0)) * rng.standard_normal(dim)
            eta = float(rng.uniform(0.05, 5.0))
            px, pz = proj(x, eta), proj(z, eta)
            in_ball = norm_value(px, norm) <= eta + 1e-9
            idem = np.max(np.abs(proj(px, eta) - px)) <= 1e-12
            nonexp = np.linalg.norm(px - pz) <= np.linalg.norm(x - z) + 1e-12
            inside = norm_value(x, norm) > eta or np.array_equal(px, x)
            if not (in_ball and idem and nonexp and inside):
                props_ok = False
                break

    ok = sort_exact and qp_worst <= 1e-6 and props_ok
    _line(
        f"criterion 4: {'PASS' if ok else 'FAIL'}  pivot==sort exact {sort_exact}, "
        f"qp worst {qp_worst:.2e} <= 1e-6, ball properties {props_ok}"
    )
    assert ok


def _covering_target(m, sup, boo, s, e, mu):
    keep = tuple(i for i in range(m) if i not in (sup, boo))
    return AttackTarget(
        suppress=(sup,),
        promote=(boo,),
        keep=keep,
        suppress_weights=(s,),
        promote_weights=(e,),
        keep_weights=(mu,) * len(keep),
    )


@lru_cache(maxsize=None)
def regression_attacks():
    """All response-poisoning runs behind criterion 5, plus the build time."""
    model = ModelSpec.lasso_spec(2.0)
    out = []
    t0 = time.perf_counter()
    for seed in range(10):
        d, _ = gen_synthetic(30, 50, 10, 0.1, seed)
        s0 = solve_model(model, d)
        sup, boo = select_targets(d, s0, Budget(norm="l2", eta_y=5.0))
        target = _covering_target(50, sup, boo, 1.0, -1.0, 5.0)
        b0 = abs(float(s0.beta[sup]))
        thresh = max(0.1 * b0, SUPPORT_TOL)

        def probe(t, dd, ss, sup=sup, boo=boo, thresh=thresh):
            if t % 25:
                return False
            b = solve_model(model, dd).beta
            return abs(b[sup]) <= thresh and abs(b[boo]) > SUPPORT_TOL

        goal_cfg = AttackConfig(
            budget=Budget(norm="l2", eta_y=5.0, eta_x=0.0),
            schedule=StepSchedule("inv_sqrt", 2.0),
            max_iters=2500,
            attack_X=False,
        )
        res = run_attack(d, model, target, goal_cfg, gradient_barrier=SOFT, stop_when=probe)

        def final_obj(norm, eta):
            cfg = AttackConfig(
                budget=Budget(norm=norm, eta_y=eta, eta_x=0.0),
                schedule=StepSchedule("inv_sqrt", 2.0),
                max_iters=600,
                tol=1e-16,
                attack_X=False,
            )
            r = run_attack(d, model, target, cfg, gradient_barrier=SOFT)
            return objective_value(compile_objective(target, r.beta_before), r.beta_after)

        by_norm = {norm: final_obj(norm, 5.0) for norm in ("l1", "l2", "linf")}
        by_eta = [final_obj("l2", eta) for eta in (1.0, 2.0, 3.0, 4.0)] + [by_norm["l2"]]
        out.append(
            {
                "ratio": abs(float(res.beta_after[sup])) / b0,
                "promoted": abs(float(res.beta_after[boo])) > SUPPORT_TOL,
                "by_norm": by_norm,
                "by_eta": by_eta,
            }
        )
    return out, time.perf_counter() - t0


def test_criterion5_response_poisoning_properties():
    runs, elapsed = regression_attacks()
    suppressed = sum(r["ratio"] < 0.1 for r in runs)
    boosted = sum(r["promoted"] for r in runs)
    ordered = sum(
        r["by_norm"]["linf"] <= r["by_norm"]["l2"] <= r["by_norm"]["l1"] for r in runs
    )
    monotone = sum(
        all(r["by_eta"][i + 1] <= r["by_eta"][i] + 1e-12 for i in range(4)) for r in runs
    )
    ok = (
        suppressed >= 8
        and boosted >= 8
        and ordered == 10
        and monotone == 10
        and elapsed <= 300.0
    )
    _line(
        f"criterion 5: {'PASS' if ok else 'FAIL'}  suppressed<0.1x {suppressed}/10>=8, "
        f"boosted {boosted}/10>=8, norm order {ordered}/10==10, "
        f"eta monotone {monotone}/10==10, {elapsed:.0f}s<=300s"
    )
    assert ok


def test_criterion6_joint_budget_dominates():
    model = ModelSpec.lasso_spec(2.0)
    wins = 0
    rows = []
    for seed in range(10):
        d, _ = gen_synthetic(30, 50, 10, 0.1, seed)
        s0 = solve_model(model, d)
        sup, boo = select_targets(d, s0, Budget(norm="l1", eta_y=5.0))
        target = _covering_target(50, sup, boo, 1.0, -1.0, 5.0)

        def final_obj(eta_y, eta_x):
            cfg = AttackConfig(
                budget=Budget(norm="l1", eta_y=eta_y, eta_x=eta_x),
                schedule=StepSchedule("inv_sqrt", 2.0),
                max_iters=600,
                tol=1e-16,
            )
            r = run_attack(d, model, target, cfg, gradient_barrier=SOFT)
            return objective_value(compile_objective(target, r.beta_before), r.beta_after)

        fy, fx, fboth = final_obj(5.0, 0.0), final_obj(0.0, 5.0), final_obj(5.0, 5.0)
        wins += fboth <= fy + 1e-12 and fboth <= fx + 1e-12
        rows.append((fy, fx, fboth))
    ok = wins == 10
    _line(f"criterion 6: {'PASS' if ok else 'FAIL'}  f(both)<=min(f(y),f(X)) in {wins}/10 seeds")
    assert ok, rows


def test_criterion7_doa_support_manipulation():
    model = ModelSpec.group_spec(4.0, PART_DOA)

    def gnorm(beta, g):
        return float(np.linalg.norm(beta[2 * g : 2 * g + 2]))

    wins = 0
    for seed in range(10):
        _, d = build_doa(30, 50, 4, 0.1, seed)
        s0 = solve_model(model, d)
        budget = Budget(norm="linf", eta_y=1.5, eta_x=0.0)
        sup, boo = select_targets(d, s0, budget, part=PART_DOA)
        sup_cols = (2 * sup, 2 * sup + 1)
        boo_cols = (2 * boo, 2 * boo + 1)
        keep = tuple(i for i in range(100) if i not in sup_cols + boo_cols)
        target = AttackTarget(
            suppress=sup_cols,
            promote=boo_cols,
            keep=keep,
            suppress_weights=(20.0,) * 2,
            promote_weights=(-1.0,) * 2,
            keep_weights=(20.0,) * len(keep),
        )
        cfg = AttackConfig(
            budget=budget,
            schedule=StepSchedule("inv_t", 1.0),
            max_iters=1500,
            tol=1e-16,
            attack_X=False,
        )

        def probe(t, dd, ss, sup=sup, boo=boo):
            if t % 50:
                return False
            b = solve_model(model, dd).beta
            return gnorm(b, sup) <= SUPPORT_TOL and gnorm(b, boo) > SUPPORT_TOL

        res = run_attack(d, model, target, cfg, gradient_barrier=SOFT_DOA, stop_when=probe)
        before = {g for g in range(50) if gnorm(res.beta_before, g) > SUPPORT_TOL}
        after = {g for g in range(50) if gnorm(res.beta_after, g) > SUPPORT_TOL}
        untouched = before - {sup, boo}
        preserved = len(untouched & after) / len(untouched) if untouched else 1.0
        wins += (sup not in after) and (boo in after) and preserved >= 0.9
    ok = wins >= 8
    _line(f"criterion 7: {'PASS' if ok else 'FAIL'}  kill+boost+preserve in {wins}/10 seeds >= 8")
    assert ok


def test_criterion8_reduction_identities():
    part_unit = GroupPartition(sizes=(1,) * 30)
    w_unit = w_grp = w_lasso = 0.0
    for i, d in enumerate(instances()):
        for lam in LAMBDAS:
            lasso_beta = lasso_fits()[(i, lam)].beta
            group_beta = group_fits()[(i, lam)].beta
            # the unit-group identity is tested at the 1e-4 tolerance, so both
            # sides must run the barrier equally far; lasso_fits() is TIGHT
            unit = solve_model(ModelSpec.group_spec(lam, part_unit), d, TIGHT).beta
            to_group = solve_model(ModelSpec.sparse_group_spec(lam, 1e-8, PART30), d).beta
            to_lasso = solve_model(ModelSpec.sparse_group_spec(1e-8, lam, PART30), d).beta
            w_unit = max(w_unit, float(np.max(np.abs(unit - lasso_beta))))
            w_grp = max(w_grp, float(np.max(np.abs(to_group - group_beta))))
            w_lasso = max(w_lasso, float(np.max(np.abs(to_lasso - lasso_beta))))
    ok = w_unit <= 1e-4 and w_grp <= 1e-3 and w_lasso <= 1e-3
    _line(
        f"criterion 8: {'PASS' if ok else 'FAIL'}  unit groups vs lasso {w_unit:.2e}<=1e-4, "
        f"sparse->group {w_grp:.2e}<=1e-3, sparse->lasso {w_lasso:.2e}<=1e-3"
    )
    assert ok


def test_criterion9_deterministic_reports(tmp_path):
    from importlib import resources

    all_ok = True
    for name in ("synthetic_l2.json", "doa_linf.json"):
        cfg = resources.files("l1poison") / "configs" / name
        a = tmp_path / f"{name}_a"
        b = tmp_path / f"{name}_b"
        run_scenario(cfg, out_dir=a)
        run_scenario(cfg, out_dir=b)
        ra = json.loads((a / "report.json").read_text())
        rb = json.loads((b / "report.json").read_text())
        ra.pop("timestamp")
        rb.pop("timestamp")
        same = json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
        for art in ("dataset_clean.csv", "dataset_adv.csv", "coefficients.csv", "trace.csv"):
            same = same and (a / art).read_bytes() == (b / art).read_bytes()
        all_ok = all_ok and same
    _line(f"criterion 9: {'PASS' if all_ok else 'FAIL'}  repeated runs byte-identical minus timestamp")
    assert all_ok
