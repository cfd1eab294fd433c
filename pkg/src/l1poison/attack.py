"""Projected-gradient poisoning attack over the training data (y, X).

Each iteration takes a unit gradient step on the attack objective, projects
it back onto the norm ball around the clean data, and then moves the current
iterate a fraction alpha_t toward that projection:

    y_{t+1} = (1 - alpha_t) y_t + alpha_t Proj(y_t - grad_y f)

and likewise for X through its vectorization.  Because the projection lands
inside the ball and the clean data is its center, every convex combination
stays feasible.  The attacked model is re-solved at every iterate and the
objective trace is monitored over a sliding window for convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError
from .gradients import attack_gradients
from .model import (
    AttackTarget,
    Budget,
    Dataset,
    ModelSpec,
    _readonly,
    compile_objective,
    objective_value,
)
from .projections import norm_value, project_ball
from .solvers import BarrierConfig, SolverSolution, solve_model

__all__ = [
    "StepSchedule",
    "AttackConfig",
    "AttackResult",
    "step_size",
    "convergence_check",
    "run_attack",
]

SCHEDULE_KINDS = ("inv_sqrt", "inv_t", "constant")
FEASIBILITY_SLACK = 1e-9

StopProbe = Callable[[int, Dataset, SolverSolution], bool]


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule alpha_t: c/sqrt(t), c/t, or the constant c."""

    kind: str = "inv_sqrt"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        if not self.c > 0:
            raise ValueError("c must be > 0")


def step_size(schedule: StepSchedule, t: int) -> float:
    """alpha_t for 1-based iteration t, clamped to at most 1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if schedule.kind == "inv_sqrt":
        raw = schedule.c / np.sqrt(t)
    elif schedule.kind == "inv_t":
        raw = schedule.c / t
    else:
        raw = schedule.c
    return float(min(1.0, raw))


@dataclass(frozen=True)
class AttackConfig:
    """Attack driver settings: schedule, budget, stop rule, and flags."""

    budget: Budget
    schedule: StepSchedule = field(default_factory=StepSchedule)
    max_iters: int = 200
    window: int = 5
    tol: float = 1e-6
    attack_y: bool = True
    attack_X: bool = True
    scaled_inner_step: bool = False
    warm_start: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not (self.attack_y or self.attack_X):
            raise ValueError("at least one of attack_y/attack_X must be enabled")


@dataclass(frozen=True)
class AttackResult:
    """Poisoned data, the objective trace, and the before/after coefficients."""

    y_adv: np.ndarray
    X_adv: np.ndarray
    objective_trace: tuple[float, ...]
    beta_before: np.ndarray
    beta_after: np.ndarray
    iterations_used: int
    status: str

    def __post_init__(self):
        object.__setattr__(self, "y_adv", _readonly(self.y_adv))
        object.__setattr__(self, "X_adv", _readonly(self.X_adv))
        object.__setattr__(self, "beta_before", _readonly(self.beta_before))
        object.__setattr__(self, "beta_after", _readonly(self.beta_after))


def convergence_check(trace, window: int, tol: float) -> bool:
    """True once the last ``window`` objectives span less than tol*(1+|last|)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(trace) < window:
        return False
    tail = list(trace)[-window:]
    return (max(tail) - min(tail)) < tol * (1.0 + abs(tail[-1]))


def _check_ball(vec: np.ndarray, center: np.ndarray, norm: str, eta: float, what: str):
    dist = norm_value(vec - center, norm)
    if dist > eta + FEASIBILITY_SLACK:
        raise RuntimeError(f"{what} iterate left the {norm} ball: {dist:g} > {eta:g}")


def run_attack(
    d0: Dataset,
    model: ModelSpec,
    target: AttackTarget,
    cfg: AttackConfig,
    barrier: BarrierConfig | None = None,
    gradient_barrier: BarrierConfig | None = None,
    stop_when: StopProbe | None = None,
) -> AttackResult:
    """Run the projected-gradient attack from the clean dataset ``d0``.

    The reference coefficients for the objective are solved once from the
    clean data and never refreshed.  Both data blocks are updated from
    gradients evaluated at the same iterate.  A solver failure aborts the
    attack and returns the trace accumulated so far with status
    ``"solver_failure"``.

    ``stop_when`` is an optional goal probe called after every iterate with
    ``(iteration, dataset, solution)``.  Returning True ends the attack
    with status ``"goal_met"``; an attacker with full knowledge of the
    victim model stops as soon as the manipulation goal is reached, since
    later iterates may trade it away for further objective decrease.

    ``gradient_barrier`` optionally selects a separate solver configuration
    for the per-iteration solves and sensitivities.  A short barrier path
    (low ``t_max`` with a loose ``gap_tol``) rounds off the soft-threshold
    kink, so coefficients outside the support keep a nonzero pull and
    promotion targets can activate; exactly at the kink their sensitivity
    to the data vanishes and gradient steps cannot move them.  The
    reference coefficients and both reported coefficient vectors are always
    computed with ``barrier``, the configuration the fitted model actually
    uses.
    """
    model.validate_against(d0.m)
    barrier = barrier or BarrierConfig()
    grad_barrier = gradient_barrier if gradient_barrier is not None else barrier
    smoothed = gradient_barrier is not None
    budget = cfg.budget
    do_y = cfg.attack_y and budget.eta_y > 0
    do_X = cfg.attack_X and budget.eta_x > 0

    s = solve_model(model, d0, barrier)
    beta_before = np.asarray(s.beta, dtype=float)
    obj = compile_objective(target, beta_before)
    if smoothed:
        s = solve_model(model, d0, grad_barrier)

    y0 = np.asarray(d0.y, dtype=float)
    X0 = np.asarray(d0.X, dtype=float)
    y_cur, X_cur = y0.copy(), X0.copy()
    d_cur = d0
    trace = [objective_value(obj, s.beta)]
    status = "max_iters"
    used = cfg.max_iters

    for t in range(1, cfg.max_iters + 1):
        alpha = step_size(cfg.schedule, t)
        inner = alpha if cfg.scaled_inner_step else 1.0
        grad_y, grad_X = attack_gradients(obj, model, d_cur, s)
        if do_y:
            prop = project_ball(y0, budget.norm, budget.eta_y, y_cur - inner * grad_y)
            y_cur = (1.0 - alpha) * y_cur + alpha * prop
            _check_ball(y_cur, y0, budget.norm, budget.eta_y, "y")
        if do_X:
            prop = project_ball(X0, budget.norm, budget.eta_x, X_cur - inner * grad_X)
            X_cur = (1.0 - alpha) * X_cur + alpha * prop
            _check_ball(X_cur, X0, budget.norm, budget.eta_x, "X")
        d_next = Dataset(y_cur.copy(), X_cur.copy())
        try:
            s = solve_model(model, d_next, grad_barrier, init=s if cfg.warm_start else None)
        except ConvergenceError:
            status = "solver_failure"
            used = t - 1
            break
        d_cur = d_next
        trace.append(objective_value(obj, s.beta))
        if stop_when is not None and stop_when(t, d_cur, s):
            status = "goal_met"
            used = t
            break
        if convergence_check(trace, cfg.window, cfg.tol):
            status = "converged"
            used = t
            break

    beta_after = np.asarray(s.beta, dtype=float).copy()
    if smoothed:
        try:
            final = solve_model(model, d_cur, barrier)
        except ConvergenceError as exc:
            final = exc.solution
        beta_after = np.asarray(final.beta, dtype=float).copy()

    return AttackResult(
        y_adv=d_cur.y.copy(),
        X_adv=d_cur.X.copy(),
        objective_trace=tuple(trace),
        beta_before=beta_before,
        beta_after=beta_after,
        iterations_used=used,
        status=status,
    )
