"""Scenario builders, evaluation metrics, and the end-to-end runner.

Three generators cover the experiment families: dense synthetic regression
with a sparse ground truth, a sensor-array direction-finding grid whose
complex measurements become a size-2-group regression after stacking real
and imaginary parts, and a block-sparse synthetic for the sparse-group
model.  ``run_scenario`` drives generate -> solve -> attack -> re-solve ->
metrics from a JSON config validated against the bundled schema, writing
plot-ready CSV artifacts and a deterministic JSON report whose only
non-reproducible field is the timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .attack import AttackConfig, StepSchedule, run_attack
from .model import (
    AttackTarget,
    Budget,
    Dataset,
    GroupPartition,
    ModelSpec,
    _readonly,
    save_dataset,
)
from .projections import norm_value
from .solvers import BarrierConfig, solve_model

__all__ = [
    "DoaScene",
    "ScenarioReport",
    "gen_synthetic",
    "build_doa",
    "gen_grouped_synthetic",
    "metrics",
    "select_targets",
    "load_scenario_config",
    "run_scenario",
    "SUPPORT_TOL",
]

SUPPORT_TOL = 1e-6
SCHEMA_DIR = Path(__file__).resolve().parent / "schemas"


def _frozen(a: np.ndarray) -> np.ndarray:
    """Copy an array preserving its dtype and mark it read-only."""
    out = np.array(a, copy=True)
    out.setflags(write=False)
    return out


def gen_synthetic(n: int, m: int, k_sparse: int, sigma: float, seed: int):
    """Random dense design with a k-sparse ground truth.

    Returns ``(Dataset, v_true)`` with X entries i.i.d. standard normal,
    ``v_true`` holding standard-normal values at ``k_sparse`` uniformly
    chosen positions, and ``y = X v + sigma * noise``.  The noise vector is
    drawn even when ``sigma`` is zero so the signal is identical across
    noise levels for a fixed seed.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not 0 <= k_sparse <= m:
        raise ValueError("k_sparse must lie in [0, m]")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    v = np.zeros(m)
    idx = rng.choice(m, size=k_sparse, replace=False)
    v[idx] = rng.standard_normal(k_sparse)
    y = X @ v + sigma * rng.standard_normal(n)
    return Dataset(y=y, X=X), _readonly(v)


@dataclass(frozen=True)
class DoaScene:
    """Sensor-array grid scene behind a stacked real regression problem.

    ``A`` is the complex steering matrix ``A[n, g] = exp(2j pi n g / M)``
    for sensor ``n`` and grid slot ``g`` (both 0-based).  Measurements
    follow the conjugate map ``y = conj(A) x + e``, which is exactly the
    complex system represented by the real stacking
    ``[[A_R, A_I], [-A_I, A_R]]`` acting on ``[x_R; x_I]``.
    """

    N: int
    M: int
    K: int
    sources: tuple[int, ...]
    amplitudes: np.ndarray
    sigma: float
    A: np.ndarray
    y_complex: np.ndarray

    def __post_init__(self):
        if not 1 <= self.K <= self.M:
            raise ValueError("need 1 <= K <= M")
        if len(self.sources) != self.K or len(set(self.sources)) != self.K:
            raise ValueError("sources must be K distinct grid indices")
        if not all(0 <= s < self.M for s in self.sources):
            raise ValueError("source indices must lie in [0, M)")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.A.shape != (self.N, self.M):
            raise ValueError("A must be N x M")
        if self.amplitudes.shape != (self.K,):
            raise ValueError("need one complex amplitude per source")
        if self.y_complex.shape != (self.N,):
            raise ValueError("y_complex must have length N")
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "y_complex", _frozen(self.y_complex))

    @property
    def x_complex(self) -> np.ndarray:
        """Length-M complex source vector (amplitudes at source slots)."""
        x = np.zeros(self.M, dtype=complex)
        x[list(self.sources)] = self.amplitudes
        return x

    def stacked_design(self) -> np.ndarray:
        """The 2N x 2M block design [[A_R, A_I], [-A_I, A_R]]."""
        AR, AI = self.A.real, self.A.imag
        return np.block([[AR, AI], [-AI, AR]])

    def stacked_response(self) -> np.ndarray:
        """The 2N stacked response [Re y; Im y]."""
        return np.concatenate([self.y_complex.real, self.y_complex.imag])


def build_doa(N: int, M: int, K: int, sigma: float, seed: int):
    """Random direction-finding scene plus its stacked real Dataset.

    Source slots are K distinct uniform draws; amplitude real and imaginary
    parts are i.i.d. standard normal, as are the per-part noise components
    (scaled by ``sigma``).  The Dataset interleaves each grid slot's real
    and imaginary columns as (Re_g, Im_g) so the size-2 groups are
    contiguous: grid ``g`` owns dataset columns ``2g`` and ``2g + 1``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 1 <= K <= M:
        raise ValueError("need 1 <= K <= M")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    sources = np.sort(rng.choice(M, size=K, replace=False))
    amps = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    A = np.exp(2j * np.pi * np.arange(N)[:, None] * np.arange(M)[None, :] / M)
    x = np.zeros(M, dtype=complex)
    x[sources] = amps
    noise = sigma * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    y_c = np.conj(A) @ x + noise
    scene = DoaScene(
        N=N,
        M=M,
        K=K,
        sources=tuple(int(s) for s in sources),
        amplitudes=amps,
        sigma=float(sigma),
        A=A,
        y_complex=y_c,
    )
    X = np.empty((2 * N, 2 * M))
    X[:N, 0::2] = A.real
    X[N:, 0::2] = -A.imag
    X[:N, 1::2] = A.imag
    X[N:, 1::2] = A.real
    return scene, Dataset(y=scene.stacked_response(), X=X)


def gen_grouped_synthetic(
    n: int,
    L: int,
    p: int,
    k_groups: int,
    within_sparsity: float,
    sigma: float,
    seed: int,
):
    """Block-sparse synthetic: ``k_groups`` active groups of ``p`` features.

    Within each active group a ``within_sparsity`` fraction of positions
    (at least one) carries standard-normal coefficients.  Returns
    ``(Dataset, GroupPartition, v_true)``.
    """
    if n < 1 or L < 1 or p < 1:
        raise ValueError("n, L, p must be >= 1")
    if not 0 <= k_groups <= L:
        raise ValueError("k_groups must lie in [0, L]")
    if not 0 < within_sparsity <= 1:
        raise ValueError("within_sparsity must lie in (0, 1]")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    m = L * p
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    active = np.sort(rng.choice(L, size=k_groups, replace=False))
    k_within = max(1, int(round(within_sparsity * p)))
    v = np.zeros(m)
    for g in active:
        pos = rng.choice(p, size=k_within, replace=False)
        v[g * p + pos] = rng.standard_normal(k_within)
    y = X @ v + sigma * rng.standard_normal(n)
    return Dataset(y=y, X=X), GroupPartition(sizes=(p,) * L), _readonly(v)


def metrics(y_true, y_pred) -> tuple[float, float]:
    """Coefficient of determination and root mean squared error.

    ``r2 = 1 - SSE/SST`` with SST about the mean of ``y_true``;
    ``rmse = sqrt(mean((y_true - y_pred)^2))``.  Raises if ``y_true`` has
    zero variance, which leaves r2 undefined.
    """
    yt = np.asarray(y_true, dtype=float).ravel()
    yp = np.asarray(y_pred, dtype=float).ravel()
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if yt.size < 2:
        raise ValueError("need at least two samples")
    sst = float(np.sum((yt - yt.mean()) ** 2))
    if sst == 0.0:
        raise ValueError("r^2 undefined: y_true has zero variance")
    sse = float(np.sum((yt - yp) ** 2))
    r2 = 1.0 - sse / sst
    rmse = float(np.sqrt(np.mean((yt - yp) ** 2)))
    return r2, rmse


@dataclass(frozen=True)
class ScenarioReport:
    """Everything a scenario run produced, ready for JSON serialization.

    ``artifacts`` maps logical names to file names relative to the output
    directory, so two runs of the same config into different directories
    serialize to identical bytes apart from ``timestamp``.
    """

    config: dict
    timestamp: str
    status: str
    iterations_used: int
    final_objective: float
    metrics_before: dict
    metrics_after: dict
    support_before: tuple[int, ...]
    support_after: tuple[int, ...]
    targets: dict
    outcomes: dict
    artifacts: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "timestamp": self.timestamp,
            "status": self.status,
            "iterations_used": self.iterations_used,
            "final_objective": self.final_objective,
            "metrics_before": self.metrics_before,
            "metrics_after": self.metrics_after,
            "support_before": list(self.support_before),
            "support_after": list(self.support_after),
            "targets": self.targets,
            "outcomes": self.outcomes,
            "artifacts": self.artifacts,
        }


def load_scenario_config(path) -> dict:
    """Load and schema-validate a scenario config, returning the dict."""
    import jsonschema

    with open(path) as fh:
        cfg = json.load(fh)
    with open(SCHEMA_DIR / "scenario.schema.json") as fh:
        schema = json.load(fh)
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"{path}: invalid scenario config: {exc.message}") from exc
    _check_kind_consistency(path, cfg)
    return cfg


def _check_kind_consistency(path, cfg: dict) -> None:
    kind = cfg["kind"]
    model_kind = cfg["model"]["kind"]
    allowed = {
        "synthetic": ("lasso",),
        "doa": ("group",),
        "grouped": ("group", "sparse_group"),
    }[kind]
    if model_kind not in allowed:
        raise ValueError(
            f"{path}: {kind} scenarios support model kinds {allowed}, got {model_kind!r}"
        )
    if kind == "doa" and cfg["attack"]["eta_x"] != 0:
        raise ValueError(f"{path}: doa scenarios attack only the response; eta_x must be 0")


def _build_problem(cfg: dict):
    """Instantiate data, model, group size, and 0-based target index lists."""
    kind = cfg["kind"]
    data = cfg["data"]
    seed = cfg["seed"]
    tgt = cfg["attack"]["targets"]
    sup_1b = list(tgt.get("suppress", []))
    pro_1b = list(tgt.get("promote", []))
    if kind == "synthetic":
        d0, _ = gen_synthetic(data["n"], data["m"], data["k_sparse"], data["sigma"], seed)
        model = ModelSpec.lasso_spec(cfg["model"]["lam"])
        part = None
    elif kind == "doa":
        _, d0 = build_doa(data["N"], data["M"], data["K"], data["sigma"], seed)
        part = GroupPartition(sizes=(2,) * data["M"])
        model = ModelSpec.group_spec(cfg["model"]["lam"], part)
    else:
        d0, part, _ = gen_grouped_synthetic(
            data["n"],
            data["L"],
            data["p"],
            data["k_groups"],
            data["within_sparsity"],
            data["sigma"],
            seed,
        )
        if cfg["model"]["kind"] == "group":
            model = ModelSpec.group_spec(cfg["model"]["lam"], part)
        else:
            model = ModelSpec.sparse_group_spec(cfg["model"]["lam1"], cfg["model"]["lam2"], part)
    n_units = part.L if part is not None else d0.m
    for label, idx in (("suppress", sup_1b), ("promote", pro_1b)):
        for i in idx:
            if not 1 <= i <= n_units:
                raise ValueError(f"{label} index {i} outside 1..{n_units}")
    if part is not None:
        slices = part.slices()
        sup = [j for i in sup_1b for j in range(slices[i - 1].start, slices[i - 1].stop)]
        pro = [j for i in pro_1b for j in range(slices[i - 1].start, slices[i - 1].stop)]
    else:
        sup = [i - 1 for i in sup_1b]
        pro = [i - 1 for i in pro_1b]
    return d0, model, part, sup, pro


def _unit_magnitudes(beta: np.ndarray, part: GroupPartition | None) -> np.ndarray:
    """Per-reporting-unit magnitude: |beta_i| or the group norm."""
    if part is None:
        return np.abs(beta)
    return np.array([np.linalg.norm(beta[sl]) for sl in part.slices()])


def select_targets(d0, solution, budget, part=None) -> tuple[int, int]:
    """Pick a (suppress, promote) unit pair for a feature-selection attack.

    Suppression goes after the strongest fitted unit whose removal fits the
    response budget: cancelling unit ``u`` needs a response shift of about
    ``-X_u beta_u``, so a unit is affordable when that vector's size, in the
    budget's own norm, is at most ``0.9 eta_y``.  Among affordable active
    units the largest magnitude wins; if none is affordable the cheapest
    active unit is used instead.

    Promotion picks the inactive unit with the largest correlation margin,
    i.e. the one closest to entering the support.  With groups the margin is
    measured on the residual with the suppressed unit's fit added back:
    removing a group frees its energy to coherent neighbours, so the margin
    after the kill is the relevant ranking.

    Returns 0-based unit indices ``(suppress_unit, promote_unit)``.  Units
    are coefficients for plain models and groups when ``part`` is given.
    """
    beta = np.asarray(solution.beta, dtype=float)
    mag = _unit_magnitudes(beta, part)
    active = np.flatnonzero(mag > SUPPORT_TOL)
    inactive = np.flatnonzero(mag <= SUPPORT_TOL)
    if active.size == 0:
        raise ValueError("no active units: nothing to suppress")
    if inactive.size == 0:
        raise ValueError("no inactive units: nothing to promote")
    slices = part.slices() if part is not None else [slice(i, i + 1) for i in range(d0.m)]

    def kill_energy(u: int) -> float:
        return norm_value(d0.X[:, slices[u]] @ beta[slices[u]], budget.norm)

    energy = np.array([kill_energy(u) for u in active])
    affordable = active[energy <= 0.9 * budget.eta_y]
    if affordable.size:
        sup = int(affordable[np.argmax(mag[affordable])])
    else:
        sup = int(active[np.argmin(energy)])

    r = d0.y - d0.X @ beta
    if part is not None:
        r = r + d0.X[:, slices[sup]] @ beta[slices[sup]]
    margin = np.array(
        [np.linalg.norm(2.0 * d0.X[:, slices[u]].T @ r) for u in inactive]
    )
    boo = int(inactive[np.argmax(margin)])
    return sup, boo


def run_scenario(config_path, out_dir=None, seed=None) -> ScenarioReport:
    """Execute a scenario config end to end and write its artifacts.

    ``out_dir`` defaults to ``<config stem>_out`` in the working directory;
    ``seed`` overrides the config's seed when given.  Returns the report
    that was also written as ``report.json``.
    """
    cfg = load_scenario_config(config_path)
    if seed is not None:
        cfg = dict(cfg)
        cfg["seed"] = int(seed)
    out = Path(out_dir) if out_dir is not None else Path(f"{Path(config_path).stem}_out")
    out.mkdir(parents=True, exist_ok=True)

    d0, model, part, sup, pro = _build_problem(cfg)
    atk = cfg["attack"]
    weights = atk.get("weights", {})
    target = AttackTarget.covering(
        d0.m,
        suppress=sup,
        promote=pro,
        s=weights.get("s", 1.0),
        e=weights.get("e", -1.0),
        mu=weights.get("mu", 5.0),
    )
    sched = atk.get("schedule", {})
    attack_cfg = AttackConfig(
        budget=Budget(atk["norm"], eta_y=atk["eta_y"], eta_x=atk["eta_x"]),
        schedule=StepSchedule(sched.get("kind", "inv_sqrt"), sched.get("c", 1.0)),
        max_iters=atk.get("max_iters", 200),
        window=atk.get("window", 5),
        tol=atk.get("tol", 1e-6),
        attack_y=True,
        attack_X=cfg["kind"] != "doa",
        scaled_inner_step=atk.get("scaled_inner_step", False),
    )
    smoothing = atk.get("smoothing")
    grad_barrier = (
        BarrierConfig(t_max=smoothing["t_max"], gap_tol=smoothing["gap_tol"])
        if smoothing is not None
        else None
    )
    goal = atk.get("stop_on_goal")
    probe = None
    if goal is not None and (sup or pro):
        every = int(goal.get("probe_every", 25))
        goal_ratio = float(goal.get("suppress_ratio", 0.1))
        mag0 = _unit_magnitudes(solve_model(model, d0).beta, part)
        sup_u = [i - 1 for i in cfg["attack"]["targets"].get("suppress", [])]
        pro_u = [i - 1 for i in cfg["attack"]["targets"].get("promote", [])]
        thresholds = {u: max(goal_ratio * mag0[u], SUPPORT_TOL) for u in sup_u}

        def probe(t, d, s):
            if t % every != 0:
                return False
            mag = _unit_magnitudes(solve_model(model, d).beta, part)
            return all(mag[u] <= thresholds[u] for u in sup_u) and all(
                mag[u] > SUPPORT_TOL for u in pro_u
            )

    res = run_attack(
        d0, model, target, attack_cfg, gradient_barrier=grad_barrier, stop_when=probe
    )

    mag_before = _unit_magnitudes(res.beta_before, part)
    mag_after = _unit_magnitudes(res.beta_after, part)
    support_before = tuple(int(i) + 1 for i in np.flatnonzero(mag_before > SUPPORT_TOL))
    support_after = tuple(int(i) + 1 for i in np.flatnonzero(mag_after > SUPPORT_TOL))
    tgt = cfg["attack"]["targets"]
    sup_units = [int(i) for i in tgt.get("suppress", [])]
    pro_units = [int(i) for i in tgt.get("promote", [])]
    ratios = {
        str(i): (
            float(mag_after[i - 1] / mag_before[i - 1]) if mag_before[i - 1] > 0 else None
        )
        for i in sup_units
    }
    promoted = {str(i): bool(mag_after[i - 1] > SUPPORT_TOL) for i in pro_units}
    touched = set(sup_units) | set(pro_units)
    untouched_before = [i for i in support_before if i not in touched]
    preserved = [i for i in untouched_before if i in set(support_after)]
    preserved_frac = (
        float(len(preserved) / len(untouched_before)) if untouched_before else 1.0
    )

    r2_b, rmse_b = metrics(d0.y, d0.X @ res.beta_before)
    r2_a, rmse_a = metrics(d0.y, d0.X @ res.beta_after)

    artifacts = {
        "dataset_clean": "dataset_clean.csv",
        "dataset_adv": "dataset_adv.csv",
        "coefficients": "coefficients.csv",
        "trace": "trace.csv",
        "report": "report.json",
    }
    save_dataset(out / artifacts["dataset_clean"], d0)
    save_dataset(out / artifacts["dataset_adv"], Dataset(y=res.y_adv, X=res.X_adv))
    with open(out / artifacts["coefficients"], "w", newline="") as fh:
        fh.write("index,beta_before,beta_after\n")
        for i in range(d0.m):
            fh.write(f"{i + 1},{float(res.beta_before[i])!r},{float(res.beta_after[i])!r}\n")
    with open(out / artifacts["trace"], "w", newline="") as fh:
        fh.write("iter,objective\n")
        for i, v in enumerate(res.objective_trace):
            fh.write(f"{i},{v!r}\n")

    report = ScenarioReport(
        config=cfg,
        timestamp=datetime.now(timezone.utc).isoformat(),
        status=res.status,
        iterations_used=res.iterations_used,
        final_objective=float(res.objective_trace[-1]),
        metrics_before={"r2": r2_b, "rmse": rmse_b},
        metrics_after={"r2": r2_a, "rmse": rmse_a},
        support_before=support_before,
        support_after=support_after,
        targets={"suppress": sup_units, "promote": pro_units},
        outcomes={
            "suppress_ratio": ratios,
            "promoted_active": promoted,
            "untouched_preserved": preserved_frac,
        },
        artifacts=artifacts,
    )
    with open(out / artifacts["report"], "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
