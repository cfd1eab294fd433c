"""Domain types shared by all modules, and the adversary's compiled objective.

The attacker's intent is expressed over three disjoint index sets covering all
features: ``suppress`` (drive the coefficient to zero), ``promote`` (pull the
coefficient into the support), and ``keep`` (hold the coefficient at its clean
value).  ``compile_objective`` turns that intent into the quadratic
``f(beta) = 1/2 (beta - nu)' diag(h) (beta - nu)`` whose gradient the attack
driver follows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "GroupPartition",
    "ModelSpec",
    "AttackTarget",
    "AttackObjective",
    "Budget",
    "compile_objective",
    "objective_value",
    "load_dataset",
    "save_dataset",
]

NORMS = ("l1", "l2", "linf")


def _readonly(a: np.ndarray) -> np.ndarray:
    """Copy to a float64 array and lock it; all domain types are immutable."""
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """A regression dataset: response ``y`` (n,) and features ``X`` (n, m)."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError(f"y must be 1-d, got shape {y.shape}")
        if X.ndim != 2:
            raise ValueError(f"X must be 2-d, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"row mismatch: y has {y.shape[0]}, X has {X.shape[0]}")
        if y.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need at least one sample and one feature")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "X", _readonly(X))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def replace(self, y=None, X=None) -> "Dataset":
        """Return a copy with ``y`` and/or ``X`` substituted."""
        return Dataset(self.y if y is None else y, self.X if X is None else X)


def load_dataset(path) -> Dataset:
    """Read a dataset CSV with header ``y,x1,...,xm``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "y":
        raise ValueError(f"{path}: header must be y,x1,...,xm")
    m = len(header) - 1
    expected = ["y"] + [f"x{j}" for j in range(1, m + 1)]
    if header != expected:
        raise ValueError(f"{path}: header must be y,x1,...,xm, got {header}")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != m + 1:
        raise ValueError(f"{path}: ragged or empty data rows")
    return Dataset(y=data[:, 0], X=data[:, 1:])


def save_dataset(path, dataset: Dataset) -> None:
    """Write a dataset CSV (header ``y,x1,...,xm``, full round-trip precision)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j}" for j in range(1, dataset.m + 1)])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(dataset.y[i]))]
                + [repr(float(v)) for v in dataset.X[i]]
            )


@dataclass(frozen=True)
class GroupPartition:
    """Contiguous feature groups described by their sizes, in order."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(p) for p in self.sizes)
        if not sizes:
            raise ValueError("partition needs at least one group")
        if any(p < 1 for p in sizes):
            raise ValueError(f"group sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def L(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def offsets(self) -> np.ndarray:
        """Start offset of each group; length L+1, last entry = total."""
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def slices(self) -> list[slice]:
        offs = self.offsets()
        return [slice(int(offs[l]), int(offs[l + 1])) for l in range(self.L)]

    def labels(self) -> np.ndarray:
        """Group id of every coordinate, length ``total``."""
        return np.repeat(np.arange(self.L), self.sizes)

    def require_total(self, m: int) -> None:
        if self.total != m:
            raise ValueError(f"partition covers {self.total} features, dataset has {m}")


@dataclass(frozen=True)
class ModelSpec:
    """Which penalized regression is attacked, and its penalty weights.

    Variants:

    * ``lasso``: ``||y - X beta||^2 + lam * ||beta||_1``
    * ``group``: ``||y - X beta||^2 + lam * sum_l sqrt(p_l) ||beta_l||_2``
    * ``sparse_group``: ``||y - X beta||^2 + lam1 * sum_l sqrt(p_l) ||beta_l||_2
      + lam2 * ||beta||_1``

    Effective group weights ``lam * sqrt(p_l)`` (or ``lam1 * sqrt(p_l)``) are
    always derived from the partition, never stored.
    """

    kind: str
    lam: float | None = None
    lam1: float | None = None
    lam2: float | None = None
    partition: GroupPartition | None = None

    def __post_init__(self):
        if self.kind == "lasso":
            if self.lam is None or self.lam <= 0:
                raise ValueError("lasso requires lam > 0")
            if self.partition is not None:
                raise ValueError("lasso takes no partition")
        elif self.kind == "group":
            if self.lam is None or self.lam <= 0:
                raise ValueError("group requires lam > 0")
            if self.partition is None:
                raise ValueError("group requires a partition")
        elif self.kind == "sparse_group":
            if self.lam1 is None or self.lam1 <= 0 or self.lam2 is None or self.lam2 <= 0:
                raise ValueError("sparse_group requires lam1 > 0 and lam2 > 0")
            if self.partition is None:
                raise ValueError("sparse_group requires a partition")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def lasso_spec(cls, lam: float) -> "ModelSpec":
        return cls(kind="lasso", lam=float(lam))

    @classmethod
    def group_spec(cls, lam: float, partition: GroupPartition) -> "ModelSpec":
        return cls(kind="group", lam=float(lam), partition=partition)

    @classmethod
    def sparse_group_spec(
        cls, lam1: float, lam2: float, partition: GroupPartition
    ) -> "ModelSpec":
        return cls(kind="sparse_group", lam1=float(lam1), lam2=float(lam2), partition=partition)

    def group_weights(self) -> np.ndarray:
        """Per-group penalty weights ``lam * sqrt(p_l)``; only for group variants."""
        if self.partition is None:
            raise ValueError(f"{self.kind} model has no groups")
        base = self.lam if self.kind == "group" else self.lam1
        return base * np.sqrt(np.asarray(self.partition.sizes, dtype=np.float64))

    def validate_against(self, m: int) -> None:
        """Check the spec is usable on an m-feature dataset."""
        if self.partition is not None:
            self.partition.require_total(m)


def _as_index_tuple(indices) -> tuple[int, ...]:
    return tuple(int(i) for i in indices)


def _broadcast_weights(indices, weights, default) -> tuple[float, ...]:
    if weights is None:
        return tuple(float(default) for _ in indices)
    if np.isscalar(weights):
        return tuple(float(weights) for _ in indices)
    out = tuple(float(w) for w in weights)
    if len(out) != len(indices):
        raise ValueError("weights length must match index count")
    return out


@dataclass(frozen=True)
class AttackTarget:
    """Attacker intent: disjoint suppress / promote / keep sets covering all
    features, each with per-index weights.

    Weight signs: suppress weights ``s_i > 0``, promote weights ``e_i < 0``,
    keep weights ``mu_i > 0``.  Defaults are ``s=1, e=-1, mu=5``.
    """

    suppress: tuple[int, ...] = ()
    promote: tuple[int, ...] = ()
    keep: tuple[int, ...] = ()
    suppress_weights: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    promote_weights: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    keep_weights: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "suppress", _as_index_tuple(self.suppress))
        object.__setattr__(self, "promote", _as_index_tuple(self.promote))
        object.__setattr__(self, "keep", _as_index_tuple(self.keep))
        object.__setattr__(
            self, "suppress_weights", _broadcast_weights(self.suppress, self.suppress_weights, 1.0)
        )
        object.__setattr__(
            self, "promote_weights", _broadcast_weights(self.promote, self.promote_weights, -1.0)
        )
        object.__setattr__(
            self, "keep_weights", _broadcast_weights(self.keep, self.keep_weights, 5.0)
        )
        if any(w <= 0 for w in self.suppress_weights):
            raise ValueError("suppress weights must be > 0")
        if any(w >= 0 for w in self.promote_weights):
            raise ValueError("promote weights must be < 0")
        if any(w <= 0 for w in self.keep_weights):
            raise ValueError("keep weights must be > 0")

    @classmethod
    def covering(
        cls,
        m: int,
        suppress=(),
        promote=(),
        s: float = 1.0,
        e: float = -1.0,
        mu: float = 5.0,
    ) -> "AttackTarget":
        """Build a target where every index not suppressed/promoted is kept."""
        suppress = _as_index_tuple(suppress)
        promote = _as_index_tuple(promote)
        taken = set(suppress) | set(promote)
        keep = tuple(i for i in range(m) if i not in taken)
        return cls(
            suppress=suppress,
            promote=promote,
            keep=keep,
            suppress_weights=s,
            promote_weights=e,
            keep_weights=mu,
        )


@dataclass(frozen=True)
class AttackObjective:
    """Compiled quadratic ``f(beta) = 1/2 (beta - nu)' diag(h) (beta - nu)``."""

    h: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if h.ndim != 1 or nu.ndim != 1 or h.shape != nu.shape:
            raise ValueError("h and nu must be 1-d vectors of equal length")
        object.__setattr__(self, "h", _readonly(h))
        object.__setattr__(self, "nu", _readonly(nu))

    @property
    def m(self) -> int:
        return self.h.shape[0]


def compile_objective(target: AttackTarget, beta0: np.ndarray) -> AttackObjective:
    """Compile attacker intent into ``(h, nu)`` given the clean coefficients.

    ``nu_i = beta0_i`` on the keep set and 0 elsewhere; ``h_i`` is the weight
    of index i's set.  The three sets must partition ``{0..m-1}``.
    """
    beta0 = np.asarray(beta0, dtype=np.float64)
    if beta0.ndim != 1:
        raise ValueError("beta0 must be a vector")
    if not np.isfinite(beta0).all():
        raise ValueError("beta0 must be finite")
    m = beta0.shape[0]
    sets = (target.suppress, target.promote, target.keep)
    flat = [i for s in sets for i in s]
    if len(flat) != len(set(flat)):
        raise ValueError("suppress/promote/keep sets overlap; they must partition the features")
    if set(flat) != set(range(m)):
        raise ValueError(
            f"suppress/promote/keep must cover all {m} features exactly; got {sorted(set(flat))}"
        )
    h = np.empty(m)
    nu = np.zeros(m)
    for idx, w in zip(target.suppress, target.suppress_weights):
        h[idx] = w
    for idx, w in zip(target.promote, target.promote_weights):
        h[idx] = w
    for idx, w in zip(target.keep, target.keep_weights):
        h[idx] = w
        nu[idx] = beta0[idx]
    return AttackObjective(h=h, nu=nu)


def objective_value(obj: AttackObjective, beta: np.ndarray) -> float:
    """Evaluate ``1/2 (beta - nu)' diag(h) (beta - nu)``; may be negative."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != obj.nu.shape:
        raise ValueError(f"beta has shape {beta.shape}, expected {obj.nu.shape}")
    d = beta - obj.nu
    return 0.5 * float(np.dot(obj.h * d, d))


@dataclass(frozen=True)
class Budget:
    """Perturbation budget: one norm tag and radii for the y-ball and X-ball."""

    norm: str
    eta_y: float = 0.0
    eta_x: float = 0.0

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.eta_y < 0 or self.eta_x < 0:
            raise ValueError("budget radii must be non-negative")
