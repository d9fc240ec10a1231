"""Gradient descent on the second-layer weights of y = X(x)^T v* + noise.

Population mode descends L(v) = (1/2)(v - v*)^T J_hat (v - v*), where
J_hat is the explicit Monte Carlo Fisher matrix, so the Hessian is exactly
J_hat.  Empirical mode descends the mean squared error on a drawn training
set.  Either way the error e(t) = v(t) - v* is tracked through its
Fisher-metric projections p_i(t) = e(t)^T J v_i / lambda_i onto the
approximate eigenvectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigenvectors import BasisVector, basis_matrix, full_basis
from .errors import ConfigError, EstimationError, RankDeficiencyError
from .features import FeatureMap, activate
from .fim_metric import EXPLICIT_CAP, empirical_fim_explicit, project_moments
from .streams import Stream, check_seed, gaussian_rows, normals

TRANSIENT = 0.1
CLUSTER_OF = {"G1": "top", "G2": "linear", "G3_diag": "quadratic", "G3_offdiag": "quadratic"}


@dataclass
class GDConfig:
    d: int
    m: int
    seed: int = 0
    n_train: int = 1000
    noise_std: float = 1.0
    step: float | None = None  # None: step_scale / lambda_max
    step_scale: float = 0.1
    iters: int = 1000
    target_v: np.ndarray | None = None  # None: random unit vector from the TARGET stream
    mode: str = "population"
    n_fim: int = 200_000
    init_v: np.ndarray | None = None  # None: start from zero

    def __post_init__(self):
        if self.mode not in ("population", "empirical"):
            raise ConfigError("mode", f"expected 'population' or 'empirical', got {self.mode!r}")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step", "must be positive")
        if not self.step_scale > 0:
            raise ConfigError("step_scale", "must be positive")
        if int(self.iters) < 1:
            raise ConfigError("iters", "must be at least 1")
        if not self.noise_std >= 0:
            raise ConfigError("noise_std", "must be non-negative")
        if self.mode == "empirical" and int(self.n_train) < 1:
            raise ConfigError("n_train", "empirical mode needs at least one training sample")
        if self.target_v is not None and np.shape(self.target_v) != (self.m,):
            raise ConfigError("target_v", f"must have length m={self.m}")
        if self.init_v is not None and np.shape(self.init_v) != (self.m,):
            raise ConfigError("init_v", f"must have length m={self.m}")


@dataclass(frozen=True)
class TrajectoryRecord:
    iter: int
    loss: float
    projections: np.ndarray


@dataclass
class GDRun:
    config: GDConfig
    records: list[TrajectoryRecord]
    step: float
    lambda_max: float
    labels: list[str]
    groups: list[str]
    nominal: np.ndarray
    rayleigh: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def projection_matrix(self) -> np.ndarray:
        return np.array([r.projections for r in self.records])


def random_unit_target(m: int, seed: int) -> np.ndarray:
    v = normals(check_seed(seed), Stream.TARGET, 0, m)
    return v / np.linalg.norm(v)


def training_set(fm: FeatureMap, target: np.ndarray, n: int, noise_std: float, seed: int):
    """Features and noisy labels y = X v* + noise_std * eps."""
    X = activate(fm, gaussian_rows(seed, Stream.TRAIN_INPUTS, 0, n, fm.d))
    y = X @ target + noise_std * normals(seed, Stream.TRAIN_NOISE, 0, n)
    return X, y


def run_gd(cfg: GDConfig, fm: FeatureMap, basis: Sequence[BasisVector] | None = None, fim: np.ndarray | None = None) -> GDRun:
    """Full-batch gradient descent from ``cfg.init_v`` (default 0), recording every iterate.

    ``fim`` may pass a precomputed J_hat (population mode, or the projection
    metric in empirical mode); otherwise it is estimated from ``cfg.n_fim``
    samples.  Record ``t`` holds the state after ``t`` steps.
    """
    if (cfg.d, cfg.m) != (fm.d, fm.m):
        raise ConfigError("m", f"config (d={cfg.d}, m={cfg.m}) does not match the feature map (d={fm.d}, m={fm.m})")
    seed = check_seed(cfg.seed)
    basis = list(basis) if basis is not None else full_basis(fm)
    target = random_unit_target(fm.m, seed) if cfg.target_v is None else np.asarray(cfg.target_v, dtype=np.float64)
    notes: list[str] = []

    if cfg.mode == "population":
        J = fim if fim is not None else empirical_fim_explicit(fm, cfg.n_fim, seed, cap=EXPLICIT_CAP)
        hessian = J
    else:
        X, y = training_set(fm, target, int(cfg.n_train), cfg.noise_std, seed)
        hessian = X.T @ X / X.shape[0]
        if fim is not None:
            J = fim
        elif fm.m <= EXPLICIT_CAP:
            J = empirical_fim_explicit(fm, cfg.n_fim, seed)
        else:
            J = hessian
            notes.append("projections use the training Gram matrix as the metric (m above the explicit cap)")

    lam_max = float(np.linalg.eigvalsh(hessian)[-1])
    step = cfg.step if cfg.step is not None else cfg.step_scale / lam_max
    if step >= 2.0 / lam_max:
        msg = f"step {step:.6g} >= 2/lambda_max = {2.0 / lam_max:.6g}; iterates may diverge"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    V = basis_matrix(basis)
    nominal = np.array([b.nominal_eigenvalue for b in basis])
    JV_scaled = (J @ V) / nominal
    rayleigh = np.einsum("ij,ij->j", V, J @ V) / np.einsum("ij,ij->j", V, V)

    v = np.zeros(fm.m) if cfg.init_v is None else np.array(cfg.init_v, dtype=np.float64)
    records = []
    for t in range(int(cfg.iters) + 1):
        e = v - target
        if cfg.mode == "population":
            grad = hessian @ e
            loss = 0.5 * float(e @ grad)
        else:
            resid = X @ v - y
            grad = X.T @ resid / X.shape[0]
            loss = 0.5 * float(resid @ resid) / X.shape[0]
        records.append(TrajectoryRecord(t, loss, e @ JV_scaled))
        v = v - step * grad

    return GDRun(
        config=cfg,
        records=records,
        step=float(step),
        lambda_max=lam_max,
        labels=[b.label for b in basis],
        groups=[b.group.value for b in basis],
        nominal=nominal,
        rayleigh=rayleigh,
        warnings=notes,
    )


def rate_fit(traj, basis_index: int, start: int | None = None, stop: int | None = None, floor: float = 1e-12) -> float:
    """Least-squares slope of log|p_i(t)| against t.

    The window is ``[start, stop)`` in iterations; by default it spans the
    whole trajectory with the first 10% dropped as transient.  Points with
    |p_i| at or below ``floor`` are excluded.
    """
    records = traj.records if isinstance(traj, GDRun) else list(traj)
    if stop is None:
        stop = len(records)
    if start is None:
        start = int(math.floor(TRANSIENT * stop))
    window = records[start:stop]
    t = np.array([r.iter for r in window], dtype=np.float64)
    p = np.abs(np.array([r.projections[basis_index] for r in window], dtype=np.float64))
    keep = p > floor
    if keep.sum() < 10:
        raise EstimationError(
            f"basis vector {basis_index} is unfittable: {int(keep.sum())} points above the noise floor {floor:g} in [{start}, {stop})"
        )
    return float(np.polyfit(t[keep], np.log(p[keep]), 1)[0])


def half_life(rate: float) -> float:
    """Iterations for |p| to halve under exp(rate * t)."""
    return math.log(0.5) / rate if rate < 0 else math.inf


def cluster_window(nominal: float, step: float, efolds: float) -> int:
    """Iterations for the nominal mode to decay by ``efolds`` e-folds."""
    return int(math.ceil(efolds / (step * nominal)))


@dataclass(frozen=True)
class RateRow:
    label: str
    group: str
    window: tuple[int, int]
    fitted: float
    predicted_rayleigh: float
    predicted_nominal: float
    half_life: float

    @property
    def rel_error(self) -> float:
        return self.fitted / self.predicted_rayleigh - 1.0


def fit_rates(run: GDRun, efolds: float = 2.0, floor: float = 1e-12) -> list[RateRow]:
    """Fit every basis vector over a window scaled to its own cluster.

    A vector in a cluster with nominal eigenvalue lambda is fitted on
    [0.1 T, T) with T = ceil(efolds / (eta lambda)), so fast clusters are not
    fitted long after they have decayed into leakage from slower ones.
    """
    rows = []
    for k, (label, group) in enumerate(zip(run.labels, run.groups)):
        stop = min(cluster_window(run.nominal[k], run.step, efolds), len(run.records))
        start = int(math.floor(TRANSIENT * stop))
        rate = rate_fit(run, k, start, stop, floor)
        rows.append(
            RateRow(
                label,
                group,
                (start, stop),
                rate,
                math.log1p(-run.step * run.rayleigh[k]),
                math.log1p(-run.step * run.nominal[k]),
                half_life(rate),
            )
        )
    return rows


def iterations_for(step: float, nominal: Sequence[float], efolds: float) -> int:
    """Run length covering the slowest cluster window."""
    return max(cluster_window(lam, step, efolds) for lam in nominal)


@dataclass
class Expansion:
    labels: list[str]
    coefficients: np.ndarray
    residual_norm: float
    norm: float


def expand_in_basis(fm: FeatureMap, v, basis: Sequence[BasisVector], n_samples: int, seed: int, rcond: float = 1e-10) -> Expansion:
    """Least-squares coefficients of f_v on span{f_vi} under the Monte Carlo metric."""
    vec = np.asarray(v, dtype=np.float64)
    if np.linalg.norm(vec) > 1.0 + 1e-12:
        warnings.warn("||v|| > 1: the expansion remainder is only claimed small for ||v|| <= 1", RuntimeWarning, stacklevel=2)
    V = np.column_stack([basis_matrix(list(basis)), vec])
    mean, _ = project_moments(fm, V, n_samples, seed)
    mean = (mean + mean.T) / 2.0
    G, b, c = mean[:-1, :-1], mean[:-1, -1], mean[-1, -1]
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= rcond * ev[-1]:
        raise RankDeficiencyError(f"basis Gram matrix is singular (eigenvalue ratio {ev[0] / ev[-1]:.3g})")
    coef = np.linalg.solve(G, b)
    resid_sq = max(c - float(b @ coef), 0.0)
    return Expansion([bv.label for bv in basis], coef, math.sqrt(resid_sq), math.sqrt(max(c, 0.0)))
