"""Monte Carlo Fisher metric: <f, g> = E_{x ~ N(0, I_d)}[f(x) g(x)].

Two ways to look at the same estimator:

* matrix-free: project features onto the vectors of interest, one chunk of
  inputs at a time (any width m);
* explicit: accumulate J_hat = (1/n) sum X(x_k) X(x_k)^T (m capped).

Both draw inputs from the ``FIM_SAMPLES`` stream, so for the same seed
and n they see identical samples, and u^T J_hat v agrees with the
matrix-free estimate up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigenvectors import BasisVector, full_basis, nominal_eigenvalues
from .errors import EstimationError, ExplicitModeRefused, InvalidDimensionError
from .features import FeatureMap, activate
from .streams import PairwiseAccumulator, Stream, check_seed, default_chunk, gaussian_rows, map_chunks

EXPLICIT_CAP = 2048
BAND = 0.2


@dataclass(frozen=True)
class InnerProductEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int


@dataclass
class GramSummary:
    labels: list[str]
    gram: np.ndarray
    std_error: np.ndarray
    nominal: np.ndarray
    n_samples: int
    seed: int
    max_offdiag_abs: float = field(init=False)
    max_offdiag_z: float = field(init=False)
    max_diag_reldev: float = field(init=False)

    def __post_init__(self):
        k = self.gram.shape[0]
        off = ~np.eye(k, dtype=bool)
        if k > 1:
            g, se = np.abs(self.gram[off]), self.std_error[off]
            self.max_offdiag_abs = float(g.max())
            z = np.where(se > 0, g / np.where(se > 0, se, 1.0), np.where(g > 0, np.inf, 0.0))
            self.max_offdiag_z = float(z.max())
        else:
            self.max_offdiag_abs = 0.0
            self.max_offdiag_z = 0.0
        with np.errstate(invalid="ignore"):
            dev = np.abs(np.diag(self.gram) / self.nominal - 1.0)
        self.max_diag_reldev = float(np.nanmax(dev)) if np.any(np.isfinite(dev)) else math.nan

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "gram": self.gram.tolist(),
            "std_error": self.std_error.tolist(),
            "nominal": self.nominal.tolist(),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "max_offdiag_abs": self.max_offdiag_abs,
            "max_offdiag_z": self.max_offdiag_z,
            "max_diag_reldev": self.max_diag_reldev,
            "thresholds_are_engineering_choices": True,
        }


@dataclass
class SpectrumReport:
    d: int
    m: int
    n_samples: int
    seed: int
    eigenvalues: np.ndarray
    clusters: list[str]
    in_band: np.ndarray
    nominal: dict[str, float]
    band_counts: dict[str, int]
    residual_opnorm: float

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "nominal": self.nominal,
            "band": BAND,
            "band_counts": self.band_counts,
            "expected_counts": expected_cluster_counts(self.d),
            "residual_opnorm": self.residual_opnorm,
            "eigenvalues": self.eigenvalues.tolist(),
            "clusters": self.clusters,
            "in_band": [bool(b) for b in self.in_band],
            "thresholds_are_engineering_choices": True,
        }


def _sample_inputs(d: int, seed: int, lo: int, hi: int) -> np.ndarray:
    return gaussian_rows(seed, Stream.FIM_SAMPLES, lo, hi - lo, d)


def _check_vector(fm: FeatureMap, v) -> np.ndarray:
    vec = np.asarray(getattr(v, "vector", v), dtype=np.float64)
    if vec.shape != (fm.m,):
        raise InvalidDimensionError(f"vector must have length {fm.m}, got shape {vec.shape}")
    return vec


def project_moments(fm: FeatureMap, V: np.ndarray, n_samples: int, seed: int, workers: int = 1):
    """First and second moments of products of the projections F = X(x) V.

    Returns ``(mean, mean_sq)`` where ``mean[i, j]`` estimates E[F_i F_j] and
    ``mean_sq[i, j]`` estimates E[(F_i F_j)^2], from one shared input stream.
    """
    seed = check_seed(seed)
    chunk = default_chunk(fm.m)

    def work(lo: int, hi: int):
        F = activate(fm, _sample_inputs(fm.d, seed, lo, hi)) @ V
        F2 = F * F
        return F.T @ F, F2.T @ F2

    s1, s2 = PairwiseAccumulator(), PairwiseAccumulator()
    for a, b in map_chunks(work, n_samples, chunk, workers):
        s1.add(a)
        s2.add(b)
    return s1.total() / n_samples, s2.total() / n_samples


def _std_error(mean: np.ndarray, mean_sq: np.ndarray, n: int) -> np.ndarray:
    var = np.maximum(mean_sq - mean * mean, 0.0) * n / (n - 1)
    return np.sqrt(var / n)


def inner_product_mc(fm: FeatureMap, u, v, n_samples: int, seed: int, workers: int = 1) -> InnerProductEstimate:
    """Sample mean of f_u(x) f_v(x), with standard error sample_std / sqrt(n)."""
    if n_samples < 2:
        raise EstimationError("need at least 2 samples to estimate a standard error")
    uu, vv = _check_vector(fm, u), _check_vector(fm, v)
    seed = check_seed(seed)
    chunk = default_chunk(fm.m)

    def work(lo: int, hi: int):
        X = activate(fm, _sample_inputs(fm.d, seed, lo, hi))
        prod = (X @ uu) * (X @ vv)
        return np.array([prod.sum(), (prod * prod).sum()])

    acc = PairwiseAccumulator()
    for part in map_chunks(work, n_samples, chunk, workers):
        acc.add(part)
    total, total_sq = acc.total()
    mean = total / n_samples
    se = _std_error(np.array(mean), np.array(total_sq / n_samples), n_samples)
    return InnerProductEstimate(float(mean), float(se), int(n_samples), seed)


def empirical_fim_explicit(fm: FeatureMap, n_samples: int, seed: int, cap: int = EXPLICIT_CAP, workers: int = 1) -> np.ndarray:
    """J_hat = (1/n) sum_k X(x_k) X(x_k)^T, symmetrized."""
    if fm.m > cap:
        raise ExplicitModeRefused(
            f"explicit FIM refused for m={fm.m} > cap={cap}; use the matrix-free "
            "routines (inner_product_mc, gram_summary) instead"
        )
    if n_samples < 1:
        raise EstimationError("need at least one sample")
    seed = check_seed(seed)
    chunk = default_chunk(fm.m)

    def work(lo: int, hi: int):
        X = activate(fm, _sample_inputs(fm.d, seed, lo, hi))
        return X.T @ X

    acc = PairwiseAccumulator()
    for part in map_chunks(work, n_samples, chunk, workers):
        acc.add(part)
    J = acc.total() / n_samples
    return (J + J.T) / 2.0


def gram_summary(fm: FeatureMap, basis: list[BasisVector], n_samples: int, seed: int, workers: int = 1) -> GramSummary:
    """Pairwise <f_vi, f_vj> over one shared sample stream."""
    if n_samples < 2:
        raise EstimationError("need at least 2 samples to estimate a standard error")
    V = np.column_stack([_check_vector(fm, b) for b in basis])
    mean, mean_sq = project_moments(fm, V, n_samples, seed, workers)
    gram = (mean + mean.T) / 2.0
    se = _std_error(gram, (mean_sq + mean_sq.T) / 2.0, n_samples)
    return GramSummary(
        labels=[b.label for b in basis],
        gram=gram,
        std_error=se,
        nominal=np.array([b.nominal_eigenvalue for b in basis]),
        n_samples=int(n_samples),
        seed=check_seed(seed),
    )


def expected_cluster_counts(d: int) -> dict[str, int]:
    return {"top": 1, "linear": d, "quadratic": d * (d + 1) // 2 - 1}


def assign_clusters(eigenvalues: np.ndarray, d: int, band: float = BAND) -> tuple[list[str], np.ndarray]:
    """Label each eigenvalue with a nominal cluster.

    An eigenvalue inside a multiplicative +-band around a nominal value takes
    that cluster (the larger nominal wins where bands overlap); otherwise it
    goes to the nearest of the nominal values and 0 ("rest").
    """
    nom = nominal_eigenvalues(d)
    ordered = sorted(nom.items(), key=lambda kv: -kv[1])
    labels, in_band = [], np.zeros(len(eigenvalues), dtype=bool)
    for k, lam in enumerate(eigenvalues):
        for name, c in ordered:
            if (1 - band) * c <= lam <= (1 + band) * c:
                labels.append(name)
                in_band[k] = True
                break
        else:
            candidates = ordered + [("rest", 0.0)]
            labels.append(min(candidates, key=lambda kv: abs(lam - kv[1]))[0])
    return labels, in_band


def decomposition_residual(fm: FeatureMap, n_samples: int, seed: int, cap: int = EXPLICIT_CAP, workers: int = 1) -> SpectrumReport:
    """Spectrum of J_hat and the operator norm of J_hat - sum_i lambda_i v_i v_i^T."""
    J = empirical_fim_explicit(fm, n_samples, seed, cap=cap, workers=workers)
    eig = np.linalg.eigvalsh(J)[::-1]
    basis = full_basis(fm)
    V = np.column_stack([b.vector for b in basis])
    lam = np.array([b.nominal_eigenvalue for b in basis])
    residual = J - (V * lam) @ V.T
    opnorm = float(np.max(np.abs(np.linalg.eigvalsh((residual + residual.T) / 2.0))))
    labels, in_band = assign_clusters(eig, fm.d)
    counts = {name: int(sum(1 for lab, ib in zip(labels, in_band) if ib and lab == name)) for name in nominal_eigenvalues(fm.d)}
    return SpectrumReport(
        d=fm.d,
        m=fm.m,
        n_samples=int(n_samples),
        seed=check_seed(seed),
        eigenvalues=eig,
        clusters=labels,
        in_band=in_band,
        nominal=nominal_eigenvalues(fm.d),
        band_counts=counts,
        residual_opnorm=opnorm,
    )
