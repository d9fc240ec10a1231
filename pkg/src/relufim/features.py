"""Frozen random first layer and the ReLU feature map X(x) = relu(x^T W)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError
from .streams import Stream, check_seed, gaussian_rows


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Weights W (d x m, entries N(0, 1/m)) together with the seed that produced them.

    ``W`` is stored column-contiguous, one column per hidden unit, and is
    marked read-only.
    """

    d: int
    m: int
    W: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        W = np.asfortranarray(np.asarray(self.W, dtype=np.float64))
        if W.ndim != 2 or W.shape != (self.d, self.m):
            raise InvalidDimensionError(f"W must have shape ({self.d}, {self.m}), got {W.shape}")
        if self.d < 1 or self.m < 1:
            raise InvalidDimensionError("d and m must be positive")
        if not np.all(np.isfinite(W)):
            raise InvalidDimensionError("W contains non-finite entries")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @classmethod
    def from_matrix(cls, W, seed: int | None = None) -> "FeatureMap":
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2:
            raise InvalidDimensionError("W must be a matrix")
        return cls(d=W.shape[0], m=W.shape[1], W=W, seed=seed)

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.W, axis=0)

    def __repr__(self) -> str:
        return f"FeatureMap(d={self.d}, m={self.m}, seed={self.seed})"


def generate_weights(d: int, m: int, seed: int) -> FeatureMap:
    """Draw W with IID N(0, 1/m) entries from the ``WEIGHTS`` counter stream.

    Entry ``(i, j)`` is normal number ``j*d + i`` of the stream, scaled by
    1/sqrt(m).  Consequently the first ``k`` columns for width ``m`` equal
    the columns for width ``k`` up to the factor sqrt(k/m).
    """
    if int(d) < 1 or int(m) < 1:
        raise InvalidDimensionError(f"d and m must be >= 1, got d={d}, m={m}")
    d, m = int(d), int(m)
    seed = check_seed(seed)
    Z = gaussian_rows(seed, Stream.WEIGHTS, 0, m, d)  # row j is column j of W
    return FeatureMap(d=d, m=m, W=Z.T / np.sqrt(m), seed=seed)


def _as_inputs(fm: FeatureMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (fm.d,):
        raise InvalidDimensionError(f"input must have trailing dimension {fm.d}, got shape {x.shape}")
    return x


def activate(fm: FeatureMap, x) -> np.ndarray:
    """X(x) = max(0, x^T W); ``x`` may be one input ``(d,)`` or a batch ``(n, d)``."""
    return np.maximum(_as_inputs(fm, x) @ fm.W, 0.0)


def eval_basis(fm: FeatureMap, v, x) -> np.ndarray | float:
    """f_v(x) = X(x)^T v for a basis vector (or plain m-vector) ``v``."""
    vec = np.asarray(getattr(v, "vector", v), dtype=np.float64)
    if vec.shape != (fm.m,):
        raise InvalidDimensionError(f"v must have length {fm.m}, got shape {vec.shape}")
    out = activate(fm, x) @ vec
    return float(out) if np.ndim(out) == 0 else out
