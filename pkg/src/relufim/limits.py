"""Closed-form m -> infinity limits of f_v(x) = X(x)^T v for each eigenvector family.

Only leading terms are implemented.  The remainders of the quadratic
family are known only by order, so they are exposed as envelopes
(:func:`remainder_bound_probe`) for empirical checks, never added in.

All evaluators accept one input of shape ``(d,)`` or a batch ``(n, d)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .eigenvectors import BasisVector, Group
from .errors import BasisIndexError, DomainError, HypothesisWarning, InvalidDimensionError


def beta_fn(a: float, b: float) -> float:
    """Euler beta function via log-gamma."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta function needs positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


@dataclass(frozen=True)
class SpecialConstants:
    d: int

    @cached_property
    def beta_half(self) -> float:
        """B(d/2, 1/2)."""
        return beta_fn(self.d / 2, 0.5)

    @cached_property
    def beta_half_asymptotic(self) -> float:
        """sqrt(pi (2d+1)) / d; cross-check only, never used in evaluation."""
        return math.sqrt(math.pi * (2 * self.d + 1)) / self.d

    @cached_property
    def c0(self) -> float:
        return math.sqrt(self.d) * self.beta_half / (2 * math.pi)

    @cached_property
    def c_diag(self) -> float:
        d = self.d
        return d * math.sqrt(d + 2) * self.beta_half / (2 * math.pi * (d + 1) * math.sqrt(2))

    @cached_property
    def c_off(self) -> float:
        d = self.d
        return d * math.sqrt(d + 2) * self.beta_half / (2 * (d + 1) * math.pi)


def _inputs(x, d: int | None) -> tuple[np.ndarray, int]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise InvalidDimensionError("x must be a vector or a batch of vectors")
    if d is not None and x.shape[-1] != d:
        raise InvalidDimensionError(f"x has dimension {x.shape[-1]}, expected d={d}")
    return x, x.shape[-1]


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def _nonzero_norm(x: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x, axis=-1)
    if np.any(norm == 0.0):
        raise DomainError("the quadratic-family limits are undefined at x = 0")
    return norm


def _warn_below(d: int, minimum: int, what: str) -> None:
    if d < minimum:
        warnings.warn(f"{what} is derived for d >= {minimum}; evaluating at d={d}", HypothesisWarning, stacklevel=3)


def limit_F0(x, d: int | None = None):
    """c0 ||x|| with c0 = sqrt(d) B(d/2, 1/2) / (2 pi)."""
    x, d = _inputs(x, d)
    _warn_below(d, 3, "F0")
    return _scalar(SpecialConstants(d).c0 * np.linalg.norm(x, axis=-1))


def limit_Fl(x, l: int, d: int | None = None):
    """x_l / 2."""
    x, d = _inputs(x, d)
    if not 1 <= l <= d:
        raise BasisIndexError(f"l={l} outside [1, {d}]")
    return _scalar(0.5 * x[..., l - 1])


def direction_ratio(x, gamma: int) -> np.ndarray:
    """r_gamma = x_gamma^2 / ||x||^2."""
    x = np.asarray(x, dtype=np.float64)
    return x[..., gamma - 1] ** 2 / np.sum(x * x, axis=-1)


def limit_Ftilde(x, gamma: int, d: int | None = None):
    """c_diag ||x|| (r_gamma - 1/d), the leading term for vt_gamma."""
    x, d = _inputs(x, d)
    if not 1 <= gamma <= d:
        raise BasisIndexError(f"gamma={gamma} outside [1, {d}]")
    _warn_below(d, 6, "Ftilde")
    norm = _nonzero_norm(x)
    r = x[..., gamma - 1] ** 2 / norm**2
    return _scalar(SpecialConstants(d).c_diag * norm * (r - 1.0 / d))


def limit_Fdiag(x, gamma: int, d: int | None = None):
    """c_diag ||x|| (r_gamma - r_d/(sqrt(d)+1) - 1/(d+sqrt(d)))."""
    x, d = _inputs(x, d)
    if not 1 <= gamma <= d - 1:
        raise BasisIndexError(f"gamma={gamma} outside [1, {d - 1}]")
    _warn_below(d, 6, "Fdiag")
    norm = _nonzero_norm(x)
    r_g = x[..., gamma - 1] ** 2 / norm**2
    r_d = x[..., d - 1] ** 2 / norm**2
    sd = math.sqrt(d)
    return _scalar(SpecialConstants(d).c_diag * norm * (r_g - r_d / (sd + 1) - 1.0 / (d + sd)))


def limit_Foffdiag(x, alpha: int, beta: int, d: int | None = None):
    """c_off x_a x_b / ||x||."""
    x, d = _inputs(x, d)
    if not 1 <= alpha < beta <= d:
        raise BasisIndexError(f"need 1 <= alpha < beta <= {d}, got ({alpha}, {beta})")
    _warn_below(d, 6, "Foffdiag")
    norm = _nonzero_norm(x)
    return _scalar(SpecialConstants(d).c_off * x[..., alpha - 1] * x[..., beta - 1] / norm)


_KINDS = ("F0", "Fl", "Ftilde", "Fdiag", "Foffdiag")


@dataclass(frozen=True)
class LimitFn:
    """Identity of a limiting function plus its evaluator."""

    kind: str
    d: int
    index: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown limit kind {self.kind!r}")
        d, idx = self.d, self.index
        ok = {
            "F0": len(idx) == 0,
            "Fl": len(idx) == 1 and 1 <= idx[0] <= d,
            "Ftilde": len(idx) == 1 and 1 <= idx[0] <= d,
            "Fdiag": len(idx) == 1 and 1 <= idx[0] <= d - 1,
            "Foffdiag": len(idx) == 2 and 1 <= idx[0] < idx[1] <= d,
        }[self.kind]
        if not ok:
            raise BasisIndexError(f"invalid index {idx} for {self.kind} at d={d}")

    def __call__(self, x):
        fn = {
            "F0": limit_F0,
            "Fl": limit_Fl,
            "Ftilde": limit_Ftilde,
            "Fdiag": limit_Fdiag,
            "Foffdiag": limit_Foffdiag,
        }[self.kind]
        return fn(x, *self.index, d=self.d)

    @property
    def label(self) -> str:
        return self.kind if not self.index else f"{self.kind}[{','.join(map(str, self.index))}]"

    @classmethod
    def for_basis(cls, v: BasisVector, d: int) -> "LimitFn":
        kind = {
            Group.G1: "F0",
            Group.G2: "Fl",
            Group.G3_DIAG_TILDE: "Ftilde",
            Group.G3_DIAG: "Fdiag",
            Group.G3_OFFDIAG: "Foffdiag",
        }.get(v.group)
        if kind is None:
            raise ValueError(f"no limit function is defined for group {v.group.value}")
        return cls(kind, d, v.index)


def remainder_bound_probe(kind: str, x, *, gamma: int | None = None, alpha: int | None = None, beta: int | None = None):
    """Order-of-magnitude envelope of the dropped remainder.

    ``"diag"``: r_gamma^2 ||x|| (for vt_gamma).
    ``"offdiag"``: |x_a x_b| / ||x_ab|| * r_ab^2 with r_ab = ||x_ab||^2/||x||^2.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if kind == "diag":
        if gamma is None or not 1 <= gamma <= d:
            raise BasisIndexError("diag envelope needs 1 <= gamma <= d")
        norm = _nonzero_norm(x)
        r = x[..., gamma - 1] ** 2 / norm**2
        return _scalar(r**2 * norm)
    if kind == "offdiag":
        if alpha is None or beta is None or not 1 <= alpha < beta <= d:
            raise BasisIndexError("offdiag envelope needs 1 <= alpha < beta <= d")
        norm = _nonzero_norm(x)
        xa, xb = x[..., alpha - 1], x[..., beta - 1]
        pair_sq = xa**2 + xb**2
        r = pair_sq / norm**2
        with np.errstate(invalid="ignore", divide="ignore"):
            env = np.where(pair_sq > 0, np.abs(xa * xb) / np.sqrt(pair_sq) * r**2, 0.0)
        return _scalar(env)
    raise ValueError(f"unknown remainder kind {kind!r}")
