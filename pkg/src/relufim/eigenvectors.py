"""Approximate eigenvectors of the Fisher information matrix J = E[X X^T].

Three clusters, all built column-by-column from W:

* G1: v0_i = ||W^(i)|| / sqrt(d), eigenvalue (2d+1)/(4 pi)
* G2: v_l = row l of W, eigenvalue 1/4
* G3: v_(a,b)_i = sqrt(d+2) W_a^(i) W_b^(i) / ||W^(i)|| for a < b, and the
  d-1 combinations v_g = vt_g - vt_d / (sqrt(d)+1) of
  vt_g = (v_(g,g) - sqrt((d+2)/d) v0) / sqrt(2); eigenvalue 1/(2 pi (d+2))

Indices are 1-based throughout the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BasisIndexError, DegenerateColumnError
from .features import FeatureMap


class Group(str, Enum):
    G1 = "G1"
    G2 = "G2"
    G3_DIAG_TILDE = "G3_diag_tilde"
    G3_DIAG = "G3_diag"
    G3_OFFDIAG = "G3_offdiag"
    # v_(g,g): building block of the diagonal family, not itself an eigenvector
    G3_SQUARE = "G3_square"


def nominal_eigenvalues(d: int) -> dict[str, float]:
    return {
        "top": (2 * d + 1) / (4 * math.pi),
        "linear": 0.25,
        "quadratic": 1.0 / (2 * math.pi * (d + 2)),
    }


def nominal_for(group: Group, d: int) -> float:
    nom = nominal_eigenvalues(d)
    if group is Group.G1:
        return nom["top"]
    if group is Group.G2:
        return nom["linear"]
    if group is Group.G3_SQUARE:
        return math.nan
    return nom["quadratic"]


@dataclass(frozen=True, eq=False)
class BasisVector:
    group: Group
    index: tuple[int, ...]
    vector: np.ndarray = field(repr=False)
    nominal_eigenvalue: float

    @property
    def label(self) -> str:
        if not self.index:
            return self.group.value
        return f"{self.group.value}[{','.join(map(str, self.index))}]"


def _check_index(name: str, value: int, lo: int, hi: int) -> int:
    if not lo <= int(value) <= hi:
        raise BasisIndexError(f"{name}={value} outside [{lo}, {hi}]")
    return int(value)


def _safe_norms(fm: FeatureMap) -> np.ndarray:
    norms = fm.column_norms
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateColumnError(f"zero weight column(s) at hidden unit(s) {(zero + 1).tolist()}")
    return norms


def eig_v0(fm: FeatureMap) -> BasisVector:
    vec = fm.column_norms / math.sqrt(fm.d)
    return BasisVector(Group.G1, (), vec, nominal_for(Group.G1, fm.d))


def eig_vl(fm: FeatureMap, l: int) -> BasisVector:
    l = _check_index("l", l, 1, fm.d)
    return BasisVector(Group.G2, (l,), np.array(fm.W[l - 1]), 0.25)


def eig_v_ab(fm: FeatureMap, alpha: int, beta: int) -> BasisVector:
    """sqrt(d+2) W_a W_b / ||W|| per hidden unit; the pair is unordered."""
    a = _check_index("alpha", alpha, 1, fm.d)
    b = _check_index("beta", beta, 1, fm.d)
    a, b = min(a, b), max(a, b)
    vec = math.sqrt(fm.d + 2) * fm.W[a - 1] * fm.W[b - 1] / _safe_norms(fm)
    group = Group.G3_OFFDIAG if a < b else Group.G3_SQUARE
    return BasisVector(group, (a, b), vec, nominal_for(group, fm.d))


def _tilde(fm: FeatureMap, gamma: int, v0: np.ndarray, norms: np.ndarray) -> np.ndarray:
    d = fm.d
    square = math.sqrt(d + 2) * fm.W[gamma - 1] ** 2 / norms
    return (square - math.sqrt((d + 2) / d) * v0) / math.sqrt(2.0)


def eig_v_tilde_gamma(fm: FeatureMap, gamma: int) -> BasisVector:
    gamma = _check_index("gamma", gamma, 1, fm.d)
    norms = _safe_norms(fm)
    vec = _tilde(fm, gamma, norms / math.sqrt(fm.d), norms)
    return BasisVector(Group.G3_DIAG_TILDE, (gamma,), vec, nominal_for(Group.G3_DIAG_TILDE, fm.d))


def eig_v_gamma(fm: FeatureMap, gamma: int) -> BasisVector:
    gamma = _check_index("gamma", gamma, 1, fm.d - 1)
    norms = _safe_norms(fm)
    v0 = norms / math.sqrt(fm.d)
    vec = _tilde(fm, gamma, v0, norms) - _tilde(fm, fm.d, v0, norms) / (math.sqrt(fm.d) + 1.0)
    return BasisVector(Group.G3_DIAG, (gamma,), vec, nominal_for(Group.G3_DIAG, fm.d))


def basis_size(d: int) -> int:
    return d + d * (d + 1) // 2


def full_basis(fm: FeatureMap) -> list[BasisVector]:
    """All d + d(d+1)/2 vectors in canonical order.

    G1, then G2 by l, then G3-diagonal by gamma (1..d-1), then G3
    off-diagonal pairs (a, b), a < b, in lexicographic order.
    """
    if fm.d < 2:
        raise BasisIndexError("the full basis needs d >= 2")
    d = fm.d
    basis = [eig_v0(fm)]
    basis += [eig_vl(fm, l) for l in range(1, d + 1)]
    basis += [eig_v_gamma(fm, g) for g in range(1, d)]
    basis += [eig_v_ab(fm, a, b) for a in range(1, d + 1) for b in range(a + 1, d + 1)]
    return basis


def basis_matrix(basis: list[BasisVector]) -> np.ndarray:
    """Stack basis vectors as the columns of an ``(m, k)`` matrix."""
    return np.column_stack([b.vector for b in basis])
