"""Approximate eigenfunctions of the Fisher information of a ReLU random-feature model."""

from __future__ import annotations

from .eigenvectors import (
    BasisVector,
    Group,
    basis_size,
    eig_v0,
    eig_v_ab,
    eig_v_gamma,
    eig_v_tilde_gamma,
    eig_vl,
    full_basis,
    nominal_eigenvalues,
)
from .features import FeatureMap, activate, eval_basis, generate_weights
from .fim_metric import decomposition_residual, empirical_fim_explicit, gram_summary, inner_product_mc
from .limits import LimitFn, SpecialConstants, limit_F0, limit_Fdiag, limit_Fl, limit_Foffdiag, limit_Ftilde

__version__ = "0.1.0"

__all__ = [
    "BasisVector",
    "FeatureMap",
    "Group",
    "LimitFn",
    "SpecialConstants",
    "activate",
    "basis_size",
    "decomposition_residual",
    "eig_v0",
    "eig_v_ab",
    "eig_v_gamma",
    "eig_v_tilde_gamma",
    "eig_vl",
    "empirical_fim_explicit",
    "eval_basis",
    "full_basis",
    "generate_weights",
    "gram_summary",
    "inner_product_mc",
    "limit_F0",
    "limit_Fdiag",
    "limit_Fl",
    "limit_Foffdiag",
    "limit_Ftilde",
    "nominal_eigenvalues",
]
