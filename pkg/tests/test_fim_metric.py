from __future__ import annotations

import math

import numpy as np
import pytest

from relufim.eigenvectors import eig_v0, eig_vl, full_basis, nominal_eigenvalues
from relufim.errors import EstimationError, ExplicitModeRefused, InvalidDimensionError
from relufim.features import activate, generate_weights
from relufim.fim_metric import (
    assign_clusters,
    decomposition_residual,
    empirical_fim_explicit,
    expected_cluster_counts,
    gram_summary,
    inner_product_mc,
)
from relufim.streams import Stream, gaussian_rows


@pytest.fixture(scope="module")
def fm():
    return generate_weights(8, 300, seed=2)


def test_zero_vector(fm):
    est = inner_product_mc(fm, np.zeros(fm.m), eig_v0(fm), 1000, seed=1)
    assert est.value == 0.0 and est.std_error == 0.0


def test_symmetry_bit_exact(fm):
    u, v = eig_v0(fm), eig_vl(fm, 3)
    assert inner_product_mc(fm, u, v, 5000, 3) == inner_product_mc(fm, v, u, 5000, 3)


def test_needs_two_samples(fm):
    with pytest.raises(EstimationError):
        inner_product_mc(fm, eig_v0(fm), eig_v0(fm), 1, 0)
    with pytest.raises(InvalidDimensionError):
        inner_product_mc(fm, np.ones(3), eig_v0(fm), 10, 0)


def test_std_error_halves_with_quadrupled_n(fm):
    v = eig_v0(fm)
    a = inner_product_mc(fm, v, v, 20_000, 4)
    b = inner_product_mc(fm, v, v, 40_000, 4)
    assert a.std_error / b.std_error == pytest.approx(math.sqrt(2), rel=0.2)


def test_worker_count_does_not_change_result(fm):
    v = eig_v0(fm)
    assert inner_product_mc(fm, v, v, 30_000, 5, workers=1) == inner_product_mc(fm, v, v, 30_000, 5, workers=3)


def test_two_routes_agree(fm):
    J = empirical_fim_explicit(fm, 20_000, seed=6)
    basis = full_basis(fm)[:6]
    for u in basis[:3]:
        for v in basis[3:]:
            est = inner_product_mc(fm, u, v, 20_000, 6)
            assert abs(u.vector @ J @ v.vector - est.value) < 1e-10


def test_explicit_fim_rank_one_and_trace(fm):
    J1 = empirical_fim_explicit(fm, 1, seed=7)
    X = activate(fm, gaussian_rows(7, Stream.FIM_SAMPLES, 0, 1, fm.d))[0]
    np.testing.assert_allclose(J1, np.outer(X, X), rtol=1e-14, atol=1e-16)
    assert np.linalg.matrix_rank(J1, tol=1e-10 * np.abs(J1).max()) == 1
    J = empirical_fim_explicit(fm, 500, seed=7)
    Xs = activate(fm, gaussian_rows(7, Stream.FIM_SAMPLES, 0, 500, fm.d))
    assert np.trace(J) == pytest.approx(np.mean(np.sum(Xs**2, axis=1)), rel=1e-12)
    ev = np.linalg.eigvalsh(J)
    assert ev[0] >= -1e-8 * ev[-1]
    np.testing.assert_array_equal(J, J.T)


def test_explicit_cap():
    with pytest.raises(ExplicitModeRefused, match="matrix-free"):
        empirical_fim_explicit(generate_weights(3, 2049, seed=0), 10, 0)


def test_top_eigenvalue_d20():
    J = empirical_fim_explicit(generate_weights(20, 1024, seed=0), 200_000, seed=0)
    top = np.linalg.eigvalsh(J)[-1]
    assert abs(top / nominal_eigenvalues(20)["top"] - 1) < 0.10


def test_gram_one_vector_and_duplicates(fm):
    v = eig_v0(fm)
    g1 = gram_summary(fm, [v], 1000, 0)
    assert g1.gram.shape == (1, 1) and g1.max_offdiag_abs == 0.0
    w = eig_vl(fm, 1)
    g = gram_summary(fm, [v, v, w], 2000, 0)
    assert g.gram[0, 0] == g.gram[0, 1] == g.gram[1, 1]
    assert g.gram[0, 2] == g.gram[1, 2]


def test_gram_symmetric_psd(fm):
    g = gram_summary(fm, full_basis(fm), 20_000, 8)
    np.testing.assert_array_equal(g.gram, g.gram.T)
    aggregate = np.sqrt(np.sum(g.std_error**2))
    assert np.linalg.eigvalsh(g.gram)[0] > -4 * aggregate
    assert g.to_dict()["thresholds_are_engineering_choices"] is True


@pytest.mark.xfail(
    strict=True,
    reason="finite-width spread: G3 vectors overlap G1 at O(m^-1/2), inflating their Fisher norms well beyond +-20%",
)
def test_gram_diagonal_within_band():
    fm = generate_weights(20, 2048, seed=0)
    g = gram_summary(fm, full_basis(fm), 200_000, 0)
    ratio = np.diag(g.gram) / g.nominal
    assert np.all((ratio >= 0.8) & (ratio <= 1.2))


@pytest.mark.xfail(
    strict=True,
    reason="at m=1e4 the squared norm of a weight row deviates from 1 by about sqrt(2/m); the estimate "
    "tracks that finite-width value, which differs from 1/4 by more than 4 standard errors at n=1e6",
)
def test_linear_eigenvalue_d50():
    fm = generate_weights(50, 10_000, seed=0)
    v = eig_vl(fm, 1)
    est = inner_product_mc(fm, v, v, 10**6, 0)
    assert abs(est.value - 0.25) < 4 * est.std_error


def test_assign_clusters_bands_and_ties():
    d = 20
    nom = nominal_eigenvalues(d)
    labels, in_band = assign_clusters(np.array([nom["top"] * 1.1, 0.26, nom["quadratic"] * 0.85, 1e-6, 0.5]), d)
    assert labels[:4] == ["top", "linear", "quadratic", "rest"]
    assert list(in_band) == [True, True, True, False, False]
    assert labels[4] == "linear"
    # overlapping bands resolve toward the larger nominal value
    labels, _ = assign_clusters(np.array([0.2]), 2, band=0.9)
    assert labels == ["top"]


def test_decomposition_single_unit():
    rep = decomposition_residual(generate_weights(2, 1, seed=0), 100, 0)
    assert rep.eigenvalues.shape == (1,)
    assert rep.to_dict()["expected_counts"] == expected_cluster_counts(2)
    assert math.isfinite(rep.residual_opnorm)
