from __future__ import annotations

import math

import numpy as np
import pytest

from relufim import dynamics
from relufim.dynamics import GDConfig, TrajectoryRecord, expand_in_basis, fit_rates, rate_fit, run_gd
from relufim.eigenvectors import BasisVector, Group, eig_v0, full_basis
from relufim.errors import ConfigError, EstimationError, RankDeficiencyError
from relufim.features import generate_weights
from relufim.fim_metric import empirical_fim_explicit


@pytest.mark.parametrize(
    "kwargs,field",
    [({"step": -1.0}, "step"), ({"iters": 0}, "iters"), ({"noise_std": -0.1}, "noise_std"), ({"mode": "sgd"}, "mode"),
     ({"mode": "empirical", "n_train": 0}, "n_train")],
)
def test_config_validation(kwargs, field):
    with pytest.raises(ConfigError) as info:
        GDConfig(d=3, m=10, **kwargs)
    assert info.value.field == field


def test_empirical_fixed_point():
    fm = generate_weights(5, 40, seed=1)
    target = dynamics.random_unit_target(40, 1)
    cfg = GDConfig(5, 40, seed=1, n_train=200, noise_std=0.0, step=0.1, iters=20, mode="empirical", target_v=target, init_v=target, n_fim=2000)
    run = run_gd(cfg, fm)
    assert all(r.loss == pytest.approx(0.0, abs=1e-28) for r in run.records)
    X, y = dynamics.training_set(fm, target, 200, 0.0, 1)
    grad = X.T @ (X @ target - y) / 200
    assert np.max(np.abs(grad)) < 1e-14


def test_population_loss_monotone():
    fm = generate_weights(6, 120, seed=2)
    run = run_gd(GDConfig(6, 120, seed=2, step_scale=1.9, iters=300, n_fim=5000), fm)
    loss = np.array([r.loss for r in run.records])
    assert np.all(np.diff(loss) <= 0)
    assert not run.warnings


def test_divergence_warning():
    fm = generate_weights(4, 30, seed=3)
    with pytest.warns(RuntimeWarning, match="diverge"):
        run = run_gd(GDConfig(4, 30, seed=3, step_scale=2.5, iters=5, n_fim=2000), fm)
    assert run.warnings


def test_exact_eigenvectors_decay_geometrically():
    fm = generate_weights(4, 64, seed=4)
    J = empirical_fim_explicit(fm, 5000, 4)
    lam, Q = np.linalg.eigh(J)
    picks = [63, 60, 50]
    basis = [BasisVector(Group.G2, (k,), Q[:, k], lam[k]) for k in picks]
    run = run_gd(GDConfig(4, 64, seed=4, iters=40), fm, basis, J)
    P = run.projection_matrix()
    for j, k in enumerate(picks):
        ratio = P[1:, j] / P[:-1, j]
        np.testing.assert_allclose(ratio, 1 - run.step * lam[k], rtol=1e-9)


def test_rate_fit_synthetic():
    traj = [TrajectoryRecord(t, 0.0, np.array([0.9**t, 0.0])) for t in range(100)]
    assert rate_fit(traj, 0) == pytest.approx(math.log(0.9), abs=1e-6)
    with pytest.raises(EstimationError):
        rate_fit(traj, 1)
    assert dynamics.half_life(math.log(0.5)) == pytest.approx(1.0)
    assert dynamics.half_life(0.0) == math.inf


@pytest.fixture(scope="module")
def pop_run():
    fm = generate_weights(20, 1024, seed=0)
    J = empirical_fim_explicit(fm, 200_000, 0)
    basis = full_basis(fm)
    step = 0.1 / np.linalg.eigvalsh(J)[-1]
    iters = dynamics.iterations_for(step, [b.nominal_eigenvalue for b in basis], 2.0)
    return run_gd(GDConfig(20, 1024, seed=0, iters=iters), fm, basis, J)


def test_top_projection_tracks_rayleigh(pop_run):
    (row,) = [r for r in fit_rates(pop_run) if r.group == "G1"]
    assert abs(row.rel_error) < 0.10


def test_half_life_ordering(pop_run):
    rows = fit_rates(pop_run)
    med = {g: np.median([r.half_life for r in rows if r.group == g]) for g in ("G1", "G2", "G3_offdiag")}
    assert med["G1"] < med["G2"] < med["G3_offdiag"]


def test_linear_to_quadratic_rate_ratio(pop_run):
    rows = {r.label: r for r in fit_rates(pop_run)}
    eta, d = pop_run.step, 20
    expected = math.log1p(-eta / 4) / math.log1p(-eta / (2 * math.pi * (d + 2)))
    ratio = rows["G2[1]"].fitted / rows["G3_offdiag[1,2]"].fitted
    assert abs(ratio / expected - 1) < 0.15


def test_expand_self_and_zero():
    fm = generate_weights(6, 300, seed=5)
    basis = full_basis(fm)
    exp = expand_in_basis(fm, eig_v0(fm).vector, basis, 20_000, 5)
    assert exp.coefficients[0] == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(exp.coefficients[1:])) < 1e-8
    zero = expand_in_basis(fm, np.zeros(300), basis, 20_000, 5)
    assert np.all(zero.coefficients == 0) and zero.residual_norm == 0.0


def test_expand_errors():
    fm = generate_weights(6, 300, seed=5)
    basis = full_basis(fm)
    with pytest.raises(RankDeficiencyError):
        expand_in_basis(fm, np.zeros(300), basis + basis[:1], 5000, 5)
    with pytest.warns(RuntimeWarning):
        expand_in_basis(fm, 2 * eig_v0(fm).vector, basis, 5000, 5)


def test_expand_random_unit_residual_small():
    fm = generate_weights(20, 2048, seed=0)
    v = dynamics.random_unit_target(2048, 7)
    exp = expand_in_basis(fm, v, full_basis(fm), 100_000, 0)
    assert exp.residual_norm**2 / exp.norm**2 < 0.1
