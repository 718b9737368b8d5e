import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from poolsim.deterministic import (
    analytic_no_feedback_loss,
    project_point_masses,
    riccati_coefficients,
    solve_pde_predictor_corrector,
)
from poolsim.moments import simulate_limiting_loss
from poolsim.params import NameParams, PoolEntry, PoolSpec, SimConfig, SystematicRiskModel, TimeGrid

P_NOFEED = NameParams(4.0, 0.2, 0.9, 0.0, 0.0)
POOL_NOFEED = PoolSpec.homogeneous_pool(P_NOFEED, 0.2)


def riccati_oracle(params: NameParams, t: float) -> tuple[float, float]:
    """Brute-force integration of B' = sigma^2 B^2/2 - alpha B - 1,
    A' = alpha lam_bar B from zero initial conditions."""
    def rhs(_t, y):
        b, a = y
        return [0.5 * params.sigma**2 * b * b - params.alpha * b - 1.0,
                params.alpha * params.lambda_bar * b]
    sol = solve_ivp(rhs, (0.0, t), [0.0, 0.0], rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def test_loss_zero_at_time_zero():
    assert analytic_no_feedback_loss(POOL_NOFEED, 0.0) == pytest.approx(0.0, abs=1e-14)
    rc = riccati_coefficients(P_NOFEED)
    assert rc.A(0.0) == pytest.approx(0.0, abs=1e-14)
    assert rc.B(0.0) == pytest.approx(0.0, abs=1e-14)


def test_alpha_zero_special_case():
    # alpha = 0: A == 0 and B(t) = -(sqrt2/sigma) tanh(sigma t / sqrt2)
    p = NameParams(0.0, 0.2, 0.9, 0.0, 0.0)
    rc = riccati_coefficients(p)
    for t in (0.3, 0.7, 1.0):
        assert rc.A(t) == pytest.approx(0.0, abs=1e-14)
        expect = -(math.sqrt(2) / 0.9) * math.tanh(0.9 * t / math.sqrt(2))
        assert rc.B(t) == pytest.approx(expect, rel=1e-13)
    b_num, a_num = riccati_oracle(p, 1.0)
    pool = PoolSpec.homogeneous_pool(p, 0.2)
    oracle_loss = 1.0 - math.exp(a_num + b_num * 0.2)
    assert abs(analytic_no_feedback_loss(pool, 1.0) - oracle_loss) < 1e-8


def test_riccati_oracle_generic_params():
    for params in (P_NOFEED, NameParams(2.0, 0.5, 0.4, 0, 0), NameParams(1.0, 0.05, 1.3, 0, 0)):
        rc = riccati_coefficients(params)
        b_num, a_num = riccati_oracle(params, 1.0)
        assert abs(rc.B(1.0) - b_num) < 1e-8
        assert abs(rc.A(1.0) - a_num) < 1e-8


def test_analytic_rejects_feedback_or_degenerate_sigma():
    with pytest.raises(ValueError):
        analytic_no_feedback_loss(
            PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 1.0, 0), 0.2), 1.0)
    with pytest.raises(ValueError):
        analytic_no_feedback_loss(
            PoolSpec.homogeneous_pool(NameParams(4, .2, 0.0, 0, 0), 0.2), 1.0)


def test_analytic_mixture_pool():
    mix = PoolSpec(entries=(PoolEntry(P_NOFEED, 0.1, 1), PoolEntry(P_NOFEED, 0.4, 3)))
    lo = analytic_no_feedback_loss(PoolSpec.homogeneous_pool(P_NOFEED, 0.1), 1.0)
    hi = analytic_no_feedback_loss(PoolSpec.homogeneous_pool(P_NOFEED, 0.4), 1.0)
    mixed = analytic_no_feedback_loss(mix, 1.0)
    assert mixed == pytest.approx(0.25 * lo + 0.75 * hi, rel=1e-14)


def test_analytic_vs_moment_cascade():
    grid = TimeGrid(delta=1e-3, horizon=1.0)
    run = simulate_limiting_loss(POOL_NOFEED, SystematicRiskModel.none(), grid, 15,
                                 SimConfig(trials=1, master_seed=1))
    assert abs(run.samples.losses[0, 0] - analytic_no_feedback_loss(POOL_NOFEED, 1.0)) < 1e-3


def test_pde_matches_analytic_no_feedback(unit_grid):
    pde = solve_pde_predictor_corrector(POOL_NOFEED, unit_grid,
                                        mesh_size=0.01, lambda_max=10.0, substeps=2)
    for t in (0.25, 0.5, 1.0):
        j = unit_grid.index_of(t)
        assert abs(pde.loss[j] - analytic_no_feedback_loss(POOL_NOFEED, t)) < 1e-3


def test_pde_mass_bounded_and_loss_monotone(unit_grid):
    pool = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 2.0, 0.0), 0.2)
    pde = solve_pde_predictor_corrector(pool, unit_grid,
                                        mesh_size=0.05, lambda_max=10.0, substeps=2)
    assert pde.mass() <= 1.0 + 1e-6
    assert (1.0 - pde.loss <= 1.0 + 1e-6).all()
    assert (np.diff(pde.loss) >= -1e-9).all()


def test_pde_conservation_identity(unit_grid):
    # |(1 - mass(t)) - dt * cum(first moment)| <= 1e-2 at t=1; the beta_c = 0
    # leg calibrates the bound (both legs come in around 1e-3 here)
    for beta_c in (0.0, 2.0):
        pool = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, beta_c, 0.0), 0.2)
        sol = solve_pde_predictor_corrector(pool, unit_grid,
                                            mesh_size=0.02, lambda_max=10.0, substeps=2)
        cum = unit_grid.delta * np.cumsum(sol.first_moment)
        assert abs(sol.loss[-1] - cum[-1]) < 1e-2


def test_pde_predictor_substeps_converge(unit_grid):
    pool = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 2.0, 0.0), 0.2)
    pde = solve_pde_predictor_corrector(pool, unit_grid,
                                        mesh_size=0.05, lambda_max=10.0, substeps=4)
    ch = pde.substep_changes
    assert ch.shape == (unit_grid.steps, 3)
    assert (np.diff(ch, axis=1) <= 1e-14).all()


def test_pde_mesh_refinement_second_order(unit_grid):
    pool = POOL_NOFEED
    target = analytic_no_feedback_loss(pool, 1.0)
    coarse = solve_pde_predictor_corrector(pool, unit_grid, 0.04, 10.0, 2).loss[-1]
    grid_fine = TimeGrid(delta=0.005, horizon=1.0)
    fine = solve_pde_predictor_corrector(pool, grid_fine, 0.02, 10.0, 2).loss[-1]
    assert abs(fine - target) < abs(coarse - target)


def test_pde_rejects_bad_inputs(unit_grid):
    with pytest.raises(ValueError):
        solve_pde_predictor_corrector(
            PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 0, 1.0), 0.2),
            unit_grid, 0.05, 10.0)
    with pytest.raises(ValueError):
        solve_pde_predictor_corrector(POOL_NOFEED, unit_grid, 0.05, 10.0, substeps=0)


def test_point_mass_projection():
    pool = PoolSpec.homogeneous_pool(P_NOFEED, 0.23)
    v = project_point_masses(pool, 0.1, 10.0)
    mesh = np.arange(len(v)) * 0.1
    # mass and mean preserved
    assert 0.1 * v.sum() == pytest.approx(1.0, rel=1e-12)
    assert 0.1 * (mesh * v).sum() == pytest.approx(0.23, rel=1e-12)
    # on-node mass lands on a single node
    v2 = project_point_masses(PoolSpec.homogeneous_pool(P_NOFEED, 0.2), 0.1, 10.0)
    assert np.count_nonzero(v2) == 1
    with pytest.raises(ValueError):
        project_point_masses(PoolSpec.homogeneous_pool(P_NOFEED, 0.001), 0.1, 10.0)
