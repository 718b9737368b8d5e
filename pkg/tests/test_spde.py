import numpy as np
import pytest

from poolsim.deterministic import analytic_no_feedback_loss, solve_pde_predictor_corrector
from poolsim.params import NameParams, PoolSpec, SystematicRiskModel, TimeGrid
from poolsim.risk import simulate_risk_path
from poolsim.rng import derive_stream
from poolsim.spde import (
    SpdeFdConfig,
    SpdeInstabilityError,
    cost_ratio_estimate,
    solve_spde_explicit,
    stability_threshold,
)

# instability showcase: large systematic sensitivity, Brownian factor,
# coarse mesh reaching high intensities
P_STIFF = NameParams(4.0, 1.0, 1.0, 1.5, 5.0)
POOL_STIFF = PoolSpec.homogeneous_pool(P_STIFF, 2.0)


def test_threshold_values():
    assert stability_threshold(0.1, 5.0, 10.0) == 4e-6
    assert stability_threshold(0.2, 5.0, 10.0) == 1.6e-5
    assert stability_threshold(0.1, 1.0, 1.0) == pytest.approx(1e-2, rel=1e-15)
    with pytest.raises(ValueError):
        stability_threshold(0.1, 0.0, 10.0)
    with pytest.raises(ValueError):
        stability_threshold(0.1, 2.0, 0.0)


def test_cost_ratio():
    # saturated branch: accuracy step already beyond the stability limit
    assert cost_ratio_estimate(100, 10, 1e-2, 0.1, 2.0, 10.0) == 10.0
    assert cost_ratio_estimate(100, 100, 1e-2, 0.1, 2.0, 10.0) == 1.0
    # unsaturated: the accuracy step is below the stability threshold (4e-6)
    r = cost_ratio_estimate(100, 100, 1e-6, 0.1, 5.0, 10.0)
    assert r == pytest.approx(1e-6 * 2500 / 0.01, rel=1e-12)
    with pytest.raises(ValueError):
        cost_ratio_estimate(0, 10, 1e-2, 0.1, 2.0, 10.0)


def test_same_path_same_evolution(fig1_pool, cir_model):
    grid = TimeGrid(delta=2e-5, horizon=0.01)
    risk = simulate_risk_path(cir_model, grid, derive_stream(41, ("risk", 0, 0)))
    cfg = SpdeFdConfig(mesh_size=0.1, lambda_max=10.0)
    a = solve_spde_explicit(fig1_pool, cir_model, cfg, risk)
    b = solve_spde_explicit(fig1_pool, cir_model, cfg, risk)
    assert np.array_equal(a.density, b.density)
    assert np.array_equal(a.loss, b.loss)


def test_boundary_rows_stay_zero(fig1_pool, cir_model):
    grid = TimeGrid(delta=2e-5, horizon=0.01)
    risk = simulate_risk_path(cir_model, grid, derive_stream(42, ("risk", 0, 0)))
    sol = solve_spde_explicit(fig1_pool, cir_model,
                              SpdeFdConfig(mesh_size=0.1, lambda_max=10.0), risk)
    assert sol.density[0] == 0.0
    assert sol.density[-1] == 0.0


def test_instability_classification():
    bm = SystematicRiskModel.brownian(0.0)
    cfg = SpdeFdConfig(mesh_size=0.1, lambda_max=10.0)
    # 100x the threshold: blows up
    grid = TimeGrid(delta=4e-4, horizon=0.1)
    risk = simulate_risk_path(bm, grid, derive_stream(43, ("risk", 0, 0)))
    with pytest.warns(UserWarning, match="stability threshold"):
        with pytest.raises(SpdeInstabilityError, match="instability detected"):
            solve_spde_explicit(POOL_STIFF, bm, cfg, risk)
    # at the threshold: completes
    grid_ok = TimeGrid(delta=4e-6, horizon=0.01)
    risk_ok = simulate_risk_path(bm, grid_ok, derive_stream(43, ("risk", 0, 0)))
    sol = solve_spde_explicit(POOL_STIFF, bm, cfg, risk_ok)
    assert np.isfinite(sol.loss).all()


@pytest.mark.filterwarnings("ignore:density undershoot")
def test_beta_s_disabled_converges_to_predictor_corrector(unit_grid):
    # the displayed stencil leaks mass at the degenerate boundary at O(mesh);
    # with contagion feedback the gap at mesh .05 is ~0.15, shrinking roughly
    # linearly (measured .146/.020/.0043 at mesh .05/.02/.01), so the 1e-2
    # agreement is asserted at mesh .01 and the trend must be decreasing
    pool = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 2.0, 0.0), 0.2)
    none = SystematicRiskModel.none()
    pc = solve_pde_predictor_corrector(pool, unit_grid, 0.01, 10.0, 2).loss[-1]
    gaps = []
    for mesh, dt in ((0.05, 1e-4), (0.02, 2e-5), (0.01, 5e-6)):
        grid = TimeGrid(delta=dt, horizon=1.0)
        risk = simulate_risk_path(none, grid, derive_stream(44, ("risk", 0, 0)))
        sol = solve_spde_explicit(pool, none, SpdeFdConfig(mesh_size=mesh, lambda_max=10.0), risk)
        gaps.append(abs(sol.loss[-1] - pc))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


@pytest.mark.filterwarnings("ignore:density undershoot")
def test_small_beta_s_weak_perturbation():
    # calibrated on beta_s = 0 (same mesh, same scheme): the ensemble mean at
    # beta_s = .1 must sit within 1e-2 + 3 SE of the scheme's own beta_s = 0
    # value. dt = 1e-3 keeps the sigma-driven CFL satisfied (the beta_s
    # criterion alone allows 1e-2 but the diffusion term binds first here).
    grid = TimeGrid(delta=1e-3, horizon=1.0)
    cfg = SpdeFdConfig(mesh_size=0.1, lambda_max=10.0)
    none = SystematicRiskModel.none()
    pool0 = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 0.0, 0.0), 0.2)
    base = solve_spde_explicit(
        pool0, none, cfg,
        simulate_risk_path(none, grid, derive_stream(45, ("risk", 0, 0)))).loss[-1]

    bm = SystematicRiskModel.brownian(0.0)
    pool1 = PoolSpec.homogeneous_pool(NameParams(4, .2, .9, 0.0, 0.1), 0.2)
    losses = np.array([
        solve_spde_explicit(
            pool1, bm, cfg,
            simulate_risk_path(bm, grid, derive_stream(45, ("risk", m, 0)))).loss[-1]
        for m in range(200)
    ])
    se = losses.std() / np.sqrt(len(losses))
    assert abs(losses.mean() - base) < 1e-2 + 3 * se
    # report the calibrated baseline against the closed form as well
    gap_to_analytic = abs(base - analytic_no_feedback_loss(pool0, 1.0))
    assert gap_to_analytic < 0.05  # coarse-mesh boundary bias, documented


def test_undershoot_monitored_not_enforced():
    # near-threshold stochastic advection makes the density dip negative; the
    # solver warns and keeps going rather than clipping
    bm = SystematicRiskModel.brownian(0.0)
    grid = TimeGrid(delta=4e-6, horizon=0.01)
    risk = simulate_risk_path(bm, grid, derive_stream(43, ("risk", 0, 0)))
    with pytest.warns(UserWarning, match="density undershoot"):
        sol = solve_spde_explicit(POOL_STIFF, bm,
                                  SpdeFdConfig(mesh_size=0.1, lambda_max=10.0), risk)
    assert sol.undershoot
    assert sol.min_density < -1e-3 * sol.max_density
    assert np.isfinite(sol.loss).all()


def test_rejects_heterogeneous_pool(cir_model):
    from poolsim.params import PoolEntry
    pool = PoolSpec(entries=(
        PoolEntry(NameParams(4, .2, .9, 2, 2), 0.2, 1),
        PoolEntry(NameParams(3, .2, .9, 2, 2), 0.3, 1),
    ))
    grid = TimeGrid(delta=1e-5, horizon=0.001)
    risk = simulate_risk_path(cir_model, grid, derive_stream(47, ("risk", 0, 0)))
    with pytest.raises(ValueError, match="one parameter bucket"):
        solve_spde_explicit(pool, cir_model, SpdeFdConfig(mesh_size=0.1, lambda_max=10.0), risk)
