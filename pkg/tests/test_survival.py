import numpy as np
import pytest

from defaultlab.calculus import affine_solve
from defaultlab.errors import ConfigurationError
from defaultlab.grids import TimeGrid, sample_bundle, three_branch_model
from defaultlab.survival import SupermartingaleModel, ZGeneratorConfig, generate_z, tilde_m_increments
from defaultlab.tree import ScenarioTree, tree_path_matrix


def bundle_model(config, steps=20, paths=300, seed=1, horizon=1.0):
    grid = TimeGrid(horizon, steps)
    bundle = sample_bundle(grid, three_branch_model(), paths, seed)
    return generate_z(config, bundle)


def tree_model(config, steps=4, horizon=1.0, with_coin=False):
    tree = ScenarioTree(TimeGrid(horizon, steps), three_branch_model(with_coin=with_coin))
    return generate_z(config, tree)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ZGeneratorConfig(z0=1.2)
    with pytest.raises(ConfigurationError):
        ZGeneratorConfig(z0=0.5, rate=-1.0)
    with pytest.raises(ConfigurationError):
        ZGeneratorConfig(z0=0.5, jump_size=0.1)  # no jump time
    with pytest.raises(ConfigurationError):
        ZGeneratorConfig(z0=0.5, eps=0.5)


def test_deterministic_reduction():
    # sigma = jump_scale = 0: Z_k = z0 * exp(-rate * t_k), no martingale part
    cfg = ZGeneratorConfig(z0=0.8, rate=0.5)
    model = bundle_model(cfg, steps=10, paths=3)
    t = model.grid.times
    np.testing.assert_allclose(model.z, np.tile(0.8 * np.exp(-0.5 * t), (3, 1)), rtol=1e-13)
    assert np.all(model.tilde_m_increments == 0.0)
    np.testing.assert_allclose(model.m, 0.8, rtol=1e-13)


def test_compensator_closed_form_hand_value():
    # rate 0.1, dt 0.1, Z_{k-1} = 0.8: dA_1 = 0.8 (1 - e^{-0.01})
    cfg = ZGeneratorConfig(z0=0.8, rate=0.1)
    model = bundle_model(cfg, steps=10, paths=2, horizon=1.0)
    np.testing.assert_allclose(model.a_increments[:, 0], 7.960133000665604e-3, rtol=1e-12)


def test_predictable_jump_of_decay_curve():
    cfg = ZGeneratorConfig(z0=0.7, rate=0.0, jump_time=0.5, jump_size=0.3, sigma=0.2)
    model = bundle_model(cfg, steps=10, paths=50)
    k = model.jump_index
    assert k == 5
    # off the jump, rate 0 gives exactly zero compensator increments
    off = np.delete(model.a_increments, k - 1, axis=1)
    assert np.all(off == 0.0)
    # at the jump, dA = Z_{k-1} (1 - e^{-0.3}) > 0
    z_prev = model.z[:, k - 1]
    np.testing.assert_allclose(
        model.a_increments[:, k - 1], z_prev * (1.0 - np.exp(-0.3)), rtol=1e-13
    )
    assert np.all(model.a_increments[:, k - 1] > 0.0)


def test_identity_pred_projection_times_one_plus_dm():
    cfg = ZGeneratorConfig(z0=0.6, rate=0.4, sigma=0.5, jump_scale=0.2)
    model = bundle_model(cfg, steps=30, paths=200, seed=3)
    ps = model.pred_one_minus_z
    dm = model.tilde_m_increments
    # canonical grouping is bitwise; spec grouping agrees to a few ulps
    assert np.all(ps + ps * dm == model.s[:, 1:])
    np.testing.assert_allclose(ps * (1.0 + dm), model.s[:, 1:], rtol=0, atol=5e-16)
    assert np.all(dm > -1.0)
    # pointwise: -dM + p(1-Z) = 1 - Z with dM = -pS dm
    np.testing.assert_allclose(ps * dm + ps, model.s[:, 1:], rtol=0, atol=5e-16)


def test_one_minus_z_solves_affine_equation():
    cfg = ZGeneratorConfig(z0=0.6, rate=0.4, sigma=0.5, jump_scale=0.2, jump_time=0.25, jump_size=0.1)
    model = bundle_model(cfg, steps=40, paths=100, seed=8)
    ref = affine_solve(model.s[:, 0], model.tilde_m_increments, model.a_increments)
    np.testing.assert_allclose(ref, model.s, rtol=0, atol=2e-14)


def test_containment_band_holds_pathwise():
    cfg = ZGeneratorConfig(z0=0.5, rate=0.3, sigma=0.6, jump_scale=0.3, eps=0.02)
    model = bundle_model(cfg, steps=50, paths=2000, seed=5)
    assert np.all(model.z > cfg.eps)
    assert np.all(model.z < 1.0 - cfg.eps)


def test_envelope_rejects_wild_configs():
    grid = TimeGrid(1.0, 20)
    bundle = sample_bundle(grid, three_branch_model(), 10, 0)
    with pytest.raises(ConfigurationError):
        generate_z(ZGeneratorConfig(z0=0.5, sigma=4.0), bundle)
    with pytest.raises(ConfigurationError):
        # heavy decay drives Z below the band
        generate_z(ZGeneratorConfig(z0=0.1, rate=3.0, eps=0.02), bundle)


def test_martingale_part_constant_mean_mc():
    cfg = ZGeneratorConfig(z0=0.55, rate=0.2, sigma=0.5, jump_scale=0.25)
    model = bundle_model(cfg, steps=25, paths=100_000, seed=11)
    m = model.m
    se = m.std(axis=0, ddof=1) / np.sqrt(m.shape[0])
    drift = np.abs(m.mean(axis=0) - m[:, 0].mean())
    assert np.all(drift[1:] <= 3.0 * se[1:] + 1e-12)


def test_tree_dm_has_exactly_zero_conditional_mean():
    # single-component and mixed configs, with and without the coin block
    configs = [
        ZGeneratorConfig(z0=0.6, rate=0.3, sigma=0.6),
        ZGeneratorConfig(z0=0.6, rate=0.3, jump_scale=0.4),
        ZGeneratorConfig(z0=0.6, rate=0.3, sigma=0.5, jump_scale=0.3, jump_time=0.5, jump_size=0.2),
    ]
    for with_coin in [False, True]:
        for cfg in configs:
            model = tree_model(cfg, steps=4, with_coin=with_coin)
            tree = model.carrier
            for dm in tilde_m_increments(model):
                assert np.all(tree.step_expectation(dm) == 0.0)


def test_tree_martingale_part_exact_mean():
    cfg = ZGeneratorConfig(z0=0.6, rate=0.3, sigma=0.5, jump_scale=0.3)
    model = tree_model(cfg, steps=4)
    tree = model.carrier
    # E[M_k] is constant in k (here: up to reduction roundoff)
    means = [tree.expectation(lvl) for lvl in model.m]
    np.testing.assert_allclose(means, means[0], rtol=0, atol=1e-13)
    # and the increments satisfy the supermartingale split exactly:
    # E[S_k|node] = pS_k holds because dm averages to exactly zero
    for k in range(1, 5):
        e = tree.step_expectation(model.s[k])
        ps = model.pred_one_minus_z[k - 1]
        np.testing.assert_allclose(e, ps, rtol=0, atol=5e-16)


def test_tree_one_minus_z_affine_along_paths():
    cfg = ZGeneratorConfig(z0=0.7, rate=0.5, sigma=0.4, jump_scale=0.2, jump_time=0.5, jump_size=0.15)
    model = tree_model(cfg, steps=4)
    tree = model.carrier
    dm = tree_path_matrix(tree, model.tilde_m_increments)
    da = tree_path_matrix(tree, model.a_increments, predictable=True)
    ref = affine_solve(model.s[0][0], dm, da)
    leafwise = tree_path_matrix(tree, model.s[1:])
    np.testing.assert_allclose(ref[:, 1:], leafwise, rtol=0, atol=2e-14)


def test_tilde_m_view_is_validated():
    cfg = ZGeneratorConfig(z0=0.6, sigma=0.4)
    model = bundle_model(cfg, steps=5, paths=4)
    out = tilde_m_increments(model)
    assert out is model.tilde_m_increments
    assert isinstance(model, SupermartingaleModel)
