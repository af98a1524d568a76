"""Model containers, parameter counting, and covariance-family projection."""

import numpy as np
import pytest

from funskewclust.model import (FLM_VARIANTS, SIGMA_Y_FAMILIES, ClusterModel,
                                ParsimonyConfig, XClusterParams,
                                YClusterParams, count_free_params,
                                family_from_name, family_name,
                                sigma_x_from_parts, sigma_y_project)
from funskewclust.skewdist import NIG, ST, VG


def test_free_param_hand_count():
    # K=1, R_X=2, R_Y=1, d=1, VVV + AkjBkQkDk, no tying:
    # 0 (pi) + 2 (mu) + 2 (alpha_X) + 1 (orientation) + 1 (a) + 1 (b)
    # + 3 (regression + intercept) + 1 (alpha_Y) + 1 (sigma_Y) + 2 (conc.)
    cfg = ParsimonyConfig(flm_variant="AkjBkQkDk", sigma_y_family="VVV")
    assert count_free_params(1, 2, 1, [1], cfg) == 14


def test_free_param_monotone_in_constraints():
    # Every constraint can only remove parameters relative to the full model.
    full = count_free_params(3, 6, 6, [2, 2, 2], ParsimonyConfig())
    for variant in FLM_VARIANTS:
        for fam in SIGMA_Y_FAMILIES:
            for tx in (False, True):
                cfg = ParsimonyConfig(flm_variant=variant, sigma_y_family=fam,
                                      common_psi_x=tx)
                assert count_free_params(3, 6, 6, [2, 2, 2], cfg) <= full


def test_free_param_tying_saves_k_minus_1():
    base = count_free_params(3, 6, 6, [2, 2, 2], ParsimonyConfig())
    tied = count_free_params(3, 6, 6, [2, 2, 2],
                             ParsimonyConfig(common_psi_x=True,
                                             common_psi_y=True))
    assert base - tied == 2 * (3 - 1)


def test_free_param_requires_dims_per_cluster():
    with pytest.raises(ValueError):
        count_free_params(2, 6, 6, [2], ParsimonyConfig())


def test_parsimony_config_validation():
    with pytest.raises(ValueError):
        ParsimonyConfig(flm_variant="nope")
    with pytest.raises(ValueError):
        ParsimonyConfig(sigma_y_family="XYZ")


def test_family_name_round_trip():
    for name, conc in (("VG", 2.0), ("ST", 4.0), ("NIG", 1.5)):
        fam = family_from_name(name, conc)
        assert family_name(fam) == name
        assert fam.concentration == conc
    with pytest.raises(ValueError):
        family_from_name("gauss", 1.0)


def make_x_params(r=4, d=2):
    u = np.linalg.qr(np.arange(1.0, r * d + 1).reshape(r, d))[0]
    return XClusterParams(mu_x=np.zeros(r), alpha_x=np.zeros(r), u=u,
                          a=np.array([3.0, 2.0])[:d], b=0.5, family_x=VG(2.0))


def test_x_params_validation():
    make_x_params()
    with pytest.raises(ValueError, match="orthonormal"):
        XClusterParams(mu_x=np.zeros(4), alpha_x=np.zeros(4),
                       u=np.ones((4, 2)), a=np.array([3.0, 2.0]), b=0.5,
                       family_x=VG(2.0))
    with pytest.raises(ValueError, match="descending"):
        XClusterParams(mu_x=np.zeros(4), alpha_x=np.zeros(4),
                       u=np.eye(4)[:, :2], a=np.array([2.0, 3.0]), b=0.5,
                       family_x=VG(2.0))
    with pytest.raises(ValueError, match="intrinsic"):
        XClusterParams(mu_x=np.zeros(2), alpha_x=np.zeros(2), u=np.eye(2),
                       a=np.array([3.0, 2.0]), b=0.5, family_x=VG(2.0))
    with pytest.raises(ValueError, match="positive"):
        XClusterParams(mu_x=np.zeros(4), alpha_x=np.zeros(4),
                       u=np.eye(4)[:, :2], a=np.array([3.0, 2.0]), b=-1.0,
                       family_x=VG(2.0))


def test_sigma_x_reconstruction_eigenstructure():
    x = make_x_params()
    sigma = sigma_x_from_parts(x, np.eye(4))
    vals = np.sort(np.linalg.eigvalsh(sigma))[::-1]
    np.testing.assert_allclose(vals, [3.0, 2.0, 0.5, 0.5], atol=1e-12)
    # With a nontrivial metric, eigenvalues live in the transformed space.
    w_sqrt_inv = np.diag([1.0, 0.5, 2.0, 1.0])
    sigma = sigma_x_from_parts(x, w_sqrt_inv)
    inv = np.linalg.inv(w_sqrt_inv)
    vals = np.sort(np.linalg.eigvalsh(inv @ sigma @ inv))[::-1]
    np.testing.assert_allclose(vals, [3.0, 2.0, 0.5, 0.5], atol=1e-12)


def test_y_params_validation_and_views():
    gs = np.arange(6.0).reshape(2, 3)
    y = YClusterParams(gamma_star=gs, alpha_y=np.zeros(2), sigma_y=np.eye(2),
                       family_y=NIG(1.0))
    np.testing.assert_array_equal(y.gamma, gs[:, :2])
    np.testing.assert_array_equal(y.gamma_0, gs[:, 2])
    with pytest.raises(ValueError, match="singular"):
        YClusterParams(gamma_star=gs, alpha_y=np.zeros(2),
                       sigma_y=np.zeros((2, 2)), family_y=NIG(1.0))
    with pytest.raises(ValueError, match="symmetric"):
        YClusterParams(gamma_star=gs, alpha_y=np.zeros(2),
                       sigma_y=np.array([[1.0, 0.5], [0.0, 1.0]]),
                       family_y=NIG(1.0))


def test_cluster_model_validation():
    x = make_x_params()
    y = YClusterParams(gamma_star=np.zeros((2, 5)), alpha_y=np.zeros(2),
                       sigma_y=np.eye(2), family_y=ST(4.0))
    ClusterModel(pi=np.array([0.4, 0.6]), x_params=[x, x], y_params=[y, y],
                 parsimony=ParsimonyConfig())
    with pytest.raises(ValueError, match="sum to 1"):
        ClusterModel(pi=np.array([0.4, 0.4]), x_params=[x, x],
                     y_params=[y, y], parsimony=ParsimonyConfig())
    with pytest.raises(ValueError, match="match K"):
        ClusterModel(pi=np.array([0.5, 0.5]), x_params=[x],
                     y_params=[y, y], parsimony=ParsimonyConfig())


def example_scatters():
    s1 = np.array([[4.0, 1.0], [1.0, 2.0]])
    s2 = np.array([[1.0, -0.5], [-0.5, 3.0]])
    return [s1, s2], np.array([10.0, 30.0])


def test_sigma_y_project_vvv_and_eee():
    s_list, n_k = example_scatters()
    out = sigma_y_project(s_list, n_k, "VVV")
    np.testing.assert_array_equal(out[0], s_list[0])
    out = sigma_y_project(s_list, n_k, "EEE")
    pooled = (10 * s_list[0] + 30 * s_list[1]) / 40
    np.testing.assert_allclose(out[0], pooled)
    np.testing.assert_allclose(out[1], pooled)


def test_sigma_y_project_diagonal_families():
    s_list, n_k = example_scatters()
    out = sigma_y_project(s_list, n_k, "VVI")
    np.testing.assert_allclose(out[0], np.diag([4.0, 2.0]))
    out = sigma_y_project(s_list, n_k, "EEI")
    np.testing.assert_allclose(out[0], np.diag([(40 + 30) / 40, (20 + 90) / 40]))
    out = sigma_y_project(s_list, n_k, "EII")
    # lam = (10*(4+2) + 30*(1+3)) / (40*2) = 180/80
    np.testing.assert_allclose(out[1], 2.25 * np.eye(2))
    out = sigma_y_project(s_list, n_k, "VII")
    np.testing.assert_allclose(out[0], 3.0 * np.eye(2))
    np.testing.assert_allclose(out[1], 2.0 * np.eye(2))


def test_sigma_y_project_evi_unit_determinant_shapes():
    s_list, n_k = example_scatters()
    out = sigma_y_project(s_list, n_k, "EVI")
    d0, d1 = np.diag(out[0]), np.diag(out[1])
    # Shapes share a common volume; each shape has unit geometric mean.
    assert np.prod(d0) == pytest.approx(np.prod(d1), rel=1e-10)
    g0 = np.sqrt(8.0)  # geometric mean of diag(s1) = sqrt(4*2)
    g1 = np.sqrt(3.0)
    lam = (10 * g0 + 30 * g1) / 40
    np.testing.assert_allclose(d0, lam * np.array([4.0, 2.0]) / g0, rtol=1e-10)


def test_sigma_y_project_vei_fixed_point_properties():
    s_list, n_k = example_scatters()
    out = sigma_y_project(s_list, n_k, "VEI")
    d0, d1 = np.diag(out[0]), np.diag(out[1])
    # Common shape up to a positive scalar volume per cluster.
    ratio = d0 / d1
    assert ratio[0] == pytest.approx(ratio[1], rel=1e-8)
    assert np.all(d0 > 0) and np.all(d1 > 0)


def test_sigma_y_project_validation():
    s_list, n_k = example_scatters()
    with pytest.raises(ValueError):
        sigma_y_project(s_list, n_k, "QQQ")
    with pytest.raises(ValueError):
        sigma_y_project(s_list, np.array([1.0, -1.0]), "VVV")
