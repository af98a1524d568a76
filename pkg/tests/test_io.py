"""CSV and JSON round trips."""

import numpy as np
import pytest

from funskewclust.em import fit
from funskewclust.io import (CurveCsvError, read_curves_csv, read_truth_csv,
                             result_from_json, result_to_json,
                             write_curves_csv, write_labels_csv,
                             write_truth_csv)
from funskewclust.model import ParsimonyConfig
from funskewclust.sim import builtin_scenario, simulate


def small_fit():
    scenario = builtin_scenario("NIG-NIG", n=60)
    data, labels = simulate(scenario, seed=0)
    result = fit(data, 2, ParsimonyConfig(), "NIG", "NIG", seed=0, max_iter=40)
    return data, labels, result


def test_curve_csv_round_trip(tmp_path):
    scenario = builtin_scenario("NIG-VG", n=5)
    data, _ = simulate(scenario, seed=1)
    from funskewclust.funbasis import CurveSet, eval_basis, fit_coefficients
    grid = np.linspace(0, 1, 101)
    phi = eval_basis(data.bases_x[0], grid)
    samples = {}
    for i, cid in enumerate(data.curve_ids):
        samples[(cid, "X1")] = (grid, phi @ data.c_x[i])
        samples[(cid, "Y1")] = (grid, phi @ data.c_y[i])
    curves = CurveSet(samples=samples, roles={"X1": "X", "Y1": "Y"})
    path = str(tmp_path / "curves.csv")
    write_curves_csv(path, curves)
    back = read_curves_csv(path)
    assert back.roles == curves.roles
    assert set(back.samples) == set(curves.samples)
    ds = fit_coefficients(back, {"X1": data.bases_x[0]}, {"Y1": data.bases_y[0]})
    # Smoothing the re-read curves must reproduce the coefficients closely.
    np.testing.assert_allclose(ds.c_x, data.c_x, atol=1e-8)
    np.testing.assert_allclose(ds.c_y, data.c_y, atol=1e-8)


def test_curve_csv_errors_name_lines(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("curve_id,variable,role,t,value\n"
                    "c1,X1,X,0.0,1.0\n"
                    "c1,X1,X,0.5,oops\n")
    with pytest.raises(CurveCsvError, match="line 3"):
        read_curves_csv(str(path))
    path.write_text("curve_id,variable,role,t,value\nc1,X1,Q,0.0,1.0\n")
    with pytest.raises(CurveCsvError, match="role"):
        read_curves_csv(str(path))
    path.write_text("wrong,header\n")
    with pytest.raises(CurveCsvError, match="line 1"):
        read_curves_csv(str(path))
    path.write_text("curve_id,variable,role,t,value\n")
    with pytest.raises(CurveCsvError, match="no data"):
        read_curves_csv(str(path))
    path.write_text("curve_id,variable,role,t,value\n"
                    "c1,X1,X,0.0,1.0\nc1,X1,Y,0.5,1.0\n")
    with pytest.raises(CurveCsvError, match="conflicting"):
        read_curves_csv(str(path))


def test_truth_csv_round_trip(tmp_path):
    path = str(tmp_path / "truth.csv")
    write_truth_csv(path, ["a", "b", "c"], np.array([0, 1, 1]))
    assert read_truth_csv(path) == {"a": 0, "b": 1, "c": 1}
    (tmp_path / "bad.csv").write_text("nope\n")
    with pytest.raises(CurveCsvError):
        read_truth_csv(str(tmp_path / "bad.csv"))


def test_labels_csv_format(tmp_path):
    path = tmp_path / "labels.csv"
    t = np.array([[0.9, 0.1], [0.2, 0.8]])
    write_labels_csv(str(path), ["a", "b"], np.array([0, 1]), t)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "curve_id,label,posterior_0,posterior_1"
    assert lines[1].startswith("a,0,0.9")


def test_result_json_round_trip():
    data, _, result = small_fit()
    text = result_to_json(result, data)
    back, dataset = result_from_json(text)
    assert back.bic == result.bic
    assert back.n_iter == result.n_iter
    assert back.converged == result.converged
    np.testing.assert_array_equal(back.labels, result.labels)
    np.testing.assert_allclose(back.t, result.t, rtol=0, atol=0)
    np.testing.assert_allclose(back.loglik_trace, result.loglik_trace)
    for k in range(2):
        xo, xb = result.model.x_params[k], back.model.x_params[k]
        np.testing.assert_array_equal(xo.mu_x, xb.mu_x)
        np.testing.assert_array_equal(xo.u, xb.u)
        assert xo.family_x.concentration == xb.family_x.concentration
        yo, yb = result.model.y_params[k], back.model.y_params[k]
        np.testing.assert_array_equal(yo.gamma_star, yb.gamma_star)
        np.testing.assert_array_equal(yo.sigma_y, yb.sigma_y)
    np.testing.assert_array_equal(dataset["c_x"], data.c_x)
    assert dataset["curve_ids"] == data.curve_ids
    assert dataset["bases_x"][0].degree == data.bases_x[0].degree


def test_result_json_without_dataset():
    _, _, result = small_fit()
    back, dataset = result_from_json(result_to_json(result))
    assert dataset is None
    assert back.model.K == 2


def test_result_json_deterministic():
    data, _, result = small_fit()
    assert result_to_json(result, data) == result_to_json(result, data)
