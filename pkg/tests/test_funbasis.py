"""B-spline smoothing, Gram matrices, and dataset assembly."""

import numpy as np
import pytest
from scipy.integrate import quad

from funskewclust.funbasis import (BSplineBasis, CurveSet, FunctionalDataset,
                                   eval_basis, fit_coefficients, gram_matrix,
                                   sqrt_psd)


def test_basis_counts_and_knots():
    basis = BSplineBasis.with_n_basis(6, degree=3)
    assert basis.n_basis == 6
    np.testing.assert_allclose(basis.interior_knots, [1 / 3, 2 / 3])
    assert basis.full_knots.size == 6 + 3 + 1
    with pytest.raises(ValueError):
        BSplineBasis.with_n_basis(3, degree=3)
    with pytest.raises(ValueError):
        BSplineBasis(degree=3, interior_knots=np.array([0.9, 0.5]),
                     domain=(0.0, 1.0))
    with pytest.raises(ValueError):
        BSplineBasis(degree=3, interior_knots=np.array([]), domain=(1.0, 0.0))


def test_basis_partition_of_unity():
    basis = BSplineBasis.with_n_basis(8, degree=3)
    t = np.linspace(0, 1, 57)
    phi = eval_basis(basis, t)
    assert phi.shape == (57, 8)
    np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(phi >= 0)
    with pytest.raises(ValueError):
        eval_basis(basis, np.array([-0.1]))


def test_basis_dict_round_trip():
    basis = BSplineBasis.with_n_basis(7, degree=2, domain=(-1.0, 3.0))
    again = BSplineBasis.from_dict(basis.to_dict())
    assert again.degree == basis.degree
    assert again.domain == basis.domain
    np.testing.assert_array_equal(again.interior_knots, basis.interior_knots)


def test_gram_matrix_matches_adaptive_quadrature():
    basis = BSplineBasis.with_n_basis(6, degree=3)
    g = gram_matrix([basis])

    def inner(i, j):
        # Integrate span by span; the product is a polynomial on each.
        bp = basis.breakpoints
        total = 0.0
        for lo, hi in zip(bp[:-1], bp[1:]):
            val, _ = quad(lambda t: eval_basis(basis, t)[0, i]
                          * eval_basis(basis, t)[0, j], lo, hi, limit=200)
            total += val
        return total

    for i in range(6):
        for j in range(i, 6):
            assert g[i, j] == pytest.approx(inner(i, j), abs=1e-10)
    # Symmetric positive definite
    assert np.allclose(g, g.T)
    assert np.linalg.eigvalsh(g)[0] > 0


def test_gram_matrix_block_diagonal_for_multiple_variables():
    b1 = BSplineBasis.with_n_basis(5, degree=3)
    b2 = BSplineBasis.with_n_basis(4, degree=2)
    g = gram_matrix([b1, b2])
    assert g.shape == (9, 9)
    assert np.all(g[:5, 5:] == 0) and np.all(g[5:, :5] == 0)
    np.testing.assert_allclose(g[:5, :5], gram_matrix([b1]))
    np.testing.assert_allclose(g[5:, 5:], gram_matrix([b2]))


def test_sqrt_psd_round_trip():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(5, 5))
    sym = m @ m.T
    root = sqrt_psd(sym)
    np.testing.assert_allclose(root @ root, sym, atol=1e-10)
    np.testing.assert_allclose(root, root.T, atol=1e-12)
    with pytest.raises(ValueError):
        sqrt_psd(m)
    with pytest.raises(ValueError):
        sqrt_psd(-np.eye(3))


def make_curves(n=4, seed=1):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 30)
    samples = {}
    for i in range(n):
        cid = f"c{i}"
        samples[(cid, "X1")] = (t, np.sin(2 * np.pi * t) + rng.normal(scale=0.01, size=30))
        samples[(cid, "Y1")] = (t, np.cos(np.pi * t) + rng.normal(scale=0.01, size=30))
    return CurveSet(samples=samples, roles={"X1": "X", "Y1": "Y"})


def test_fit_coefficients_recovers_spline_exactly():
    # A curve that is itself in the span must smooth with zero residual.
    basis = BSplineBasis.with_n_basis(6, degree=3)
    coef_true = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 0.25])
    t = np.linspace(0, 1, 40)
    vals = eval_basis(basis, t) @ coef_true
    curves = CurveSet(samples={("a", "X1"): (t, vals), ("a", "Y1"): (t, vals)},
                      roles={"X1": "X", "Y1": "Y"})
    ds = fit_coefficients(curves, {"X1": basis}, {"Y1": basis})
    np.testing.assert_allclose(ds.c_x[0], coef_true, atol=1e-10)
    np.testing.assert_allclose(ds.c_y[0], coef_true, atol=1e-10)
    assert ds.n == 1 and ds.r_x == 6 and ds.r_y == 6
    assert ds.curve_ids == ["a"]


def test_fit_coefficients_shapes_and_metric():
    curves = make_curves()
    bx = {"X1": BSplineBasis.with_n_basis(6)}
    by = {"Y1": BSplineBasis.with_n_basis(5)}
    ds = fit_coefficients(curves, bx, by)
    assert ds.c_x.shape == (4, 6) and ds.c_y.shape == (4, 5)
    np.testing.assert_allclose(ds.w_x, gram_matrix([bx["X1"]]))
    np.testing.assert_allclose(ds.w_x_sqrt @ ds.w_x_sqrt, ds.w_x, atol=1e-12)


def test_fit_coefficients_errors_name_the_curve():
    basis = BSplineBasis.with_n_basis(6)
    t = np.linspace(0, 1, 4)  # too few points for 6 coefficients
    curves = CurveSet(samples={("bad", "X1"): (t, np.zeros(4)),
                               ("bad", "Y1"): (np.linspace(0, 1, 30), np.zeros(30))},
                      roles={"X1": "X", "Y1": "Y"})
    with pytest.raises(ValueError, match="bad"):
        fit_coefficients(curves, {"X1": basis}, {"Y1": basis})
    with pytest.raises(ValueError, match="bases"):
        fit_coefficients(make_curves(), {"Z": basis}, {"Y1": basis})


def test_curveset_validation():
    t = np.array([0.0, 0.5, 0.4])
    with pytest.raises(ValueError, match="strictly increasing"):
        CurveSet(samples={("a", "X1"): (t, np.zeros(3))}, roles={"X1": "X"})
    with pytest.raises(ValueError, match="mismatch"):
        CurveSet(samples={("a", "X1"): (np.array([0.0, 1.0]), np.zeros(3))},
                 roles={"X1": "X"})
    with pytest.raises(ValueError, match="role"):
        CurveSet(samples={}, roles={"X1": "Q"})


def test_dataset_validation():
    basis = BSplineBasis.with_n_basis(6)
    with pytest.raises(ValueError, match="same number of rows"):
        FunctionalDataset(c_x=np.zeros((3, 6)), c_y=np.zeros((2, 6)),
                          w_x=np.eye(6), w_x_sqrt=np.eye(6),
                          bases_x=[basis], bases_y=[basis])
    with pytest.raises(ValueError, match="widths"):
        FunctionalDataset(c_x=np.zeros((3, 5)), c_y=np.zeros((3, 6)),
                          w_x=np.eye(5), w_x_sqrt=np.eye(5),
                          bases_x=[basis], bases_y=[basis])
