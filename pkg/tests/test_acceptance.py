"""End-to-end acceptance checks.

Each test exercises one stated criterion; the heavy benchmark runs are shared
through module-scoped fixtures so the whole file stays well under the runtime
budget.
"""

import numpy as np
import pytest

import test_em as em_helpers
import test_gig as gig_helpers
import test_skewdist as skew_helpers
from funskewclust.em import e_step, fit, m_step, select_model
from funskewclust.gig import gig_moments
from funskewclust.io import result_to_json
from funskewclust.metrics import ari
from funskewclust.model import ParsimonyConfig
from funskewclust.sim import benchmark, builtin_scenario, simulate
from funskewclust.skewdist import NIG, ST, VG, SkewParams, skew_log_density

SCENARIOS = ("NIG-NIG", "VG-VG", "NIG-VG", "ST-ST")
ARI_FLOORS = {"NIG-NIG": 0.75, "VG-VG": 0.80, "NIG-VG": 0.80, "ST-ST": 0.75}


@pytest.fixture(scope="module")
def benchmark_runs():
    """Ten replicates at n = 600 per scenario: true K, true families."""
    out = {}
    for name in SCENARIOS:
        scenario = builtin_scenario(name, n=600)
        out[name] = benchmark(scenario, n_reps=10, seed=0)
    return out


def test_criterion_1_density_quadrature_oracle():
    rng = np.random.default_rng(11)
    for d in (1, 2):
        for family in (VG(3.0), ST(4.0), NIG(2.0)):
            params = skew_helpers.random_params(rng, d, family)
            for _ in range(25):
                v = params.mu + rng.normal(scale=2.0, size=d)
                got = skew_log_density(v, params)
                want = skew_helpers.mixture_log_density(v, params)
                assert got == pytest.approx(want, rel=1e-6), (d, family)


def test_criterion_2_unified_equals_direct_forms():
    rng = np.random.default_rng(23)
    for _ in range(100):
        d = int(rng.integers(1, 5))
        family = [VG(rng.uniform(0.5, 8)), ST(rng.uniform(1, 12)),
                  NIG(rng.uniform(0.3, 5))][int(rng.integers(3))]
        params = skew_helpers.random_params(rng, d, family)
        v = params.mu + rng.normal(scale=1.5, size=d)
        got = skew_log_density(v, params)
        want = skew_helpers.direct_log_density(v, params)
        assert got == pytest.approx(want, abs=1e-10, rel=1e-10)


def test_criterion_3_gig_moments_against_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = rng.uniform(0.2, 20.0)
        b = rng.uniform(0.2, 20.0)
        lam = rng.uniform(-6.0, 6.0)
        got = gig_moments(a, b, lam)
        want = gig_helpers.quad_moments(a, b, lam)
        for g, w in zip(got, want):
            assert g == pytest.approx(w, rel=1e-6, abs=1e-9)


def test_criterion_4_e_step_paths_agree():
    rng = np.random.default_rng(17)
    fams = [("VG", "VG"), ("ST", "ST"), ("NIG", "NIG"), ("NIG", "VG"),
            ("VG", "ST")]
    for rep in range(20):
        fx, fy = fams[rep % len(fams)]
        model = em_helpers.random_model(rng, fx, fy)
        data = em_helpers.make_dataset(rng.normal(size=(15, em_helpers.R_X)),
                                       rng.normal(size=(15, em_helpers.R_Y)))
        stats = e_step(data, model)
        want = em_helpers.posterior_by_density_ratio(data, model)
        np.testing.assert_allclose(stats.t, want, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("fx,fy,seed", [("VG", "VG", 101), ("ST", "ST", 202),
                                        ("NIG", "NIG", 303),
                                        ("NIG", "VG", 404)])
def test_criterion_5_m_step_stationarity(fx, fy, seed):
    em_helpers.test_m_step_location_blocks_are_stationary(fx, fy, seed)


def test_criterion_6_em_ascent_in_benchmark_runs(benchmark_runs):
    checked = 0
    for name, summary in benchmark_runs.items():
        for rep in summary["replicates"]:
            trace = np.asarray(rep["loglik_trace"])
            drops = np.diff(trace) + 1e-8 * np.abs(trace[:-1])
            assert np.all(drops >= 0), (name, rep["replicate"])
            checked += 1
    assert checked == 40


def test_criterion_7_scenario_mean_ari(benchmark_runs):
    for name, floor in ARI_FLOORS.items():
        summary = benchmark_runs[name]
        assert summary["n_reps"] == 10
        assert summary["ari_mean"] >= floor, (name, summary["ari_mean"])


def test_criterion_8_nig_nig_gamma_mse(benchmark_runs):
    summary = benchmark_runs["NIG-NIG"]
    assert "gamma_mse" in summary
    for k, mse in enumerate(summary["gamma_mse"]):
        assert np.max(mse) <= 0.5, (k, float(np.max(mse)))


def test_criterion_9_bic_selects_true_k():
    scenario = builtin_scenario("NIG-NIG", n=600)
    hits = 0
    for seed in range(10):
        data, _ = simulate(scenario, seed=100 + seed)
        best = select_model(data, K_grid=[1, 2, 3, 4],
                            configs=[ParsimonyConfig()],
                            family_pairs=[("NIG", "NIG")], seed=seed)
        if best.model.K == 2:
            hits += 1
    assert hits >= 8, hits


def test_criterion_10_ari_identities():
    assert ari([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
    assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)
    rng = np.random.default_rng(1)
    vals = [ari(rng.integers(0, 3, size=50), rng.integers(0, 3, size=50))
            for _ in range(2000)]
    assert abs(np.mean(vals)) <= 0.02


def test_criterion_11_deterministic_result_json():
    scenario = builtin_scenario("NIG-NIG", n=120)
    data, _ = simulate(scenario, seed=5)
    jsons = []
    for _ in range(2):
        result = fit(data, 2, ParsimonyConfig(), "NIG", "NIG", seed=9)
        jsons.append(result_to_json(result, data))
    assert jsons[0] == jsons[1]
