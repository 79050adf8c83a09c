import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betacopula.core import RankMatrix, RngStream, compute_ranks
from betacopula.exceptions import DomainError, GammaError
from betacopula.inference import (
    EULER_MASCHERONI,
    CvMKernel,
    PickandsEstimator,
    QuadratureSpec,
    Variant,
    WeightedCvMIndependenceTest,
    cfg_endpoint_corrected,
    cfg_log_estimate,
    cfg_log_integral,
    critical_value,
    cvm_statistic,
    graded_midpoints,
    imse_study,
    independence_test,
    null_distribution,
    p_value,
    pickands_curve,
    pickands_estimate,
    power_study,
    power_sweep,
    simplex_grid,
)
from betacopula.models import GumbelCopula, IndependenceCopula, StudentZeroCorrCopula

FAST_LINE = QuadratureSpec(check_refinement=False)


def random_ranks(n, d, seed):
    gen = np.random.default_rng(seed)
    return RankMatrix.from_ranks(np.column_stack([gen.permutation(n) + 1 for _ in range(d)]))


def toy_beta_copula(u, v):
    """C_2^beta for ranks (1, 2), (2, 1): F_{2,1}(s) = 2s - s^2, F_{2,2}(s) = s^2."""
    f1 = lambda s: 2 * s - s * s  # noqa: E731
    f2 = lambda s: s * s  # noqa: E731
    return 0.5 * (f1(u) * f2(v) + f2(u) * f1(v))


def dense_cvm_oracle(gamma, m=2001):
    s = (np.arange(m) + 0.5) / m
    u, v = np.meshgrid(s, s, indexing="ij")
    g = np.minimum(np.minimum(u, 1 - v), np.minimum(v, 1 - u))
    return 2 * np.sum((toy_beta_copula(u, v) - u * v) ** 2 / g**gamma) / m**2


# --- quadrature settings --------------------------------------------------------


def test_constants_and_spec():
    assert f"{EULER_MASCHERONI:.10f}" == "0.5772156649"
    q = QuadratureSpec()
    assert q.rule_for(2).value == "midpoint" and q.rule_for(3).value == "montecarlo"
    assert q.truncation(2) == 80.0
    assert q.digest() == QuadratureSpec().digest() != QuadratureSpec(grid_m=201).digest()
    for bad in (dict(grid_m=100), dict(mc_nodes=1000), dict(mc_nodes=5000), dict(grid_grading=0.5)):
        with pytest.raises(DomainError):
            QuadratureSpec(**bad)
    with pytest.raises(DomainError):
        QuadratureSpec(w_truncation=50).truncation(2)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_graded_midpoints_integrate_polynomials(p):
    u, w = graded_midpoints(401, p)
    assert np.all((u > 0) & (u < 1)) and np.all(np.diff(u) > 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-5)
    assert np.dot(w, u**3) == pytest.approx(0.25, abs=1e-5)


# --- the statistic ---------------------------------------------------------------


def test_statistic_trivial_cases():
    one = RankMatrix.from_ranks([[1, 1]])
    assert cvm_statistic(one, 0.0) == pytest.approx(0.0, abs=1e-30)
    assert cvm_statistic(random_ranks(30, 2, 0), 1.0) >= 0
    with pytest.raises(GammaError):
        cvm_statistic(one, 2.0)
    with pytest.raises(GammaError):
        cvm_statistic(one, -0.1)


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_statistic_against_dense_oracle(toy_ranks, gamma):
    got = cvm_statistic(toy_ranks, gamma)
    want = dense_cvm_oracle(gamma)
    assert abs(got - want) <= 1e-3 * want


def test_statistic_with_non_independence_null(toy_ranks):
    g = GumbelCopula(0.5)
    s = (np.arange(801) + 0.5) / 801
    u, v = np.meshgrid(s, s, indexing="ij")
    c = g.cdf(np.column_stack([u.ravel(), v.ravel()])).reshape(u.shape)
    want = 2 * np.mean((toy_beta_copula(u, v) - c) ** 2)
    assert cvm_statistic(toy_ranks, 0.0, c0=g) == pytest.approx(want, rel=1e-3)


@settings(max_examples=25)
@given(st.integers(2, 60), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_statistic_monotone_in_gamma(n, d, seed):
    gammas = (0.0, 0.5, 1.0, 1.5, 1.75, 1.99)
    kernel = CvMKernel(n, d, gammas, QuadratureSpec(grid_m=21, mc_nodes=4096))
    t = kernel.statistics(random_ranks(n, d, seed))
    assert np.all(np.diff(t) >= 0)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_statistic_rank_invariant(seed):
    x = np.random.default_rng(seed).normal(size=(40, 2))
    a = cvm_statistic(compute_ranks(x), 1.5)
    b = cvm_statistic(compute_ranks(np.column_stack([np.exp(x[:, 0]), x[:, 1] ** 3])), 1.5)
    assert a == b


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.75])
def test_midpoint_grid_convergence(gamma):
    for seed in range(3):
        ranks = compute_ranks(StudentZeroCorrCopula(2.0).sample(100, np.random.default_rng(seed)))
        a = cvm_statistic(ranks, gamma, quad=QuadratureSpec(grid_m=101))
        b = cvm_statistic(ranks, gamma, quad=QuadratureSpec(grid_m=201))
        assert abs(a - b) <= 1e-3 * b


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.75])
def test_sobol_convergence_d3(gamma):
    ranks = compute_ranks(GumbelCopula(0.7, d=3).sample(50, np.random.default_rng(1)))
    a = cvm_statistic(ranks, gamma, quad=QuadratureSpec(mc_nodes=2**14))
    b = cvm_statistic(ranks, gamma, quad=QuadratureSpec(mc_nodes=2**15))
    assert abs(a - b) <= 1e-3 * b


def test_d3_midpoint_matches_sobol():
    ranks = compute_ranks(GumbelCopula(0.5, d=3).sample(30, np.random.default_rng(2)))
    a = cvm_statistic(ranks, 0.5, quad=QuadratureSpec(cube_rule="midpoint", grid_m=41))
    b = cvm_statistic(ranks, 0.5)
    assert a == pytest.approx(b, rel=5e-3)


# --- calibration -----------------------------------------------------------------


def test_critical_value_rule():
    null = np.arange(1.0, 200.0)  # B = 199
    assert critical_value(null, 0.05) == 190.0
    assert critical_value(np.arange(1.0, 101.0), 0.001) == math.inf
    assert p_value(190.5, null) == pytest.approx(10 / 200)
    assert p_value(1000.0, null) == pytest.approx(1 / 200)
    assert p_value(0.0, null) == 1.0


def test_null_distribution_properties():
    a = null_distribution(20, 2, 1.0, 150, rng=RngStream(3))
    b = null_distribution(20, 2, 1.0, 150, rng=RngStream(3))
    assert np.array_equal(a, b) and np.all(np.diff(a) >= 0)
    assert not np.array_equal(a, null_distribution(20, 2, 1.0, 150, rng=RngStream(4)))
    with pytest.raises(ValueError):
        null_distribution(20, 2, 1.0, 99)


def test_null_shifts_right_with_gamma():
    from betacopula.inference import null_statistics

    stats = null_statistics(25, 2, [0.0, 0.5, 1.0, 1.75], 120, QuadratureSpec(), RngStream(5))
    assert np.all(np.diff(stats, axis=1) >= 0)


def test_comonotone_rejected():
    x = np.random.default_rng(0).random(50)
    rep = independence_test(np.column_stack([x, x]), 1.0, B=199, rng=1)
    assert rep.p_value == pytest.approx(1 / 200)
    assert rep.reject


def test_report_contents():
    x = np.random.default_rng(1).random((40, 2))
    rep = independence_test(x, 1.5, B=150, alpha_level=0.1, rng=RngStream(9, 2))
    d = json.loads(rep.to_json())
    assert d["n"] == 40 and d["d"] == 2 and d["B"] == 150 and d["seed"] == 9 and d["stream_id"] == 2
    assert d["quad"] == QuadratureSpec().digest()
    assert 0 < d["p_value"] <= 1
    assert d["reject"] == (rep.statistic > rep.critical_value)
    null = null_distribution(40, 2, 1.5, 150, rng=RngStream(9, 2).named("null"))
    assert rep.p_value == p_value(rep.statistic, null)
    assert json.loads(independence_test(x, 1.5, B=100, alpha_level=0.001).to_json())["critical_value"] is None


def test_reject_consistent_with_p_value():
    for seed in range(15):
        x = StudentZeroCorrCopula(2.0).sample(60, np.random.default_rng(seed))
        rep = independence_test(x, 1.75, B=199, rng=0)
        assert rep.reject == (rep.p_value <= 0.05)


@pytest.mark.slow
def test_level_of_full_test():
    null = null_distribution(50, 2, 1.0, 500, rng=0)
    rejections = 0
    for rep in range(1000):
        x = np.random.default_rng(10_000 + rep).random((50, 2))
        rejections += cvm_statistic(compute_ranks(x), 1.0) > critical_value(null, 0.05)
    assert abs(rejections / 1000 - 0.05) <= 0.02


# --- power -----------------------------------------------------------------------


def test_power_sweep_thread_invariant():
    args = (StudentZeroCorrCopula(2.0), 30, [0.5, 1.75], 40, 100)
    a = power_sweep(*args, rng=4, threads=1)
    b = power_sweep(*args, rng=4, threads=4)
    assert a == b
    assert [r.gamma for r in a] == [0.5, 1.75] and all(r.reps == 40 for r in a)


def test_power_under_independence_near_level():
    power, se = power_study(IndependenceCopula(2), 30, 1.0, 300, 200, rng=2)
    assert abs(power - 0.05) <= 3 * max(se, math.sqrt(0.05 * 0.95 / 300))
    with pytest.raises(ValueError):
        power_study(IndependenceCopula(2), 30, 1.0, 50, 200)


def test_recalibrated_power_runs():
    rows = power_sweep(StudentZeroCorrCopula(2.0), 20, [1.0], 3, 100, rng=1, recalibrate=True)
    assert 0 <= rows[0].power <= 1


# --- Pickands --------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.1, 0.5, 0.77])
def test_euler_mascheroni_identity(t):
    pi = IndependenceCopula(2)
    assert abs(cfg_log_integral(pi.cdf, t, 2)) <= 1e-6


def test_euler_mascheroni_identity_d3():
    pi = IndependenceCopula(3)
    assert np.max(np.abs(cfg_log_integral(pi.cdf, [[0.2, 0.3], [0.6, 0.1]], 3))) <= 1e-6


def test_log_integral_recovers_gumbel():
    g = GumbelCopula(0.5)
    t = np.array([0.2, 0.5, 0.9])
    est = np.exp(cfg_log_integral(g.cdf, t, 2))
    assert np.allclose(est, g.pickands(t), atol=1e-8)


def test_beta_vertices_exact(toy_ranks):
    ranks = random_ranks(40, 2, 1)
    assert abs(cfg_log_estimate(ranks, 1.0, "beta")) <= 1e-6
    assert abs(cfg_log_estimate(ranks, 0.0, "beta")) <= 1e-6
    assert pickands_estimate(ranks, 1.0, "beta") == 1.0
    assert pickands_estimate(ranks, 0.0, "beta") == 1.0
    r3 = random_ranks(30, 3, 2)
    assert np.all(pickands_estimate(r3, [[1, 0], [0, 1], [0, 0]], "beta") == 1.0)


def test_beta_variant_against_u_scale_oracle(toy_ranks):
    # midpoint rule with 10^6 nodes on each side of the jump at 1/e
    def piece(a, b, ind, m=1_000_000):
        u = a + (b - a) * (np.arange(m) + 0.5) / m
        c = toy_beta_copula(np.sqrt(u), np.sqrt(u))
        return np.sum((c - ind) / (u * np.log(u))) * (b - a) / m

    oracle = -EULER_MASCHERONI + piece(0.0, math.exp(-1), 0.0) + piece(math.exp(-1), 1.0, 1.0)
    assert abs(cfg_log_estimate(toy_ranks, 0.5, "beta") - oracle) <= 1e-5


def test_empirical_closed_form_against_step_integral():
    ranks = random_ranks(15, 2, 3)
    u = ranks.ranks / 16.0
    t = 0.35
    # C(e^{-w t}, e^{-w(1-t)}) is a step function in w with jumps at xi_i = min_j(-log u_ij / t_j)
    xi = np.sort(np.minimum(-np.log(u[:, 0]) / t, -np.log(u[:, 1]) / (1 - t)))
    w = np.concatenate([np.geomspace(1e-12, 1, 200_001), np.linspace(1, 60, 2_000_001)[1:]])
    c = 1.0 - np.searchsorted(xi, w, side="left") / 15.0
    f = (c - (w <= 1)) / w
    integral = np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(w))
    assert cfg_log_estimate(ranks, t, "cfg") == pytest.approx(-EULER_MASCHERONI - integral, abs=2e-3)


def test_endpoint_corrected_vertices():
    ranks = random_ranks(50, 2, 4)
    assert cfg_endpoint_corrected(ranks, 0.0) == 1.0
    assert cfg_endpoint_corrected(ranks, 1.0) == 1.0
    r3 = random_ranks(30, 3, 5)
    assert np.all(cfg_endpoint_corrected(r3, [[1, 0], [0, 1], [0, 0]]) == 1.0)


def test_endpoint_corrected_independence_consistency():
    passes = 0
    for rep in range(20):
        ranks = compute_ranks(np.random.default_rng(rep).random((1000, 2)))
        passes += abs(cfg_endpoint_corrected(ranks, 0.5) - 1) <= 0.1
    assert passes >= 18


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_pickands_rank_invariant(seed):
    x = GumbelCopula(0.6).sample(30, np.random.default_rng(seed))
    y = np.column_stack([np.log(x[:, 0]), x[:, 1] ** 5])
    t = np.array([0.3, 0.6])
    for variant in ("beta", "cfg"):
        a = pickands_estimate(compute_ranks(x), t, variant, FAST_LINE)
        b = pickands_estimate(compute_ranks(y), t, variant, FAST_LINE)
        assert np.array_equal(a, b)


def test_line_rule_refinement():
    ranks = compute_ranks(GumbelCopula(0.5).sample(200, np.random.default_rng(6)))
    t = np.array([0.1, 0.5, 0.8])
    a = cfg_log_estimate(ranks, t, "beta", QuadratureSpec())
    b = cfg_log_estimate(ranks, t, "beta", QuadratureSpec(line_levels=30, line_resolution=4.0))
    assert np.max(np.abs(a - b)) <= 1e-3 * np.max(np.abs(b))


def test_curve_shape_and_endpoints():
    ranks = compute_ranks(GumbelCopula(0.5).sample(80, np.random.default_rng(7)))
    for variant in ("beta", "cfg"):
        curve = pickands_curve(ranks, 21, variant, FAST_LINE)
        assert curve.estimates[0] == 1.0 and curve.estimates[-1] == 1.0
        assert np.all(curve.estimates >= 0.45)
        assert len(list(curve.rows())) == 21
    assert simplex_grid(3, 5).shape == (15, 2)
    r3 = compute_ranks(GumbelCopula(0.5, d=3).sample(40, np.random.default_rng(8)))
    c3 = pickands_curve(r3, 4, "beta", FAST_LINE)
    assert c3.t_grid.shape == (10, 2) and np.all(c3.estimates[[0, 3, 9]] == 1.0)


@pytest.mark.slow
def test_mean_curve_tracks_truth():
    model = GumbelCopula(0.5)
    t = np.linspace(0.2, 0.8, 13)
    means = {v: np.zeros_like(t) for v in ("beta", "cfg")}
    for rep in range(200):
        ranks = compute_ranks(model.sample(100, np.random.default_rng(rep)))
        for v in means:
            means[v] += pickands_estimate(ranks, t, v, FAST_LINE) / 200
    for v, m in means.items():
        assert np.max(np.abs(m - model.pickands(t))) <= 0.03, v


def test_imse_shrinks_with_n():
    pi = IndependenceCopula(2)
    small = imse_study(pi, 20, 100, "beta", FAST_LINE, rng=3)
    large = imse_study(pi, 100, 100, "beta", FAST_LINE, rng=3)
    assert large[0] < small[0]
    with pytest.raises(ValueError):
        imse_study(pi, 20, 50)
    with pytest.raises(DomainError):
        imse_study(StudentZeroCorrCopula(2.0), 20, 100)


def test_imse_thread_invariant():
    g = GumbelCopula(0.7)
    assert imse_study(g, 20, 100, "cfg", rng=1, threads=1) == imse_study(g, 20, 100, "cfg", rng=1, threads=4)


def test_variant_aliases():
    assert Variant.parse("empirical") is Variant.CFG
    assert Variant.parse("BetaCfg") is Variant.BETA
    with pytest.raises(ValueError):
        Variant.parse("other")


# --- sklearn wrappers -------------------------------------------------------------


def test_weighted_cvm_estimator():
    x = StudentZeroCorrCopula(2.0).sample(60, np.random.default_rng(2))
    est = WeightedCvMIndependenceTest(gamma=1.5, n_null=150, seed=3).fit(x)
    rep = independence_test(x, 1.5, 150, 0.05, QuadratureSpec(), RngStream(3))
    assert est.statistic_ == rep.statistic and est.pvalue_ == rep.p_value
    assert est.reject_ == rep.reject
    assert est.get_params()["gamma"] == 1.5


def test_pickands_estimator():
    x = GumbelCopula(0.5).sample(60, np.random.default_rng(3))
    est = PickandsEstimator(variant="cfg").fit(x)
    t = np.array([0.25, 0.5])
    assert np.array_equal(est.predict(t), pickands_estimate(compute_ranks(x), t, "cfg"))
    assert est.curve(11).estimates.shape == (11,)
