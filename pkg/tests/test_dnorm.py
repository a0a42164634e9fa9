import math

import numpy as np
import pytest

import evtsim as es
from evtsim.dnorm import SE_FLOOR


def brute_force_finite_spectral_norm(gen, weights):
    """Independent oracle: enumerate the atoms of a finite-spectral generator."""
    per_atom = (weights[None, :] * gen.atoms).max(axis=1)
    return float(np.dot(gen.probs, per_atom))


def test_constant_generator_reproduces_sup_norm(grid, const, bank):
    for f in bank:
        est = es.dnorm_mc(f, const, grid, n=500, seed=1)
        assert est.se == 0.0
        assert abs(est.value - es.sup_norm(f)) <= 1e-12


def test_two_ramp_norm_of_constant_one(grid, g2):
    f = es.constant_function(grid, -1.0)
    est = es.dnorm_mc(f, g2, grid, n=5_000, seed=2)
    # both atoms have sup 2, so the estimate is deterministic
    assert (est.value, est.se) == (2.0, 0.0)


def test_shifted_ramp_norm_of_constant_one(grid, g3):
    est = es.dnorm_mc(es.constant_function(grid, -1.0), g3, grid, n=5_000, seed=2)
    assert (est.value, est.se) == (1.5, 0.0)


def test_norm_matches_atom_enumeration(grid, g2, g3, bank):
    for gen in (g2, g3):
        paths = es.sample_paths(gen, grid, 40_000, seed=3)
        for f in bank[:8]:
            oracle = brute_force_finite_spectral_norm(gen, f.abs_values())
            est = es.dnorm_mc(f, gen, grid, paths=paths)
            assert abs(est.value - oracle) <= 3.0 * max(est.se, SE_FLOOR)


def test_fidi_single_point_has_unit_mean(grid, const, g2, g3, clg):
    for gen in (const, g2, g3, clg):
        est = es.fidi_dnorm([(100, -0.7)], gen, grid, n=20_000, seed=4)
        assert abs(est.value - 0.7) <= 3.0 * max(est.se, SE_FLOOR) + 1e-3


def test_fidi_endpoints_sum_under_two_ramp(grid, g2):
    # atom enumeration: each atom vanishes at one endpoint, so the max picks
    # the other one and the expectation is |x1| + |x2|
    rng = np.random.default_rng(5)
    last = grid.size - 1
    for _ in range(5):
        x1, x2 = -rng.random(2) - 0.1
        est = es.fidi_dnorm([(0, x1), (last, x2)], g2, grid, n=50_000, seed=6)
        assert abs(est.value - (abs(x1) + abs(x2))) <= 3.0 * est.se


def test_fidi_endpoints_max_under_constant(grid, const):
    last = grid.size - 1
    est = es.fidi_dnorm([(0, -0.3), (last, -0.9)], const, grid, n=500, seed=7)
    assert (est.value, est.se) == (0.9, 0.0)


def test_fidi_rejects_empty_and_duplicate_points(grid, const):
    with pytest.raises(ValueError):
        es.fidi_dnorm([], const, grid, n=100)
    with pytest.raises(ValueError):
        es.fidi_dnorm([(0, -1.0), (0, -2.0)], const, grid, n=100)


def test_inf_functional_examples(grid, const, g2, g3):
    f = es.constant_function(grid, -1.0)
    est = es.inf_functional(f, const, grid, n=500, seed=8)
    assert (est.value, est.se) == (1.0, 0.0)
    est = es.inf_functional(f, g2, grid, n=2_000, seed=8)
    assert (est.value, est.se) == (0.0, 0.0)  # each atom vanishes at an endpoint
    est = es.inf_functional(f, g3, grid, n=2_000, seed=8)
    assert (est.value, est.se) == (0.5, 0.0)  # both atoms have min 1/2


def test_msp_cdf_examples(grid, const, g2):
    zero = es.constant_function(grid, 0.0)
    assert es.msp_cdf(zero, const, grid, n=200, seed=9).value == 1.0
    one = es.constant_function(grid, -1.0)
    est = es.msp_cdf(one, const, grid, n=200, seed=9)
    assert est.value == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert est.se == 0.0
    est = es.msp_cdf(one, g2, grid, n=2_000, seed=9)
    assert est.value == pytest.approx(math.exp(-2.0), abs=1e-12)


def test_msp_cdf_rejects_positive_values(grid, const):
    f = es.EFunction(grid, np.full(grid.size, 0.5))
    with pytest.raises(ValueError):
        es.msp_cdf(f, const, grid, n=200)


def test_msp_cdf_antitone_in_the_norm(grid, g2, bank):
    paths = es.sample_paths(g2, grid, 5_000, seed=10)
    results = []
    for f in bank:
        norm = es.dnorm_mc(f, g2, grid, paths=paths)
        prob = es.msp_cdf(f, g2, grid, paths=paths)
        results.append((norm.value, prob.value))
    results.sort()
    probs = [p for _, p in results]
    assert all(a >= b for a, b in zip(probs, probs[1:]))


def test_sandwich_inequality(grid, const, g2, g3, clg, bank):
    for gen in (const, g2, g3, clg):
        paths = es.sample_paths(gen, grid, 20_000, seed=11)
        m = es.generator_constant(gen, grid, 20_000, paths=paths)
        for f in bank:
            est = es.dnorm_mc(f, gen, grid, paths=paths)
            sup = es.sup_norm(f)
            assert est.value >= sup - 3.0 * max(est.se, SE_FLOOR) - 1e-12
            # per-path max |f| Z <= sup|f| max Z makes the upper bound exact
            # under a shared stream
            assert est.value <= m.value * sup + 3.0 * math.hypot(est.se, sup * m.se) + 1e-12


def test_estimator_homogeneity_is_exact_for_binary_scales(grid, g2, bank):
    paths = es.sample_paths(g2, grid, 2_000, seed=12)
    for f in bank[:6]:
        base = es.dnorm_mc(f, g2, grid, paths=paths)
        for c in (2.0, 0.5, -4.0):
            scaled = es.dnorm_mc(f.scaled(c), g2, grid, paths=paths)
            assert scaled.value == abs(c) * base.value


def test_estimator_triangle_inequality_per_sample(grid, g2, bank):
    paths = es.sample_paths(g2, grid, 2_000, seed=13)
    f, g = bank[3], bank[7]
    summed = es.EFunction(grid, f.values + g.values)
    lhs = es.dnorm_mc(summed, g2, grid, paths=paths).value
    rhs = es.dnorm_mc(f, g2, grid, paths=paths).value + es.dnorm_mc(g, g2, grid, paths=paths).value
    assert lhs <= rhs + 1e-9


def test_takahashi_verdicts(grid, const, g2, g3):
    one = es.constant_function(grid, -1.0)
    report = es.takahashi_test(const, one, grid, n=2_000, seed=14)
    assert report.verdict == "sup-norm"
    assert report.agree
    report = es.takahashi_test(g2, one, grid, n=2_000, seed=14)
    assert report.verdict == "strictly larger"
    assert report.agree
    assert report.delta == pytest.approx(1.0, abs=1e-12)
    ramp = es.EFunction(grid, -(1.0 + grid.points) / 2.0, sign="nonpositive")
    report = es.takahashi_test(g3, ramp, grid, n=20_000, seed=14)
    assert report.verdict == "strictly larger"
    assert report.agree


def test_takahashi_equivalence_across_families(grid, const, g2, g3, clg):
    f = es.EFunction(grid, -(0.5 + 0.5 * grid.points), sign="nonpositive")
    for gen in (const, g2, g3, clg):
        report = es.takahashi_test(gen, f, grid, n=20_000, seed=15)
        assert report.agree


def test_takahashi_rejects_vanishing_functions(grid, const):
    ramp = es.EFunction(grid, -grid.points, sign="nonpositive")  # zero at t=0
    with pytest.raises(ValueError):
        es.takahashi_test(const, ramp, grid, n=500)
