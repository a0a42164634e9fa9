"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all);
the assertions carry the same tolerances, so a red test is a failed criterion.
Seeds are fixed: the suite is deterministic.
"""

import json
import math
import time

import numpy as np

import evtsim as es
from evtsim import cli
from evtsim import diagnose as dg
from evtsim.dnorm import SE_FLOOR
from evtsim.simulate import StoppingRule

SEED = 20260808


def report(cid: str, ok: bool, detail: str) -> None:
    print(f"{cid} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{cid}: {detail}"


def test_c01_constant_generator_exactness(grid, const, bank):
    worst = 0.0
    for f in bank:
        est = es.dnorm_mc(f, const, grid, n=1_000, seed=SEED)
        worst = max(worst, abs(est.value - es.sup_norm(f)), est.se)
    report("C01", worst <= 1e-12,
           f"constant-generator norm equals sup-norm, worst deviation {worst:.2e}")


def test_c02_generator_constants(grid, g2, g3):
    m2 = es.generator_constant(g2, grid, 100_000, seed=SEED)
    m3 = es.generator_constant(g3, grid, 100_000, seed=SEED)
    one = es.constant_function(grid, -1.0, fid="one")
    n2 = es.dnorm_mc(one, g2, grid, n=100_000, seed=SEED + 1)
    n3 = es.dnorm_mc(one, g3, grid, n=100_000, seed=SEED + 1)
    ok = (
        abs(m2.value - 2.0) <= 3.0 * max(m2.se, SE_FLOOR)
        and abs(m3.value - 1.5) <= 3.0 * max(m3.se, SE_FLOOR)
        and abs(n2.value - m2.value) <= 3.0 * max(math.hypot(n2.se, m2.se), SE_FLOOR)
        and abs(n3.value - m3.value) <= 3.0 * max(math.hypot(n3.se, m3.se), SE_FLOOR)
    )
    report("C02", ok, f"generator constants m(G2)={m2.value:g}, m(G3)={m3.value:g}, "
                      f"norm-of-one matches within 3 SE")


def test_c03_sandwich_inequality(grid, const, g2, g3, clg, bank):
    failures = []
    for gen in (const, g2, g3, clg):
        paths = es.sample_paths(gen, grid, 20_000, seed=SEED + 2)
        m = es.generator_constant(gen, grid, 20_000, paths=paths)
        for f in bank:
            est = es.dnorm_mc(f, gen, grid, paths=paths)
            sup = es.sup_norm(f)
            lower = est.value >= sup - 3.0 * max(est.se, SE_FLOOR) - 1e-12
            upper = est.value <= m.value * sup + 3.0 * math.hypot(est.se, sup * m.se) + 1e-12
            if not (lower and upper):
                failures.append((gen.name, f.fid))
    report("C03", not failures,
           f"sandwich holds for 20 functions x 4 generators (violations: {failures})")


def test_c04_fidi_independence_oracle(grid, g2):
    rng = np.random.default_rng(SEED)
    last = grid.size - 1
    worst_z = 0.0
    for k in range(5):
        x1, x2 = -(rng.random(2) * 1.5 + 0.1)
        est = es.fidi_dnorm([(0, x1), (last, x2)], g2, grid, n=100_000, seed=SEED + 3 + k)
        # independent oracle: enumerate the two atoms at the two endpoints
        atoms = np.stack([2.0 * grid.points, 2.0 * (1.0 - grid.points)])
        oracle = 0.5 * max(abs(x1) * atoms[0, 0], abs(x2) * atoms[0, last]) \
            + 0.5 * max(abs(x1) * atoms[1, 0], abs(x2) * atoms[1, last])
        assert oracle == abs(x1) + abs(x2)
        worst_z = max(worst_z, abs(est.value - oracle) / max(est.se, SE_FLOOR))
    report("C04", worst_z <= 3.0,
           f"fidi norm at the endpoints equals |x1|+|x2|, worst z-score {worst_z:.2f}")


def test_c05_msp_margins_and_signs(grid, g2):
    n = 10_000
    batch = es.simulate_msp_paths(g2, grid, StoppingRule(), n, seed=SEED + 4)
    critical = 1.63 / math.sqrt(n)
    worst = 0.0
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        j = grid.nearest_index(t)
        u = np.sort(np.exp(batch.eta[:, j]))  # uniform under the exponential law
        stat = max(np.max(np.arange(1, n + 1) / n - u), np.max(u - np.arange(0, n) / n))
        worst = max(worst, stat)
    signs = (batch.eta.max(axis=1) < 0).all() and (batch.xi.min(axis=1) > 0).all()
    report("C05", worst < critical and signs,
           f"margin KS worst {worst:.4f} < {critical:.4f} at 5 points; signs strict on {n} paths")


def test_c06_max_stability(grid, g3, bank):
    n, replicates = 10, 10_000
    batch = es.simulate_msp_paths(g3, grid, StoppingRule(), n * replicates, seed=SEED + 5)
    rescaled = n * batch.eta.reshape(replicates, n, grid.size).max(axis=1)
    paths = es.sample_paths(g3, grid, 200_000, seed=SEED + 6)
    worst = 0.0
    for f in bank:
        emp = dg.empirical_df(rescaled, f)
        ref = es.msp_cdf(f, g3, grid, paths=paths)
        worst = max(worst, abs(emp.value - ref.value))
    report("C06", worst < 0.02,
           f"df of n*max of {n} copies matches the limit df, worst deviation {worst:.4f}")


def test_c07_gpp_df_identity(grid, g2, bank):
    n = 100_000
    m = es.generator_constant(g2, grid, n, seed=SEED + 7)
    batch = es.simulate_gpp_paths(g2, grid, n, seed=SEED + 8)
    worst_z = 0.0
    for f in bank:
        scaled = f.scaled(0.9 / (m.value * es.sup_norm(f)))
        emp = dg.empirical_df(batch.v, scaled)
        norm = es.dnorm_mc(scaled, g2, grid, n=n, seed=SEED + 9)
        gap = abs(emp.value - (1.0 - norm.value))
        worst_z = max(worst_z, gap / max(math.hypot(emp.se, norm.se), SE_FLOOR))
    report("C07", worst_z <= 3.0,
           f"P(V <= f) = 1 - norm(f) on the scaled bank, worst z-score {worst_z:.2f}")


def test_c08_spectral_uniformity(grid, g2, bank):
    process = dg.GppProcess(g2)
    m = es.generator_constant(g2, grid, 50_000, seed=SEED + 10)
    failures = []
    for f in bank:
        smax = 1.0 / (m.value * es.sup_norm(f))
        s = [-smax * k / 6.0 for k in range(5, 0, -1)]
        curve = dg.spectral_df(process, f, s, n=50_000, seed=SEED + 11)
        valid = curve.valid
        coeffs = np.polyfit(curve.s_values[valid], curve.estimates[valid], 1)
        resid = np.abs(curve.estimates[valid] - np.polyval(coeffs, curve.s_values[valid]))
        if resid.max() > 2.0 * curve.ses[valid].max():
            failures.append(f.fid)
    report("C08", not failures,
           f"GPP spectral curves linear within 2*max SE on the valid range "
           f"(violations: {failures})")


def test_c09_tail_equivalence_copula(grid, g2):
    f = es.constant_function(grid, -1.0, fid="one")
    s_values = [-0.1, -0.05, -0.01]
    process = dg.CopulaProcess(g2)
    rep = dg.tail_equivalence(process, f, s_values, n=600_000, seed=SEED + 12)
    # semi-analytic oracle: the norm of log(1 + s|f|) is |log(1+s)| * m exactly
    zpaths = es.sample_paths(g2, grid, 200_000, seed=SEED + 13)
    ok_within = True
    details = []
    for i, s in enumerate(s_values):
        shrunk = es.EFunction(grid, np.log1p(s * f.abs_values()), sign="nonpositive")
        h = es.msp_cdf(shrunk, g2, grid, paths=zpaths)
        oracle = (1.0 - h.value) / (abs(s) * rep.norm_est.value)
        gap = abs(rep.ratios[i] - oracle)
        tol = 3.0 * max(math.hypot(rep.ses[i], h.se / (abs(s) * rep.norm_est.value)), SE_FLOOR)
        ok_within &= gap <= tol
        details.append(f"s={s}: ratio {rep.ratios[i]:.4f} vs oracle {oracle:.4f}")
    distances = np.abs(rep.ratios - 1.0)
    monotone = distances[0] > distances[1] > distances[2]
    report("C09", ok_within and monotone,
           "; ".join(details) + f"; |ratio-1| decreasing: {monotone}")


def test_c10_rate_of_convergence(grid, g2, bank):
    started = time.perf_counter()
    process = dg.GppProcess(g2)
    n_values = [8, 16, 32, 64, 128, 256, 512, 1024]
    rep = dg.rate_fit(process, bank, n_values, 100_000, seed=SEED + 14)
    elapsed = time.perf_counter() - started
    ok = rep.slope is not None and -1.3 <= rep.slope <= -0.7 and elapsed <= 300.0
    report("C10", ok, f"GPP rate slope {rep.slope:.3f} in [-1.3, -0.7], {elapsed:.1f}s")


def test_c11_survivor_bound_and_slope(grid, g3):
    f = es.constant_function(grid, -1.0, fid="one")
    rep = dg.survivor_check(g3, f, [-0.5, -0.2, -0.1, -0.01], n=200_000, seed=SEED + 15)
    bound_ok = all(
        rep.probabilities[i] + 3.0 * rep.ses[i] >= 1.0 - math.exp(-0.5 * abs(s))
        for i, s in enumerate(rep.s_values[:3])
    )
    slope = rep.slopes[-1]
    slope_ok = abs(slope - rep.inf_est.value) <= 3.0 * max(
        math.hypot(rep.slope_ses[-1], rep.inf_est.se), SE_FLOOR) + 0.01
    report("C11", bound_ok and slope_ok,
           f"survivor bound holds at s in {{-0.5,-0.2,-0.1}}; slope {slope:.3f} "
           f"vs E(inf Z) = {rep.inf_est.value:g}")


def test_c12_counterexample_separation(grid, g3, bank):
    rep = dg.counterexample_run(g3, bank, -1.5, [10, 16], 10_000, seed=SEED + 16)
    sep = bool(rep.separated[1])
    df_ok = rep.df_deviations[0] < 0.02
    report("C12", sep and df_ok,
           f"P(perturbed > c) {rep.p_perturbed[1]:.4f} separated from "
           f"P(eta > c) {rep.p_eta.value:.4f}; df deviation at n=10 "
           f"{rep.df_deviations[0]:.4f} < 0.02")


def test_c13_margin_round_trip(grid, g3):
    eta = es.simulate_msp_paths(g3, grid, StoppingRule(), 1_000, seed=SEED + 17).eta
    worst = 0.0
    for gamma in (-1.0, 0.0, 1.0):
        mp = es.MarginParams.constant(grid, a=1.0, b=0.0, gamma=gamma)
        zeta = es.apply_margins(eta, mp)
        back = np.stack([
            es.standardize_function(es.EFunction(grid, row), mp).values for row in zeta
        ])
        worst = max(worst, float(np.max(np.abs(back - eta))))
    report("C13", worst < 1e-9,
           f"margin transform round trip on 1000 paths x 3 shapes, max error {worst:.2e}")


def test_c14_cli_determinism(tmp_path):
    config = {
        "seed": SEED,
        "grid": 101,
        "generators": {
            "const": {"family": "constant"},
            "g2": {"family": "finite_spectral", "preset": "two_ramp"},
            "g3": {"family": "finite_spectral", "preset": "shifted_ramp"},
        },
        "function_bank": "default",
        "experiments": [
            {"id": "dnorm-bank", "kind": "dnorm", "generator": "g2",
             "functions": ["const_1", "ramp_mid", "spike_low"], "n": 4000},
            {"id": "survivor", "kind": "survivor", "generator": "g3",
             "function": "const_1", "s_values": [-0.5, -0.1], "n": 5000},
            {"id": "spectral", "kind": "spectral",
             "process": {"kind": "gpp", "generator": "g2"},
             "function": "const_half", "s_values": [-0.4, -0.2, -0.1], "n": 5000},
        ],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    rc1 = cli.main(["run", "--config", str(path), "--out", str(out1), "--threads", "1"])
    rc2 = cli.main(["run", "--config", str(path), "--out", str(out2), "--threads", "8"])
    identical = all(
        (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in ("dnorm-bank.csv", "survivor.csv", "spectral.csv")
    )
    report("C14", rc1 == 0 and rc2 == 0 and identical,
           "rerun with --threads 1 vs 8 produced byte-identical CSVs")
