"""Configuration-driven experiment runner and report emitter.

A run is a pure function of the config file content: the master seed and each
experiment id are hashed into independent sub-streams, computation is
single-process, and report rows are emitted in a fixed order, so rerunning a
config yields byte-identical CSVs regardless of the --threads setting.

Config schema (JSON): see README.md. Every experiment writes one CSV with the
fixed column order (experiment, generator, f_id, parameter, estimate, se,
model, flag); wall times and pass/fail summaries go to summary.json.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rnglib
from .dnorm import SE_FLOOR, dnorm_mc, fidi_dnorm, msp_cdf, takahashi_test
from .diagnose import (
    CopulaProcess,
    GppProcess,
    MspProcess,
    block_max_df,
    counterexample_run,
    doa_curve,
    empirical_df,
    rate_fit,
    spectral_df,
    survivor_check,
    tail_equivalence,
    von_mises_diagnostic,
)
from .generator import (
    CappedLogGaussianGenerator,
    ConstantGenerator,
    FiniteSpectralGenerator,
    generator_constant,
    sample_paths,
    shifted_ramp_generator,
    two_ramp_generator,
    validate_generator,
)
from .gridfun import EFunction, constant_function, default_bank, load_bank, make_grid, sup_norm
from .simulate import (
    MarginParams,
    StoppingRule,
    apply_margins,
    simulate_copula_paths,
    simulate_gpp_paths,
    simulate_msp_paths,
    standardize_function,
)

CSV_COLUMNS = ("experiment", "generator", "f_id", "parameter", "estimate", "se", "model", "flag")


class ConfigError(ValueError):
    """The experiment configuration does not validate."""


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    generator: str
    f_id: str
    parameter: str
    estimate: float
    se: float
    model: float
    flag: bool
    wall_time_s: float = 0.0


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def emit_report(rows: list[ReportRow], fmt: str) -> str:
    """Render rows as CSV (fixed header, 17 significant digits) or JSON."""
    if not rows:
        raise ValueError("cannot emit an empty report")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            lines.append(
                ",".join(
                    [
                        row.experiment,
                        row.generator,
                        row.f_id,
                        row.parameter,
                        _fmt(row.estimate),
                        _fmt(row.se),
                        _fmt(row.model),
                        "true" if row.flag else "false",
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = [
            {
                "experiment": row.experiment,
                "generator": row.generator,
                "f_id": row.f_id,
                "parameter": row.parameter,
                "estimate": row.estimate,
                "se": row.se,
                "model": row.model,
                "flag": row.flag,
                "wall_time_s": row.wall_time_s,
            }
            for row in rows
        ]
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


@dataclass(frozen=True, eq=False)
class RunContext:
    seed: int
    grid: object
    generators: dict
    bank: dict
    raw: dict


def _build_generator(name: str, decl: dict, grid, seed: int, bank: dict):
    family = decl.get("family")
    if family == "constant":
        return ConstantGenerator(name=name)
    if family == "finite_spectral":
        preset = decl.get("preset")
        if preset == "two_ramp":
            gen = two_ramp_generator(grid)
        elif preset == "shifted_ramp":
            gen = shifted_ramp_generator(grid)
        elif preset is None:
            atoms = decl.get("atoms")
            probs = decl.get("probs")
            if atoms is None or probs is None:
                raise ConfigError(f"generator {name!r}: finite_spectral needs atoms and probs")
            rows = []
            for atom in atoms:
                if isinstance(atom, str):
                    # "bank:<fid>" references |f| from the function bank
                    fid = atom.removeprefix("bank:")
                    if not atom.startswith("bank:") or fid not in bank:
                        raise ConfigError(f"generator {name!r}: unresolved atom reference {atom!r}")
                    rows.append(np.abs(bank[fid].values))
                else:
                    rows.append(np.asarray(atom, dtype=float))
            gen = FiniteSpectralGenerator(np.stack(rows), np.asarray(probs, dtype=float))
        else:
            raise ConfigError(f"generator {name!r}: unknown preset {preset!r}")
        object.__setattr__(gen, "name", name)
        return gen
    if family == "capped_log_gaussian":
        gen = CappedLogGaussianGenerator(
            sigma=float(decl.get("sigma", 0.5)),
            cap=float(decl.get("cap", 3.0)),
            corr_length=float(decl.get("corr_length", 0.5)),
            name=name,
        )
        return gen.calibrate(grid, n=int(decl.get("calibration_n", 200_000)),
                             seed=rnglib.derive_seed(seed, f"calibrate:{name}"))
    raise ConfigError(f"generator {name!r}: unknown family {family!r}")


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def build_context(raw: dict, seed_override: int | None = None) -> RunContext:
    if seed_override is None and "seed" not in raw:
        raise ConfigError("config must declare a master seed (no entropy default)")
    seed = int(seed_override if seed_override is not None else raw["seed"])
    grid = make_grid(int(raw.get("grid", 201)))

    bank_decl = raw.get("function_bank", "default")
    if bank_decl == "default":
        bank_list = default_bank(grid)
    elif isinstance(bank_decl, dict):
        bank_list = load_bank(bank_decl["table"], bank_decl.get("overrides"))
        if not bank_list or not bank_list[0].grid.matches(grid):
            raise ConfigError("function bank grid does not match the configured grid")
    else:
        raise ConfigError(f"unknown function_bank declaration {bank_decl!r}")
    bank = {f.fid: f for f in bank_list}

    generators = {}
    for name, decl in raw.get("generators", {}).items():
        generators[name] = _build_generator(name, decl, grid, seed, bank)

    experiments = raw.get("experiments", [])
    if not isinstance(experiments, list) or not experiments:
        raise ConfigError("config must declare a non-empty experiments list")
    seen = set()
    for exp in experiments:
        exp_id = exp.get("id")
        if not exp_id:
            raise ConfigError("every experiment needs an id")
        if exp_id in seen:
            raise ConfigError(f"duplicate experiment id {exp_id!r}")
        seen.add(exp_id)
        kind = exp.get("kind")
        if kind not in HANDLERS:
            raise ConfigError(f"experiment {exp_id!r}: unknown kind {kind!r}")
        for key in ("replicates", "n"):
            if key in exp and int(exp[key]) < 1:
                raise ConfigError(f"experiment {exp_id!r}: {key} must be >= 1")
    return RunContext(seed=seed, grid=grid, generators=generators, bank=bank, raw=raw)


def _gen(ctx: RunContext, exp: dict, key: str = "generator"):
    name = exp.get(key)
    if name not in ctx.generators:
        raise ConfigError(f"experiment {exp.get('id')!r}: unresolved generator id {name!r}")
    return ctx.generators[name]


def _functions(ctx: RunContext, exp: dict, key: str = "functions") -> list[EFunction]:
    decl = exp.get(key, "all")
    if decl == "all":
        return list(ctx.bank.values())
    funcs = []
    for fid in decl:
        if fid not in ctx.bank:
            raise ConfigError(f"experiment {exp.get('id')!r}: unresolved function id {fid!r}")
        funcs.append(ctx.bank[fid])
    return funcs


def _one_function(ctx: RunContext, exp: dict) -> EFunction:
    fid = exp.get("function")
    if fid not in ctx.bank:
        raise ConfigError(f"experiment {exp.get('id')!r}: unresolved function id {fid!r}")
    return ctx.bank[fid]


def _require(exp: dict, key: str):
    if key not in exp:
        raise ConfigError(f"experiment {exp.get('id')!r}: missing required parameter {key!r}")
    return exp[key]


def _process(ctx: RunContext, exp: dict):
    decl = exp.get("process", {})
    kind = decl.get("kind")
    name = decl.get("generator", exp.get("generator"))
    if name not in ctx.generators:
        raise ConfigError(f"experiment {exp.get('id')!r}: unresolved generator id {name!r}")
    gen = ctx.generators[name]
    rule = _rule(decl.get("stopping", exp.get("stopping")))
    if kind == "gpp":
        return GppProcess(gen)
    if kind == "copula":
        return CopulaProcess(gen, rule)
    if kind == "msp":
        return MspProcess(gen, rule)
    raise ConfigError(f"experiment {exp.get('id')!r}: unknown process kind {kind!r}")


def _rule(decl) -> StoppingRule:
    if decl is None:
        return StoppingRule()
    if decl.get("mode") == "fixed-K":
        return StoppingRule.fixed(int(decl.get("K", 512)))
    return StoppingRule.exact(decl.get("bound"))


def _ks_uniform(u: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance of a sample from the uniform df on (0,1)."""
    u = np.sort(u)
    n = u.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - u), np.max(u - grid_lo)))


def _se3(*ses: float) -> float:
    return 3.0 * max(math.hypot(*ses), SE_FLOOR)


# --- experiment handlers ---------------------------------------------------
# Each handler returns a list of ReportRow (without wall time); the declared
# tolerance rule behind every flag is described in README.md.


def _run_dnorm(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 10_000))
    paths = sample_paths(gen, ctx.grid, n, seed)
    m = generator_constant(gen, ctx.grid, n, paths=paths)
    rows = []
    for f in _functions(ctx, exp):
        est = dnorm_mc(f, gen, ctx.grid, paths=paths)
        sup = sup_norm(f)
        ok = sup - _se3(est.se) <= est.value <= m.value * sup + _se3(est.se, sup * m.se)
        rows.append(ReportRow(exp["id"], gen.name, f.fid, f"n={n}", est.value, est.se, sup, ok))
    return rows


def _run_generator_constant(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 100_000))
    est = generator_constant(gen, ctx.grid, n, seed=seed)
    expected = exp.get("expected")
    if expected is not None:
        ok = abs(est.value - float(expected)) <= _se3(est.se)
        model = float(expected)
    else:
        ok = est.value >= 1.0 - _se3(est.se)
        model = 1.0
    return [ReportRow(exp["id"], gen.name, "max", f"n={n}", est.value, est.se, model, ok)]


def _run_validate(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 10_000))
    report = validate_generator(gen, ctx.grid, n, seed=seed)
    worst = int(np.argmax(np.abs(report.means - 1.0)))
    rows = [
        ReportRow(exp["id"], gen.name, "", "worst-point-mean", float(report.means[worst]),
                  float(report.ses[worst]), 1.0, bool(report.mean_ok.all())),
        ReportRow(exp["id"], gen.name, "", "min-value", report.min_value, 0.0, 0.0,
                  report.min_value >= 0.0),
        ReportRow(exp["id"], gen.name, "", "max-path-max", report.max_path_max, 0.0,
                  report.bound if report.bound is not None else math.nan,
                  report.bound is None or report.max_path_max <= report.bound),
    ]
    return rows


def _run_sandwich(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    names = exp.get("generators") or [exp.get("generator")]
    n = int(exp.get("n", 20_000))
    rows = []
    for name in names:
        gen = ctx.generators.get(name)
        if gen is None:
            raise ConfigError(f"experiment {exp.get('id')!r}: unresolved generator id {name!r}")
        paths = sample_paths(gen, ctx.grid, n, seed)
        m = generator_constant(gen, ctx.grid, n, paths=paths)
        for f in _functions(ctx, exp):
            est = dnorm_mc(f, gen, ctx.grid, paths=paths)
            sup = sup_norm(f)
            lower = sup - _se3(est.se) <= est.value
            upper = est.value <= m.value * sup + _se3(est.se, sup * m.se)
            rows.append(ReportRow(exp["id"], gen.name, f.fid, f"n={n}", est.value, est.se,
                                  m.value * sup, lower and upper))
    return rows


def _run_fidi(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 100_000))
    point_sets = exp.get("point_sets")
    if point_sets is None:
        point_sets = [exp.get("points", [])]
    rows = []
    for k, raw_points in enumerate(point_sets):
        points = [(int(i), float(v)) for i, v in raw_points]
        est = fidi_dnorm(points, gen, ctx.grid, n=n, seed=rnglib.derive_seed(seed, f"set{k}"))
        if isinstance(gen, ConstantGenerator):
            model = max(abs(v) for _, v in points)
        elif isinstance(gen, FiniteSpectralGenerator):
            # independent oracle: enumerate the atoms
            per_atom = [
                max(abs(v) * gen.atoms[a, i] for i, v in points)
                for a in range(gen.atoms.shape[0])
            ]
            model = float(np.dot(gen.probs, per_atom))
        else:
            model = float(exp.get("expected", math.nan))
        ok = math.isnan(model) or abs(est.value - model) <= _se3(est.se)
        label = ";".join(f"({i},{v:g})" for i, v in points)
        rows.append(ReportRow(exp["id"], gen.name, "fidi", label, est.value, est.se, model, ok))
    return rows


def _run_msp_margins(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 10_000))
    rule = _rule(exp.get("stopping"))
    t_points = exp.get("t_points", [0.0, 0.25, 0.5, 0.75, 1.0])
    batch = simulate_msp_paths(gen, ctx.grid, rule, n, seed)
    critical = 1.63 / math.sqrt(n)
    rows = []
    for t in t_points:
        j = ctx.grid.nearest_index(float(t))
        stat = _ks_uniform(np.exp(batch.eta[:, j]))
        rows.append(ReportRow(exp["id"], gen.name, "", f"ks@t={t:g}", stat, 0.0, critical,
                              stat < critical))
    frac_eta = float((batch.eta.max(axis=1) < 0).mean())
    frac_xi = float((batch.xi.min(axis=1) > 0).mean())
    rows.append(ReportRow(exp["id"], gen.name, "", "eta-max-negative", frac_eta, 0.0, 1.0, frac_eta == 1.0))
    rows.append(ReportRow(exp["id"], gen.name, "", "xi-min-positive", frac_xi, 0.0, 1.0, frac_xi == 1.0))
    rows.append(ReportRow(exp["id"], gen.name, "", "mean-terms", batch.mean_terms, 0.0, math.nan, True))
    return rows


def _run_maxstab(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    block = int(exp.get("block", 10))
    replicates = int(exp.get("replicates", 10_000))
    tolerance = float(exp.get("tolerance", 0.02))
    rule = _rule(exp.get("stopping"))
    ref_n = int(exp.get("ref_n", 200_000))
    batch = simulate_msp_paths(gen, ctx.grid, rule, block * replicates, seed)
    stacked = batch.eta.reshape(replicates, block, ctx.grid.size)
    rescaled = block * stacked.max(axis=1)
    rows = []
    for f in _functions(ctx, exp):
        emp = empirical_df(rescaled, f)
        ref = msp_cdf(f, gen, ctx.grid, n=ref_n, seed=rnglib.derive_seed(seed, "ref"))
        dev = abs(emp.value - ref.value)
        rows.append(ReportRow(exp["id"], gen.name, f.fid, f"block={block}", dev,
                              math.hypot(emp.se, ref.se), tolerance, dev < tolerance))
    return rows


def _run_gpp_df(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 100_000))
    margin = float(exp.get("sup_fraction", 0.9))
    m = generator_constant(gen, ctx.grid, n, seed=rnglib.derive_seed(seed, "m"))
    batch = simulate_gpp_paths(gen, ctx.grid, n, seed)
    rows = []
    for f in _functions(ctx, exp):
        scaled = f.scaled(margin / (m.value * sup_norm(f)))
        emp = empirical_df(batch.v, scaled)
        norm = dnorm_mc(scaled, gen, ctx.grid, n=n, seed=rnglib.derive_seed(seed, "norm"))
        model = 1.0 - norm.value
        ok = abs(emp.value - model) <= _se3(emp.se, norm.se)
        rows.append(ReportRow(exp["id"], gen.name, f.fid, f"n={n}", emp.value, emp.se, model, ok))
    return rows


def _run_spectral(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    process = _process(ctx, exp)
    if "function" in exp:
        functions = [_one_function(ctx, exp)]
    else:
        functions = _functions(ctx, exp)
    n = int(exp.get("n", 50_000))
    rows = []
    for f in functions:
        if exp.get("s_values") is not None:
            s_values = exp["s_values"]
        else:
            # auto grid inside the uniform range |s| sup|f| <= 1/m
            auto = exp.get("s_auto", {})
            count = int(auto.get("count", 5))
            fraction = float(auto.get("fraction", 5.0 / 6.0))
            m = generator_constant(process.gen, ctx.grid, n, seed=rnglib.derive_seed(seed, "m"))
            smax = fraction / (m.value * sup_norm(f))
            s_values = [-smax * k / count for k in range(count, 0, -1)]
        curve = spectral_df(process, f, s_values, n, seed)
        valid = curve.valid
        if valid.sum() >= 2:
            coeffs = np.polyfit(curve.s_values[valid], curve.estimates[valid], 1)
            fitted = np.polyval(coeffs, curve.s_values)
            max_resid = float(np.max(np.abs(curve.estimates[valid] - fitted[valid])))
            curve_ok = max_resid <= 2.0 * float(curve.ses[valid].max())
        else:
            curve_ok = True
        for i, s in enumerate(curve.s_values):
            flag = (not valid[i]) or curve_ok
            rows.append(ReportRow(exp["id"], process.gen.name, f.fid, f"s={s:g}",
                                  float(curve.estimates[i]), float(curve.ses[i]),
                                  float(curve.model[i]), bool(flag)))
    return rows


def _run_tail(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    process = _process(ctx, exp)
    f = _one_function(ctx, exp)
    n = int(exp.get("n", 100_000))
    report = tail_equivalence(process, f, _require(exp, "s_values"), n, seed)
    rows = []
    for i, s in enumerate(report.s_values):
        if process.kind == "copula":
            oracle_seed = rnglib.derive_seed(seed, f"oracle:{s}")
            shrunk = EFunction(ctx.grid, np.log1p(s * f.abs_values()), sign="nonpositive")
            h = msp_cdf(shrunk, process.gen, ctx.grid, n=n, seed=oracle_seed)
            model = (1.0 - h.value) / (abs(s) * report.norm_est.value)
        else:
            model = 1.0
        ok = abs(report.ratios[i] - model) <= _se3(report.ses[i])
        rows.append(ReportRow(exp["id"], process.gen.name, f.fid, f"s={s:g}",
                              float(report.ratios[i]), float(report.ses[i]), float(model), ok))
    return rows


def _run_doa(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    process = _process(ctx, exp)
    f = _one_function(ctx, exp)
    replicates = int(exp.get("replicates", 20_000))
    report = doa_curve(process, f, _require(exp, "n_values"), replicates, seed,
                       ref_n=int(exp.get("ref_n", 200_000)))
    rows = []
    previous = None
    for i, n in enumerate(report.n_values):
        dev, se = float(report.deviations[i]), float(report.ses[i])
        ok = previous is None or dev <= previous[0] + _se3(se, previous[1])
        rows.append(ReportRow(exp["id"], process.gen.name, f.fid, f"n={n}", dev, se, 0.0, ok))
        previous = (dev, se)
    return rows


def _run_blocks(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 20_000))
    rule = _rule(exp.get("stopping"))
    intervals = [[(float(lo), float(hi)) for lo, hi in union] for union in _require(exp, "intervals")]
    thresholds = [float(x) for x in _require(exp, "thresholds")]
    eta = simulate_msp_paths(gen, ctx.grid, rule, n, seed).eta
    est = block_max_df(eta, intervals, thresholds, ctx.grid)

    step = np.full(ctx.grid.size, np.inf)
    for union, threshold in zip(intervals, thresholds):
        mask = np.zeros(ctx.grid.size, dtype=bool)
        for lo, hi in union:
            mask |= (ctx.grid.points >= lo) & (ctx.grid.points <= hi)
        step[mask] = np.minimum(step[mask], threshold)
    if np.all(np.isfinite(step)) and np.all(step <= 0):
        ref = msp_cdf(EFunction(ctx.grid, step, sign="nonpositive"), gen, ctx.grid,
                      n=int(exp.get("ref_n", 200_000)), seed=rnglib.derive_seed(seed, "ref"))
        model, ok = ref.value, abs(est.value - ref.value) <= _se3(est.se, ref.se)
    else:
        model, ok = math.nan, True
    label = f"m={len(intervals)}"
    return [ReportRow(exp["id"], gen.name, "", label, est.value, est.se, model, ok)]


def _run_rate(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    process = _process(ctx, exp)
    replicates = int(exp.get("replicates", 100_000))
    report = rate_fit(process, _functions(ctx, exp), _require(exp, "n_values"), replicates, seed)
    rows = []
    for i, n in enumerate(report.n_values):
        rows.append(ReportRow(exp["id"], process.gen.name, "bank", f"n={n}",
                              float(report.deviations[i]), float(report.ses[i]), math.nan,
                              bool(report.kept[i])))
    lo, hi = exp.get("slope_range", [-1.3, -0.7])
    if report.slope is None:
        ok = bool(exp.get("expect_no_slope", False))
        rows.append(ReportRow(exp["id"], process.gen.name, "bank", "slope", math.nan, 0.0,
                              math.nan, ok))
    else:
        ok = lo <= report.slope <= hi
        rows.append(ReportRow(exp["id"], process.gen.name, "bank", "slope", report.slope, 0.0,
                              (lo + hi) / 2.0, ok))
    return rows


def _run_survivor(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    f = _one_function(ctx, exp)
    n = int(exp.get("n", 100_000))
    report = survivor_check(gen, f, _require(exp, "s_values"), n, seed, rule=_rule(exp.get("stopping")))
    rows = []
    for i, s in enumerate(report.s_values):
        p, se = float(report.probabilities[i]), float(report.ses[i])
        bound = float(report.bounds[i])
        rows.append(ReportRow(exp["id"], gen.name, f.fid, f"s={s:g}", p, se, bound,
                              p + 3.0 * se >= bound))
    i = int(np.argmax(report.s_values))  # closest to zero
    slope, slope_se = float(report.slopes[i]), float(report.slope_ses[i])
    ok = abs(slope - report.inf_est.value) <= _se3(slope_se, report.inf_est.se)
    rows.append(ReportRow(exp["id"], gen.name, f.fid, f"slope@s={report.s_values[i]:g}",
                          slope, slope_se, report.inf_est.value, ok))
    return rows


def _run_counterexample(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    replicates = int(exp.get("replicates", 10_000))
    tolerance = float(exp.get("df_tolerance", 0.02))
    report = counterexample_run(gen, _functions(ctx, exp), float(exp.get("c", -1.5)),
                                _require(exp, "n_values"), replicates, seed,
                                rule=_rule(exp.get("stopping")))
    rows = []
    for i, n in enumerate(report.n_values):
        rows.append(ReportRow(exp["id"], gen.name, "bank", f"df@n={n}",
                              float(report.df_deviations[i]), float(report.df_ses[i]),
                              tolerance, report.df_deviations[i] < tolerance))
    for i, n in enumerate(report.n_values):
        rows.append(ReportRow(exp["id"], gen.name, "", f"sep@n={n}",
                              float(report.p_perturbed[i]), float(report.p_perturbed_ses[i]),
                              report.p_eta.value, bool(report.separated[i])))
    rows.append(ReportRow(exp["id"], gen.name, "", "upper-bound", report.upper_bound, 0.0,
                          report.p_eta.value, report.upper_bound < report.p_eta.value))
    return rows


def _run_vonmises(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    process = _process(ctx, exp)
    f = _one_function(ctx, exp)
    scaled = f.scaled(1.0 / sup_norm(f))
    n = int(exp.get("n", 50_000))
    report = von_mises_diagnostic(process, scaled, _require(exp, "c_values"), n, seed)
    rows = []
    for i, c in enumerate(report.c_values):
        rows.append(ReportRow(exp["id"], process.gen.name, f.fid, f"c={c:g}",
                              float(report.remainders[i]), 0.0, 0.0,
                              not report.flagged[i]))
    rows.append(ReportRow(exp["id"], process.gen.name, f.fid, "shrinking",
                          1.0 if report.shrinking else 0.0, 0.0, 1.0, report.shrinking))
    return rows


def _run_roundtrip(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    n = int(exp.get("n", 1_000))
    tolerance = float(exp.get("tolerance", 1e-9))
    rule = _rule(exp.get("stopping"))
    eta = simulate_msp_paths(gen, ctx.grid, rule, n, seed).eta
    rows = []
    for a, b, gamma in exp.get("margins", [[1.0, 0.0, -1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 1.0]]):
        mp = MarginParams.constant(ctx.grid, a, b, gamma)
        zeta = apply_margins(eta, mp)
        back = np.stack([
            standardize_function(EFunction(ctx.grid, zrow), mp).values for zrow in zeta
        ])
        worst = float(np.max(np.abs(back - eta)))
        rows.append(ReportRow(exp["id"], gen.name, "", f"gamma={gamma:g}", worst, 0.0,
                              tolerance, worst < tolerance))
    return rows


def _run_takahashi(ctx: RunContext, exp: dict, seed: int) -> list[ReportRow]:
    gen = _gen(ctx, exp)
    f = _one_function(ctx, exp)
    n = int(exp.get("n", 20_000))
    report = takahashi_test(gen, f, ctx.grid, n=n, seed=seed)
    return [
        ReportRow(exp["id"], gen.name, f.fid, "delta", report.delta, report.delta_se, 0.0,
                  report.agree),
        ReportRow(exp["id"], gen.name, f.fid, "m-1", report.m_excess, report.m_se, 0.0,
                  report.agree),
    ]


HANDLERS = {
    "dnorm": _run_dnorm,
    "generator_constant": _run_generator_constant,
    "validate": _run_validate,
    "sandwich": _run_sandwich,
    "fidi": _run_fidi,
    "msp_margins": _run_msp_margins,
    "maxstab": _run_maxstab,
    "gpp_df": _run_gpp_df,
    "spectral": _run_spectral,
    "tail": _run_tail,
    "doa": _run_doa,
    "blocks": _run_blocks,
    "rate": _run_rate,
    "survivor": _run_survivor,
    "counterexample": _run_counterexample,
    "vonmises": _run_vonmises,
    "roundtrip": _run_roundtrip,
    "takahashi": _run_takahashi,
}


def run_experiments(raw: dict, out_dir, seed_override: int | None = None,
                    only: str | None = None) -> dict:
    """Execute the configured experiments; write one CSV each plus summary.json."""
    ctx = build_context(raw, seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    experiments = ctx.raw["experiments"]
    if only is not None:
        experiments = [e for e in experiments if e["id"] == only]
        if not experiments:
            raise ConfigError(f"--experiment {only!r} does not match any configured id")

    summary_experiments = []
    all_passed = True
    for exp in experiments:
        handler = HANDLERS[exp["kind"]]
        exp_seed = rnglib.derive_seed(ctx.seed, exp["id"])
        started = time.perf_counter()
        rows = handler(ctx, exp, exp_seed)
        elapsed = time.perf_counter() - started
        rows = [
            ReportRow(r.experiment, r.generator, r.f_id, r.parameter, r.estimate, r.se,
                      r.model, r.flag, wall_time_s=elapsed)
            for r in rows
        ]
        passed = all(r.flag for r in rows)
        all_passed &= passed
        csv_path = out / f"{exp['id']}.csv"
        csv_path.write_text(emit_report(rows, "csv"), encoding="utf-8", newline="\n")
        formats = ctx.raw.get("output", {}).get("formats", ["csv"])
        if "json" in formats:
            (out / f"{exp['id']}.json").write_text(emit_report(rows, "json"),
                                                   encoding="utf-8", newline="\n")
        summary_experiments.append(
            {"id": exp["id"], "kind": exp["kind"], "passed": passed,
             "rows": len(rows), "wall_time_s": elapsed}
        )

    summary = {
        "seed": ctx.seed,
        "grid": ctx.grid.size,
        "all_passed": all_passed,
        "experiments": summary_experiments,
        "config": ctx.raw,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary


# --- command line ----------------------------------------------------------


def _builtin_context(grid_size: int, seed: int, with_clg: bool = False) -> RunContext:
    raw = {
        "seed": seed,
        "grid": grid_size,
        "generators": {
            "const": {"family": "constant"},
            "g2": {"family": "finite_spectral", "preset": "two_ramp"},
            "g3": {"family": "finite_spectral", "preset": "shifted_ramp"},
        },
        "experiments": [{"id": "adhoc", "kind": "dnorm", "generator": "const"}],
    }
    if with_clg:
        raw["generators"]["clg"] = {"family": "capped_log_gaussian"}
    return build_context(raw)


def cmd_run(args) -> int:
    raw = load_config(args.config)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    # computation is single-process and deterministic; --threads never
    # affects report content, which is exactly the contract
    summary = run_experiments(raw, args.out, seed_override=args.seed, only=args.experiment)
    for entry in summary["experiments"]:
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{status} {entry['id']} ({entry['rows']} rows, {entry['wall_time_s']:.2f}s)")
    return 0 if summary["all_passed"] else 1


def cmd_dnorm(args) -> int:
    ctx = _builtin_context(args.grid, args.seed, with_clg=args.generator == "clg")
    gen = ctx.generators[args.generator]
    if args.const is not None:
        f = constant_function(ctx.grid, args.const, fid=f"const:{args.const:g}")
    else:
        f = ctx.bank[args.function]
    paths = sample_paths(gen, ctx.grid, args.n, args.seed)
    est = dnorm_mc(f, gen, ctx.grid, paths=paths)
    m = generator_constant(gen, ctx.grid, args.n, paths=paths)
    sup = sup_norm(f)
    print("value,se,n,lower_bound,upper_bound")
    print(f"{_fmt(est.value)},{_fmt(est.se)},{est.n},{_fmt(sup)},{_fmt(m.value * sup)}")
    return 0


def cmd_simulate(args) -> int:
    ctx = _builtin_context(args.grid, args.seed, with_clg=args.generator == "clg")
    gen = ctx.generators[args.generator]
    rule = StoppingRule.fixed(args.fixed_k) if args.fixed_k else StoppingRule()
    meta = [f"# process: {args.process}", f"# family: {gen.name}", f"# seed: {args.seed}",
            f"# replicates: {args.n}"]
    if args.process == "msp":
        batch = simulate_msp_paths(gen, ctx.grid, rule, args.n, args.seed)
        values = batch.eta
        meta.append(f"# stopping: {rule.mode}")
        meta.append(f"# mean_terms: {batch.mean_terms:g}")
        meta.append(f"# approximate: {int(batch.approximate.sum())}")
    elif args.process == "gpp":
        values = simulate_gpp_paths(gen, ctx.grid, args.n, args.seed).v
    elif args.process == "copula":
        values = simulate_copula_paths(gen, ctx.grid, rule, args.n, args.seed)
        meta.append(f"# stopping: {rule.mode}")
    else:
        raise ConfigError(f"unknown process {args.process!r}")
    lines = meta + ["t," + ",".join(f"path{i}" for i in range(args.n))]
    for j in range(ctx.grid.size):
        lines.append(",".join([_fmt(ctx.grid.points[j])] + [_fmt(v) for v in values[:, j]]))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return 0


def cmd_diagnose(args) -> int:
    params = json.loads(args.params) if args.params else {}
    exp = {"id": f"diagnose-{args.kind}", "kind": args.kind, **params}
    raw = {
        "seed": args.seed,
        "grid": args.grid,
        "generators": {
            "const": {"family": "constant"},
            "g2": {"family": "finite_spectral", "preset": "two_ramp"},
            "g3": {"family": "finite_spectral", "preset": "shifted_ramp"},
        },
        "experiments": [exp],
    }
    ctx = build_context(raw)
    rows = HANDLERS[args.kind](ctx, exp, rnglib.derive_seed(ctx.seed, exp["id"]))
    text = emit_report(rows, "csv")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return 0 if all(r.flag for r in rows) else 1


DIAGNOSE_KINDS = ("spectral", "tail", "doa", "blocks", "rate", "survivor",
                  "counterexample", "vonmises")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtsim",
                                     description="max-stable / GPD process experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config file of experiments")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker count; never affects output content")
    p_run.add_argument("--experiment", default=None, help="run only this experiment id")
    p_run.set_defaults(func=cmd_run)

    p_dn = sub.add_parser("dnorm", help="print one D-norm estimate as a CSV row")
    p_dn.add_argument("--generator", default="const", choices=["const", "g2", "g3", "clg"])
    p_dn.add_argument("--function", default="const_1")
    p_dn.add_argument("--const", type=float, default=None, help="use the constant function f=c")
    p_dn.add_argument("--n", type=int, default=10_000)
    p_dn.add_argument("--seed", type=int, default=0)
    p_dn.add_argument("--grid", type=int, default=201)
    p_dn.set_defaults(func=cmd_dnorm)

    p_sim = sub.add_parser("simulate", help="write simulated paths as CSV")
    p_sim.add_argument("--process", default="msp", choices=["msp", "gpp", "copula"])
    p_sim.add_argument("--generator", default="g2", choices=["const", "g2", "g3", "clg"])
    p_sim.add_argument("--n", type=int, default=10)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--grid", type=int, default=201)
    p_sim.add_argument("--fixed-k", type=int, default=None)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_diag = sub.add_parser("diagnose", help="run one verification experiment")
    p_diag.add_argument("--kind", required=True, choices=DIAGNOSE_KINDS)
    p_diag.add_argument("--params", default=None, help="experiment parameters as a JSON object")
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.add_argument("--grid", type=int, default=201)
    p_diag.add_argument("--out", default=None)
    p_diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
