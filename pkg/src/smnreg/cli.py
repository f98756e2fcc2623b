"""Command-line front end: fit / check / verify / geweke / simulate.

Configuration is a sectioned key-value file (INI syntax).  A minimal proper
fit looks like::

    [data]
    x = X.csv
    y = Y.csv

    [model]
    kind = proper
    b = default
    a = default
    nu = default
    theta = default

    [mixing]
    family = gamma
    shape = 2.5
    rate = 2.5

    [sampler]
    iterations = 2000
    burnin = 500
    thin = 1
    chains = 2
    seed = 42

    [output]
    directory = out
    emit_u = false

Matrices may be written inline with rows separated by ';' and entries by
whitespace or commas, e.g. ``theta = 1 0; 0 1``.  The improper model replaces
the prior entries with ``nu_t``.  Exit codes: 0 ok, 1 check failed, 2 error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import ergodicity
from .diagnostics import geweke_joint_test, summarize
from .errors import InvalidParameterError, SmnregError
from .gibbs import (
    ImproperModel,
    ProperModel,
    Trace,
    run_chain,
    write_trace_csv,
    write_trace_meta,
)
from .mixing import GammaMixing, PointMass, TabulatedMixing
from .model import (
    ChainState,
    Dataset,
    NIWPrior,
    compute_update,
    psi_identity_residual,
    simulate_dataset,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def parse_matrix(text):
    """Parse 'r00 r01; r10 r11' (entries split on whitespace or commas)."""
    rows = []
    for chunk in text.strip().split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        rows.append([float(v) for v in chunk.replace(",", " ").split()])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise InvalidParameterError(f"malformed matrix literal: {text!r}")
    return np.asarray(rows, dtype=float)


def _load_config(path):
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cfg.read(path)
    if not read:
        raise InvalidParameterError(f"config file not found: {path}")
    return cfg


def _build_mixing(cfg):
    if "mixing" not in cfg:
        raise InvalidParameterError("config needs a [mixing] section")
    sec = cfg["mixing"]
    family = sec.get("family", "").strip().lower()
    if family == "pointmass":
        return PointMass(location=sec.getfloat("location", 1.0))
    if family == "gamma":
        return GammaMixing(shape=sec.getfloat("shape"), rate=sec.getfloat("rate"))
    if family == "tabulated":
        return TabulatedMixing.from_csv(
            sec.get("path"), normalize=sec.getboolean("normalize", False)
        )
    raise InvalidParameterError(f"unknown mixing family {family!r}")


def _build_prior(cfg, p, d):
    sec = cfg["model"]
    default = NIWPrior.default(p, d)

    def matrix_or_default(key, fallback):
        raw = sec.get(key, "default").strip()
        if raw.lower() == "default":
            return fallback
        return parse_matrix(raw)

    raw_nu = sec.get("nu", "default").strip()
    nu = default.dof if raw_nu.lower() == "default" else float(raw_nu)
    return NIWPrior(
        mean=matrix_or_default("b", default.mean),
        row_cov=matrix_or_default("a", default.row_cov),
        dof=nu,
        scale=matrix_or_default("theta", default.scale),
    )


def _build_model(cfg, data):
    if "model" not in cfg:
        raise InvalidParameterError("config needs a [model] section")
    kind = cfg["model"].get("kind", "").strip().lower()
    if kind == "proper":
        return ProperModel(prior=_build_prior(cfg, data.p, data.d), mixing=_build_mixing(cfg))
    if kind == "improper":
        if any(k in cfg["model"] for k in ("b", "a", "nu", "theta")):
            raise InvalidParameterError("the improper model takes no prior entries")
        return ImproperModel(t_dof=cfg["model"].getfloat("nu_t"))
    raise InvalidParameterError(f"unknown model kind {kind!r}")


def _load_dataset(cfg):
    if "data" not in cfg:
        raise InvalidParameterError("config needs a [data] section")
    sec = cfg["data"]
    return Dataset.from_csv(sec.get("x"), sec.get("y"))


def _sampler_settings(cfg, seed_override):
    sec = cfg["sampler"] if "sampler" in cfg else {}
    get = lambda key, fallback: int(sec.get(key, fallback)) if sec else fallback
    seed = seed_override if seed_override is not None else get("seed", 0)
    return {
        "iterations": get("iterations", 2000),
        "burnin": get("burnin", 500),
        "thin": get("thin", 1),
        "chains": get("chains", 1),
        "seed": int(seed),
    }


def _out_dir(cfg, override):
    raw = override or (cfg["output"].get("directory", "out") if "output" in cfg else "out")
    out = Path(raw)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _check_payload(model, data):
    if isinstance(model, ProperModel):
        geo = ergodicity.check_proper_geometric(model.mixing, data.d)
        uni = ergodicity.check_uniform(data, model.mixing)
        return {
            "model": "proper",
            "geometric": geo.to_dict(),
            "uniform": uni.to_dict(),
        }, geo.holds
    report = ergodicity.check_improper_condition(data, model.t_dof)
    return {"model": "improper", "condition": report.to_dict()}, report.holds


def cmd_fit(cfg, seed_override, out_override):
    data = _load_dataset(cfg)
    model = _build_model(cfg, data)
    settings = _sampler_settings(cfg, seed_override)
    out = _out_dir(cfg, out_override)
    emit_u = cfg["output"].getboolean("emit_u", False) if "output" in cfg else False

    ss = np.random.SeedSequence(settings["seed"])
    traces = []
    for idx, child in enumerate(ss.spawn(settings["chains"])):
        trace = run_chain(
            model,
            data,
            iters=settings["iterations"],
            burnin=settings["burnin"],
            thin=settings["thin"],
            seed=child,
        )
        trace.meta["seed"] = settings["seed"]
        trace.meta["chain"] = idx
        write_trace_csv(trace, out / f"trace_chain{idx:02d}.csv", emit_u=emit_u)
        write_trace_meta(trace, out / f"trace_chain{idx:02d}.meta.json")
        traces.append(trace)

    pooled = Trace(states=[s for t in traces for s in t.states], meta={})
    table = summarize(pooled)
    _write_json(out / "summary.json", table.to_dict())
    payload, _ = _check_payload(model, data)
    _write_json(out / "check_report.json", payload)
    print(table.to_text())
    print(f"\nwrote {settings['chains']} trace file(s), summary.json and "
          f"check_report.json to {out}")
    return EXIT_OK


def cmd_check(cfg, seed_override, out_override):
    data = _load_dataset(cfg)
    model = _build_model(cfg, data)
    out = _out_dir(cfg, out_override)
    payload, ok = _check_payload(model, data)
    _write_json(out / "check_report.json", payload)
    if isinstance(model, ProperModel):
        geo, uni = payload["geometric"], payload["uniform"]
        print(f"geometric ergodicity (moment order {geo['moment_order']}): "
              f"{'holds' if geo['holds'] else 'NOT VERIFIED'}")
        print(f"uniform ergodicity (full rank + moment order {uni['moment_order']}): "
              f"{'holds' if uni['holds'] else 'NOT VERIFIED'}")
    else:
        rep = payload["condition"]
        print(f"trace condition: {rep['status']} "
              f"(lhs={rep['lhs']:.6g}, max feasible eps={rep['max_feasible_eps']})")
        print(f"legacy sample-size bound n < t_dof + p - 2: "
              f"{'holds' if rep['legacy_condition_holds'] else 'fails'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _verify_suite(model, data, level, seed):
    """Yield (name, passed, detail) for every applicable verifier."""
    n_mc = 100_000 if level == "full" else 10_000
    n_reps = 2_000 if level == "full" else 400
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n, p, d = data.n, data.p, data.d

    can_basis = n >= p + d
    if can_basis:
        try:
            basis = ergodicity.build_energy_basis(data)
        except SmnregError:
            can_basis = False
    if can_basis:
        worst = 0.0
        for _ in range(200):
            state = _random_state(rng, n, p, d)
            vq = ergodicity.energy_quadratic(state)
            vw = ergodicity.energy_weighted(state, data, basis.weight)
            worst = max(worst, abs(vq - vw) / (1.0 + abs(vq)))
        yield "quadratic-energy identity", worst <= 1e-8, f"max rel defect {worst:.2e}"

    if isinstance(model, ProperModel):
        prior, mixing = model.prior, model.mixing
        worst = 0.0
        for _ in range(200):
            u = rng.gamma(1.5, 1.0, size=n) + 1e-3
            scale = 1.0 + float(np.abs(compute_update(u, data, prior).psi).max())
            worst = max(worst, psi_identity_residual(u, data, prior) / scale)
        yield "psi identity", worst <= 1e-9, f"max scaled residual {worst:.2e}"

        u = rng.gamma(2.0, 1.0, size=n) + 1e-3
        exact = ergodicity.cond_mean_energy_proper(u, data, prior)
        est, se = ergodicity.mc_cond_mean_energy_proper(u, data, prior, n_mc, rng)
        ok = abs(est - exact) <= 3.0 * se
        yield "conditional mean (proper)", ok, f"exact {exact:.4g}, mc {est:.4g} +- {se:.2g}"

        consts = ergodicity.drift_constants_proper(data, prior, mixing)
        ok = True
        detail = []
        for _ in range(5):
            state = _random_state(rng, n, p, d)
            est, se = ergodicity.mc_two_step_energy_proper(
                state, data, prior, mixing, max(n_reps // 4, 100), rng
            )
            ok = ok and est <= consts.m5 + 3.0 * se
            detail.append(f"{est:.4g}")
        yield "drift bound (proper)", ok, f"m5 {consts.m5:.4g}, estimates {', '.join(detail)}"

        bound = ergodicity.MinorizationBound(data, prior, mixing)
        ok = True
        points = [
            ( _random_state(rng, n, p, d).beta, _random_state(rng, n, p, d).sigma)
            for _ in range(3)
        ]
        start = _random_state(rng, n, p, d)
        means, ses = ergodicity.mc_minorization_expectation(
            points, start, data, prior, mixing, max(n_reps // 4, 100), rng
        )
        for (beta, sigma), m, s in zip(points, means, ses):
            ok = ok and m >= bound.evaluate(beta, sigma) - 3.0 * s
        yield "minorization bound", ok, f"{len(points)} point(s) checked"
    else:
        t_dof = model.t_dof
        u = rng.gamma(2.0, 1.0, size=n) + 1e-3
        exact = ergodicity.cond_mean_energy_improper(u, data)
        est, se = ergodicity.mc_cond_mean_energy_improper(u, data, n_mc, rng)
        ok = abs(est - exact) <= 3.0 * se
        yield "conditional mean (improper)", ok, f"exact {exact:.4g}, mc {est:.4g} +- {se:.2g}"

        cap = 5.0
        rep = ergodicity.drift_coefficient_improper(data, t_dof, cap)
        state = _scaled_state(rng, n, p, d, 10.0 * cap)
        est, se = ergodicity.mc_two_step_energy_improper(
            state, data, t_dof, max(n_reps // 4, 100), rng
        )
        v0 = ergodicity.energy_quadratic(state)
        ok = est <= rep.rho * v0 + 3.0 * se
        yield "drift contraction (improper)", ok, f"rho*V {rep.rho * v0:.4g}, mc {est:.4g}"


def _random_state(rng, n, p, d):
    w = rng.standard_normal((d, d + 2))
    sigma = w @ w.T / (d + 2) + 0.1 * np.eye(d)
    return ChainState(rng.standard_normal((p, d)), sigma, np.ones(n))


def _scaled_state(rng, n, p, d, target_energy):
    state = _random_state(rng, n, p, d)
    v = ergodicity.energy_quadratic(state)
    return ChainState(state.beta, state.sigma * (v / target_energy), np.ones(n))


def cmd_verify(cfg, seed_override, out_override, level):
    data = _load_dataset(cfg)
    model = _build_model(cfg, data)
    seed = seed_override if seed_override is not None else 0
    failures = 0
    for name, passed, detail in _verify_suite(model, data, level, seed):
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
        failures += 0 if passed else 1
    return EXIT_OK if failures == 0 else EXIT_CHECK_FAILED


def cmd_geweke(cfg, seed_override, out_override):
    if "geweke" not in cfg:
        raise InvalidParameterError("config needs a [geweke] section")
    sec = cfg["geweke"]
    n, p, d = sec.getint("n"), sec.getint("p"), sec.getint("d")
    iterations = sec.getint("iterations", 20000)
    seed = seed_override if seed_override is not None else sec.getint("seed", 0)
    prior = _build_prior(cfg, p, d) if "model" in cfg else NIWPrior.default(p, d)
    mixing = _build_mixing(cfg)
    result = geweke_joint_test((n, p, d), prior, mixing, iterations, seed)
    out = _out_dir(cfg, out_override)
    _write_json(out / "geweke_report.json", result.to_dict())
    for row in result.rows:
        print(f"{row['name']:<14} z = {row['z']:+7.3f}   p = {row['p_value']:.4f}")
    print(f"max |z| = {result.max_abs_z:.3f}")
    return EXIT_OK if result.passed() else EXIT_CHECK_FAILED


def _write_matrix_csv(path, mat, prefix):
    mat = np.atleast_2d(mat)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"{prefix}{j}" for j in range(mat.shape[1])) + "\n")
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def cmd_simulate(cfg, seed_override, out_override):
    if "simulate" not in cfg:
        raise InvalidParameterError("config needs a [simulate] section")
    sec = cfg["simulate"]
    n, p, d = sec.getint("n"), sec.getint("p"), sec.getint("d")
    beta_true = parse_matrix(sec.get("beta"))
    sigma_true = parse_matrix(sec.get("sigma"))
    seed = seed_override if seed_override is not None else sec.getint("seed", 0)
    intercept = sec.getboolean("intercept", False)
    mixing = _build_mixing(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    data, _u = simulate_dataset(n, p, d, mixing, beta_true, sigma_true, rng,
                                intercept=intercept)
    out = _out_dir(cfg, out_override)
    _write_matrix_csv(out / "X.csv", data.X, "x")
    _write_matrix_csv(out / "Y.csv", data.Y, "y")
    _write_json(out / "truth.json", {
        "n": n, "p": p, "d": d,
        "beta": beta_true.tolist(),
        "sigma": sigma_true.tolist(),
        "mixing": mixing.describe(),
        "seed": int(seed),
        "intercept": intercept,
    })
    print(f"wrote X.csv ({n}x{p}), Y.csv ({n}x{d}) and truth.json to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smnreg",
        description="Gibbs samplers and ergodicity diagnostics for "
                    "scale-mixture-of-normal regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("fit", "run the sampler and write traces, summary and check report"),
        ("check", "evaluate the applicable ergodicity conditions"),
        ("verify", "run the numerical identity and Monte-Carlo verifier suite"),
        ("geweke", "joint-distribution correctness test of the proper sampler"),
        ("simulate", "generate synthetic (X, Y) from the model"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the INI config")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default=None, help="output directory override")
        if name == "verify":
            sp.add_argument("--level", choices=("fast", "full"), default="fast")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.command == "fit":
            return cmd_fit(cfg, args.seed, args.out)
        if args.command == "check":
            return cmd_check(cfg, args.seed, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.seed, args.out, args.level)
        if args.command == "geweke":
            return cmd_geweke(cfg, args.seed, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.seed, args.out)
        raise InvalidParameterError(f"unknown command {args.command!r}")
    except (SmnregError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
