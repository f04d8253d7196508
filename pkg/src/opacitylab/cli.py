"""Command-line entry points.

Subcommands
    verify-garbling  posterior sampling, martingale and convex-order checks
    solve            cutoff equilibrium and hazard profile of the game
    dp               extraction-model survival curves, concavity, envelope
    sweep            (epsilon, lambda, T) failure-probability sweep with
                     viability verdicts and optional opacity choice

Common flags: ``--config PATH``, ``--preset NAME``, ``--seed N``,
``--out DIR`` (or the OPACITYLAB_OUT environment variable),
``--n-samples N``, ``--threads K``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(no bracketable root / non-monotone residual), 4 verification failure.
All file formats are documented in docs/formats.md; every run writes a
manifest from which it can be reproduced byte-identically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from opacitylab import __version__
from opacitylab.models import (ConfigError, CoordinationGame, ExtractionModel,
                               ObservationChannel, channel_from_config,
                               load_config, validate_config)
from opacitylab import beliefs as bel
from opacitylab import equilibrium as eqm
from opacitylab import io_utils as io
from opacitylab import survival as surv
from opacitylab import sweeps as swp
from opacitylab.presets import get_preset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


def _err(msg: str):
    print(f"opacitylab: error: {msg}", file=sys.stderr)


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _outdir(args, subcommand: str) -> Path:
    out = args.out or os.environ.get("OPACITYLAB_OUT") \
        or f"out-{subcommand}"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args, subcommand: str) -> dict:
    if args.config and args.preset:
        raise ConfigError(["give either --config or --preset, not both"])
    if args.preset:
        config = get_preset(args.preset)
    elif args.config:
        config = load_config(args.config)
    else:
        config = None
    return config


def _parse_float_list(text: str, flag: str):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError([f"{flag} must be a comma-separated list of "
                           f"numbers, got {text!r}"]) from None
    if not values:
        raise ConfigError([f"{flag} must contain at least one number"])
    return values


# ---------------------------------------------------------------------------
# verify-garbling
# ---------------------------------------------------------------------------

def cmd_verify_garbling(args) -> int:
    config = _load(args, "verify-garbling")
    if config is None:
        lams = _parse_float_list(args.lambdas or "1,4", "--lambda")
        config = {
            "schema_version": 1,
            "model": "coordination",
            "coordination": {"q": args.q, "R": 1.0, "delta": 0.9},
            "channel": {"epsilon": args.eps, "lambda": min(lams),
                        "lambda_min": min(1.0, min(lams)),
                        "lambda_max": max(1e6, max(lams))},
            "garbling": {
                "q_lattice": [args.q],
                "epsilon_lattice": [args.eps],
                "lambda_lattice": sorted(lams),
                "composition_pair": sorted(lams)[-2:] if len(lams) >= 2
                else [lams[0], lams[0]],
                "n_samples": args.n_samples or 10 ** 5,
                "seed": args.seed if args.seed is not None else 7,
            },
        }
    g = config.get("garbling", {})
    n = int(args.n_samples or g.get("n_samples", 10 ** 5))
    seed = int(args.seed if args.seed is not None else g.get("seed", 7))
    outdir = _outdir(args, "verify-garbling")
    io.write_manifest(outdir, "verify-garbling", config, seed, "running",
                      arguments=_args_dict(args), config_path=args.config)
    report = {"martingale": [], "convex_order": [], "composition": [],
              "n_samples": n, "seed": seed}
    all_pass = True
    for q in g["q_lattice"]:
        for eps in g["epsilon_lattice"]:
            lams = sorted(g["lambda_lattice"])
            channels = [ObservationChannel(
                epsilon=eps, lam=lam, lam_min=min(1.0, lams[0]),
                lam_max=max(1e6, lams[-1])) for lam in lams]
            samples = [bel.sample_posteriors(q, ch, n, seed)
                       for ch in channels]
            for ch, smp in zip(channels, samples):
                gap, bound = bel.martingale_gap(smp)
                ok = gap <= bound
                all_pass &= ok
                report["martingale"].append(
                    {"q": q, "epsilon": eps, "lambda": ch.lam,
                     "gap": gap, "bound": bound, "pass": ok})
            for (ch1, s1), (ch2, s2) in zip(
                    zip(channels, samples), zip(channels[1:], samples[1:])):
                rep = bel.verify_convex_order(s1, s2)
                all_pass &= rep.passed
                report["convex_order"].append(
                    {"q": q, "epsilon": eps, "lambda_fine": ch1.lam,
                     "lambda_coarse": ch2.lam, "pass": rep.passed,
                     "tests": [{"name": r.name, "mean_fine": r.mean_fine,
                                "mean_coarse": r.mean_coarse,
                                "pass": r.passed} for r in rep.results]})
            lam_mid, lam_final = g.get("composition_pair", lams[-2:])
            if lam_mid < lam_final:
                base = channels[0]
                direct = bel.sample_posteriors(
                    q, bel.garble(base, lam_final), n, seed + 1)
                staged = bel.sample_posteriors_two_stage(
                    q, base, lam_mid, lam_final, n, seed + 2)
                stat, threshold = bel.two_sample_cdf_distance(
                    direct.draws, staged.draws)
                ok = stat <= threshold
                all_pass &= ok
                report["composition"].append(
                    {"q": q, "epsilon": eps, "lambda_mid": lam_mid,
                     "lambda_final": lam_final, "cdf_distance": stat,
                     "threshold": threshold, "pass": ok})
    # Posterior draws for the first lattice point, for inspection
    q0, e0 = g["q_lattice"][0], g["epsilon_lattice"][0]
    for lam in sorted(g["lambda_lattice"]):
        ch = ObservationChannel(epsilon=e0, lam=lam, lam_min=1.0,
                                lam_max=max(1e6, lam))
        smp = bel.sample_posteriors(q0, ch, min(n, 10 ** 5), seed)
        bel.posterior_samples_to_csv(
            smp, outdir / f"posteriors_lambda{lam:g}.csv")
    report["pass"] = all_pass
    (outdir / "garbling_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    io.write_manifest(outdir, "verify-garbling", config, seed, "complete",
                      arguments=_args_dict(args), config_path=args.config,
                      extra={"pass": all_pass})
    print(f"verify-garbling: {'PASS' if all_pass else 'FAIL'} "
          f"({len(report['martingale'])} martingale, "
          f"{len(report['convex_order'])} convex-order, "
          f"{len(report['composition'])} composition checks) -> {outdir}")
    return EXIT_OK if all_pass else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    config = _load(args, "solve")
    if config is None:
        raise ConfigError(["solve needs --config or --preset"])
    model = validate_config(config)
    if not isinstance(model, CoordinationGame):
        raise ConfigError(["solve requires a coordination model"])
    channel = channel_from_config(config)
    solver = config.get("solver", {})
    outdir = _outdir(args, "solve")
    seed = int(args.seed if args.seed is not None else 0)
    io.write_manifest(outdir, "solve", config, seed, "running",
                      arguments=_args_dict(args), config_path=args.config)
    try:
        eq = eqm.solve_threshold(
            model, channel,
            tol=solver.get("tol", 1e-10),
            bracket=tuple(solver["bracket"]) if "bracket" in solver else None,
            expand=solver.get("expand_bracket", True))
    except eqm.BracketError as exc:
        _err(f"no sign change: {exc}")
        xs, rs = exc.scan_x, exc.scan_residual
        io.write_csv(outdir / "residual_scan.csv", ["x", "residual"],
                     list(zip(xs.tolist(), rs.tolist())))
        io.write_manifest(outdir, "solve", config, seed, "failed",
                          arguments=_args_dict(args), config_path=args.config)
        return EXIT_NUMERICAL
    except eqm.NonMonotoneResidualError as exc:
        _err(f"non-monotone residual: {exc}")
        xs, rs = exc.scan_x, exc.scan_residual
        io.write_csv(outdir / "residual_scan.csv", ["x", "residual"],
                     list(zip(xs.tolist(), rs.tolist())))
        io.write_manifest(outdir, "solve", config, seed, "failed",
                          arguments=_args_dict(args), config_path=args.config)
        return EXIT_NUMERICAL
    eqm.equilibrium_to_csv(eq, outdir / "equilibrium.csv")
    profile = eqm.hazard_profile(model, channel, eq=eq)
    eqm.hazard_to_csv(profile, outdir / "hazard.csv")
    io.write_manifest(outdir, "solve", config, seed, "complete",
                      arguments=_args_dict(args), config_path=args.config,
                      extra={"equilibrium_kind": eq.kind})
    if eq.kind == eqm.ALL_CONTINUE:
        note = ("always-continue corner: continuing is a best response at "
                "every scanned signal (uninformative signals or w = 0), so "
                "no interior cutoff exists and failure never occurs")
    elif eq.kind == eqm.ALL_WITHDRAW:
        note = ("always-withdraw corner: no cutoff makes continuing "
                "worthwhile anywhere, so failure is immediate")
    else:
        note = (f"interior cutoff x* = {eq.x_star:.12g}, belief cutoff "
                f"c* = {eq.c_star:.12g}, residual {eq.residual:.3e}")
    trig = profile.detected_trigger
    if trig is not None:
        note += (f"; hazard trigger at belief {trig.b_dagger:.6g} with gap "
                 f"{trig.gap:.4g}")
    print(f"solve: {eq.kind} -> {outdir}\n  {note}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# dp
# ---------------------------------------------------------------------------

def cmd_dp(args) -> int:
    config = _load(args, "dp")
    if config is None:
        raise ConfigError(["dp needs --config or --preset"])
    model = validate_config(config)
    if not isinstance(model, ExtractionModel):
        raise ConfigError(["dp requires an extraction model"])
    channel = channel_from_config(config)
    dp_cfg = config.get("dp", {})
    pol_cfg = config.get("policy", {})
    policy = surv.TriggerPolicy(
        b_dagger=pol_cfg.get("b_dagger", model.b_dagger),
        x_high=pol_cfg.get("x_high", model.x_max),
        x_low=pol_cfg.get("x_low", 0.0))
    horizons = dp_cfg.get("horizons", [1, 5, 10, 20])
    if args.horizons:
        horizons = [int(t) for t in
                    _parse_float_list(args.horizons, "--horizons")]
    if any(t < 1 for t in horizons):
        raise ConfigError(["horizon must be >= 1"])
    grid = np.linspace(0.0, 1.0, int(dp_cfg.get("grid_points", 2001)))
    window = dp_cfg.get("probe_window", 0.02)
    obs_std = model.obs_std(channel.epsilon, channel.lam)
    seed = int(args.seed if args.seed is not None else 0)
    outdir = _outdir(args, "dp")
    io.write_manifest(outdir, "dp", config, seed, "running",
                      arguments=_args_dict(args), config_path=args.config)
    curves = surv.survival_value_dp(model, policy, obs_std, max(horizons),
                                    grid=grid, return_all=True)
    report = {"horizons": {}, "obs_std": obs_std,
              "steady_state_std": surv.steady_state_variance(
                  model, obs_std) ** 0.5}
    for T in horizons:
        curve = curves[T - 1]
        envelope, segments = surv.concavify(curve)
        surv.survival_to_csv(curve, outdir / f"survival_T{T}.csv",
                             envelope=envelope, segments=segments)
        probe = surv.concavity_probe(curve, policy.b_dagger, window)
        report["horizons"][str(T)] = {
            "probe_window": window,
            "neighborhood": list(probe.neighborhood),
            "n_pairs": probe.n_pairs,
            "violations": probe.violations,
            "worst_gap": probe.worst_gap,
            "tol": probe.tol,
            "left_slope": probe.left_slope,
            "right_slope": probe.right_slope,
            "kink": probe.kink,
            "envelope_segments": [list(s) for s in segments],
        }
        if T > 1:
            report["horizons"][str(T)]["recursion_residual"] = \
                surv.recursion_check(curves[T - 1], curves[T - 2], model,
                                     policy, obs_std)
    (outdir / "concavity_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    io.write_manifest(outdir, "dp", config, seed, "complete",
                      arguments=_args_dict(args), config_path=args.config)
    worst = max(report["horizons"][str(T)]["violations"] for T in horizons)
    print(f"dp: {len(horizons)} survival curves -> {outdir}\n"
          f"  concavity probe around b_dagger={policy.b_dagger}: "
          f"max violations per horizon = {worst} (see concavity_report.json)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    config = _load(args, "sweep")
    if config is None:
        raise ConfigError(["sweep needs --config or --preset"])
    model = validate_config(config)
    channel = channel_from_config(config)
    sw = config.get("sweep")
    if not sw:
        raise ConfigError(["config lacks a 'sweep' section"])
    n_samples = int(args.n_samples or sw.get("n_samples", 10 ** 6))
    base_seed = int(args.seed if args.seed is not None
                    else sw.get("base_seed", 0))
    # record the effective parameters so the manifest reproduces this run
    config = json.loads(json.dumps(config))
    config["sweep"]["n_samples"] = n_samples
    config["sweep"]["base_seed"] = base_seed
    sw = config["sweep"]
    grid = swp.SweepGrid(
        epsilon_ladder=sw["epsilon_ladder"], lambda_grid=sw["lambda_grid"],
        horizons=sw["horizons"], n_samples=n_samples, base_seed=base_seed)
    policy = None
    if isinstance(model, ExtractionModel):
        pol_cfg = config.get("policy", {})
        policy = surv.TriggerPolicy(
            b_dagger=pol_cfg.get("b_dagger", model.b_dagger),
            x_high=pol_cfg.get("x_high", model.x_max),
            x_low=pol_cfg.get("x_low", 0.0))
    outdir = _outdir(args, "sweep")
    cells_path = outdir / "cells.csv"
    completed = {}
    previous = io.read_manifest(outdir)
    if args.resume and previous is not None:
        if previous["config_hash"] != io.config_hash(config) or \
                previous["base_seed"] != base_seed:
            raise ConfigError(
                ["cannot resume: existing manifest was produced by a "
                 "different configuration or seed"])
        completed = io.read_sweep_cells(cells_path)
    n_expected = (len(grid.epsilon_ladder) * len(grid.lambda_grid)
                  * len(grid.horizons))
    io.write_manifest(outdir, "sweep", config, base_seed, "running",
                      arguments=_args_dict(args), config_path=args.config,
                      extra={"cells_expected": n_expected,
                             "cells_completed": len(completed)})
    header_needed = not (args.resume and cells_path.exists() and completed)
    fh = open(cells_path, "w" if header_needed else "a", newline="")
    import csv as _csv
    writer = _csv.writer(fh)
    if header_needed:
        writer.writerow(io.SWEEP_HEADER)

    def on_cell(key, cell, fresh):
        if not fresh and not header_needed:
            return  # already on disk from the interrupted run
        writer.writerow([io.fmt(v) for v in (
            key[0], key[1], cell.horizon, cell.epsilon, cell.lam,
            cell.failure_prob, cell.ci_halfwidth, cell.n_samples, cell.seed,
            cell.mean_payoff, cell.payoff_ci_halfwidth,
            cell.equilibrium_kind)])
        fh.flush()

    try:
        result = swp.run_sweep(model, grid, channel, policy=policy,
                               threads=max(1, args.threads),
                               completed=completed, cell_callback=on_cell)
    finally:
        fh.close()
    summary = io.sweep_summary(result, grid)
    outcome = None
    if "choose_opacity" in config:
        co = config["choose_opacity"]
        outcome = swp.choose_opacity(
            model, channel, grid.lambda_grid, int(co["horizon"]),
            int(co.get("n_samples", n_samples)), int(co.get("seed", 1)),
            policy=policy)
        summary["opacity_choice"] = {
            "lambda_star": outcome.lambda_star,
            "lambda_star_gt_min": outcome.lambda_star_gt_min,
            "statistically_tied": outcome.statistically_tied,
            "tie_set": list(outcome.tie_set),
            "separation": outcome.separation,
            "separation_ci": outcome.separation_ci,
            "payoffs": [{"lambda": p.lam, "mean_payoff": p.mean_payoff,
                         "ci_halfwidth": p.ci_halfwidth,
                         "equilibrium_kind": p.equilibrium_kind}
                        for p in outcome.payoffs],
        }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    io.write_manifest(outdir, "sweep", config, base_seed, "complete",
                      arguments=_args_dict(args), config_path=args.config,
                      extra={"cells_expected": n_expected,
                             "cells_completed": len(result.cells)})
    lines = [f"sweep: {len(result.cells)} cells -> {outdir}"]
    for lam, verdict in sorted(result.verdicts.items()):
        lines.append(f"  lambda={lam:g}: {verdict.classification}")
    if outcome is not None:
        lines.append(
            f"  opacity choice: lambda* = {outcome.lambda_star:g} "
            f"(> lambda_min: {outcome.lambda_star_gt_min}, "
            f"tied: {outcome.statistically_tied})")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opacitylab",
        description="Numerical laboratory for survival and opacity in "
                    "dynamic games with absorbing failure.")
    parser.add_argument("--version", action="version",
                        version=f"opacitylab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--preset", help="named built-in configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory "
                                     "(default $OPACITYLAB_OUT or ./out-*)")
        p.add_argument("--n-samples", type=int, default=None,
                       dest="n_samples")
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("verify-garbling",
                       help="martingale, convex-order, composition checks")
    common(p)
    p.add_argument("--q", type=float, default=0.4)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--lambda", dest="lambdas",
                   help="comma-separated noise multipliers, e.g. 1,4")
    p.set_defaults(func=cmd_verify_garbling)

    p = sub.add_parser("solve", help="cutoff equilibrium and hazard profile")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("dp", help="survival DP, concavity probe, envelope")
    common(p)
    p.add_argument("--horizons", help="comma-separated horizons, e.g. 1,5,10")
    p.set_defaults(func=cmd_dp)

    p = sub.add_parser("sweep", help="failure-probability sweep + verdicts")
    common(p)
    p.add_argument("--resume", action="store_true",
                   help="reuse completed cells from an interrupted run")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ConfigError as exc:
        for violation in exc.violations:
            _err(violation)
        return EXIT_CONFIG
    except KeyError as exc:
        _err(f"missing configuration key: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
