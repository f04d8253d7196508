"""Result persistence: manifests, CSV writers, and sweep summaries.

Every run directory carries a manifest recording the configuration hash,
base seed, tool version, and cell bookkeeping, so that any output can be
reproduced byte-identically from its manifest.  Floats are written with
``repr`` (shortest round-trip form), which keeps CSV output stable across
reruns of the same configuration and seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

from opacitylab import __version__
from opacitylab.models import SweepCell, SweepResult

MANIFEST_NAME = "manifest.json"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_manifest(outdir, subcommand: str, config: dict, base_seed: int,
                   status: str, arguments: dict = None, extra: dict = None,
                   config_path=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "opacitylab",
        "version": __version__,
        "subcommand": subcommand,
        "config_path": str(config_path) if config_path else None,
        "config_hash": config_hash(config),
        "config": config,
        "base_seed": base_seed,
        "status": status,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "arguments": arguments or {},
    }
    if extra:
        manifest.update(extra)
    path = outdir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(outdir):
    path = Path(outdir) / MANIFEST_NAME
    if not path.exists():
        return None
    return json.loads(path.read_text())


def verify_manifest_config(manifest: dict) -> bool:
    """Recompute the stored config's hash and compare with the recorded one."""
    return config_hash(manifest["config"]) == manifest["config_hash"]


def fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


SWEEP_HEADER = ["eps_index", "lam_index", "horizon", "epsilon", "lambda",
                "failure_prob", "ci_halfwidth", "n_samples", "seed",
                "mean_payoff", "payoff_ci_halfwidth", "equilibrium_kind"]


def sweep_cells_to_csv(result: SweepResult, grid, path):
    eps_idx = {e: i for i, e in enumerate(grid.epsilon_ladder)}
    lam_idx = {l: i for i, l in enumerate(grid.lambda_grid)}
    rows = []
    for c in result.cells:
        rows.append([eps_idx[c.epsilon], lam_idx[c.lam], c.horizon,
                     c.epsilon, c.lam, c.failure_prob, c.ci_halfwidth,
                     c.n_samples, c.seed, c.mean_payoff,
                     c.payoff_ci_halfwidth, c.equilibrium_kind])
    write_csv(path, SWEEP_HEADER, rows)


def read_sweep_cells(path):
    """Load cells from a previous partial run, keyed for resumption."""
    completed = {}
    p = Path(path)
    if not p.exists():
        return completed
    with open(p, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["eps_index"]), int(row["lam_index"]),
                   int(row["horizon"]))
            completed[key] = SweepCell(
                epsilon=float(row["epsilon"]), lam=float(row["lambda"]),
                horizon=int(row["horizon"]),
                failure_prob=float(row["failure_prob"]),
                ci_halfwidth=float(row["ci_halfwidth"]),
                n_samples=int(row["n_samples"]), seed=int(row["seed"]),
                mean_payoff=float(row["mean_payoff"]),
                payoff_ci_halfwidth=float(row["payoff_ci_halfwidth"]),
                equilibrium_kind=row["equilibrium_kind"])
    return completed


def sweep_summary(result: SweepResult, grid) -> dict:
    summary = {
        "schema_version": 1,
        "base_seed": result.base_seed,
        "epsilon_ladder": list(grid.epsilon_ladder),
        "lambda_grid": list(grid.lambda_grid),
        "horizons": list(grid.horizons),
        "n_samples": grid.n_samples,
        "n_cells": len(result.cells),
        "verdicts": {
            str(lam): {
                "classification": v.classification,
                "trends": [
                    {"horizon": t.horizon, "p_hats": list(t.p_hats),
                     "ci_halfwidths": list(t.ci_halfwidths),
                     "decreasing": t.decreasing,
                     "final_below_2ci": t.final_below_2ci,
                     "final_above_3ci": t.final_above_3ci}
                    for t in v.trends],
            }
            for lam, v in result.verdicts.items()
        },
    }
    return summary
