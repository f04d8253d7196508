"""Survival values of the extraction model: cliff, probe, envelope, Jensen.

Computes finite-horizon survival curves on the belief-statistic grid,
shows the discontinuous drop the trigger policy leaves at the trigger
belief, audits local concavity around it, cross-checks the backward
induction against an independent forward Monte Carlo of the same law, and
evaluates the concave envelope and a cliff-straddling Jensen gap.

Run:  python demos/demo_survival_cliff.py
"""

import pathlib
import warnings

import numpy as np

from opacitylab import (ExtractionModel, TriggerPolicy, concavify,
                        concavity_probe, jensen_gap, recursion_check,
                        survival_value_dp)
from opacitylab.survival import belief_path_survival_mc, survival_to_csv

OUT = pathlib.Path("demo-out")


def main():
    warnings.filterwarnings("ignore", message="belief grid")
    OUT.mkdir(exist_ok=True)
    model = ExtractionModel(alpha=0.06, x_max=0.6, s_fail=0.2,
                            shock_std=0.05, sigma0=0.15, b_dagger=0.85,
                            s0=0.55)
    policy = TriggerPolicy(b_dagger=0.85, x_high=0.5, x_low=0.0)
    obs_std = model.obs_std(1.0, 1.0)
    grid = np.linspace(0.0, 1.0, 2001)
    bd = policy.b_dagger
    print("=" * 72)
    print(f"Extraction model: alpha={model.alpha}, x_high={policy.x_high} "
          f"above trigger {bd}, shock {model.shock_std}, observation std "
          f"{obs_std}")
    print("=" * 72)

    curves = survival_value_dp(model, policy, obs_std, 20, grid=grid,
                               return_all=True)
    print("Survival by horizon at selected beliefs "
          "(statistic = P(s > s_fail | belief)):")
    print(f"  {'T':>3} {'V(0.3)':>8} {'V(0.6)':>8} {'V(bd-)':>8} "
          f"{'V(bd+)':>8} {'V(0.95)':>8}")
    for T in (1, 5, 10, 20):
        c = curves[T - 1]
        print(f"  {T:>3} {c(0.3):8.4f} {c(0.6):8.4f} {c(bd - 5e-4):8.4f} "
              f"{c(bd + 5e-4):8.4f} {c(0.95):8.4f}")
        survival_to_csv(c, OUT / f"survival_T{T}.csv")
    print("-> the drop between V(bd-) and V(bd+) is the trigger: one "
          "period of extraction is switched on exactly there.\n")

    c10 = curves[9]
    resid = recursion_check(curves[9], curves[8], model, policy, obs_std)
    mc, hw = belief_path_survival_mc(model, policy, obs_std, 10, 0.9,
                                     200_000, seed=3)
    print(f"Recursion self-consistency residual (T=10): {resid:.2e}")
    print(f"Forward Monte Carlo of the same law at p0=0.9: {mc:.4f} "
          f"+- {hw:.4f} vs backward induction {c10(0.9):.4f}\n")

    probe = concavity_probe(c10, bd, window=0.02)
    print(f"Concavity probe on ({probe.neighborhood[0]:.3f}, "
          f"{probe.neighborhood[1]:.3f}) at T=10:")
    print(f"  midpoint violations: {probe.violations} of {probe.n_pairs} "
          f"pairs, worst gap {probe.worst_gap:.2e} (tol {probe.tol:.1e})")
    print(f"  one-sided slopes at the trigger: left {probe.left_slope:.3f}"
          f", right {probe.right_slope:.3f} (kink {probe.kink:+.3f})")
    print("-> the trigger drop breaks midpoint concavity at fine "
          "resolution; at one-cell scale the drop is indistinguishable "
          "from its kink and the 3-point window is clean.\n")

    envelope, segments = concavify(c10)
    print(f"Least concave majorant: {len(segments)} segment(s) where the "
          f"envelope exceeds the curve")
    for lo, hi in segments[:3]:
        print(f"  ({lo:.4f}, {hi:.4f})")
    print("-> inside these segments a mean-preserving spread of beliefs "
          "strictly raises survival value.\n")

    lo, hi, mean = bd - 0.02, bd + 0.03, bd - 0.005
    p_lo = (hi - mean) / (hi - lo)
    gap = jensen_gap(c10, [lo, hi], [p_lo, 1 - p_lo])
    print(f"Cliff-straddling two-point spread ({lo:.3f}, {hi:.3f}) with "
          f"mean {mean:.3f}: Jensen gap {gap:+.4f}")
    print("-> holding beliefs at the mean beats spreading them across "
          "the trigger: information is harmful at the cliff.")


if __name__ == "__main__":
    main()
