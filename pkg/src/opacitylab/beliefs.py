"""Bayesian posteriors under garbled Gaussian channels.

Implements posterior computation for the binary-state model, posterior
sampling, channel garbling, and the verification machinery for the
information-order claims: garbled channels produce posterior distributions
that are dominated in convex order (equal means, smaller spread).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from opacitylab.models import ConfigError, ObservationChannel

CONDITIONINGS = ("unconditional", "given_theta0", "given_theta1")


def posterior_binary(x, q: float, channel: ObservationChannel):
    """Posterior probability of state 1 after observing signal ``x``.

    With prior ``q`` and signal ``x = theta + s * N(0,1)``, ``s`` the
    channel's noise std, the posterior is the two-density ratio

        q * phi((x-1)/s) / [q * phi((x-1)/s) + (1-q) * phi(x/s)]

    evaluated here in log space: the log likelihood ratio collapses to
    ``(2x - 1) / (2 s^2)``, so the posterior is
    ``expit(logit(q) + (2x - 1) / (2 s^2))``, which is overflow-safe for
    any finite signal.  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal x must be finite")
    if not 0 < q < 1:
        raise ValueError(f"prior q must lie in (0,1), got {q}")
    s2 = channel.epsilon * channel.lam
    out = expit(logit(q) + (2.0 * x - 1.0) / (2.0 * s2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PosteriorSample:
    """Posterior draws from one channel, with their generating states/signals."""

    draws: np.ndarray
    thetas: np.ndarray
    signals: np.ndarray
    prior: float
    channel: ObservationChannel
    conditioning: str
    seed: int

    def __post_init__(self):
        if self.conditioning not in CONDITIONINGS:
            raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
        if np.any((self.draws < 0) | (self.draws > 1)):
            raise ValueError("posterior draws must lie in [0,1]")


def sample_posteriors(q: float, channel: ObservationChannel, n: int, seed: int,
                      conditioning: str = "unconditional",
                      n_shards: int = 1) -> PosteriorSample:
    """Draw ``n`` posterior realizations from the channel.

    The state is drawn from the prior (or pinned by ``conditioning``), the
    signal is ``theta + noise_std * N(0,1)``, and the draw is the posterior
    at that signal.  Deterministic given ``seed``: draws are generated in
    ``n_shards`` contiguous shards with per-shard seeds derived from
    ``(seed, shard_index)`` and recombined in shard order, so the output is
    identical no matter how the shards are scheduled.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if conditioning not in CONDITIONINGS:
        raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
    bounds = np.linspace(0, n, n_shards + 1).astype(int)
    thetas = np.empty(n, dtype=np.int8)
    signals = np.empty(n, dtype=float)
    s = channel.noise_std
    for shard in range(n_shards):
        lo, hi = bounds[shard], bounds[shard + 1]
        if hi == lo:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))
        m = hi - lo
        if conditioning == "unconditional":
            th = (rng.random(m) < q).astype(np.int8)
        elif conditioning == "given_theta1":
            th = np.ones(m, dtype=np.int8)
        else:
            th = np.zeros(m, dtype=np.int8)
        thetas[lo:hi] = th
        signals[lo:hi] = th + s * rng.standard_normal(m)
    draws = posterior_binary(signals, q, channel)
    return PosteriorSample(draws=draws, thetas=thetas, signals=signals,
                           prior=q, channel=channel,
                           conditioning=conditioning, seed=seed)


def sample_posteriors_two_stage(q: float, channel: ObservationChannel,
                                lam_mid: float, lam_final: float, n: int,
                                seed: int) -> PosteriorSample:
    """Sample posteriors by garbling in two stages.

    Draws a signal at ``lam_mid``, degrades it to ``lam_final`` by adding
    the complementary independent noise, and computes the posterior under
    the ``lam_final`` channel.  By construction this realizes the
    composition of the two garblings, so its posterior law must match
    :func:`sample_posteriors` run directly at ``lam_final``.
    """
    if not channel.lam <= lam_mid <= lam_final:
        raise ValueError("need channel.lam <= lam_mid <= lam_final")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    theta = (rng.random(n) < q).astype(np.int8)
    s_mid = math.sqrt(channel.epsilon * lam_mid)
    extra = math.sqrt(channel.epsilon * (lam_final - lam_mid))
    x_mid = theta + s_mid * rng.standard_normal(n)
    x_final = x_mid + extra * rng.standard_normal(n)
    final_channel = garble(channel, lam_final)
    draws = posterior_binary(x_final, q, final_channel)
    return PosteriorSample(draws=draws, thetas=theta, signals=x_final,
                           prior=q, channel=final_channel,
                           conditioning="unconditional", seed=seed)


def garble(channel: ObservationChannel, lambda_new: float) -> ObservationChannel:
    """Return the channel degraded to noise multiplier ``lambda_new``.

    Requires ``lambda_new >= channel.lam``: the degraded channel is then
    realizable by adding independent Gaussian noise of variance
    ``epsilon * (lambda_new - lam)`` to the original signal, i.e. it is a
    post-processing of the original channel and carries strictly less
    information.  Composition collapses: garbling to ``lam1`` and then to
    ``lam2`` induces the same posterior law as garbling directly to ``lam2``.
    """
    if lambda_new < channel.lam:
        raise ValueError(
            f"not a garbling: lambda_new {lambda_new} < current {channel.lam}")
    if lambda_new > channel.lam_max:
        raise ConfigError(
            [f"lambda_new {lambda_new} exceeds lam_max {channel.lam_max}"])
    return channel.with_lambda(lambda_new)


# ---------------------------------------------------------------------------
# Convex-order verification
# ---------------------------------------------------------------------------

class ConvexTestBattery:
    """Named convex test functions on [0,1].

    Default members: the square, absolute deviation from the prior, the
    exponential, and hinge functions max(0, b - c) on a grid of kinks c.
    Each member is checked for midpoint convexity on a grid at construction.
    """

    def __init__(self, functions, check_grid=101):
        self.functions = list(functions)
        if len(self.functions) == 0:
            raise ValueError("battery must contain at least one function")
        grid = np.linspace(0.0, 1.0, check_grid)
        for name, f in self.functions:
            vals_a = f(grid[:, None])
            vals_b = f(grid[None, :])
            mid = f((grid[:, None] + grid[None, :]) / 2.0)
            if np.any(mid > (vals_a + vals_b) / 2.0 + 1e-12):
                raise ValueError(f"battery member {name!r} is not convex")

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)

    @classmethod
    def default(cls, prior: float, hinge_kinks=None) -> "ConvexTestBattery":
        if hinge_kinks is None:
            hinge_kinks = np.linspace(0.05, 0.95, 10)
        members = [
            ("square", lambda b: np.square(b)),
            ("abs_dev_prior", lambda b: np.abs(b - prior)),
            ("exp", lambda b: np.exp(b)),
        ]
        for c in hinge_kinks:
            members.append((f"hinge_{c:.2f}",
                            lambda b, c=c: np.maximum(0.0, b - c)))
        return cls(members)


@dataclass(frozen=True)
class ConvexOrderResult:
    name: str
    mean_fine: float
    mean_coarse: float
    slack: float  # tolerance actually applied
    passed: bool


@dataclass(frozen=True)
class ConvexOrderReport:
    results: tuple
    mean_fine: float
    mean_coarse: float
    mean_tol: float
    means_match: bool

    @property
    def passed(self) -> bool:
        return self.means_match and all(r.passed for r in self.results)


def verify_convex_order(sample_fine: PosteriorSample,
                        sample_coarse: PosteriorSample,
                        battery: ConvexTestBattery = None,
                        tol: float = None,
                        se_multiplier: float = 5.0) -> ConvexOrderReport:
    """Check that the finer channel's posteriors dominate in convex order.

    For every convex ``phi`` in the battery, requires
    ``mean phi(B_fine) >= mean phi(B_coarse) - slack`` and that the two
    sample means agree (both distributions must average to the prior).
    When ``tol`` is None the slack is ``se_multiplier`` times the combined
    Monte Carlo standard error of the difference, so the test is
    sample-size-aware; a fixed ``tol`` overrides that.
    """
    if sample_fine.conditioning != "unconditional" or \
            sample_coarse.conditioning != "unconditional":
        raise ValueError("convex-order check needs unconditional samples")
    if sample_fine.prior != sample_coarse.prior:
        raise ValueError(
            f"mismatched priors: {sample_fine.prior} vs {sample_coarse.prior}")
    if battery is None:
        battery = ConvexTestBattery.default(sample_fine.prior)
    bf, bc = sample_fine.draws, sample_coarse.draws
    n1, n2 = len(bf), len(bc)
    results = []
    for name, f in battery:
        vf, vc = f(bf), f(bc)
        mf, mc = float(np.mean(vf)), float(np.mean(vc))
        if tol is None:
            se = math.sqrt(np.var(vf) / n1 + np.var(vc) / n2)
            slack = se_multiplier * se
        else:
            slack = tol
        results.append(ConvexOrderResult(name=name, mean_fine=mf,
                                         mean_coarse=mc, slack=slack,
                                         passed=mf >= mc - slack))
    mean_f, mean_c = float(np.mean(bf)), float(np.mean(bc))
    if tol is None:
        mean_tol = se_multiplier * math.sqrt(
            np.var(bf) / n1 + np.var(bc) / n2)
    else:
        mean_tol = tol
    return ConvexOrderReport(results=tuple(results), mean_fine=mean_f,
                             mean_coarse=mean_c, mean_tol=mean_tol,
                             means_match=abs(mean_f - mean_c) <= mean_tol)


def two_sample_cdf_distance(a, b):
    """Max empirical-CDF gap between two samples and its pass threshold.

    Returns ``(stat, threshold)`` with threshold
    ``1.95 * sqrt((n1 + n2) / (n1 * n2))``; samples from the same law fall
    below the threshold with high probability.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n1, n2 = len(a), len(b)
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / n1
    cdf_b = np.searchsorted(b, pooled, side="right") / n2
    stat = float(np.max(np.abs(cdf_a - cdf_b)))
    threshold = 1.95 * math.sqrt((n1 + n2) / (n1 * n2))
    return stat, threshold


def martingale_gap(sample: PosteriorSample):
    """|mean posterior - prior| and its 4-standard-error bound."""
    draws = sample.draws
    gap = abs(float(np.mean(draws)) - sample.prior)
    bound = 4.0 * float(np.std(draws)) / math.sqrt(len(draws))
    return gap, bound


def posterior_samples_to_csv(sample: PosteriorSample, path):
    """Write draws as CSV with columns draw_index, theta, signal, posterior."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw_index", "theta", "signal", "posterior"])
        for i, (th, x, b) in enumerate(
                zip(sample.thetas, sample.signals, sample.draws)):
            writer.writerow([i, int(th), repr(float(x)), repr(float(b))])
