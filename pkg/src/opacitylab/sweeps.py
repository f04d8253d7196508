"""Monte Carlo sweep engines and viability classifiers.

Turns the survival claims into runnable experiments: episode simulators for
both models, failure-probability estimation with Wilson intervals over an
(epsilon, lambda, horizon) grid, trend classification of the vanishing-noise
limit, monotonicity checks of survival in opacity, and the extended game in
which the noise multiplier itself is chosen before play.

Determinism: every cell derives its seed from
``sha256(base_seed, eps_index, lambda_index, horizon)``, so results are
bit-identical for a given configuration regardless of scheduling order.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from opacitylab.models import (CoordinationGame, ExtractionModel,
                               ObservationChannel, SweepCell, SweepResult)
from opacitylab.equilibrium import (ALL_CONTINUE, ALL_WITHDRAW,
                                    ThresholdEquilibrium, solve_threshold)
from opacitylab.survival import (TriggerPolicy, steady_state_variance)

Z95 = 1.959963984540054

VIABLE = "viable-trend"
NON_VIABLE = "non-viable-trend"
INCONCLUSIVE = "inconclusive"


def derive_cell_seed(base_seed: int, eps_index: int, lam_index: int,
                     horizon: int) -> int:
    """Stable 64-bit per-cell seed from the base seed and cell coordinates."""
    digest = hashlib.sha256(
        f"{base_seed}:{eps_index}:{lam_index}:{horizon}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def wilson_halfwidth(p_hat: float, n: int, z: float = Z95) -> float:
    """Halfwidth of the 95% Wilson score interval for a binomial mean."""
    denom = 1.0 + z * z / n
    return z * math.sqrt(p_hat * (1.0 - p_hat) / n
                         + z * z / (4.0 * n * n)) / denom


def wilson_interval(p_hat: float, n: int, z: float = Z95):
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2.0 * n)) / denom
    hw = wilson_halfwidth(p_hat, n, z)
    return center - hw, center + hw


@dataclass(frozen=True)
class EpisodeResult:
    failed: bool
    tau_f: Optional[int]
    payoff: float


# ---------------------------------------------------------------------------
# Episode simulators
# ---------------------------------------------------------------------------

def coordination_episodes(game: CoordinationGame,
                          eq: ThresholdEquilibrium, T: int, n: int,
                          seed: int):
    """Simulate ``n`` coordination-game paths over rounds t = 0..T.

    Each round both players draw fresh signals and withdraw below the
    equilibrium cutoff; any withdrawal fails the episode at that round.
    Flow ``R`` accrues at round t when the state is 1 and no failure has
    occurred through t; payoffs are discounted by ``delta**t``.  The
    always-withdraw corner fails at t = 0 with payoff 0; the
    always-continue corner never fails.

    Returns arrays ``(failed, tau, payoff)`` where ``tau`` is -1 for
    surviving episodes.
    """
    rng = np.random.default_rng(seed)
    theta = (rng.random(n) < game.q).astype(np.int8)
    tau = np.full(n, -1, dtype=np.int64)
    payoff = np.zeros(n)
    if eq.kind == ALL_WITHDRAW:
        tau[:] = 0
        return np.ones(n, dtype=bool), tau, payoff
    if eq.kind == ALL_CONTINUE:
        geom = sum(game.delta ** t for t in range(T + 1))
        payoff[:] = game.R * geom * (theta == 1)
        return np.zeros(n, dtype=bool), tau, payoff
    s = eq.channel.noise_std
    alive = np.ones(n, dtype=bool)
    th = theta.astype(float)
    for t in range(T + 1):
        x1 = th + s * rng.standard_normal(n)
        x2 = th + s * rng.standard_normal(n)
        fail_now = alive & ((x1 < eq.x_star) | (x2 < eq.x_star))
        tau[fail_now] = t
        alive &= ~fail_now
        payoff += (game.delta ** t) * game.R * (theta == 1) * alive
    return tau >= 0, tau, payoff


def extraction_episodes(model: ExtractionModel, policy: TriggerPolicy,
                        obs_std: float, T: int, n: int, seed: int,
                        mean0: Optional[float] = None,
                        draw_initial_from_belief: bool = True):
    """Simulate ``n`` extraction paths over T transitions.

    The filter runs at its steady state: the initial belief is
    ``N(mean0, P*)`` (``mean0`` defaults to the model's ``s0``) and, when
    ``draw_initial_from_belief`` is set, the true initial state is drawn
    from that belief so episode frequencies answer the same question as the
    belief-conditioned survival value.  Each round the trigger policy acts
    on the current survival mass, the state transitions, crossing
    ``s_fail`` absorbs (``tau`` records the transition index, 1-based), and
    the conjugate filter updates on the noisy observation.  Flow payoffs
    ``pi(x_t)`` accrue undiscounted while the episode is alive.
    """
    rng = np.random.default_rng(seed)
    pstar = steady_state_variance(model, obs_std)
    sqrt_pstar = math.sqrt(pstar)
    mstar = pstar + model.shock_std ** 2
    gain = mstar / (mstar + obs_std ** 2)
    if mean0 is None:
        mean0 = model.s0
    mean = np.full(n, float(mean0))
    if draw_initial_from_belief:
        s = mean + sqrt_pstar * rng.standard_normal(n)
    else:
        s = np.full(n, float(mean0))
    alive = np.ones(n, dtype=bool)
    tau = np.full(n, -1, dtype=np.int64)
    payoff = np.zeros(n)
    for t in range(T):
        p_stat = ndtr((mean - model.s_fail) / sqrt_pstar)
        x = policy.extraction(p_stat)
        payoff += model.pi(x) * alive
        s = s - model.alpha * x + model.shock_std * rng.standard_normal(n)
        fail_now = alive & (s <= model.s_fail)
        tau[fail_now] = t + 1
        alive &= ~fail_now
        y = s + obs_std * rng.standard_normal(n)
        pred = mean - model.alpha * x
        mean = pred + gain * (y - pred)
    return tau >= 0, tau, payoff


def _episodes(model, channel: ObservationChannel, strategy, T, n, seed):
    if isinstance(model, CoordinationGame):
        eq = strategy
        if eq is None:
            eq = solve_threshold(model, channel)
        return coordination_episodes(model, eq, T, n, seed)
    if isinstance(model, ExtractionModel):
        if not isinstance(strategy, TriggerPolicy):
            raise TypeError("extraction model needs a TriggerPolicy")
        obs_std = model.obs_std(channel.epsilon, channel.lam)
        return extraction_episodes(model, strategy, obs_std, T, n, seed)
    raise TypeError(f"unsupported model type {type(model)!r}")


def simulate_episode(model, channel: ObservationChannel, strategy, T: int,
                     seed: int) -> EpisodeResult:
    """Simulate a single path; see the batch simulators for conventions."""
    failed, tau, payoff = _episodes(model, channel, strategy, T, 1, seed)
    return EpisodeResult(failed=bool(failed[0]),
                         tau_f=int(tau[0]) if failed[0] else None,
                         payoff=float(payoff[0]))


def estimate_failure_prob(model, channel: ObservationChannel, strategy,
                          T: int, n: int, seed: int):
    """Monte Carlo failure probability with 95% Wilson halfwidth."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    failed, _, _ = _episodes(model, channel, strategy, T, n, seed)
    p_hat = float(np.mean(failed))
    return p_hat, wilson_halfwidth(p_hat, n)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    """Grid of (epsilon, lambda, horizon) cells for a sweep."""

    epsilon_ladder: tuple
    lambda_grid: tuple
    horizons: tuple
    n_samples: int = 10 ** 6
    base_seed: int = 0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_ladder)
        lams = tuple(float(l) for l in self.lambda_grid)
        hs = tuple(int(t) for t in self.horizons)
        object.__setattr__(self, "epsilon_ladder", eps)
        object.__setattr__(self, "lambda_grid", lams)
        object.__setattr__(self, "horizons", hs)
        if not eps or any(e <= 0 for e in eps) or \
                any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_ladder must be positive and strictly "
                             "decreasing")
        if not lams or any(a >= b for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda_grid must be strictly increasing")
        if not hs or any(t < 1 for t in hs):
            raise ValueError("horizons must be integers >= 1")
        if self.n_samples < 10 ** 4:
            raise ValueError(
                f"n_samples must be >= 10^4, got {self.n_samples}")


def default_epsilon_ladder(k_max: int = 7) -> tuple:
    """Geometric ladder 0.1 * 2^-k, k = 0..k_max."""
    return tuple(0.1 * 2.0 ** (-k) for k in range(k_max + 1))


def run_sweep(model, grid: SweepGrid, channel_template: ObservationChannel,
              policy: Optional[TriggerPolicy] = None, threads: int = 1,
              completed=None, cell_callback=None) -> SweepResult:
    """Estimate every cell of the grid; deterministic given the base seed.

    For the coordination game the cutoff equilibrium is resolved once per
    (epsilon, lambda) pair; the extraction model uses the supplied trigger
    policy throughout.  ``completed`` may carry already-computed cells
    (keyed by ``(eps_index, lam_index, horizon)``) to resume an interrupted
    run; recomputed or resumed, the output is identical.  ``cell_callback``
    is invoked as ``callback(key, cell, fresh)`` in deterministic job
    order, regardless of the number of worker threads.
    """
    completed = dict(completed or {})
    jobs = []
    for i_eps, eps in enumerate(grid.epsilon_ladder):
        for i_lam, lam in enumerate(grid.lambda_grid):
            channel = ObservationChannel(
                epsilon=eps, lam=lam,
                lam_min=min(channel_template.lam_min, lam),
                lam_max=max(channel_template.lam_max, lam))
            strategy = policy
            if isinstance(model, CoordinationGame):
                strategy = solve_threshold(model, channel)
            for T in grid.horizons:
                jobs.append((i_eps, i_lam, T, eps, lam, channel, strategy))

    def run_job(job):
        i_eps, i_lam, T, eps, lam, channel, strategy = job
        key = (i_eps, i_lam, T)
        if key in completed:
            return key, completed[key], False
        seed = derive_cell_seed(grid.base_seed, i_eps, i_lam, T)
        failed, _, payoff = _episodes(model, channel, strategy, T,
                                      grid.n_samples, seed)
        p_hat = float(np.mean(failed))
        kind = strategy.kind if isinstance(strategy, ThresholdEquilibrium) \
            else "policy"
        cell = SweepCell(
            epsilon=eps, lam=lam, horizon=T, failure_prob=p_hat,
            ci_halfwidth=wilson_halfwidth(p_hat, grid.n_samples),
            n_samples=grid.n_samples, seed=seed,
            mean_payoff=float(np.mean(payoff)),
            payoff_ci_halfwidth=Z95 * float(np.std(payoff))
            / math.sqrt(grid.n_samples),
            equilibrium_kind=kind)
        return key, cell, True

    cells = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stream = pool.map(run_job, jobs)
            for key, cell, fresh in stream:
                cells.append(cell)
                if cell_callback:
                    cell_callback(key, cell, fresh)
    else:
        for job in jobs:
            key, cell, fresh = run_job(job)
            cells.append(cell)
            if cell_callback:
                cell_callback(key, cell, fresh)
    result = SweepResult(cells=cells, base_seed=grid.base_seed)
    for lam in grid.lambda_grid:
        if len(grid.epsilon_ladder) >= 4:
            result.verdicts[lam] = classify_limit_viability(result, lam)
    return result


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HorizonTrend:
    horizon: int
    p_hats: tuple
    ci_halfwidths: tuple
    decreasing: bool
    final_below_2ci: bool
    final_above_3ci: bool


@dataclass(frozen=True)
class ViabilityVerdict:
    """Finite-evidence classification of the vanishing-noise limit.

    Explicitly a proxy: the trend of the failure probability along the
    epsilon ladder stands in for the unreachable epsilon -> 0 limit, and
    the full evidence is attached.
    """

    lam: float
    classification: str
    trends: tuple  # one HorizonTrend per horizon

    @property
    def limit_viable(self) -> bool:
        return self.classification == VIABLE


def classify_limit_viability(sweep: SweepResult, lam: float) -> ViabilityVerdict:
    """Classify one lambda by the failure-probability trend along the ladder.

    viable-trend: for every horizon the estimates decrease along the ladder
    (up to summed CI slack) and the final value is below twice its CI.
    non-viable-trend: some horizon's final estimate exceeds three times its
    CI.  Anything else is inconclusive.
    """
    cells = [c for c in sweep.cells if c.lam == lam]
    if not cells:
        raise KeyError(f"no cells for lambda {lam}")
    horizons = sorted({c.horizon for c in cells})
    trends = []
    for T in horizons:
        series = sorted((c for c in cells if c.horizon == T),
                        key=lambda c: -c.epsilon)
        if len(series) < 4:
            raise ValueError(
                f"need >= 4 epsilon-ladder points per (lambda, T); got "
                f"{len(series)} for lambda={lam}, T={T}")
        p = [c.failure_prob for c in series]
        hw = [c.ci_halfwidth for c in series]
        decreasing = all(p[k + 1] <= p[k] + hw[k] + hw[k + 1]
                         for k in range(len(p) - 1))
        trends.append(HorizonTrend(
            horizon=T, p_hats=tuple(p), ci_halfwidths=tuple(hw),
            decreasing=decreasing,
            final_below_2ci=p[-1] < 2.0 * hw[-1],
            final_above_3ci=p[-1] > 3.0 * hw[-1]))
    if any(t.final_above_3ci for t in trends):
        cls = NON_VIABLE
    elif all(t.decreasing and t.final_below_2ci for t in trends):
        cls = VIABLE
    else:
        cls = INCONCLUSIVE
    return ViabilityVerdict(lam=lam, classification=cls, trends=tuple(trends))


_ORDER = {NON_VIABLE: 0, INCONCLUSIVE: 1, VIABLE: 2}


def verdicts_monotone_in_lambda(verdicts: dict) -> bool:
    """Whether the viable set is an upper set in lambda."""
    lams = sorted(verdicts)
    ranks = [_ORDER[verdicts[l].classification] for l in lams]
    best = ranks[0]
    for r in ranks[1:]:
        if r < best and best == _ORDER[VIABLE]:
            return False
        best = max(best, r)
    return True


@dataclass(frozen=True)
class MonotonicityViolation:
    epsilon: float
    lam_low: float
    lam_high: float
    survival_low: float
    survival_high: float
    magnitude: float  # decrease beyond CI slack


@dataclass(frozen=True)
class MonotonicityReport:
    horizon: int
    violations: tuple
    checked_pairs: int

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0


def opacity_monotonicity_check(sweep: SweepResult, T: int) -> MonotonicityReport:
    """Check estimated survival is weakly increasing in lambda at fixed eps.

    Adjacent lambda cells may dip by at most the sum of their CI halfwidths;
    larger decreases are reported with their magnitudes.
    """
    cells = [c for c in sweep.cells if c.horizon == T]
    if not cells:
        raise KeyError(f"no cells for horizon {T}")
    lams = sorted({c.lam for c in cells})
    if len(lams) < 3:
        raise ValueError(f"need >= 3 lambda values, got {len(lams)}")
    violations = []
    checked = 0
    for eps in sorted({c.epsilon for c in cells}):
        row = {c.lam: c for c in cells if c.epsilon == eps}
        for lo, hi in zip(lams, lams[1:]):
            if lo not in row or hi not in row:
                continue
            checked += 1
            s_lo = 1.0 - row[lo].failure_prob
            s_hi = 1.0 - row[hi].failure_prob
            slack = row[lo].ci_halfwidth + row[hi].ci_halfwidth
            if s_hi < s_lo - slack:
                violations.append(MonotonicityViolation(
                    epsilon=eps, lam_low=lo, lam_high=hi,
                    survival_low=s_lo, survival_high=s_hi,
                    magnitude=s_lo - slack - s_hi))
    return MonotonicityReport(horizon=T, violations=tuple(violations),
                              checked_pairs=checked)


# ---------------------------------------------------------------------------
# Extended game: choosing the opacity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpacityPayoff:
    lam: float
    mean_payoff: float
    ci_halfwidth: float
    equilibrium_kind: str


@dataclass(frozen=True)
class ExtendedGameOutcome:
    payoffs: tuple               # one OpacityPayoff per lambda
    lambda_star: float
    statistically_tied: bool
    tie_set: tuple
    separation: float            # top payoff minus runner-up
    separation_ci: float         # rss of the two CIs

    @property
    def lambda_star_gt_min(self) -> bool:
        lams = [p.lam for p in self.payoffs]
        return self.lambda_star > min(lams)


def choose_opacity(model, channel_template: ObservationChannel, lambdas,
                   T: int, n: int, seed: int,
                   policy: Optional[TriggerPolicy] = None) -> ExtendedGameOutcome:
    """Estimate expected payoffs per lambda and pick the best one.

    Per-lambda strategies are resolved as in :func:`run_sweep`.  When the
    top payoff's CI overlaps another lambda's CI the outcome is flagged
    statistically tied and the tie is broken toward the smallest lambda in
    the tie set (conservative: it biases against finding that positive
    opacity wins).
    """
    lambdas = sorted(float(l) for l in lambdas)
    payoffs = []
    for i_lam, lam in enumerate(lambdas):
        channel = ObservationChannel(
            epsilon=channel_template.epsilon, lam=lam,
            lam_min=min(channel_template.lam_min, lam),
            lam_max=max(channel_template.lam_max, lam))
        strategy = policy
        kind = "policy"
        if isinstance(model, CoordinationGame):
            strategy = solve_threshold(model, channel)
            kind = strategy.kind
        cell_seed = derive_cell_seed(seed, 0, i_lam, T)
        _, _, pay = _episodes(model, channel, strategy, T, n, cell_seed)
        payoffs.append(OpacityPayoff(
            lam=lam, mean_payoff=float(np.mean(pay)),
            ci_halfwidth=Z95 * float(np.std(pay)) / math.sqrt(n),
            equilibrium_kind=kind))
    best = max(payoffs, key=lambda p: p.mean_payoff)
    tie = [p.lam for p in payoffs
           if p.mean_payoff >= best.mean_payoff
           - (p.ci_halfwidth + best.ci_halfwidth)]
    tied = len(tie) > 1
    lambda_star = min(tie) if tied else best.lam
    others = [p for p in payoffs if p.lam != best.lam]
    if others:
        runner = max(others, key=lambda p: p.mean_payoff)
        separation = best.mean_payoff - runner.mean_payoff
        sep_ci = math.hypot(best.ci_halfwidth, runner.ci_halfwidth)
    else:
        separation, sep_ci = 0.0, 0.0
    return ExtendedGameOutcome(
        payoffs=tuple(payoffs), lambda_star=lambda_star,
        statistically_tied=tied, tie_set=tuple(tie),
        separation=separation, separation_ci=sep_ci)
