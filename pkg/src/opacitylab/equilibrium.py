"""Symmetric cutoff equilibrium of the coordination game and its hazard.

Each player continues iff their private signal clears a threshold ``x*``.
The threshold solves an indifference condition; because failure is triggered
by any single withdrawal, the equilibrium induces a one-step failure hazard
that jumps at the cutoff belief.  Corners (always-continue, always-withdraw)
are represented explicitly instead of being forced into an interior root.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from opacitylab.models import CoordinationGame, ObservationChannel
from opacitylab.beliefs import posterior_binary

DEFAULT_BRACKET = (-0.5, 1.0)
BRACKET_CAP = (-8.0, 9.0)

INTERIOR = "interior"
ALL_CONTINUE = "all_continue"
ALL_WITHDRAW = "all_withdraw"


class NonMonotoneResidualError(RuntimeError):
    """Raised when the residual changes sign more than once on the scan grid.

    Selecting a root silently would be ambiguous, so the solver aborts and
    attaches the scan for inspection.
    """

    def __init__(self, message, scan_x, scan_residual, crossings):
        super().__init__(message)
        self.scan_x = scan_x
        self.scan_residual = scan_residual
        self.crossings = crossings


class BracketError(RuntimeError):
    """No sign change inside a user-pinned bracket (expansion disabled)."""

    def __init__(self, message, scan_x, scan_residual):
        super().__init__(message)
        self.scan_x = scan_x
        self.scan_residual = scan_residual


def indifference_residual(x, game: CoordinationGame,
                          channel: ObservationChannel):
    """Payoff gain of continuing over withdrawing for a player at cutoff ``x``.

    Equals ``delta * R * P(theta=1 | x) * P(x_j >= x | x_i = x) - w`` where
    the opponent-continues probability mixes the two conditional signal
    tails through the posterior:

        P(x_j >= x | x_i = x) = p1(x) * (1 - Phi((x-1)/s))
                              + (1 - p1(x)) * (1 - Phi(x/s)).

    Both tails vanish as ``x -> +inf`` and ``p1 -> 0`` as ``x -> -inf``, so
    the residual tends to ``-w`` in both tails and is hump-shaped in
    between; the economically relevant cutoff is the lower root, where the
    residual crosses zero from below.  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cutoff x must be finite")
    s = channel.noise_std
    p1 = posterior_binary(x, game.q, channel)
    cont = p1 * norm.sf((x - 1.0) / s) + (1.0 - p1) * norm.sf(x / s)
    out = game.delta * game.R * p1 * cont - game.w
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThresholdEquilibrium:
    """Solved cutoff equilibrium (or corner classification).

    ``kind`` is one of ``interior``, ``all_continue``, ``all_withdraw``.
    For corners ``x_star`` is ``-inf`` (never withdraw) or ``+inf`` (always
    withdraw) and ``residual`` is NaN.  For interior solutions ``c_star``
    is the posterior at the signal cutoff and ``residual`` the achieved
    indifference residual.
    """

    kind: str
    x_star: float
    c_star: float
    residual: float
    game: CoordinationGame
    channel: ObservationChannel
    bracket: tuple
    tol: float

    @property
    def interior(self) -> bool:
        return self.kind == INTERIOR


def _crossings(r):
    """Indices i where the residual changes sign between scan points i, i+1."""
    sign = np.sign(r)
    sign[sign == 0] = 1.0
    flips = np.nonzero(sign[:-1] != sign[1:])[0]
    ups = [i for i in flips if r[i] < 0 <= r[i + 1] or (r[i] < 0 < r[i + 1])]
    downs = [i for i in flips if i not in ups]
    return ups, downs


def residual_scan(game, channel, lo, hi, n=2001):
    xs = np.linspace(lo, hi, n)
    return xs, indifference_residual(xs, game, channel)


def _bisect(f, lo, hi, tol, xtol, max_iter=200):
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol or (hi - lo) <= xtol:
            return mid, fmid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return mid, fmid


def solve_threshold(game: CoordinationGame, channel: ObservationChannel,
                    tol: float = 1e-10, bracket: Optional[tuple] = None,
                    expand: bool = True, scan_points: int = 2001,
                    xtol: float = 1e-12) -> ThresholdEquilibrium:
    """Solve for the signal-cutoff equilibrium by scan-then-bisect.

    The residual is scanned on the bracket (default ``(-0.5, 1.0)``, which
    isolates the stable lower root; see :func:`indifference_residual`).  If
    no sign change is found the bracket is doubled about its center up to
    the cap ``(-8, 9)``; a crossing from negative to positive is refined by
    bisection to ``|residual| <= tol`` or bracket width ``xtol``.

    Corner handling on the capped scan: if continuing is a best response to
    an always-continuing opponent at every scanned signal -- i.e.
    ``delta * R * posterior(lo) >= w`` at the bracket's low end, where the
    posterior is smallest -- the always-continue profile is an equilibrium
    and is returned (this is the uninformative-signal regime; with ``w = 0``
    it holds degenerately for any channel).  Otherwise, a residual that is
    negative everywhere means no cutoff sustains continuing and the
    always-withdraw corner is returned.

    Raises :class:`NonMonotoneResidualError` if the scan detects multiple
    sign changes (ambiguous root selection), and :class:`BracketError` if a
    user bracket with ``expand=False`` contains no sign change.
    """
    user_bracket = bracket is not None
    lo, hi = bracket if user_bracket else DEFAULT_BRACKET
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    cap_lo, cap_hi = min(BRACKET_CAP[0], lo), max(BRACKET_CAP[1], hi)

    def corner(scan_lo):
        if game.delta * game.R * posterior_binary(scan_lo, game.q, channel) \
                >= game.w:
            return ThresholdEquilibrium(
                kind=ALL_CONTINUE, x_star=-math.inf, c_star=0.0,
                residual=math.nan, game=game, channel=channel,
                bracket=(lo, hi), tol=tol)
        return ThresholdEquilibrium(
            kind=ALL_WITHDRAW, x_star=math.inf, c_star=1.0,
            residual=math.nan, game=game, channel=channel,
            bracket=(lo, hi), tol=tol)

    while True:
        xs, r = residual_scan(game, channel, lo, hi, scan_points)
        ups, downs = _crossings(r)
        n_cross = len(ups) + len(downs)
        if n_cross >= 2:
            raise NonMonotoneResidualError(
                f"non-monotone residual: {n_cross} sign changes on "
                f"[{lo}, {hi}]; crossings near "
                f"{[float(xs[i]) for i in ups + downs]}",
                xs, r, {"up": ups, "down": downs})
        if len(ups) == 1:
            i = ups[0]
            x_star, res = _bisect(
                lambda x: indifference_residual(x, game, channel),
                float(xs[i]), float(xs[i + 1]), tol, xtol)
            return ThresholdEquilibrium(
                kind=INTERIOR, x_star=x_star,
                c_star=posterior_binary(x_star, game.q, channel),
                residual=res, game=game, channel=channel,
                bracket=(lo, hi), tol=tol)
        if len(downs) == 1:
            # Residual positive then negative: no stable cutoff in range.
            # Legitimate only when the always-continue profile stands alone.
            eq = corner(lo)
            if eq.kind == ALL_CONTINUE:
                return eq
            raise NonMonotoneResidualError(
                f"isolated downward residual crossing on [{lo}, {hi}] with "
                "no supporting corner", xs, r, {"up": ups, "down": downs})
        # no sign change on this bracket
        if (lo, hi) == (cap_lo, cap_hi) or not expand:
            if user_bracket and not expand:
                raise BracketError(
                    f"no sign change on pinned bracket [{lo}, {hi}]", xs, r)
            return corner(lo)
        center, width = 0.5 * (lo + hi), hi - lo
        lo = max(cap_lo, center - width)
        hi = min(cap_hi, center + width)


def one_step_failure_prob(eq: ThresholdEquilibrium, theta: int) -> float:
    """Probability that at least one of two signals falls below the cutoff.

    Conditional on the true state ``theta``, each player's signal clears
    ``x*`` with probability ``1 - Phi((x* - theta)/s)``, independently, so

        P(failure) = 1 - (1 - Phi((x* - theta)/s))^2

    evaluated in the cancellation-free form ``Phi * (2 - Phi)``.  Corners
    return 0 (never withdraw) or 1 (withdraw immediately).
    """
    if theta not in (0, 1):
        raise ValueError(f"theta must be 0 or 1, got {theta}")
    if eq.kind == ALL_CONTINUE:
        return 0.0
    if eq.kind == ALL_WITHDRAW:
        return 1.0
    s = eq.channel.noise_std
    below = norm.cdf((eq.x_star - theta) / s)
    return float(below * (2.0 - below))


@dataclass(frozen=True)
class TriggerDetection:
    b_dagger: float
    left_slope: float
    right_slope: float
    gap: float


@dataclass(frozen=True)
class HazardProfile:
    """One-step failure probability as a function of the player's belief."""

    beliefs: np.ndarray
    hazard: np.ndarray
    withdraw: np.ndarray  # equilibrium action at each belief (True = withdraw)
    detected_trigger: Optional[TriggerDetection]
    equilibrium: ThresholdEquilibrium


def _one_sided_slope(x, y):
    """Least-squares slope through up to 5 points (one-sided difference)."""
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def hazard_profile(game: CoordinationGame, channel: ObservationChannel,
                   belief_grid=None, p_min: float = 0.05,
                   eq: Optional[ThresholdEquilibrium] = None) -> HazardProfile:
    """Map each belief to the probability that the next period ends in failure.

    The grid belief is the player's own current posterior that the state is
    1.  Under equilibrium play the player withdraws iff that posterior falls
    below the cutoff belief ``c*``, which itself triggers failure, so the
    hazard is 1 there.  At or above ``c*`` the player continues and failure
    requires the opponent's signal to fall below ``x*``:

        hazard(b) = b * Phi((x* - 1)/s) + (1 - b) * Phi(x*/s),   b >= c*.

    A jump of at least ``p_min`` between adjacent grid points is reported as
    a detected trigger with one-sided slopes (5-point fits on each side).
    Corners produce constant hazard 0 or 1 and no trigger.
    """
    if belief_grid is None:
        belief_grid = np.linspace(0.0, 1.0, 401)
    b = np.asarray(belief_grid, dtype=float)
    if eq is None:
        eq = solve_threshold(game, channel)
    if eq.kind == ALL_CONTINUE:
        hazard = np.zeros_like(b)
        withdraw = np.zeros_like(b, dtype=bool)
    elif eq.kind == ALL_WITHDRAW:
        hazard = np.ones_like(b)
        withdraw = np.ones_like(b, dtype=bool)
    else:
        s = eq.channel.noise_std
        phi1 = norm.cdf((eq.x_star - 1.0) / s)
        phi0 = norm.cdf(eq.x_star / s)
        withdraw = b < eq.c_star
        opponent_below = b * phi1 + (1.0 - b) * phi0
        hazard = np.where(withdraw, 1.0, opponent_below)
    trigger = None
    jumps = np.abs(np.diff(hazard))
    if jumps.size and np.max(jumps) >= p_min:
        j = int(np.argmax(jumps))
        left = slice(max(0, j - 4), j + 1)
        right = slice(j + 1, min(len(b), j + 6))
        trigger = TriggerDetection(
            b_dagger=float(0.5 * (b[j] + b[j + 1])),
            left_slope=_one_sided_slope(b[left], hazard[left]),
            right_slope=_one_sided_slope(b[right], hazard[right]),
            gap=float(jumps[j]))
    return HazardProfile(beliefs=b, hazard=hazard, withdraw=withdraw,
                         detected_trigger=trigger, equilibrium=eq)


def equilibrium_to_csv(eq: ThresholdEquilibrium, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "x_star", "c_star", "residual",
                         "epsilon", "lambda", "q", "R", "delta", "w"])
        writer.writerow([eq.kind, repr(eq.x_star), repr(eq.c_star),
                         repr(eq.residual), repr(eq.channel.epsilon),
                         repr(eq.channel.lam), repr(eq.game.q),
                         repr(eq.game.R), repr(eq.game.delta),
                         repr(eq.game.w)])


def hazard_to_csv(profile: HazardProfile, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["belief", "hazard", "action"])
        for b, h, wd in zip(profile.beliefs, profile.hazard,
                            profile.withdraw):
            writer.writerow([repr(float(b)), repr(float(h)),
                             "withdraw" if wd else "continue"])
