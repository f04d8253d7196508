"""Shared domain types and configuration validation.

Everything here is a plain immutable record plus bound checks; the algorithms
live in the sibling modules.  Configuration files are JSON with a mandatory
``schema_version`` field (see docs/formats.md for the schema).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised when a configuration violates one or more type invariants.

    ``violations`` lists human-readable messages, one per violated bound,
    each naming the offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _check(violations, ok, message):
    if not ok:
        violations.append(message)


@dataclass(frozen=True)
class ObservationChannel:
    """Additive Gaussian signal channel with a noise-scale dial.

    A signal about a latent state ``theta`` is ``theta + noise_std * N(0,1)``
    where ``noise_std = sqrt(epsilon * lam)``.  ``epsilon`` is the base noise
    scale (the vanishing-noise parameter) and ``lam`` multiplies it; raising
    ``lam`` is equivalent to adding independent Gaussian noise of variance
    ``epsilon * (lam' - lam)`` to the signal, hence yields a strictly less
    informative channel.
    """

    epsilon: float
    lam: float
    lam_min: float = 1.0
    lam_max: float = 1e6

    def __post_init__(self):
        v = []
        _check(v, self.epsilon > 0, f"epsilon must be > 0, got {self.epsilon}")
        _check(v, self.lam_min > 0, f"lam_min must be > 0, got {self.lam_min}")
        _check(v, self.lam_min <= self.lam_max,
               f"lam_min {self.lam_min} must be <= lam_max {self.lam_max}")
        _check(v, self.lam_min <= self.lam <= self.lam_max,
               f"lam must lie in [{self.lam_min}, {self.lam_max}], got {self.lam}")
        if v:
            raise ConfigError(v)

    @property
    def noise_std(self) -> float:
        """Effective signal standard deviation sqrt(epsilon * lam)."""
        return math.sqrt(self.epsilon * self.lam)

    def with_lambda(self, lam: float) -> "ObservationChannel":
        return dataclasses.replace(self, lam=lam)


@dataclass(frozen=True)
class CoordinationGame:
    """Two-player continue/withdraw game over a hidden binary state.

    The state is 1 with prior probability ``q``.  Both players continuing
    while the state is 1 pays flow ``R``; any withdrawal triggers permanent
    failure with zero continuation payoffs.  ``w`` is the withdrawal outside
    option entering the signal-cutoff indifference condition (it must satisfy
    ``w < delta * R`` for an interior cutoff to exist; ``w = 0`` degenerates
    to the all-continue corner).
    """

    q: float
    R: float
    delta: float
    w: float = None  # default 0.25 * delta * R, set in __post_init__
    horizon_T: int = 10

    def __post_init__(self):
        if self.w is None:
            object.__setattr__(self, "w", 0.25 * self.delta * self.R)
        v = []
        _check(v, 0 < self.q < 1, f"q must lie in (0,1), got {self.q}")
        _check(v, self.R > 0, f"R must be > 0, got {self.R}")
        _check(v, 0 < self.delta < 1, f"delta must lie in (0,1), got {self.delta}")
        _check(v, self.w >= 0, f"w must be >= 0, got {self.w}")
        _check(v, int(self.horizon_T) == self.horizon_T and self.horizon_T >= 1,
               f"horizon_T must be an integer >= 1, got {self.horizon_T}")
        if v:
            raise ConfigError(v)

    @property
    def collapse_regime(self) -> bool:
        """Whether the parameters sit in the open collapse set 0 < q < delta."""
        return 0 < self.q < self.delta


def pi_linear(x):
    return np.asarray(x, dtype=float)


def pi_log1p(x):
    return np.log1p(np.asarray(x, dtype=float))


_PI_KINDS = {"linear": pi_linear, "log1p": pi_log1p}


@dataclass(frozen=True)
class ExtractionModel:
    """Principal extracting from a latent stability state with revolt risk.

    The state follows ``s' = s - alpha * x + shock`` with i.i.d. Gaussian
    shocks of std ``shock_std``; crossing ``s_fail`` from above is absorbing.
    The principal observes ``y = s' + eta`` where eta has std
    ``obs_std(epsilon, lam) = sigma0 * sqrt(epsilon * lam)``: ``sigma0``
    scales the channel, ``lam`` is the opacity dial, and ``epsilon`` the
    vanishing-noise parameter (at ``epsilon = 1`` this reduces to the plain
    ``sigma0 * sqrt(lam)`` map, which is strictly increasing in ``lam``).

    Extraction pays ``pi(x)`` per surviving period, where ``pi_kind`` selects
    a strictly increasing, weakly concave flow payoff (``linear`` or
    ``log1p``).  ``b_dagger`` is the default trigger level on the belief
    statistic ``P(s > s_fail | belief)``.
    """

    alpha: float
    x_max: float
    s_fail: float
    shock_std: float
    sigma0: float = 0.1
    pi_kind: str = "linear"
    b_dagger: float = 0.5
    s0: float = 0.8

    def __post_init__(self):
        v = []
        _check(v, self.alpha > 0, f"alpha must be > 0, got {self.alpha}")
        _check(v, self.x_max > 0, f"x_max must be > 0, got {self.x_max}")
        _check(v, 0 < self.s_fail < 1, f"s_fail must lie in (0,1), got {self.s_fail}")
        _check(v, self.shock_std > 0, f"shock_std must be > 0, got {self.shock_std}")
        _check(v, self.sigma0 > 0, f"sigma0 must be > 0, got {self.sigma0}")
        _check(v, self.pi_kind in _PI_KINDS,
               f"pi_kind must be one of {sorted(_PI_KINDS)}, got {self.pi_kind!r}")
        _check(v, 0 < self.b_dagger < 1,
               f"b_dagger must lie in (0,1), got {self.b_dagger}")
        _check(v, self.s_fail < self.s0 <= 1,
               f"s0 must lie in (s_fail, 1], got {self.s0}")
        if v:
            raise ConfigError(v)

    def sigma_of_lambda(self, lam: float) -> float:
        """Observation noise std at opacity ``lam`` (base epsilon = 1)."""
        return self.sigma0 * math.sqrt(lam)

    def obs_std(self, epsilon: float, lam: float) -> float:
        return self.sigma0 * math.sqrt(epsilon * lam)

    def pi(self, x):
        """Flow payoff of extraction level ``x``."""
        return _PI_KINDS[self.pi_kind](x)


@dataclass(frozen=True)
class SurvivalCurve:
    """Finite-horizon survival probability tabulated on a belief grid."""

    grid: np.ndarray
    values: np.ndarray
    horizon: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        v = []
        _check(v, grid.ndim == 1 and values.ndim == 1 and len(grid) == len(values),
               "grid and values must be 1-d vectors of equal length")
        _check(v, len(grid) >= 2, "grid needs at least 2 points")
        _check(v, bool(np.all(np.diff(grid) > 0)), "grid must be strictly increasing")
        _check(v, bool(np.all((values >= -1e-12) & (values <= 1 + 1e-12))),
               "values must lie in [0,1]")
        _check(v, self.horizon >= 0, f"horizon must be >= 0, got {self.horizon}")
        if v:
            raise ConfigError(v)

    def __call__(self, b):
        """Monotone piecewise-linear interpolation at belief(s) ``b``."""
        return np.interp(b, self.grid, self.values)


@dataclass(frozen=True)
class SweepCell:
    """One Monte Carlo estimate in an (epsilon, lambda, horizon) sweep."""

    epsilon: float
    lam: float
    horizon: int
    failure_prob: float
    ci_halfwidth: float
    n_samples: int
    seed: int
    mean_payoff: float = math.nan
    payoff_ci_halfwidth: float = math.nan
    equilibrium_kind: str = ""

    def __post_init__(self):
        v = []
        _check(v, 0 <= self.failure_prob <= 1,
               f"failure_prob must lie in [0,1], got {self.failure_prob}")
        _check(v, self.ci_halfwidth >= 0,
               f"ci_halfwidth must be >= 0, got {self.ci_halfwidth}")
        _check(v, self.n_samples >= 1, f"n_samples must be >= 1, got {self.n_samples}")
        if v:
            raise ConfigError(v)


@dataclass
class SweepResult:
    """All cells of a sweep plus per-lambda viability verdicts."""

    cells: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)  # lam -> ViabilityVerdict
    base_seed: int = 0
    config: dict = field(default_factory=dict)

    def cell(self, epsilon, lam, horizon) -> SweepCell:
        for c in self.cells:
            if (c.epsilon == epsilon and c.lam == lam and c.horizon == horizon):
                return c
        raise KeyError((epsilon, lam, horizon))

    def lambdas(self):
        return sorted({c.lam for c in self.cells})

    def epsilons(self):
        return sorted({c.epsilon for c in self.cells}, reverse=True)

    def horizons(self):
        return sorted({c.horizon for c in self.cells})


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

_COORDINATION_FIELDS = {"q", "R", "delta", "w", "horizon_T"}
_EXTRACTION_FIELDS = {"alpha", "x_max", "s_fail", "shock_std", "sigma0",
                      "pi_kind", "b_dagger", "s0"}


def validate_config(raw: dict):
    """Build a validated model from a parsed configuration record.

    Returns a :class:`CoordinationGame` or :class:`ExtractionModel` depending
    on ``raw["model"]``.  Violated invariants are collected and raised
    together as a :class:`ConfigError`, each message naming the field and the
    bound it broke.
    """
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a mapping"])
    violations = []
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        violations.append(
            f"schema_version must equal {SCHEMA_VERSION}, got {version!r}")
    kind = raw.get("model")
    if kind not in ("coordination", "extraction"):
        violations.append(
            f"model must be 'coordination' or 'extraction', got {kind!r}")
        raise ConfigError(violations)
    params = raw.get(kind, {})
    allowed = _COORDINATION_FIELDS if kind == "coordination" else _EXTRACTION_FIELDS
    unknown = set(params) - allowed
    if unknown:
        violations.append(f"unknown fields for {kind} model: {sorted(unknown)}")
    try:
        model = (CoordinationGame(**{k: params[k] for k in params if k in allowed})
                 if kind == "coordination"
                 else ExtractionModel(**{k: params[k] for k in params if k in allowed}))
    except ConfigError as exc:
        violations.extend(exc.violations)
        raise ConfigError(violations) from None
    except TypeError as exc:
        violations.append(str(exc))
        raise ConfigError(violations) from None
    if violations:
        raise ConfigError(violations)
    return model


def channel_from_config(raw: dict) -> ObservationChannel:
    ch = raw.get("channel", {})
    mapped = {
        "epsilon": ch.get("epsilon", 1.0),
        "lam": ch.get("lambda", ch.get("lam", 1.0)),
        "lam_min": ch.get("lambda_min", ch.get("lam_min", 1.0)),
        "lam_max": ch.get("lambda_max", ch.get("lam_max", 1e6)),
    }
    return ObservationChannel(**mapped)


def load_config(path) -> dict:
    """Parse a JSON configuration file; raises ConfigError on bad syntax."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config file {p} is not valid JSON: {exc}"]) from None


def model_to_config(model, channel: ObservationChannel = None) -> dict:
    """Serialize a model (and optionally a channel) back to a config dict."""
    if isinstance(model, CoordinationGame):
        kind = "coordination"
        params = {k: getattr(model, k) for k in
                  ("q", "R", "delta", "w", "horizon_T")}
    elif isinstance(model, ExtractionModel):
        kind = "extraction"
        params = {k: getattr(model, k) for k in
                  ("alpha", "x_max", "s_fail", "shock_std", "sigma0",
                   "pi_kind", "b_dagger", "s0")}
    else:
        raise TypeError(f"unsupported model type {type(model)!r}")
    raw = {"schema_version": SCHEMA_VERSION, "model": kind, kind: params}
    if channel is not None:
        raw["channel"] = {"epsilon": channel.epsilon, "lambda": channel.lam,
                          "lambda_min": channel.lam_min,
                          "lambda_max": channel.lam_max}
    return raw
