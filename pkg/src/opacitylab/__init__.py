"""opacitylab: a numerical laboratory for dynamic games with absorbing failure.

The package implements two fully worked models in which beliefs can trigger
irreversible collapse, together with the machinery needed to stress-test how
the informativeness of the observation channel affects survival:

* a two-player binary-state coordination game with withdrawal-triggered
  default, solved for its symmetric signal-cutoff equilibrium
  (:mod:`opacitylab.equilibrium`);
* a principal who extracts from a latent stability state behind a noisy
  observation channel, with survival values computed by dynamic programming
  on a belief grid (:mod:`opacitylab.survival`);
* Bayesian posterior sampling under additive-noise channels and their
  garblings, with convex-order verification (:mod:`opacitylab.beliefs`);
* Monte Carlo sweep engines, limit-viability classifiers, and the extended
  game in which the noise level itself is chosen (:mod:`opacitylab.sweeps`).

All stochastic operations are deterministic given an explicit seed.
"""

from opacitylab.models import (
    ConfigError,
    CoordinationGame,
    ExtractionModel,
    ObservationChannel,
    SurvivalCurve,
    SweepCell,
    SweepResult,
    load_config,
    validate_config,
)
from opacitylab.beliefs import (
    ConvexTestBattery,
    PosteriorSample,
    garble,
    posterior_binary,
    sample_posteriors,
    verify_convex_order,
)
from opacitylab.equilibrium import (
    HazardProfile,
    NonMonotoneResidualError,
    ThresholdEquilibrium,
    hazard_profile,
    indifference_residual,
    one_step_failure_prob,
    solve_threshold,
)
from opacitylab.survival import (
    ConcavityReport,
    GaussianBeliefState,
    TriggerPolicy,
    belief_update,
    concavify,
    concavity_probe,
    jensen_gap,
    recursion_check,
    steady_state_variance,
    survival_value_dp,
)
from opacitylab.sweeps import (
    EpisodeResult,
    ExtendedGameOutcome,
    SweepGrid,
    ViabilityVerdict,
    choose_opacity,
    classify_limit_viability,
    estimate_failure_prob,
    opacity_monotonicity_check,
    run_sweep,
    simulate_episode,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CoordinationGame",
    "ExtractionModel",
    "ObservationChannel",
    "SurvivalCurve",
    "SweepCell",
    "SweepResult",
    "load_config",
    "validate_config",
    "ConvexTestBattery",
    "PosteriorSample",
    "garble",
    "posterior_binary",
    "sample_posteriors",
    "verify_convex_order",
    "HazardProfile",
    "NonMonotoneResidualError",
    "ThresholdEquilibrium",
    "hazard_profile",
    "indifference_residual",
    "one_step_failure_prob",
    "solve_threshold",
    "ConcavityReport",
    "GaussianBeliefState",
    "TriggerPolicy",
    "belief_update",
    "concavify",
    "concavity_probe",
    "jensen_gap",
    "recursion_check",
    "steady_state_variance",
    "survival_value_dp",
    "EpisodeResult",
    "ExtendedGameOutcome",
    "SweepGrid",
    "ViabilityVerdict",
    "choose_opacity",
    "classify_limit_viability",
    "estimate_failure_prob",
    "opacity_monotonicity_check",
    "run_sweep",
    "simulate_episode",
    "__version__",
]
