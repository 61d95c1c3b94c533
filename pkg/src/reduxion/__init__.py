"""Maximum-entropy state reduction for gauge-boson cascades."""

from .cascade import (
    OutcomeDistribution,
    Scenario,
    StageOverflow,
    Trajectory,
    derive_seed,
    enumerate_outcomes,
    run_ensemble,
    run_trajectory,
)
from .evolution import AmplitudeSchedule, Propagation, propagate, weak_boson_curves, weak_boson_peak
from .reduction import (
    InstantKind,
    NonConvergent,
    ReductionInstant,
    SolverConfig,
    find_reduction_instant,
    reduction_entropy,
)
from .scenarios import REGISTRY, build
from .schmidt import Bipartition, SchmidtPath, schmidt_decompose
from .state import Ensemble, ModeSpec, PureState, gauge_mode, matter_mode

__version__ = "0.1.0"
