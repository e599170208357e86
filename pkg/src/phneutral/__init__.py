"""pH neutralization plant simulator with hybrid fuzzy + PID control."""

from .chemistry import (
    DEFAULT_CONSTANTS,
    EquilibriumConstants,
    IonInvariants,
    NoRoot,
    QuarticCoeffs,
    Speciation,
    charge_balance_residual,
    hydrogen_ion,
    ph_of,
    quartic_coeffs,
    speciation,
    titration_curve,
)
from .fuzzy import FuzzyController, MembershipFunction, RuleBase
from .harness import (
    ConfigError,
    ExperimentConfig,
    Metrics,
    MetricsReport,
    PiecewiseConstant,
    SimTrace,
    SquareWave,
    compute_metrics,
    experiment_1,
    experiment_2,
    experiment_3,
    load_config,
    read_csv,
    run_experiment,
    write_csv,
)
from .hybrid import CascadeConfig, ControllerState, control_step, fuzzy_only_step, split_from_delta
from .pid import NoOscillation, PidGains, PidState, ZnUltimate, find_ultimate, pid_update, zn_tune
from .plant import PlantParams, PlantState, SensorReadings, StateDiverged, ValveModel

__version__ = "0.1.0"
