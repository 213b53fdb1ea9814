"""quadlev: deterministic closed-loop simulator for a four-pair magnetic suspension."""

from .config import Config, ConfigError, default_config, load_config, parse_config
from .control import ControllerStack, StackParams, build_stack, main_fis, supervisory_fis
from .fuzzy import (
    DefinitionError,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    RuleBase,
    control_surface,
    triangular,
    trapezoidal,
    uniform_variable,
)
from .metrics import RunReport, pair_metrics, level_metrics, report_from_run
from .plant import (
    ActuatorParams,
    DEFAULT_ACTUATORS,
    DEFAULT_CONSTANTS,
    DEFAULT_GUARDS,
    PhysicalConstants,
    Plant,
)
from .sim import RunResult, Scenario, SimulationError, builtin_scenario, run
from .tuning import TuningSpec, coordinate_search, default_tuning_spec, tune

__version__ = "0.1.0"

__all__ = [
    "ActuatorParams",
    "Config",
    "ConfigError",
    "ControllerStack",
    "DEFAULT_ACTUATORS",
    "DEFAULT_CONSTANTS",
    "DEFAULT_GUARDS",
    "DefinitionError",
    "FuzzySystem",
    "LinguisticVariable",
    "MembershipFunction",
    "PhysicalConstants",
    "Plant",
    "RuleBase",
    "RunReport",
    "RunResult",
    "Scenario",
    "SimulationError",
    "StackParams",
    "TuningSpec",
    "build_stack",
    "builtin_scenario",
    "control_surface",
    "coordinate_search",
    "default_config",
    "default_tuning_spec",
    "level_metrics",
    "load_config",
    "main_fis",
    "pair_metrics",
    "parse_config",
    "report_from_run",
    "run",
    "supervisory_fis",
    "trapezoidal",
    "triangular",
    "tune",
    "uniform_variable",
    "__version__",
]
