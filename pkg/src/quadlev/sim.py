"""Closed-loop scenario execution.

Wires a ControllerStack to the four-pair plant: the controller fires every
``period`` seconds and its voltages are held (zero-order) while the plant
integrates at the finer step ``dt``.  One sample row is recorded per
control instant, t = 0 and the final instant included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .control import ControllerStack, pack_stack
from .metrics import settling_band
from .plant import (
    DEFAULT_ACTUATORS,
    DEFAULT_CONSTANTS,
    DEFAULT_GUARDS,
    ActuatorParams,
    GuardRails,
    PhysicalConstants,
)

TRAJECTORY_HEADER = "t,z1,z2,z3,z4,v1,v2,v3,v4,i1,i2,i3,i4,u1,u2,u3,u4,l,w"

OUTCOME_STABILIZED = "stabilized"
OUTCOME_DROPPED = "dropped"
OUTCOME_CONTACT = "contact"
OUTCOME_TIMEOUT = "timeout"


@dataclass(frozen=True)
class Scenario:
    """Initial conditions plus timing for one run.

    ``z0`` is required; velocities and currents default to zero.  The
    scenario's ``setpoint``/``period``/``pd_enabled`` override the stack's
    values at run time, so one stack serves every scenario.
    """

    name: str
    z0: tuple[float, float, float, float]
    v0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    i0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    duration: float = 0.5
    dt: float = 1e-5
    period: float = 5e-4
    pd_enabled: bool = True
    setpoint: float = 0.004

    def __post_init__(self) -> None:
        if self.duration <= 0 or self.dt <= 0 or self.period <= 0:
            raise ValueError("duration, dt and period must be positive")
        if len(self.z0) != 4 or len(self.v0) != 4 or len(self.i0) != 4:
            raise ValueError("z0, v0, i0 must have four entries")
        sub = self.period / self.dt
        if abs(sub - round(sub)) > 1e-9 * sub or round(sub) < 1:
            raise ValueError(f"period {self.period} is not an integer multiple of dt {self.dt}")
        if any(i < 0 for i in self.i0):
            raise ValueError("initial currents must be nonnegative")

    @property
    def substeps(self) -> int:
        return int(round(self.period / self.dt))

    @property
    def n_periods(self) -> int:
        return int(math.floor(self.duration / self.period + 1e-9))

    def validated_against(self, guards: GuardRails) -> "Scenario":
        for z in self.z0:
            if not guards.z_min < z < guards.z_drop:
                raise ValueError(
                    f"initial gap {z} outside the viable range "
                    f"({guards.z_min}, {guards.z_drop})"
                )
        return self


def builtin_scenario(
    name: str,
    actuators: tuple[ActuatorParams, ...] = DEFAULT_ACTUATORS,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    **overrides,
) -> Scenario:
    """The three stock drop-in settings, plus a coplanar smoke case.

    Initial coil currents are set to the gravity-balance current at the
    initial gap (clamped to the driver limit).  Starting the coils dead
    would make some stock cases unwinnable: the pull available at i_max
    only weakens as the gap grows, so a pair whose balance current at z0
    exceeds i_max can never be caught, and even inside that bound the
    resistive lag of a cold coil costs more gap than some margins allow.
    An explicit ``i0`` override replaces this default.
    """
    gaps = {
        "setting1": (0.001, 0.003, 0.009, 0.007),
        "setting2": (0.005, 0.003, 0.011, 0.013),
        "setting3": (0.006, 0.008, 0.014, 0.012),
        "level4mm": (0.004, 0.004, 0.004, 0.004),
    }
    if name not in gaps:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(gaps)}")
    z0 = gaps[name]
    if "i0" not in overrides:
        overrides["i0"] = tuple(
            min(a.balance_current(z, constants), a.i_max) for a, z in zip(actuators, z0)
        )
    return Scenario(name=name, z0=z0, **overrides)


BUILTIN_SCENARIO_NAMES = ("setting1", "setting2", "setting3", "level4mm")


@dataclass
class RunEvents:
    """First-occurrence event times per pair (NaN = never) and FIS health."""

    contact: np.ndarray
    dropped: np.ndarray
    current_clamped: np.ndarray
    voltage_clamped: np.ndarray
    fis_empty_steps: np.ndarray

    @classmethod
    def fresh(cls) -> "RunEvents":
        return cls(
            contact=np.full(4, np.nan),
            dropped=np.full(4, np.nan),
            current_clamped=np.full(4, np.nan),
            voltage_clamped=np.full(4, np.nan),
            fis_empty_steps=np.zeros(4),
        )

    def flagged(self, name: str) -> np.ndarray:
        return ~np.isnan(getattr(self, name))


@dataclass
class RunResult:
    """Sampled trajectory of one run plus events and classification.

    Arrays are trimmed to the rows actually produced (early drop-out ends
    a run before ``duration``).  ``boost`` holds the per-pair supervisory
    multipliers; it is part of the in-memory result but not of the
    trajectory CSV, whose column set is fixed.
    """

    scenario: Scenario
    t: np.ndarray
    z: np.ndarray
    v: np.ndarray
    i: np.ndarray
    u: np.ndarray
    l: np.ndarray
    w: np.ndarray
    boost: np.ndarray
    events: RunEvents
    outcome: str
    error: str | None = None
    band: float = field(default=0.0)

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def stabilized(self) -> bool:
        return self.outcome == OUTCOME_STABILIZED


class SimulationError(RuntimeError):
    """Raised when the integrator produced a nonfinite state.

    Carries the partial trajectory recorded up to the failure.
    """

    def __init__(self, message: str, partial: RunResult) -> None:
        super().__init__(message)
        self.partial = partial


def _classify(z_final: np.ndarray, setpoint: float, events: RunEvents, band: float) -> str:
    if np.any(events.flagged("dropped")):
        return OUTCOME_DROPPED
    if np.any(events.flagged("contact")):
        return OUTCOME_CONTACT
    if np.all(np.abs(z_final - setpoint) <= band):
        return OUTCOME_STABILIZED
    return OUTCOME_TIMEOUT


def run(
    scenario: Scenario,
    stack: ControllerStack,
    actuators: tuple[ActuatorParams, ...] = DEFAULT_ACTUATORS,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    guards: GuardRails = DEFAULT_GUARDS,
) -> RunResult:
    """Execute one closed-loop scenario.

    Returns the RunResult; raises SimulationError (carrying the partial
    result) if the state turned nonfinite.
    """
    scenario.validated_against(guards)
    for i0, a in zip(scenario.i0, actuators):
        if i0 > a.i_max + 1e-12:
            raise ValueError(f"initial current {i0} exceeds the {a.i_max} A driver limit")
    eff = replace(
        stack,
        setpoint=scenario.setpoint,
        period=scenario.period,
        pd_enabled=scenario.pd_enabled,
    )
    pk = pack_stack(eff)

    n_rows = scenario.n_periods + 1
    t_rows = np.zeros(n_rows)
    z_rows = np.zeros((n_rows, 4))
    v_rows = np.zeros((n_rows, 4))
    i_rows = np.zeros((n_rows, 4))
    u_rows = np.zeros((n_rows, 4))
    l_rows = np.zeros(n_rows)
    w_rows = np.zeros(n_rows)
    boost_rows = np.zeros((n_rows, 4))
    events = RunEvents.fresh()

    beta = np.array([a.beta for a in actuators])
    res = np.array([a.resistance for a in actuators])
    i_max = np.array([a.i_max for a in actuators])
    u_max = np.array([a.u_max for a in actuators])

    rows, err = _kernels.closed_loop_run(
        pk.main_in1,
        pk.main_in2,
        pk.main_cons,
        pk.main_out,
        pk.main_u1,
        pk.main_u2,
        pk.main_uo,
        pk.main_ge,
        pk.main_gde,
        pk.main_gu,
        pk.sup_in,
        pk.sup_cons,
        pk.sup_out,
        pk.sup_ui,
        pk.sup_uo,
        pk.sup_ge,
        pk.kp,
        pk.kd,
        pk.signs,
        pk.pd_enabled,
        pk.rate_alpha,
        pk.setpoint,
        beta,
        res,
        constants.mass,
        constants.gravity,
        guards.z_eval_floor,
        i_max,
        u_max,
        guards.z_min,
        guards.z_drop,
        np.array(scenario.z0, dtype=np.float64),
        np.array(scenario.v0, dtype=np.float64),
        np.array(scenario.i0, dtype=np.float64),
        scenario.dt,
        scenario.substeps,
        scenario.n_periods,
        t_rows,
        z_rows,
        v_rows,
        i_rows,
        u_rows,
        l_rows,
        w_rows,
        boost_rows,
        events.contact,
        events.dropped,
        events.current_clamped,
        events.voltage_clamped,
        events.fis_empty_steps,
    )

    band = settling_band(scenario.setpoint)
    result = RunResult(
        scenario=scenario,
        t=t_rows[:rows],
        z=z_rows[:rows],
        v=v_rows[:rows],
        i=i_rows[:rows],
        u=u_rows[:rows],
        l=l_rows[:rows],
        w=w_rows[:rows],
        boost=boost_rows[:rows],
        events=events,
        outcome=_classify(z_rows[rows - 1], scenario.setpoint, events, band),
        band=band,
    )
    if err != _kernels.ERR_NONE:
        result.error = "nonfinite state during integration"
        raise SimulationError(result.error, result)
    return result


def run_pair_comparison(
    scenario: Scenario,
    stack: ControllerStack,
    actuators: tuple[ActuatorParams, ...] = DEFAULT_ACTUATORS,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    guards: GuardRails = DEFAULT_GUARDS,
) -> tuple[RunResult, RunResult]:
    """The same scenario with the leveler on and off, in that order."""
    on = run(replace(scenario, pd_enabled=True), stack, actuators, constants, guards)
    off = run(replace(scenario, pd_enabled=False), stack, actuators, constants, guards)
    return on, off


def write_trajectory_csv(path, result: RunResult) -> None:
    """Fixed-column CSV of the sampled trajectory (12 significant digits)."""
    with open(path, "w", newline="\n") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for r in range(result.n_samples):
            cells = [result.t[r]]
            cells += list(result.z[r])
            cells += list(result.v[r])
            cells += list(result.i[r])
            cells += list(result.u[r])
            cells += [result.l[r], result.w[r]]
            fh.write(",".join(format(float(c), ".12g") for c in cells) + "\n")
