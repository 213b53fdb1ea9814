"""Electromechanical model of a four-corner magnetic suspension rig.

Each corner is an electromagnet pulling a shared platform upward across an
air gap ``z`` (magnet face to platform, in meters; larger ``z`` means the
platform has sagged further from the magnet).  Per pair the state is
``(z, v, i)`` with ``v = dz/dt`` and coil current ``i``; the coil is driven
by a voltage ``u``.  With ``beta = mu0 * N**2 * A`` the continuous dynamics
are::

    dz/dt = v
    dv/dt = g - beta * (i/z)**2 / (4*M)          # gravity opens the gap
    di/dt = (2*z/beta) * (u - R*i) + (i/z) * v   # coil with gap-dependent L

The inductance model is ``L(z) = beta / (2*z)``, so force is
``f = beta/4 * (i/z)**2`` and the ``(i/z)*v`` term is the back-EMF of the
moving platform.  The platform mass is shared, but the four pairs are
simulated as independent point masses carrying ``M`` each; the cross
coupling enters through the controller, not the plant.

Integration is classic fixed-step RK4 with hard guards applied after every
substep, in this order: current clamped to ``[0, i_max]``, gap floored at
``z_min`` with the velocity zeroed (mechanical contact), gap above
``z_drop`` freezes the pair (platform fell away).  Guards are events, not
dynamics: each records the first time it fired.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import pi, sqrt

import numpy as np

from . import _kernels

MU0 = 4e-7 * pi
"""Vacuum permeability, H/m."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Shared mechanical constants: per-pair carried mass and gravity."""

    mass: float = 3.0
    gravity: float = 9.8

    def __post_init__(self) -> None:
        if self.mass <= 0 or self.gravity <= 0:
            raise ValueError("mass and gravity must be positive")


@dataclass(frozen=True)
class ActuatorParams:
    """One electromagnet/driver pair.

    ``resistance`` in ohms, ``area`` (pole face) in m^2, ``turns`` the coil
    winding count, ``u_max``/``i_max`` the driver voltage and current
    limits.  ``beta = mu0 * turns**2 * area`` is the force/inductance
    constant in H*m.
    """

    resistance: float
    area: float
    turns: int
    u_max: float
    i_max: float

    def __post_init__(self) -> None:
        if min(self.resistance, self.area, self.turns, self.u_max, self.i_max) <= 0:
            raise ValueError("actuator parameters must be positive")

    @property
    def beta(self) -> float:
        return MU0 * self.turns**2 * self.area

    def inductance(self, z: float) -> float:
        """Gap-dependent coil inductance ``beta / (2*z)``, henries."""
        return self.beta / (2.0 * z)

    def force(self, z: float, i: float) -> float:
        """Upward magnetic pull on the platform, newtons."""
        return 0.25 * self.beta * (i / z) ** 2

    def lift_acceleration(self, z: float, i: float, k: PhysicalConstants) -> float:
        """Net upward platform acceleration ``f/M - g`` (negative in free fall)."""
        return self.force(z, i) / k.mass - k.gravity

    def balance_current(self, z: float, k: PhysicalConstants) -> float:
        """Current that exactly cancels gravity at gap ``z``."""
        return z * sqrt(4.0 * k.mass * k.gravity / self.beta)

    def balance_voltage(self, z: float, k: PhysicalConstants) -> float:
        """Steady coil voltage at the gravity-cancelling current."""
        return self.resistance * self.balance_current(z, k)

    def catchable_gap(self, k: PhysicalConstants) -> float:
        """Largest rest gap recoverable within this driver's limits.

        With flux linkage ``lam = L(z)*i`` the coil equation is
        ``dlam/dt = u - R*i`` and the pull is ``f = lam**2 / beta``,
        independent of the gap.  Starting from rest the platform keeps
        accelerating away until ``f`` reaches ``M*g``; the current needed
        for that pull grows with the gap, so the pair is catchable from
        rest exactly when the gravity-cancelling current at the *initial*
        gap is within ``i_max``.
        """
        return self.i_max / sqrt(4.0 * k.mass * k.gravity / self.beta)


#: Default four-pair hardware set used throughout: two light pairs with a
#: 5-ohm coil and two heavier pairs with larger poles and more turns.
DEFAULT_ACTUATORS: tuple[ActuatorParams, ...] = (
    ActuatorParams(resistance=5.0, area=0.0002, turns=300, u_max=50.0, i_max=10.0),
    ActuatorParams(resistance=5.0, area=0.000237, turns=300, u_max=50.0, i_max=10.0),
    ActuatorParams(resistance=10.0, area=0.0005, turns=600, u_max=70.0, i_max=7.0),
    ActuatorParams(resistance=8.5, area=0.0004, turns=500, u_max=60.0, i_max=7.0),
)

DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class GuardRails:
    """Numerical and physical guards applied during integration.

    ``z_min`` is the mechanical contact stop, ``z_drop`` the gap beyond
    which a pair is declared lost and frozen, ``z_eval_floor`` a tiny
    evaluation floor protecting ``1/z`` inside RK4 stages (never reached
    when ``z_min`` holds).
    """

    z_min: float = 1e-4
    z_drop: float = 0.05
    z_eval_floor: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 < self.z_eval_floor <= self.z_min < self.z_drop:
            raise ValueError("need 0 < z_eval_floor <= z_min < z_drop")


DEFAULT_GUARDS = GuardRails()


@dataclass(frozen=True)
class PairState:
    """Instantaneous state of one pair."""

    z: float
    v: float
    i: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z, self.v, self.i], dtype=np.float64)


def pair_derivatives(
    p: ActuatorParams,
    k: PhysicalConstants,
    state: PairState,
    u: float,
    z_eval_floor: float = DEFAULT_GUARDS.z_eval_floor,
) -> tuple[float, float, float]:
    """Continuous ``(dz/dt, dv/dt, di/dt)`` for one pair at drive ``u``."""
    return _kernels.pair_rates(
        p.beta, p.resistance, k.mass, k.gravity, z_eval_floor, state.z, state.v, state.i, u
    )


@dataclass
class PlantEvents:
    """First-occurrence times of guard events per pair; NaN means never."""

    contact: np.ndarray
    dropped: np.ndarray
    current_clamped: np.ndarray

    @classmethod
    def fresh(cls, n_pairs: int = 4) -> "PlantEvents":
        return cls(
            contact=np.full(n_pairs, np.nan),
            dropped=np.full(n_pairs, np.nan),
            current_clamped=np.full(n_pairs, np.nan),
        )

    def merge_error(self) -> None:  # pragma: no cover - debugging hook
        pass


class Plant:
    """Mutable integration wrapper around the four-pair dynamics.

    Owns the state arrays and the guard-event log; ``hold_and_step``
    advances all active pairs under zero-order-hold voltages.  The heavy
    lifting happens in the compiled kernels; this class only packs
    parameters once and keeps the bookkeeping readable.
    """

    def __init__(
        self,
        actuators: tuple[ActuatorParams, ...] = DEFAULT_ACTUATORS,
        constants: PhysicalConstants = DEFAULT_CONSTANTS,
        guards: GuardRails = DEFAULT_GUARDS,
    ) -> None:
        self.actuators = tuple(actuators)
        self.constants = constants
        self.guards = guards
        n = len(self.actuators)
        self._beta = np.array([a.beta for a in self.actuators])
        self._res = np.array([a.resistance for a in self.actuators])
        self._i_max = np.array([a.i_max for a in self.actuators])
        self.z = np.zeros(n)
        self.v = np.zeros(n)
        self.i = np.zeros(n)
        self.active = np.ones(n, dtype=np.bool_)
        self.events = PlantEvents.fresh(n)
        self.time = 0.0

    @property
    def n_pairs(self) -> int:
        return len(self.actuators)

    def reset(self, z0, v0=None, i0=None) -> None:
        n = self.n_pairs
        self.z = np.asarray(z0, dtype=np.float64).copy()
        self.v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=np.float64).copy()
        self.i = np.zeros(n) if i0 is None else np.asarray(i0, dtype=np.float64).copy()
        if self.z.shape != (n,) or self.v.shape != (n,) or self.i.shape != (n,):
            raise ValueError(f"state vectors must have shape ({n},)")
        self.active = np.ones(n, dtype=np.bool_)
        self.events = PlantEvents.fresh(n)
        self.time = 0.0

    def state(self, k: int) -> PairState:
        return PairState(float(self.z[k]), float(self.v[k]), float(self.i[k]))

    def hold_and_step(self, u: np.ndarray, dt: float, n_steps: int) -> int:
        """Advance ``n_steps`` RK4 substeps of size ``dt`` under held drives.

        Returns a kernel error code (0 on success, nonzero when a state
        turned nonfinite; the state then holds the last finite values).
        """
        g = self.guards
        err = _kernels.guarded_substeps(
            self._beta,
            self._res,
            self.constants.mass,
            self.constants.gravity,
            g.z_eval_floor,
            np.asarray(u, dtype=np.float64),
            self.z,
            self.v,
            self.i,
            self.active,
            float(dt),
            int(n_steps),
            self.time,
            self._i_max,
            g.z_min,
            g.z_drop,
            self.events.contact,
            self.events.dropped,
            self.events.current_clamped,
        )
        self.time += dt * n_steps
        return int(err)


def with_limits(p: ActuatorParams, u_max: float | None = None, i_max: float | None = None) -> ActuatorParams:
    """Copy of ``p`` with replaced driver limits (for what-if studies)."""
    return replace(
        p,
        u_max=p.u_max if u_max is None else u_max,
        i_max=p.i_max if i_max is None else i_max,
    )
