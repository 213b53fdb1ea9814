"""The hybrid controller stack: fuzzy pair controllers, fuzzy gain
supervisors, and a shared PD leveler.

Per pair k the command is::

    u_k = clamp( boost_k(|e_k|) * g_u_k * FLC_k(g_e*e_k, g_de*de_k)
                 + s_k * w,  0, u_max_k )

with ``e_k = z_k - z*`` (positive when the floater hangs below the set
level), ``de_k`` its backward difference over the control period, ``w =
Kp*l + Kd*dl`` the leveling correction on ``l = z1 + z3 - z2 - z4`` and
``s = (+1, -1, +1, -1)``.  The boost multiplier is >= 1 and widens the
catch range for large errors without touching behavior near the set point.

The per-pair output gain ``g_u`` is, by default, calibrated so that the
zero-error command equals the pair's steady-state voltage ``R*i_bal(z*)``
exactly: the stack then has a true closed-loop fixed point at the set
level with zero error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .fuzzy import (
    FuzzySystem,
    LinguisticVariable,
    RuleBase,
    rule_matrix,
    trapezoidal,
    uniform_variable,
)
from .plant import ActuatorParams, PhysicalConstants, DEFAULT_CONSTANTS

#: Leveler sign per pair: l > 0 means pairs 1 and 3 hang low, so their
#: commands rise and pairs 2 and 4 drop by the same amount.
LEVEL_SIGNS: tuple[float, float, float, float] = (1.0, -1.0, 1.0, -1.0)

#: Consequent matrix of the pair controllers, 0-based:
#: ``RULE_ROWS[a][b]`` for error term ``a`` and error-rate term ``b``.
#: The graded ladder: both inputs low -> lowest command, both high ->
#: highest, mixed -> the diagonal between.
RULE_ROWS: tuple[tuple[int, ...], ...] = (
    (0, 0, 0, 1, 2),
    (0, 0, 1, 2, 3),
    (0, 1, 2, 3, 4),
    (1, 2, 3, 4, 4),
    (2, 3, 4, 4, 4),
)

#: Width of the boost output's end terms as a fraction of its universe.
BOOST_EDGE_FRACTION = 0.05


def main_rule_base() -> RuleBase:
    return rule_matrix(RULE_ROWS)


def main_fis() -> FuzzySystem:
    """The 2-in/1-out pair controller on normalized universes.

    Five uniform terms per variable; inputs on [-1, 1], output on [0, 1].
    Gains map physical error/rate into the input universes and the output
    universe onto volts.
    """
    return FuzzySystem(
        inputs=(
            uniform_variable("error", -1.0, 1.0, 5),
            uniform_variable("error_rate", -1.0, 1.0, 5),
        ),
        output=uniform_variable("command", 0.0, 1.0, 5),
        rules=main_rule_base(),
    )


def supervisory_fis(g_max: float) -> FuzzySystem:
    """The 1-in/1-out gain supervisor.

    Input: |error| scaled onto [0, 1], three uniform terms (small, medium,
    large).  Output: multiplier on [1, g_max] with two narrow end terms,
    "unity" hugging 1 and "boost" hugging g_max; small and medium map to
    unity, large to boost.  The narrow terms keep the defuzzified
    multiplier within a few percent of 1 until the large-error term
    actually fires, and the output universe deliberately has a gap between
    the end terms (the input side always covers, so the aggregate is never
    empty).
    """
    if g_max < 1.0:
        raise ValueError("g_max must be >= 1")
    if g_max == 1.0:
        # degenerate supervisor: universe [1, 1] is invalid, widen a hair
        g_max = 1.0 + 1e-9
    w = BOOST_EDGE_FRACTION * (g_max - 1.0)
    out = LinguisticVariable(
        "multiplier",
        1.0,
        g_max,
        (
            trapezoidal(1.0, 1.0, 1.0, 1.0 + w),
            trapezoidal(g_max - w, g_max, g_max, g_max),
        ),
        require_cover=False,
    )
    return FuzzySystem(
        inputs=(uniform_variable("abs_error", 0.0, 1.0, 3),),
        output=out,
        rules=RuleBase((((0,), 0), ((1,), 0), ((2,), 1))),
    )


@dataclass(frozen=True)
class MainFlcConfig:
    """One pair controller: the normalized system plus its three gains.

    ``g_e`` (1/m) and ``g_de`` (s/m) map error and error rate onto the
    input universes; ``g_u`` (V) maps the unit output onto volts.
    """

    fis: FuzzySystem
    g_e: float
    g_de: float
    g_u: float

    def __post_init__(self) -> None:
        if min(self.g_e, self.g_de, self.g_u) <= 0:
            raise ValueError("main controller gains must be positive")


@dataclass(frozen=True)
class SupervisoryFlcConfig:
    """One gain supervisor: the normalized system, input scale, and ceiling."""

    fis: FuzzySystem
    g_e: float
    g_max: float

    def __post_init__(self) -> None:
        if self.g_e <= 0:
            raise ValueError("supervisor input gain must be positive")
        if self.g_max < 1.0:
            raise ValueError("g_max must be >= 1")


@dataclass(frozen=True)
class PdConfig:
    """Shared leveler: w = Kp*l + Kd*dl, added per pair with LEVEL_SIGNS."""

    kp: float
    kd: float
    signs: tuple[float, float, float, float] = LEVEL_SIGNS

    def __post_init__(self) -> None:
        if self.kp < 0 or self.kd < 0:
            raise ValueError("PD gains must be nonnegative")
        if tuple(abs(s) for s in self.signs) != (1.0, 1.0, 1.0, 1.0):
            raise ValueError("leveler signs must be +-1")


@dataclass(frozen=True)
class ControllerStack:
    """Immutable bundle of everything the control law needs.

    ``period`` is the control interval in seconds; ``rate_alpha`` an
    optional single-pole low-pass on the error rate (0 disables it, the
    default).
    """

    main: tuple[MainFlcConfig, MainFlcConfig, MainFlcConfig, MainFlcConfig]
    supervisor: tuple[
        SupervisoryFlcConfig,
        SupervisoryFlcConfig,
        SupervisoryFlcConfig,
        SupervisoryFlcConfig,
    ]
    pd: PdConfig
    setpoint: float
    period: float
    pd_enabled: bool = True
    rate_alpha: float = 0.0

    def __post_init__(self) -> None:
        if len(self.main) != 4 or len(self.supervisor) != 4:
            raise ValueError("exactly four pair controllers and supervisors required")
        if self.setpoint <= 0 or self.period <= 0:
            raise ValueError("setpoint and period must be positive")
        if not 0.0 <= self.rate_alpha < 1.0:
            raise ValueError("rate_alpha must lie in [0, 1)")


@dataclass
class ControllerMemory:
    """Discrete-derivative state; owned by exactly one loop.

    Fresh memory yields zero derivatives on the first step.
    """

    prev_e: np.ndarray
    de_filt: np.ndarray
    prev_l: float
    initialized: bool

    @classmethod
    def fresh(cls) -> "ControllerMemory":
        return cls(np.zeros(4), np.zeros(4), 0.0, False)


def level_error(z) -> float:
    """l = z1 + z3 - z2 - z4 (zero when the four floaters are coplanar)."""
    return float(z[0]) + float(z[2]) - float(z[1]) - float(z[3])


def pd_leveler(cfg: PdConfig, l: float, dl: float) -> float:
    return cfg.kp * l + cfg.kd * dl


def main_flc(cfg: MainFlcConfig, e: float, de: float) -> float:
    """Unclamped pair-controller command in volts."""
    return cfg.g_u * cfg.fis.infer(cfg.g_e * e, cfg.g_de * de)


def supervisory_gain(cfg: SupervisoryFlcConfig, e: float) -> float:
    """Output-gain multiplier in [1, g_max]; even in e by construction."""
    return cfg.fis.infer(abs(e) * cfg.g_e)


class PackedStack(NamedTuple):
    """Array form of a ControllerStack as consumed by the kernels."""

    main_in1: np.ndarray
    main_in2: np.ndarray
    main_cons: np.ndarray
    main_out: np.ndarray
    main_u1: np.ndarray
    main_u2: np.ndarray
    main_uo: np.ndarray
    main_ge: np.ndarray
    main_gde: np.ndarray
    main_gu: np.ndarray
    sup_in: np.ndarray
    sup_cons: np.ndarray
    sup_out: np.ndarray
    sup_ui: np.ndarray
    sup_uo: np.ndarray
    sup_ge: np.ndarray
    kp: float
    kd: float
    signs: np.ndarray
    pd_enabled: bool
    rate_alpha: float
    setpoint: float
    period: float


def pack_stack(stack: ControllerStack) -> PackedStack:
    """Pack the per-pair systems and gains into kernel-ready arrays."""
    m0 = stack.main[0].fis
    s0 = stack.supervisor[0].fis
    n_in1 = len(m0.inputs[0].terms)
    n_in2 = len(m0.inputs[1].terms)
    n_out = len(m0.output.terms)
    n_si = len(s0.inputs[0].terms)
    n_so = len(s0.output.terms)

    p = PackedStack(
        main_in1=np.empty((4, n_in1, 4)),
        main_in2=np.empty((4, n_in2, 4)),
        main_cons=np.empty((4, n_in1, n_in2), dtype=np.int64),
        main_out=np.empty((4, n_out, 4)),
        main_u1=np.empty((4, 2)),
        main_u2=np.empty((4, 2)),
        main_uo=np.empty((4, 2)),
        main_ge=np.empty(4),
        main_gde=np.empty(4),
        main_gu=np.empty(4),
        sup_in=np.empty((4, n_si, 4)),
        sup_cons=np.empty((4, n_si), dtype=np.int64),
        sup_out=np.empty((4, n_so, 4)),
        sup_ui=np.empty((4, 2)),
        sup_uo=np.empty((4, 2)),
        sup_ge=np.empty(4),
        kp=float(stack.pd.kp),
        kd=float(stack.pd.kd),
        signs=np.array(stack.pd.signs, dtype=np.float64),
        pd_enabled=bool(stack.pd_enabled),
        rate_alpha=float(stack.rate_alpha),
        setpoint=float(stack.setpoint),
        period=float(stack.period),
    )
    for k in range(4):
        mc = stack.main[k]
        sc = stack.supervisor[k]
        if (
            len(mc.fis.inputs[0].terms) != n_in1
            or len(mc.fis.inputs[1].terms) != n_in2
            or len(mc.fis.output.terms) != n_out
            or len(sc.fis.inputs[0].terms) != n_si
            or len(sc.fis.output.terms) != n_so
        ):
            raise ValueError("all four pairs must share term counts")
        p.main_in1[k] = mc.fis.inputs[0].packed_terms()
        p.main_in2[k] = mc.fis.inputs[1].packed_terms()
        p.main_cons[k] = mc.fis._packed_rules  # type: ignore[attr-defined]
        p.main_out[k] = mc.fis.output.packed_terms()
        p.main_u1[k] = (mc.fis.inputs[0].lo, mc.fis.inputs[0].hi)
        p.main_u2[k] = (mc.fis.inputs[1].lo, mc.fis.inputs[1].hi)
        p.main_uo[k] = (mc.fis.output.lo, mc.fis.output.hi)
        p.main_ge[k] = mc.g_e
        p.main_gde[k] = mc.g_de
        p.main_gu[k] = mc.g_u
        p.sup_in[k] = sc.fis.inputs[0].packed_terms()
        p.sup_cons[k] = sc.fis._packed_rules  # type: ignore[attr-defined]
        p.sup_out[k] = sc.fis.output.packed_terms()
        p.sup_ui[k] = (sc.fis.inputs[0].lo, sc.fis.inputs[0].hi)
        p.sup_uo[k] = (sc.fis.output.lo, sc.fis.output.hi)
        p.sup_ge[k] = sc.g_e
    return p


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step internals: errors, rates, multipliers, pre-clamp commands."""

    e: np.ndarray
    de: np.ndarray
    boost: np.ndarray
    u_raw: np.ndarray
    l: float
    w: float
    clamped: np.ndarray
    fis_empty: np.ndarray


def control_step(
    stack: ControllerStack,
    mem: ControllerMemory,
    z,
    u_max,
    packed: PackedStack | None = None,
    t: float = 0.0,
) -> tuple[np.ndarray, StepDiagnostics]:
    """One synchronous control update; ``mem`` is advanced in place.

    ``u_max`` holds the four driver voltage ceilings.  Pass a prepacked
    stack to skip repacking in a loop.
    """
    pk = pack_stack(stack) if packed is None else packed
    z_arr = np.asarray(z, dtype=np.float64)
    u = np.zeros(4)
    boost = np.zeros(4)
    e = np.zeros(4)
    de = np.zeros(4)
    uraw = np.zeros(4)
    ev_uclamp = np.full(4, np.nan)
    ev_empty = np.zeros(4)
    l, w = _kernels.control_step(
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
        pk.period,
        np.asarray(u_max, dtype=np.float64),
        z_arr,
        mem.prev_e,
        mem.de_filt,
        mem.prev_l,
        mem.initialized,
        t,
        u,
        boost,
        e,
        de,
        uraw,
        ev_uclamp,
        ev_empty,
    )
    mem.prev_l = float(l)
    mem.initialized = True
    for k in range(4):
        if not np.isfinite(u[k]):
            raise ArithmeticError(f"nonfinite command for pair {k + 1}")
    diag = StepDiagnostics(
        e=e, de=de, boost=boost, u_raw=uraw, l=float(l), w=float(w),
        clamped=~np.isnan(ev_uclamp), fis_empty=ev_empty > 0,
    )
    return u, diag


def _spread(value, name: str) -> tuple[float, float, float, float]:
    # scalar broadcasts to all four pairs; sequences must have length 4
    if np.isscalar(value):
        return (float(value),) * 4
    vals = tuple(float(v) for v in value)
    if len(vals) != 4:
        raise ValueError(f"{name} needs a scalar or 4 values, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class StackParams:
    """Scalar knobs from which a full ControllerStack is built.

    Every gain accepts a scalar (shared by all pairs) or four values.
    ``g_u = None`` selects automatic calibration: the zero-error command of
    pair k lands exactly on its steady-state voltage at the set level.
    """

    g_e: object = 500.0
    g_de: object = (5.0, 5.0, 8.0, 8.0)
    g_u: object = None
    g_max: object = 3.0
    sup_g_e: object = (125.0, 125.0, 250.0, 250.0)
    kp: float = 8000.0
    kd: float = 160.0
    setpoint: float = 0.004
    period: float = 5e-4
    pd_enabled: bool = True
    rate_alpha: float = 0.0

    def __post_init__(self) -> None:
        # canonical per-pair form so structurally equal knob sets compare equal
        for name in ("g_e", "g_de", "g_max", "sup_g_e"):
            object.__setattr__(self, name, _spread(getattr(self, name), name))
        if self.g_u is not None:
            object.__setattr__(self, "g_u", _spread(self.g_u, "g_u"))
        if self.setpoint <= 0 or self.period <= 0:
            raise ValueError("setpoint and period must be positive")
        if not 0.0 <= self.rate_alpha < 1.0:
            raise ValueError("rate_alpha must lie in [0, 1)")


def build_stack(
    params: StackParams,
    actuators: tuple[ActuatorParams, ...],
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> ControllerStack:
    """Construct the full stack, calibrating g_u when not given explicitly.

    Calibration solves ``boost(0) * g_u * FLC(0, 0) = R * i_bal(z*)`` per
    pair, using the actually built fuzzy systems rather than assumed
    symmetry, so the closed loop has an exact zero-error fixed point.
    """
    g_e = _spread(params.g_e, "g_e")
    g_de = _spread(params.g_de, "g_de")
    g_max = _spread(params.g_max, "g_max")
    sup_g_e = _spread(params.sup_g_e, "sup_g_e")
    mfis = main_fis()
    center = mfis.infer(0.0, 0.0)
    mains = []
    sups = []
    for k in range(4):
        sfis = supervisory_fis(g_max[k])
        mult0 = sfis.infer(0.0)
        if params.g_u is None:
            u_star = actuators[k].balance_voltage(params.setpoint, constants)
            g_u_k = u_star / (center * mult0)
        else:
            g_u_k = _spread(params.g_u, "g_u")[k]
        mains.append(MainFlcConfig(mfis, g_e[k], g_de[k], g_u_k))
        sups.append(SupervisoryFlcConfig(sfis, sup_g_e[k], g_max[k]))
    return ControllerStack(
        main=tuple(mains),
        supervisor=tuple(sups),
        pd=PdConfig(params.kp, params.kd),
        setpoint=params.setpoint,
        period=params.period,
        pd_enabled=params.pd_enabled,
        rate_alpha=params.rate_alpha,
    )
