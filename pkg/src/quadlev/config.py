"""Run configuration: one TOML file describing the whole rig.

The file carries physics, the four actuator/driver pairs, every controller
gain, the integration guards, run timing defaults, and named scenarios.
Missing keys fall back to the documented defaults (which equal the shipped
``reference.config``); unknown keys are rejected with the offending line.
The emitter is deterministic, so a resolved config can be written next to
every run's outputs and re-running it reproduces the artifacts
byte for byte.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:  # pragma: no cover - exercised only on 3.10
    import tomli as _toml

from .control import StackParams
from .plant import ActuatorParams, GuardRails, PhysicalConstants
from .sim import Scenario


class ConfigError(ValueError):
    """Malformed configuration; message carries source and line when known."""


def load_toml(text: str, source: str = "<toml>") -> dict:
    """Parse TOML text, wrapping syntax errors in ConfigError."""
    try:
        return _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


@dataclass(frozen=True)
class RunDefaults:
    duration: float = 0.5
    dt: float = 1e-5

    def __post_init__(self) -> None:
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("run duration and dt must be positive")


@dataclass(frozen=True)
class ScenarioDef:
    """A named scenario as written in the file.

    ``i0 = "balance"`` (the default) resolves to the gravity-balance
    current at each pair's initial gap, clamped to the driver limit.
    Timing fields left as None inherit the run/controller defaults.
    """

    z0: tuple[float, float, float, float]
    v0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    i0: object = "balance"
    duration: float | None = None
    dt: float | None = None


#: Gap patterns of the stock scenarios, meters.
BUILTIN_GAPS: dict[str, tuple[float, float, float, float]] = {
    "setting1": (0.001, 0.003, 0.009, 0.007),
    "setting2": (0.005, 0.003, 0.011, 0.013),
    "setting3": (0.006, 0.008, 0.014, 0.012),
    "level4mm": (0.004, 0.004, 0.004, 0.004),
}


@dataclass(frozen=True)
class Config:
    """Fully resolved configuration; the single source for a run."""

    constants: PhysicalConstants = PhysicalConstants()
    actuators: tuple[ActuatorParams, ...] = ()
    params: StackParams = StackParams()
    guards: GuardRails = GuardRails()
    run: RunDefaults = RunDefaults()
    scenarios: dict[str, ScenarioDef] = field(default_factory=dict)

    def scenario(self, name: str, **overrides) -> Scenario:
        """Materialize a named scenario against this config's defaults."""
        if name not in self.scenarios:
            raise ConfigError(f"unknown scenario {name!r}; have {sorted(self.scenarios)}")
        sd = self.scenarios[name]
        if sd.i0 == "balance":
            i0 = tuple(
                min(a.balance_current(z, self.constants), a.i_max)
                for a, z in zip(self.actuators, sd.z0)
            )
        else:
            i0 = tuple(float(x) for x in sd.i0)  # type: ignore[union-attr]
        kw = dict(
            name=name,
            z0=sd.z0,
            v0=sd.v0,
            i0=i0,
            duration=sd.duration if sd.duration is not None else self.run.duration,
            dt=sd.dt if sd.dt is not None else self.run.dt,
            period=self.params.period,
            pd_enabled=self.params.pd_enabled,
            setpoint=self.params.setpoint,
        )
        kw.update(overrides)
        return Scenario(**kw)


def default_config() -> Config:
    """The documented defaults; identical to the shipped reference.config."""
    from .plant import DEFAULT_ACTUATORS

    return Config(
        constants=PhysicalConstants(),
        actuators=DEFAULT_ACTUATORS,
        params=StackParams(),
        guards=GuardRails(),
        run=RunDefaults(),
        scenarios={name: ScenarioDef(z0=gaps) for name, gaps in BUILTIN_GAPS.items()},
    )


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_SCHEMA = {
    "physics": {"mass", "gravity"},
    "actuator": {"resistance", "area", "turns", "u_max", "i_max"},
    "controller": {
        "g_e",
        "g_de",
        "g_u",
        "g_max",
        "sup_g_e",
        "kp",
        "kd",
        "rate_alpha",
        "setpoint",
        "period",
        "pd_enabled",
    },
    "guards": {"z_min", "z_drop", "z_eval_floor"},
    "run": {"duration", "dt"},
    "scenario": {"z0", "v0", "i0", "duration", "dt"},
}


def _line_of(text: str, token: str) -> str:
    # best-effort: first line whose stripped form starts with the token
    for n, line in enumerate(text.splitlines(), start=1):
        bare = line.strip()
        if bare.startswith(token) or bare.startswith(f"[{token}") or bare.startswith(f"[[{token}"):
            return f"line {n}"
    return "line unknown"


def _reject_unknown(section: str, table: dict, allowed: set, text: str, source: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(
                f"{source}: unknown key {key!r} in [{section}] ({_line_of(text, key)})"
            )


def _quad(value, what: str) -> tuple[float, float, float, float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * 4
    if isinstance(value, (list, tuple)) and len(value) == 4:
        return tuple(float(v) for v in value)  # type: ignore[return-value]
    raise ConfigError(f"{what} must be a number or a 4-element list, got {value!r}")


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse and validate config text, filling gaps from the defaults."""
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    base = default_config()
    known_sections = set(_SCHEMA)
    for key in doc:
        if key not in known_sections:
            raise ConfigError(
                f"{source}: unknown section {key!r} ({_line_of(text, key)})"
            )

    constants = base.constants
    if "physics" in doc:
        tbl = doc["physics"]
        _reject_unknown("physics", tbl, _SCHEMA["physics"], text, source)
        constants = PhysicalConstants(
            mass=float(tbl.get("mass", constants.mass)),
            gravity=float(tbl.get("gravity", constants.gravity)),
        )

    actuators = base.actuators
    if "actuator" in doc:
        rows = doc["actuator"]
        if not isinstance(rows, list) or len(rows) != 4:
            raise ConfigError(f"{source}: exactly four [[actuator]] tables are required")
        built = []
        for idx, tbl in enumerate(rows, start=1):
            _reject_unknown("actuator", tbl, _SCHEMA["actuator"], text, source)
            ref = actuators[idx - 1]
            try:
                built.append(
                    ActuatorParams(
                        resistance=float(tbl.get("resistance", ref.resistance)),
                        area=float(tbl.get("area", ref.area)),
                        turns=int(tbl.get("turns", ref.turns)),
                        u_max=float(tbl.get("u_max", ref.u_max)),
                        i_max=float(tbl.get("i_max", ref.i_max)),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{source}: actuator {idx}: {exc}") from None
        actuators = tuple(built)

    params = base.params
    if "controller" in doc:
        tbl = doc["controller"]
        _reject_unknown("controller", tbl, _SCHEMA["controller"], text, source)
        kw = {}
        for key in ("g_e", "g_de", "g_max", "sup_g_e"):
            if key in tbl:
                kw[key] = _quad(tbl[key], key)
        if "g_u" in tbl:
            v = tbl["g_u"]
            if v == "auto":
                kw["g_u"] = None
            else:
                kw["g_u"] = _quad(v, "g_u")
        for key in ("kp", "kd", "rate_alpha", "setpoint", "period"):
            if key in tbl:
                kw[key] = float(tbl[key])
        if "pd_enabled" in tbl:
            if not isinstance(tbl["pd_enabled"], bool):
                raise ConfigError(f"{source}: pd_enabled must be a boolean")
            kw["pd_enabled"] = tbl["pd_enabled"]
        try:
            params = replace(params, **kw)
        except ValueError as exc:
            raise ConfigError(f"{source}: controller: {exc}") from None

    guards = base.guards
    if "guards" in doc:
        tbl = doc["guards"]
        _reject_unknown("guards", tbl, _SCHEMA["guards"], text, source)
        try:
            guards = GuardRails(
                z_min=float(tbl.get("z_min", guards.z_min)),
                z_drop=float(tbl.get("z_drop", guards.z_drop)),
                z_eval_floor=float(tbl.get("z_eval_floor", guards.z_eval_floor)),
            )
        except ValueError as exc:
            raise ConfigError(f"{source}: guards: {exc}") from None

    run = base.run
    if "run" in doc:
        tbl = doc["run"]
        _reject_unknown("run", tbl, _SCHEMA["run"], text, source)
        run = RunDefaults(
            duration=float(tbl.get("duration", run.duration)),
            dt=float(tbl.get("dt", run.dt)),
        )

    scenarios = dict(base.scenarios)
    if "scenario" in doc:
        if not isinstance(doc["scenario"], dict):
            raise ConfigError(f"{source}: [scenario] must hold named sub-tables")
        for name, tbl in doc["scenario"].items():
            if not isinstance(tbl, dict):
                raise ConfigError(f"{source}: scenario {name!r} must be a table")
            _reject_unknown(f"scenario.{name}", tbl, _SCHEMA["scenario"], text, source)
            if "z0" not in tbl and name not in scenarios:
                raise ConfigError(f"{source}: scenario {name!r} needs z0")
            prev = scenarios.get(name, ScenarioDef(z0=(0.004,) * 4))
            i0 = tbl.get("i0", prev.i0)
            if i0 != "balance":
                i0 = _quad(i0, "i0")
            scenarios[name] = ScenarioDef(
                z0=_quad(tbl["z0"], "z0") if "z0" in tbl else prev.z0,
                v0=_quad(tbl.get("v0", prev.v0), "v0"),
                i0=i0,
                duration=float(tbl["duration"]) if "duration" in tbl else prev.duration,
                dt=float(tbl["dt"]) if "dt" in tbl else prev.dt,
            )

    return Config(
        constants=constants,
        actuators=actuators,
        params=params,
        guards=guards,
        run=run,
        scenarios=scenarios,
    )


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


# --------------------------------------------------------------------------
# emission
# --------------------------------------------------------------------------


def _tval(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_tval(x) for x in v) + "]"
    raise TypeError(f"cannot emit {v!r}")


def _gain(v) -> str:
    # gains are stored as 4-tuples or scalars; None means auto-calibration
    if v is None:
        return '"auto"'
    return _tval(v)


def render_config(cfg: Config) -> str:
    """Deterministic TOML for ``cfg``; parse(render(cfg)) == cfg."""
    p = cfg.params
    lines = [
        "# resolved quadlev configuration",
        "",
        "[physics]",
        f"mass = {_tval(cfg.constants.mass)}",
        f"gravity = {_tval(cfg.constants.gravity)}",
        "",
    ]
    for a in cfg.actuators:
        lines += [
            "[[actuator]]",
            f"resistance = {_tval(a.resistance)}",
            f"area = {_tval(a.area)}",
            f"turns = {_tval(a.turns)}",
            f"u_max = {_tval(a.u_max)}",
            f"i_max = {_tval(a.i_max)}",
            "",
        ]
    lines += [
        "[controller]",
        f"g_e = {_gain(p.g_e)}",
        f"g_de = {_gain(p.g_de)}",
        f"g_u = {_gain(p.g_u)}",
        f"g_max = {_gain(p.g_max)}",
        f"sup_g_e = {_gain(p.sup_g_e)}",
        f"kp = {_tval(p.kp)}",
        f"kd = {_tval(p.kd)}",
        f"rate_alpha = {_tval(p.rate_alpha)}",
        f"setpoint = {_tval(p.setpoint)}",
        f"period = {_tval(p.period)}",
        f"pd_enabled = {_tval(p.pd_enabled)}",
        "",
        "[guards]",
        f"z_min = {_tval(cfg.guards.z_min)}",
        f"z_drop = {_tval(cfg.guards.z_drop)}",
        f"z_eval_floor = {_tval(cfg.guards.z_eval_floor)}",
        "",
        "[run]",
        f"duration = {_tval(cfg.run.duration)}",
        f"dt = {_tval(cfg.run.dt)}",
        "",
    ]
    for name in sorted(cfg.scenarios):
        sd = cfg.scenarios[name]
        lines += [
            f"[scenario.{name}]",
            f"z0 = {_tval(sd.z0)}",
            f"v0 = {_tval(sd.v0)}",
            f"i0 = {_tval(sd.i0) if isinstance(sd.i0, str) else _tval(tuple(sd.i0))}",
        ]
        if sd.duration is not None:
            lines.append(f"duration = {_tval(sd.duration)}")
        if sd.dt is not None:
            lines.append(f"dt = {_tval(sd.dt)}")
        lines.append("")
    return "\n".join(lines)


def write_config(path, cfg: Config) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(render_config(cfg))


def reference_text() -> str:
    """The annotated reference configuration shipped inside the package."""
    from importlib import resources

    return (resources.files("quadlev") / "data" / "reference.config").read_text(
        encoding="utf-8"
    )


def reference_config() -> Config:
    return parse_config(reference_text(), source="reference.config")
