"""Offline gain search: deterministic coordinate descent over a gain box.

The search replaces the manual tuning that produced the reference gains.
It is scaffolding, not science: cyclic descent with per-coordinate steps
that halve on failure and never grow, a bound box per parameter, and a
fully reproducible trace.  No randomness anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .config import Config
from .metrics import settling_band
from .sim import SimulationError, run
from .control import build_stack

#: Flat penalties per pair for terminal events, sized to dominate any
#: stabilizing configuration's cost.
PENALTY_DROP = 100.0
PENALTY_CONTACT = 30.0
PENALTY_ERROR = 500.0

#: Normalization target for the leveling term, m.
LEVEL_TARGET = 5e-4


@dataclass(frozen=True)
class TuneParam:
    """One searchable knob.

    ``name`` is a StackParams field; ``slots`` selects which of the four
    pair slots the value lands in (None = the field becomes one shared
    scalar).  Bounds are inclusive and must be finite and positive-width.
    """

    name: str
    lo: float
    hi: float
    slots: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"bad bounds [{self.lo}, {self.hi}] for {self.name!r}")


@dataclass(frozen=True)
class CostWeights:
    overshoot: float = 1.0
    settle: float = 1.0
    level: float = 1.0


@dataclass(frozen=True)
class TuningSpec:
    params: tuple[TuneParam, ...]
    scenarios: tuple[str, ...] = ("setting1",)
    weights: CostWeights = CostWeights()
    settle_target: float = 0.3
    max_cycles: int = 60
    tol_frac: float = 0.01
    step_frac: float = 0.25

    def __post_init__(self) -> None:
        if not self.params or not self.scenarios:
            raise ValueError("need at least one parameter and one scenario")


def default_tuning_spec() -> TuningSpec:
    """The stock search box: shared error gain, split rate gains, boost
    scaling for the far pairs, and the two leveler gains."""
    return TuningSpec(
        params=(
            TuneParam("g_e", 300.0, 800.0),
            TuneParam("g_de", 2.0, 12.0, slots=(0, 1)),
            TuneParam("g_de", 3.0, 16.0, slots=(2, 3)),
            TuneParam("sup_g_e", 150.0, 350.0, slots=(2, 3)),
            TuneParam("kp", 0.0, 12000.0),
            TuneParam("kd", 0.0, 300.0),
        )
    )


def _as_quad(value) -> list[float]:
    if np.isscalar(value):
        return [float(value)] * 4
    return [float(v) for v in value]


def apply_candidate(cfg: Config, spec: TuningSpec, values: Sequence[float]) -> Config:
    """Config with the candidate values written into its controller gains."""
    params = cfg.params
    for p, v in zip(spec.params, values):
        v = float(v)
        if p.slots is None:
            params = replace(params, **{p.name: v})
        else:
            quad = _as_quad(getattr(params, p.name))
            for s in p.slots:
                quad[s] = v
            params = replace(params, **{p.name: tuple(quad)})
    return replace(cfg, params=params)


def _itae(t: np.ndarray, dev: np.ndarray) -> float:
    return float(np.trapezoid(t * np.abs(dev), t))


def _settle_time(t: np.ndarray, dev: np.ndarray, band: float) -> float | None:
    inside = np.abs(dev) <= band
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    return float(t[0 if outside.size == 0 else int(outside[-1]) + 1] - t[0])


def evaluate(cfg: Config, spec: TuningSpec, values: Sequence[float]) -> float:
    """Deterministic scalar cost of a candidate over the tuning scenarios.

    Per scenario and pair: time-weighted absolute error (normalized by the
    constant-error baseline), overshoot in settling bands, settling time
    beyond the target as a fraction of the run.  Per scenario: the leveling
    peak against the 5e-4 m target.  Dropped pairs, contacts and integrator
    failures add flat penalties that dominate every stabilized cost.
    """
    trial = apply_candidate(cfg, spec, values)
    stack = build_stack(trial.params, trial.actuators, trial.constants)
    w = spec.weights
    cost = 0.0
    for name in spec.scenarios:
        scenario = trial.scenario(name)
        try:
            r = run(scenario, stack, trial.actuators, trial.constants, trial.guards)
        except SimulationError:
            cost += PENALTY_ERROR
            continue
        band = settling_band(scenario.setpoint)
        duration = scenario.duration
        for k in range(4):
            dev = r.z[:, k] - scenario.setpoint
            e0 = abs(scenario.z0[k] - scenario.setpoint)
            baseline = max(e0, band) * duration**2 / 2.0
            cost += _itae(r.t, dev) / baseline

            signs = np.sign(dev)
            nz = np.flatnonzero(signs)
            overshoot = 0.0
            if nz.size:
                crossings = np.flatnonzero(signs == -signs[nz[0]])
                if crossings.size:
                    overshoot = float(np.max(np.abs(dev[crossings[0]:])))
            cost += w.overshoot * overshoot / band

            settle = _settle_time(r.t, dev, band)
            if settle is None:
                cost += w.settle * (1.0 + (duration - spec.settle_target) / duration)
            else:
                cost += w.settle * max(0.0, settle - spec.settle_target) / duration
        cost += w.level * float(np.max(np.abs(r.l))) / LEVEL_TARGET
        cost += PENALTY_DROP * int(np.sum(r.events.flagged("dropped")))
        cost += PENALTY_CONTACT * int(np.sum(r.events.flagged("contact")))
    return cost


@dataclass
class SearchTraceRow:
    cycle: int
    moved: str
    candidate: tuple[float, ...]
    cost: float
    best_cost: float


@dataclass
class SearchResult:
    best: np.ndarray
    cost: float
    trace: list[SearchTraceRow] = field(default_factory=list)
    evaluations: int = 0


def coordinate_search(
    fn: Callable[[np.ndarray], float],
    start: Sequence[float],
    lo: Sequence[float],
    hi: Sequence[float],
    step_frac: float = 0.25,
    tol_frac: float = 0.01,
    max_cycles: int = 60,
) -> SearchResult:
    """Cyclic coordinate descent inside a box.

    Per coordinate and cycle, the step is tried in + then - direction; the
    first strict improvement is taken, otherwise the step halves.  Steps
    never grow.  Terminates when every step has shrunk below ``tol_frac``
    of its coordinate's range, or after ``max_cycles`` full cycles.
    """
    x = np.asarray(start, dtype=np.float64).copy()
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("start lies outside the bound box")
    ranges = hi - lo
    steps = step_frac * ranges
    best_cost = fn(x)
    result = SearchResult(best=x.copy(), cost=best_cost)
    result.evaluations = 1
    result.trace.append(SearchTraceRow(0, "start", tuple(x), best_cost, best_cost))

    for cycle in range(1, max_cycles + 1):
        if np.all(steps < tol_frac * ranges):
            break
        for j in range(x.size):
            if steps[j] < tol_frac * ranges[j]:
                continue
            improved = False
            for direction in (+1.0, -1.0):
                cand = x.copy()
                cand[j] = min(max(cand[j] + direction * steps[j], lo[j]), hi[j])
                if cand[j] == x[j]:
                    continue
                c = fn(cand)
                result.evaluations += 1
                if c < best_cost:
                    x = cand
                    best_cost = c
                    improved = True
                result.trace.append(
                    SearchTraceRow(cycle, f"p{j}{'+' if direction > 0 else '-'}",
                                   tuple(cand), c, best_cost)
                )
                if improved:
                    break
            if not improved:
                steps[j] *= 0.5
    result.best = x.copy()
    result.cost = best_cost
    return result


@dataclass
class TuneResult:
    config: Config
    values: np.ndarray
    cost: float
    trace: list[SearchTraceRow]
    evaluations: int


def tune(cfg: Config, spec: TuningSpec, start: Sequence[float] | None = None) -> TuneResult:
    """Search the tuning box starting from the config's current gains.

    ``start`` overrides the starting point (defaults to the config's own
    values clamped to the box).
    """
    if start is None:
        start = []
        for p in spec.params:
            current = getattr(cfg.params, p.name)
            v = float(current) if np.isscalar(current) else float(_as_quad(current)[p.slots[0] if p.slots else 0])
            start.append(min(max(v, p.lo), p.hi))
    lo = [p.lo for p in spec.params]
    hi = [p.hi for p in spec.params]
    res = coordinate_search(
        lambda v: evaluate(cfg, spec, v),
        start,
        lo,
        hi,
        step_frac=spec.step_frac,
        tol_frac=spec.tol_frac,
        max_cycles=spec.max_cycles,
    )
    return TuneResult(
        config=apply_candidate(cfg, spec, res.best),
        values=res.best,
        cost=res.cost,
        trace=res.trace,
        evaluations=res.evaluations,
    )


def parse_tuning_spec(text: str, source: str = "<tuning>") -> TuningSpec:
    """Read a [tuning] TOML document; omitted fields keep stock values."""
    from .config import ConfigError, load_toml

    doc = load_toml(text, source)
    tbl = doc.get("tuning", {})
    known = {"scenarios", "settle_target", "max_cycles", "tol_frac", "step_frac",
             "weights", "param"}
    for key in set(doc) - {"tuning"}:
        raise ConfigError(f"{source}: unknown section {key!r}")
    for key in set(tbl) - known:
        raise ConfigError(f"{source}: unknown key {key!r} in [tuning]")

    stock = default_tuning_spec()
    params = stock.params
    if "param" in tbl:
        built = []
        for row in tbl["param"]:
            for key in set(row) - {"name", "lo", "hi", "slots"}:
                raise ConfigError(f"{source}: unknown key {key!r} in [[tuning.param]]")
            slots = tuple(int(s) for s in row["slots"]) if "slots" in row else None
            try:
                built.append(TuneParam(str(row["name"]), float(row["lo"]),
                                       float(row["hi"]), slots))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"{source}: bad tuning parameter: {exc}") from None
        params = tuple(built)

    w = tbl.get("weights", {})
    for key in set(w) - {"overshoot", "settle", "level"}:
        raise ConfigError(f"{source}: unknown key {key!r} in [tuning.weights]")
    weights = CostWeights(
        overshoot=float(w.get("overshoot", 1.0)),
        settle=float(w.get("settle", 1.0)),
        level=float(w.get("level", 1.0)),
    )
    return TuningSpec(
        params=params,
        scenarios=tuple(tbl.get("scenarios", stock.scenarios)),
        weights=weights,
        settle_target=float(tbl.get("settle_target", stock.settle_target)),
        max_cycles=int(tbl.get("max_cycles", stock.max_cycles)),
        tol_frac=float(tbl.get("tol_frac", stock.tol_frac)),
        step_frac=float(tbl.get("step_frac", stock.step_frac)),
    )


def write_trace_csv(path, spec: TuningSpec, trace: list[SearchTraceRow]) -> None:
    names = []
    seen: dict[str, int] = {}
    for p in spec.params:
        n = seen.get(p.name, 0)
        seen[p.name] = n + 1
        names.append(p.name if n == 0 else f"{p.name}_{n + 1}")
    with open(path, "w", newline="\n") as fh:
        fh.write("cycle,moved," + ",".join(names) + ",cost,best_cost\n")
        for row in trace:
            cells = [str(row.cycle), row.moved]
            cells += [format(v, ".12g") for v in row.candidate]
            cells += [format(row.cost, ".12g"), format(row.best_cost, ".12g")]
            fh.write(",".join(cells) + "\n")
