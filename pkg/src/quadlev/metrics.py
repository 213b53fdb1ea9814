"""Step-response and leveling metrics over sampled trajectories.

Conventions (stated here once and printed in every report header, since
different texts define these terms differently):

* rise time: first time, relative to the series start, at which the
  deviation |z - z*| has shrunk to 10% of its initial value;
* max abs overshoot: the largest |z - z*| at or after the first crossing
  of the set level, and exactly 0 for a series that never crosses it;
* settling time: the earliest time after which |z - z*| stays within the
  settling band through the end of the series;
* the settling band is max(2% of z*, 50 um);
* level statistics (largest |l|, mean, population standard deviation) run
  over the entire series, transient included.

All metrics are invariant under shifting the time axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REPORT_FLOAT = "%.3E"


def settling_band(setpoint: float) -> float:
    """Absolute settling tolerance around the set level, meters."""
    return max(0.02 * setpoint, 5e-5)


@dataclass(frozen=True)
class PairMetrics:
    """Step metrics for one pair; times are None when never reached."""

    rise_time: float | None
    max_abs_overshoot: float
    settling_time: float | None


@dataclass(frozen=True)
class LevelMetrics:
    largest_abs: float
    mean: float
    std_dev: float


@dataclass(frozen=True)
class RunReport:
    scenario: str
    outcome: str
    band: float
    pairs: tuple[PairMetrics, PairMetrics, PairMetrics, PairMetrics]
    level: LevelMetrics


def pair_metrics(t, z, setpoint: float, z0: float, band: float | None = None) -> PairMetrics:
    """Metrics of one pair's gap series sampled at times ``t``.

    ``z0`` is the commanded initial gap (the step size reference for rise
    time); the series itself need not start exactly there.
    """
    t = np.asarray(t, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if t.size == 0 or t.shape != z.shape:
        raise ValueError("need matching nonempty time and gap series")
    if band is None:
        band = settling_band(setpoint)
    rel = t - t[0]
    dev = z - setpoint

    rise = None
    target = 0.1 * abs(z0 - setpoint)
    hits = np.flatnonzero(np.abs(dev) <= target)
    if hits.size:
        rise = float(rel[hits[0]])

    overshoot = 0.0
    signs = np.sign(dev)
    nonzero = np.flatnonzero(signs)
    if nonzero.size:
        s0 = signs[nonzero[0]]
        crossings = np.flatnonzero(signs == -s0)
        if crossings.size:
            overshoot = float(np.max(np.abs(dev[crossings[0]:])))

    settling = None
    inside = np.abs(dev) <= band
    if inside[-1]:
        # walk back from the end to the last sample outside the band
        outside = np.flatnonzero(~inside)
        first_ok = 0 if outside.size == 0 else int(outside[-1]) + 1
        settling = float(rel[first_ok])

    return PairMetrics(rise_time=rise, max_abs_overshoot=overshoot, settling_time=settling)


def level_metrics(l) -> LevelMetrics:
    """Whole-series statistics of the level error signal."""
    arr = np.asarray(l, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty level series")
    return LevelMetrics(
        largest_abs=float(np.max(np.abs(arr))),
        mean=float(np.mean(arr)),
        std_dev=float(np.std(arr)),
    )


def report_from_run(result) -> RunReport:
    """Assemble the full report from a sim RunResult."""
    pairs = tuple(
        pair_metrics(
            result.t,
            result.z[:, k],
            result.scenario.setpoint,
            result.scenario.z0[k],
            band=result.band,
        )
        for k in range(4)
    )
    return RunReport(
        scenario=result.scenario.name,
        outcome=result.outcome,
        band=result.band,
        pairs=pairs,  # type: ignore[arg-type]
        level=level_metrics(result.l),
    )


def _fmt(x: float | None) -> str:
    return "never" if x is None else REPORT_FLOAT % x


_CONVENTIONS = (
    "# rise = first t with |z - z*| <= 0.1 |z0 - z*|; overshoot = max |z - z*| at or",
    "# after the first crossing of z* (0 if never crossed); settling = earliest t",
    "# after which |z - z*| stays within band = max(0.02 z*, 5e-5 m); level stats",
    "# cover the whole run including the transient.",
)


def render_report(report: RunReport) -> str:
    """Human-readable fixed-layout table, pairs 1..4 then level statistics."""
    rows = [
        "# step-response and leveling metrics",
        *_CONVENTIONS,
        f"scenario: {report.scenario}    outcome: {report.outcome}    "
        f"band: {REPORT_FLOAT % report.band} m",
        "",
        f"{'quantity':<24}{'pair1':>12}{'pair2':>12}{'pair3':>12}{'pair4':>12}",
    ]
    for label, attr in (
        ("rise_time_s", "rise_time"),
        ("max_abs_overshoot_m", "max_abs_overshoot"),
        ("settling_time_s", "settling_time"),
    ):
        cells = "".join(f"{_fmt(getattr(p, attr)):>12}" for p in report.pairs)
        rows.append(f"{label:<24}{cells}")
    rows.append("")
    rows.append(f"{'level_largest_abs_m':<24}{REPORT_FLOAT % report.level.largest_abs:>12}")
    rows.append(f"{'level_mean_m':<24}{REPORT_FLOAT % report.level.mean:>12}")
    rows.append(f"{'level_std_dev_m':<24}{REPORT_FLOAT % report.level.std_dev:>12}")
    return "\n".join(rows) + "\n"


def _record_value(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render_record(report: RunReport) -> str:
    """Flat ``key = value`` record; floats via repr so parsing is exact."""
    lines = [
        f"scenario = {report.scenario}",
        f"outcome = {report.outcome}",
        f"band = {_record_value(report.band)}",
    ]
    for k, p in enumerate(report.pairs, start=1):
        lines.append(f"pair{k}.rise_time = {_record_value(p.rise_time)}")
        lines.append(f"pair{k}.max_abs_overshoot = {_record_value(p.max_abs_overshoot)}")
        lines.append(f"pair{k}.settling_time = {_record_value(p.settling_time)}")
    lines.append(f"level.largest_abs = {_record_value(report.level.largest_abs)}")
    lines.append(f"level.mean = {_record_value(report.level.mean)}")
    lines.append(f"level.std_dev = {_record_value(report.level.std_dev)}")
    return "\n".join(lines) + "\n"


def parse_record(text: str) -> RunReport:
    """Inverse of render_record (exact round-trip)."""
    kv: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()

    def opt(key: str) -> float | None:
        v = kv[key]
        return None if v == "none" else float(v)

    pairs = tuple(
        PairMetrics(
            rise_time=opt(f"pair{k}.rise_time"),
            max_abs_overshoot=float(kv[f"pair{k}.max_abs_overshoot"]),
            settling_time=opt(f"pair{k}.settling_time"),
        )
        for k in range(1, 5)
    )
    return RunReport(
        scenario=kv["scenario"],
        outcome=kv["outcome"],
        band=float(kv["band"]),
        pairs=pairs,  # type: ignore[arg-type]
        level=LevelMetrics(
            largest_abs=float(kv["level.largest_abs"]),
            mean=float(kv["level.mean"]),
            std_dev=float(kv["level.std_dev"]),
        ),
    )
