"""Step-response metrics against a closed-form ringing signal."""

import math

import numpy as np
import pytest

from oracles import oscillation_metrics, sampled_oscillation
from quadlev.metrics import (
    LevelMetrics,
    PairMetrics,
    RunReport,
    level_metrics,
    pair_metrics,
    parse_record,
    render_record,
    render_report,
    report_from_run,
    settling_band,
)

Z_STAR = 0.004
BAND = settling_band(Z_STAR)


class TestSettlingBand:
    def test_two_percent_rule_with_floor(self):
        assert settling_band(0.004) == pytest.approx(8e-5)
        assert settling_band(0.010) == pytest.approx(2e-4)
        assert settling_band(0.001) == 5e-5  # floor wins for small set levels


class TestPairMetricsAnalytic:
    @pytest.mark.parametrize(
        "amp,sigma,omega",
        [
            (5e-3, 30.0, 2 * math.pi * 20),
            (5e-3, 12.0, 2 * math.pi * 8),
            (-3e-3, 25.0, 2 * math.pi * 15),
        ],
    )
    def test_matches_closed_form_within_one_sample(self, amp, sigma, omega):
        dt = 5e-4
        t, z = sampled_oscillation(Z_STAR, amp, sigma, omega, duration=0.6, dt=dt)
        got = pair_metrics(t, z, Z_STAR, z0=Z_STAR + amp, band=BAND)
        rise, overshoot, settle = oscillation_metrics(abs(amp), sigma, omega, BAND)
        assert got.rise_time == pytest.approx(rise, abs=dt)
        assert got.settling_time == pytest.approx(settle, abs=dt)
        slope_bound = abs(amp) * math.hypot(sigma, omega) * dt
        assert got.max_abs_overshoot == pytest.approx(overshoot, abs=slope_bound)

    def test_monotone_approach_has_zero_overshoot(self):
        t = np.linspace(0.0, 0.5, 1001)
        z = Z_STAR + 5e-3 * np.exp(-20.0 * t)
        got = pair_metrics(t, z, Z_STAR, z0=Z_STAR + 5e-3)
        assert got.max_abs_overshoot == 0.0
        assert got.settling_time is not None
        # decay to a tenth takes ln(10)/sigma seconds
        assert got.rise_time == pytest.approx(math.log(10.0) / 20.0, abs=5e-4)

    def test_never_settling_is_none(self):
        t = np.linspace(0.0, 0.5, 1001)
        z = Z_STAR + 5e-3 * np.ones_like(t)
        got = pair_metrics(t, z, Z_STAR, z0=Z_STAR + 5e-3)
        assert got.rise_time is None
        assert got.settling_time is None

    def test_start_at_setpoint_settles_immediately(self):
        t = np.linspace(0.0, 0.1, 201)
        z = np.full_like(t, Z_STAR)
        got = pair_metrics(t, z, Z_STAR, z0=Z_STAR)
        assert got.rise_time == 0.0
        assert got.settling_time == 0.0
        assert got.max_abs_overshoot == 0.0

    def test_time_origin_is_relative(self):
        t = np.linspace(2.0, 2.5, 501)
        z = Z_STAR + 5e-3 * np.exp(-20.0 * (t - 2.0))
        got = pair_metrics(t, z, Z_STAR, z0=Z_STAR + 5e-3)
        assert got.rise_time == pytest.approx(math.log(10.0) / 20.0, abs=1e-3)

    def test_rejects_empty_series(self):
        with pytest.raises(ValueError):
            pair_metrics([], [], Z_STAR, z0=0.005)


class TestLevelMetrics:
    def test_known_values(self):
        m = level_metrics([1.0, -3.0, 2.0, 0.0])
        assert m.largest_abs == 3.0
        assert m.mean == 0.0
        assert m.std_dev == pytest.approx(math.sqrt(3.5))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            level_metrics([])


class TestReportRendering:
    def make_report(self):
        pairs = tuple(
            PairMetrics(rise_time=0.06 + 0.01 * k, max_abs_overshoot=1e-4 * k, settling_time=None if k == 3 else 0.1)
            for k in range(4)
        )
        return RunReport(
            scenario="setting1",
            outcome="stabilized",
            band=8e-5,
            pairs=pairs,
            level=LevelMetrics(largest_abs=2.9e-4, mean=-1e-5, std_dev=4e-5),
        )

    def test_report_layout(self):
        text = render_report(self.make_report())
        lines = text.splitlines()
        assert lines[0].startswith("#")
        assert any("scenario: setting1" in ln and "outcome: stabilized" in ln for ln in lines)
        assert any(ln.startswith("rise_time_s") for ln in lines)
        assert any("never" in ln for ln in lines)  # missing settling prints as never
        assert "level_largest_abs_m" in text

    def test_record_round_trip(self):
        report = self.make_report()
        back = parse_record(render_record(report))
        assert back == report

    def test_record_is_line_oriented_key_value(self):
        text = render_record(self.make_report())
        for line in text.strip().splitlines():
            assert " = " in line

    def test_report_from_run(self, setting1_run):
        report = report_from_run(setting1_run)
        assert report.scenario == "setting1"
        assert report.outcome == "stabilized"
        assert report.band == setting1_run.band
        assert all(p.settling_time is not None for p in report.pairs)
        assert report.level.largest_abs == pytest.approx(np.max(np.abs(setting1_run.l)))
