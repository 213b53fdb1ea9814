"""Controller stack: pair controllers, gain supervisor, leveler, packing."""

import numpy as np
import pytest

from quadlev.control import (
    LEVEL_SIGNS,
    RULE_ROWS,
    ControllerMemory,
    PdConfig,
    StackParams,
    build_stack,
    control_step,
    level_error,
    main_fis,
    pack_stack,
    pd_leveler,
    supervisory_fis,
    supervisory_gain,
)
from quadlev.plant import DEFAULT_ACTUATORS, DEFAULT_CONSTANTS

U_MAX = np.array([p.u_max for p in DEFAULT_ACTUATORS])

# fixed-point output gains produced by the automatic calibration,
# frozen from u*_k / (FLC(0,0) * boost(0)) with u* = R_k i_bal(z*)
CALIBRATED_G_U = (88.263679570, 81.081701417, 55.822852421, 63.660083284)


class TestRuleTable:
    def test_ladder_matches_clamped_sum(self):
        for a, row in enumerate(RULE_ROWS):
            for b, cons in enumerate(row):
                assert cons == min(max(a + b - 2, 0), 4)

    def test_table_is_symmetric(self):
        for a in range(5):
            for b in range(5):
                assert RULE_ROWS[a][b] == RULE_ROWS[b][a]


class TestMainFis:
    def test_universes(self):
        fis = main_fis()
        assert [v.lo for v in fis.inputs] == [-1.0, -1.0]
        assert [v.hi for v in fis.inputs] == [1.0, 1.0]
        assert (fis.output.lo, fis.output.hi) == (0.0, 1.0)
        assert [len(v.terms) for v in fis.inputs] == [5, 5]
        assert len(fis.output.terms) == 5

    def test_zero_error_lands_on_center(self):
        assert main_fis().infer(0.0, 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_known_interior_point(self):
        # one input nudged a quarter of a term to the right pulls the
        # centroid exactly halfway to the next output term
        assert main_fis().infer(0.25, 0.0) == pytest.approx(0.625, abs=1e-12)

    def test_saturated_corners(self):
        fis = main_fis()
        # the aggregate at a full-rail corner is the end shoulder term,
        # whose exact centroid sits a sixth of a term from the boundary
        assert fis.infer(1.0, 1.0) == pytest.approx(11.0 / 12.0, abs=1e-12)
        assert fis.infer(-1.0, -1.0) == pytest.approx(1.0 / 12.0, abs=1e-12)

    def test_odd_symmetry_about_center(self, rng):
        fis = main_fis()
        for _ in range(200):
            e, de = rng.uniform(-1.0, 1.0, size=2)
            assert fis.infer(e, de) + fis.infer(-e, -de) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_error(self):
        fis = main_fis()
        ys = [fis.infer(e, 0.0) for e in np.linspace(-1.0, 1.0, 101)]
        assert all(b - a > -1e-12 for a, b in zip(ys, ys[1:]))


class TestSupervisor:
    def test_gain_range_and_endpoints(self):
        fis = supervisory_fis(3.0)
        # narrow end terms put the no-boost centroid a hair above 1
        assert fis.infer(0.0) == pytest.approx(1.0 + 0.1 / 3.0, abs=1e-12)
        assert fis.infer(1.0) == pytest.approx(3.0 - 0.1 / 3.0, abs=1e-12)
        for x in np.linspace(0.0, 1.0, 41):
            assert 1.0 <= fis.infer(x) <= 3.0

    def test_gain_flat_then_rising(self):
        fis = supervisory_fis(3.0)
        # no boost while only the small/medium terms fire: the clipped end
        # trapezoid wiggles its own centroid a little but stays parked near 1
        for x in np.linspace(0.0, 0.5, 51):
            assert fis.infer(x) <= 1.0 + 0.1 / 3.0 + 0.006
        # the handoff to the boost term is monotone
        ys = [fis.infer(x) for x in np.linspace(0.5, 1.0, 51)]
        assert all(b - a > -1e-12 for a, b in zip(ys, ys[1:]))

    def test_supervisory_gain_is_even(self):
        stack = build_stack(StackParams(), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)
        sup = stack.supervisor[0]
        assert supervisory_gain(sup, 0.002) == supervisory_gain(sup, -0.002)


class TestBuildStack:
    def test_defaults_are_the_reference_gains(self):
        # scalars canonicalize to per-pair tuples on construction
        p = StackParams()
        assert p.g_e == (500.0,) * 4
        assert p.g_de == (5.0, 5.0, 8.0, 8.0)
        assert p.g_u is None
        assert p.g_max == (3.0,) * 4
        assert p.sup_g_e == (125.0, 125.0, 250.0, 250.0)
        assert (p.kp, p.kd) == (8000.0, 160.0)
        assert p.setpoint == 0.004 and p.period == 5e-4
        assert p.pd_enabled and p.rate_alpha == 0.0
        assert StackParams(g_e=500.0) == StackParams(g_e=(500.0,) * 4)

    def test_auto_calibrated_output_gains(self):
        stack = build_stack(StackParams(), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)
        for k, want in enumerate(CALIBRATED_G_U):
            assert stack.main[k].g_u == pytest.approx(want, abs=1e-6)

    def test_explicit_output_gain_respected(self):
        stack = build_stack(StackParams(g_u=70.0), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)
        assert [m.g_u for m in stack.main] == [70.0] * 4

    def test_scalar_gains_broadcast(self):
        stack = build_stack(StackParams(g_de=6.0), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)
        assert [m.g_de for m in stack.main] == [6.0] * 4

    def test_rejects_wrong_gain_arity(self):
        with pytest.raises(ValueError, match="g_de"):
            build_stack(StackParams(g_de=(1.0, 2.0)), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)


class TestLeveler:
    def test_level_error_signs(self):
        assert LEVEL_SIGNS == (1.0, -1.0, 1.0, -1.0)
        assert level_error([0.005, 0.004, 0.004, 0.004]) == pytest.approx(0.001)
        assert level_error([0.004, 0.005, 0.004, 0.005]) == pytest.approx(-0.002)
        assert level_error([0.004] * 4) == 0.0

    def test_pd_output(self):
        cfg = PdConfig(kp=100.0, kd=10.0, signs=LEVEL_SIGNS)
        assert pd_leveler(cfg, 0.002, -0.01) == pytest.approx(0.2 - 0.1)


class TestControlStep:
    def make(self, **kw):
        stack = build_stack(StackParams(**kw), DEFAULT_ACTUATORS, DEFAULT_CONSTANTS)
        return stack, ControllerMemory.fresh()

    def test_zero_error_fixed_point(self):
        # at the set level with coplanar floaters the commanded voltages
        # equal the steady-state voltages exactly; nothing pushes the loop
        stack, mem = self.make()
        u, diag = control_step(stack, mem, [0.004] * 4, U_MAX)
        for k, p in enumerate(DEFAULT_ACTUATORS):
            want = p.balance_voltage(0.004, DEFAULT_CONSTANTS)
            assert u[k] == pytest.approx(want, abs=1e-9)
        assert diag.l == 0.0 and diag.w == 0.0
        assert not diag.clamped.any() and not diag.fis_empty.any()

    def test_error_sign_convention(self):
        # gap above set level (floater hanging low) must raise the command
        stack, mem = self.make()
        u0, _ = control_step(stack, mem, [0.004] * 4, U_MAX)
        mem2 = ControllerMemory.fresh()
        u_low, diag = control_step(stack, mem2, [0.005, 0.004, 0.004, 0.004], U_MAX)
        assert diag.e[0] == pytest.approx(0.001)
        assert u_low[0] > u0[0]

    def test_large_gap_saturates_driver(self):
        stack, mem = self.make()
        u, diag = control_step(stack, mem, [0.012, 0.004, 0.004, 0.004], U_MAX)
        assert u[0] == U_MAX[0]
        assert diag.clamped[0]
        assert diag.u_raw[0] > U_MAX[0]

    def test_command_never_negative(self):
        stack, mem = self.make()
        u, _ = control_step(stack, mem, [0.0011, 0.004, 0.004, 0.004], U_MAX)
        assert np.all(u >= 0.0)

    def test_discrete_derivative_uses_period(self):
        stack, mem = self.make()
        control_step(stack, mem, [0.004] * 4, U_MAX)
        _, diag = control_step(stack, mem, [0.0041, 0.004, 0.004, 0.004], U_MAX)
        assert diag.de[0] == pytest.approx(1e-4 / stack.period)
        assert diag.de[1:].tolist() == [0.0, 0.0, 0.0]

    def test_first_step_has_zero_rates(self):
        stack, mem = self.make()
        _, diag = control_step(stack, mem, [0.005] * 4, U_MAX)
        assert diag.de.tolist() == [0.0] * 4
        assert diag.w == pytest.approx(8000.0 * diag.l)  # no dl on first step

    def test_leveler_pushes_pairs_apart(self):
        stack, mem = self.make()
        # raised pair 1 means positive l; its drive gains w, pair 2 loses it
        _, diag = control_step(stack, mem, [0.0042, 0.004, 0.004, 0.004], U_MAX)
        assert diag.l > 0.0 and diag.w > 0.0
        off = self.make(pd_enabled=False)
        u_off, diag_off = control_step(off[0], off[1], [0.0042, 0.004, 0.004, 0.004], U_MAX)
        assert diag_off.w == 0.0
        assert diag.u_raw[0] == pytest.approx(diag_off.u_raw[0] + diag.w)
        assert diag.u_raw[1] == pytest.approx(diag_off.u_raw[1] - diag.w)

    def test_boost_rises_with_error(self):
        stack, mem = self.make()
        _, near = control_step(stack, mem, [0.004] * 4, U_MAX)
        mem2 = ControllerMemory.fresh()
        _, far = control_step(stack, mem2, [0.012] * 4, U_MAX)
        assert np.all(far.boost > near.boost)
        assert np.all(near.boost >= 1.0)
        assert np.all(far.boost <= 3.0)

    def test_prepacked_stack_is_equivalent(self):
        stack, mem = self.make()
        packed = pack_stack(stack)
        z = [0.0048, 0.0033, 0.0051, 0.0040]
        u_packed, _ = control_step(stack, mem, z, U_MAX, packed=packed)
        u_fresh, _ = control_step(stack, ControllerMemory.fresh(), z, U_MAX)
        assert np.array_equal(u_packed, u_fresh)

    def test_deterministic(self):
        stack, _ = self.make()
        z = [0.0048, 0.0033, 0.0051, 0.0040]
        a, _ = control_step(stack, ControllerMemory.fresh(), z, U_MAX)
        b, _ = control_step(stack, ControllerMemory.fresh(), z, U_MAX)
        assert np.array_equal(a, b)
