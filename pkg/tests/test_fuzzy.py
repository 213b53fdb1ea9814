"""Inference engine tests.

The centroid kernel is exact piecewise-linear integration; here it is
checked against the brute-force sampled oracle, plus structural and
symmetry properties that do not depend on any oracle.
"""

import numpy as np
import pytest

from oracles import numeric_centroid
from quadlev.fuzzy import (
    DefinitionError,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    RuleBase,
    control_surface,
    rule_matrix,
    trapezoidal,
    triangular,
    uniform_variable,
    write_surface_csv,
)


class TestMembershipFunction:
    @pytest.mark.parametrize(
        "points",
        [(0.0, 1.0), (0.0, 1.0, 2.0, 3.0, 4.0), (0.0, 2.0, 1.0), (0.0, 0.0, 0.0), (0.0, np.nan, 1.0)],
    )
    def test_rejects_malformed(self, points):
        with pytest.raises(DefinitionError):
            MembershipFunction(points)

    def test_triangle_values(self):
        mf = triangular(0.0, 1.0, 3.0)
        assert mf(0.0) == 0.0
        assert mf(0.5) == 0.5
        assert mf(1.0) == 1.0
        assert mf(2.0) == 0.5
        assert mf(3.0) == 0.0
        assert mf(-1.0) == 0.0 and mf(4.0) == 0.0

    def test_trapezoid_core_and_shoulder(self):
        mf = trapezoidal(0.0, 1.0, 2.0, 4.0)
        assert mf(1.5) == 1.0
        assert mf(3.0) == 0.5
        # vertical left edge: full membership on the boundary itself
        shoulder = trapezoidal(0.0, 0.0, 0.0, 1.0)
        assert shoulder(0.0) == 1.0
        assert shoulder(0.5) == 0.5

    def test_as_trapezoid_canonical(self):
        assert triangular(0.0, 1.0, 2.0).as_trapezoid() == (0.0, 1.0, 1.0, 2.0)
        assert trapezoidal(0, 1, 2, 3).as_trapezoid() == (0.0, 1.0, 2.0, 3.0)


class TestLinguisticVariable:
    def test_uniform_layout(self):
        var = uniform_variable("error", -1.0, 1.0, 5)
        assert len(var.terms) == 5
        assert var.terms[0].as_trapezoid() == (-1.0, -1.0, -1.0, -0.5)
        assert var.terms[2].points == (-0.5, 0.0, 0.5)
        assert var.terms[4].as_trapezoid() == (0.5, 1.0, 1.0, 1.0)
        assert var.covers_universe()
        # adjacent terms cross at one half
        assert var.membership(-0.75).tolist() == [0.5, 0.5, 0.0, 0.0, 0.0]

    def test_rejects_gap_in_coverage(self):
        with pytest.raises(DefinitionError, match="uncovered"):
            LinguisticVariable(
                "gappy", 0.0, 1.0, (trapezoidal(0, 0, 0, 0.3), trapezoidal(0.7, 1, 1, 1))
            )

    def test_gap_allowed_when_cover_not_required(self):
        var = LinguisticVariable(
            "ends", 0.0, 1.0,
            (trapezoidal(0, 0, 0, 0.3), trapezoidal(0.7, 1, 1, 1)),
            require_cover=False,
        )
        assert not var.covers_universe()

    def test_rejects_term_outside_universe(self):
        with pytest.raises(DefinitionError, match="leaves the universe"):
            LinguisticVariable("err", 0.0, 1.0, (triangular(-0.1, 0.5, 1.0), triangular(0, 0.5, 1)))

    def test_membership_clamps_to_universe(self):
        var = uniform_variable("e", -1.0, 1.0, 3)
        assert var.membership(-7.0).tolist() == var.membership(-1.0).tolist()


class TestRuleBase:
    def test_matrix_round_trip(self):
        rb = rule_matrix([(0, 1), (1, 2)])
        assert rb.consequent(0, 0) == 0
        assert rb.consequent(0, 1) == 1
        assert rb.consequent(1, 1) == 2

    def test_rejects_duplicate_antecedent(self):
        with pytest.raises(DefinitionError, match="duplicate"):
            RuleBase((((0,), 0), ((0,), 1)))


def two_input_system():
    e = uniform_variable("error", -1.0, 1.0, 3)
    de = uniform_variable("delta", -1.0, 1.0, 3)
    out = uniform_variable("command", 0.0, 1.0, 3)
    rules = rule_matrix([(0, 0, 1), (0, 1, 2), (1, 1, 2)])
    return FuzzySystem(inputs=(e, de), output=out, rules=rules)


class TestFuzzySystem:
    def test_rejects_incomplete_rule_cover(self):
        e = uniform_variable("error", -1.0, 1.0, 3)
        de = uniform_variable("delta", -1.0, 1.0, 3)
        out = uniform_variable("command", 0.0, 1.0, 3)
        with pytest.raises(DefinitionError, match="misses antecedents"):
            FuzzySystem(
                inputs=(e, de), output=out,
                rules=rule_matrix([(0, 0, 1), (0, 1, 2)]),  # third row absent
            )

    def test_symmetric_input_gives_output_center(self):
        sys2 = two_input_system()
        assert sys2.infer(0.0, 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_inputs_clamped_to_universe(self):
        sys2 = two_input_system()
        assert sys2.infer(3.0, 3.0) == sys2.infer(1.0, 1.0)

    def test_activations_are_per_output_term(self):
        sys2 = two_input_system()
        acts = sys2.activations(-1.0, -1.0)
        assert acts.shape == (3,)
        assert acts.tolist() == [1.0, 0.0, 0.0]

    @pytest.mark.parametrize("n_points", [120])
    def test_centroid_matches_sampled_oracle(self, rng, n_points):
        sys2 = two_input_system()
        width = sys2.output.hi - sys2.output.lo
        for _ in range(n_points):
            x1, x2 = rng.uniform(-1.0, 1.0, size=2)
            got, empty = sys2.infer_diagnostic(x1, x2)
            assert not empty
            want = numeric_centroid(sys2, (x1, x2))
            assert got == pytest.approx(want, abs=1e-6 * width)

    def test_single_input_centroid_matches_oracle(self, rng):
        e = uniform_variable("level", 0.0, 1.0, 3)
        out = uniform_variable("gain", 1.0, 3.0, 3)
        rules = RuleBase((((0,), 0), ((1,), 1), ((2,), 2)))
        sys1 = FuzzySystem(inputs=(e,), output=out, rules=rules)
        for x in rng.uniform(0.0, 1.0, size=60):
            want = numeric_centroid(sys1, (x,))
            assert sys1.infer(x) == pytest.approx(want, abs=2e-6)


class TestSurfaceExport:
    def test_grid_is_row_major(self):
        sys2 = two_input_system()
        rows = control_surface(sys2, 3)
        assert rows.shape == (9, 3)
        assert rows[0, :2].tolist() == [-1.0, -1.0]
        assert rows[1, :2].tolist() == [-1.0, 0.0]  # second input varies fastest
        assert rows[3, :2].tolist() == [0.0, -1.0]

    def test_csv_layout(self, tmp_path):
        sys2 = two_input_system()
        path = tmp_path / "surface.csv"
        write_surface_csv(path, sys2, 2)
        lines = path.read_text().splitlines()
        assert lines[0] == "in1,in2,out"
        assert len(lines) == 5
        assert all(len(line.split(",")) == 3 for line in lines[1:])
