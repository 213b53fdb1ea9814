"""Mamdani fuzzy inference with piecewise-linear terms.

The engine is deliberately small: triangular/trapezoidal membership
functions, min for AND and implication, max for aggregation, and exact
centroid defuzzification of the clipped union.  There are no alternate
operators; every inference in the controller goes through this one path so
the simulator stays bit-for-bit reproducible.

Values, not objects: every type here is a frozen dataclass and every
operation is a pure function of its arguments, so systems can be shared
freely across threads and runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class DefinitionError(ValueError):
    """Raised when a membership function, variable or rule base is malformed."""


@dataclass(frozen=True)
class MembershipFunction:
    """A triangular ``(a, b, c)`` or trapezoidal ``(a, b, c, d)`` term.

    Breakpoints must be finite and nondecreasing with nonzero total width.
    Membership is exactly 0 outside the support, exactly 1 on the core, and
    linear on the edges.  Equal adjacent breakpoints encode vertical edges,
    which is how shoulder terms sit flush on a universe boundary.
    """

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        if len(pts) not in (3, 4):
            raise DefinitionError(f"need 3 or 4 breakpoints, got {len(pts)}")
        if any(not np.isfinite(p) for p in pts):
            raise DefinitionError(f"breakpoints must be finite: {pts}")
        if any(q < p for p, q in zip(pts, pts[1:])):
            raise DefinitionError(f"breakpoints must be nondecreasing: {pts}")
        if pts[-1] == pts[0]:
            raise DefinitionError(f"zero-width support: {pts}")
        object.__setattr__(self, "points", pts)

    @property
    def kind(self) -> str:
        return "triangular" if len(self.points) == 3 else "trapezoidal"

    def as_trapezoid(self) -> tuple[float, float, float, float]:
        """Breakpoints in the canonical 4-point form (triangle: b == c)."""
        if len(self.points) == 3:
            a, b, c = self.points
            return (a, b, b, c)
        return self.points  # type: ignore[return-value]

    def __call__(self, x: float) -> float:
        a, b, c, d = self.as_trapezoid()
        return _kernels.mf_value(a, b, c, d, float(x))


def triangular(a: float, b: float, c: float) -> MembershipFunction:
    return MembershipFunction((a, b, c))


def trapezoidal(a: float, b: float, c: float, d: float) -> MembershipFunction:
    return MembershipFunction((a, b, c, d))


@dataclass(frozen=True)
class LinguisticVariable:
    """An ordered family of terms over a closed universe ``[lo, hi]``.

    Term supports must lie inside the universe.  By default the terms must
    also cover it (no dead zones: every point has positive membership in at
    least one term); pass ``require_cover=False`` for output variables that
    deliberately concentrate mass at the ends.
    """

    name: str
    lo: float
    hi: float
    terms: tuple[MembershipFunction, ...]
    require_cover: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.lo) or not np.isfinite(self.hi) or self.lo >= self.hi:
            raise DefinitionError(f"bad universe [{self.lo}, {self.hi}] for {self.name!r}")
        if len(self.terms) < 2:
            raise DefinitionError(f"{self.name!r} needs at least two terms")
        for t in self.terms:
            tz = t.as_trapezoid()
            if tz[0] < self.lo or tz[-1] > self.hi:
                raise DefinitionError(
                    f"term {tz} of {self.name!r} leaves the universe [{self.lo}, {self.hi}]"
                )
        if self.require_cover and not self.covers_universe():
            raise DefinitionError(f"terms of {self.name!r} leave part of the universe uncovered")

    def covers_universe(self, samples: int = 2049) -> bool:
        """True if every sampled universe point has positive membership.

        Breakpoints are checked as well as a uniform grid; with piecewise
        linear terms a gap in coverage is an interval, so this is decisive
        for any realistic layout.
        """
        xs = set(np.linspace(self.lo, self.hi, samples))
        for t in self.terms:
            xs.update(p for p in t.as_trapezoid() if self.lo <= p <= self.hi)
        arr = self.packed_terms()
        for x in sorted(xs):
            if all(_kernels.mf_value(*arr[k], x) <= 0.0 for k in range(len(self.terms))):
                return False
        return True

    def packed_terms(self) -> np.ndarray:
        """Terms as an ``(n, 4)`` float64 array for the kernels."""
        return np.array([t.as_trapezoid() for t in self.terms], dtype=np.float64)

    def membership(self, x: float) -> np.ndarray:
        """Membership degree of ``x`` in every term, clamping to the universe."""
        xc = min(max(float(x), self.lo), self.hi)
        return np.array([t(xc) for t in self.terms], dtype=np.float64)


def uniform_variable(name: str, lo: float, hi: float, n_terms: int) -> LinguisticVariable:
    """Standard layout: evenly spaced symmetric triangles, shoulders at the ends.

    Term centers sit at ``lo + k*(hi-lo)/(n-1)``; interior terms are
    triangles of half-width one spacing, the first and last are shoulder
    trapezoids flush with the boundary.  Adjacent terms cross at 0.5, so the
    family covers the universe.
    """
    if n_terms < 2:
        raise DefinitionError("uniform layout needs at least two terms")
    h = (hi - lo) / (n_terms - 1)
    terms: list[MembershipFunction] = [trapezoidal(lo, lo, lo, lo + h)]
    for k in range(1, n_terms - 1):
        c = lo + k * h
        terms.append(triangular(c - h, c, c + h))
    terms.append(trapezoidal(hi - h, hi, hi, hi))
    return LinguisticVariable(name, lo, hi, tuple(terms))


@dataclass(frozen=True)
class RuleBase:
    """Rules as ``(antecedent term indices, consequent term index)``, 0-based.

    The rule list must cover the full cross product of input terms exactly
    once (no duplicates, no holes) so that any in-universe input activates
    at least one rule.
    """

    rules: tuple[tuple[tuple[int, ...], int], ...]

    def __post_init__(self) -> None:
        seen = set()
        arity = None
        for antecedent, consequent in self.rules:
            if arity is None:
                arity = len(antecedent)
            elif len(antecedent) != arity:
                raise DefinitionError("mixed antecedent arity in rule base")
            if antecedent in seen:
                raise DefinitionError(f"duplicate antecedent {antecedent}")
            seen.add(antecedent)
            if consequent < 0 or any(i < 0 for i in antecedent):
                raise DefinitionError("negative term index in rule")

    @property
    def arity(self) -> int:
        return len(self.rules[0][0]) if self.rules else 0

    def consequent(self, *antecedent: int) -> int:
        for ant, cons in self.rules:
            if ant == antecedent:
                return cons
        raise KeyError(antecedent)


def rule_matrix(rows: Sequence[Sequence[int]]) -> RuleBase:
    """Build a two-input rule base from a consequent matrix.

    ``rows[a][b]`` is the 0-based consequent index for input-1 term ``a``
    and input-2 term ``b``.
    """
    rules = []
    for a, row in enumerate(rows):
        for b, cons in enumerate(row):
            rules.append(((a, b), int(cons)))
    return RuleBase(tuple(rules))


@dataclass(frozen=True)
class FuzzySystem:
    """A complete one- or two-input Mamdani system.

    Inference is fixed to min-AND, min-implication, max-aggregation and
    centroid defuzzification.  ``infer`` is a pure function: identical
    inputs produce bit-identical outputs.  Out-of-universe inputs are
    clamped; a zero-area aggregate (impossible with covering inputs and a
    full rule base, but handled) yields the output-universe midpoint and a
    diagnostic flag.
    """

    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: RuleBase

    def __post_init__(self) -> None:
        if len(self.inputs) not in (1, 2):
            raise DefinitionError("only 1- and 2-input systems are supported")
        counts = tuple(len(v.terms) for v in self.inputs)
        if self.rules.arity != len(self.inputs):
            raise DefinitionError("rule arity does not match input count")
        want = {idx for idx in np.ndindex(*counts)}
        got = {ant for ant, _ in self.rules.rules}
        missing = want - got
        if missing:
            raise DefinitionError(f"rule base misses antecedents, e.g. {sorted(missing)[:3]}")
        n_out = len(self.output.terms)
        for ant, cons in self.rules.rules:
            if cons >= n_out:
                raise DefinitionError(f"rule {ant} -> {cons} exceeds output terms")
            for axis, idx in enumerate(ant):
                if idx >= counts[axis]:
                    raise DefinitionError(f"rule {ant} exceeds input terms")
        # packed forms used by the kernels, built once per (immutable) system
        object.__setattr__(self, "_packed_inputs", tuple(v.packed_terms() for v in self.inputs))
        object.__setattr__(self, "_packed_output", self.output.packed_terms())
        object.__setattr__(self, "_packed_rules", self._pack_rules(counts))

    def _pack_rules(self, counts: tuple[int, ...]) -> np.ndarray:
        table = np.zeros(counts, dtype=np.int64)
        for ant, cons in self.rules.rules:
            table[ant] = cons
        return table

    def infer_diagnostic(self, *xs: float) -> tuple[float, bool]:
        """Crisp output and the zero-area flag for the given crisp inputs."""
        if len(xs) != len(self.inputs):
            raise ValueError(f"expected {len(self.inputs)} inputs, got {len(xs)}")
        packed_in = self._packed_inputs  # type: ignore[attr-defined]
        packed_out = self._packed_output  # type: ignore[attr-defined]
        table = self._packed_rules  # type: ignore[attr-defined]
        out = self.output
        if len(self.inputs) == 1:
            (v1,) = self.inputs
            y, empty = _kernels.infer_one(
                packed_in[0], table, packed_out, v1.lo, v1.hi, out.lo, out.hi, float(xs[0])
            )
        else:
            v1, v2 = self.inputs
            y, empty = _kernels.infer_two(
                packed_in[0],
                packed_in[1],
                table,
                packed_out,
                v1.lo,
                v1.hi,
                v2.lo,
                v2.hi,
                out.lo,
                out.hi,
                float(xs[0]),
                float(xs[1]),
            )
        return float(y), bool(empty)

    def infer(self, *xs: float) -> float:
        return self.infer_diagnostic(*xs)[0]

    def aggregate(self, ys: np.ndarray, *xs: float) -> np.ndarray:
        """Aggregated output membership sampled at ``ys`` (for inspection/tests)."""
        acts = self.activations(*xs)
        packed_out = self._packed_output  # type: ignore[attr-defined]
        return np.array(
            [_kernels.aggregate_value(packed_out, acts, float(y)) for y in np.asarray(ys).ravel()]
        )

    def activations(self, *xs: float) -> np.ndarray:
        """Max rule strength reaching each output term (min-AND over inputs)."""
        degs = [var.membership(x) for var, x in zip(self.inputs, xs)]
        acts = np.zeros(len(self.output.terms))
        for ant, cons in self.rules.rules:
            s = min(degs[axis][idx] for axis, idx in enumerate(ant))
            if s > acts[cons]:
                acts[cons] = s
        return acts


def control_surface(system: FuzzySystem, grid: int | Sequence[int]) -> np.ndarray:
    """Evaluate the system on a uniform grid over its input universes.

    For one input returns shape ``(n, 2)`` columns ``(in1, out)``; for two,
    shape ``(n1*n2, 3)`` columns ``(in1, in2, out)`` in row-major order
    (input 1 varies slowest).  Grid counts must be at least 2 per axis.
    """
    counts = (grid,) * len(system.inputs) if isinstance(grid, int) else tuple(grid)
    if len(counts) != len(system.inputs):
        raise ValueError("one grid count per input required")
    if any(c < 2 for c in counts):
        raise ValueError("grid counts must be >= 2")
    axes = [np.linspace(v.lo, v.hi, c) for v, c in zip(system.inputs, counts)]
    if len(axes) == 1:
        rows = np.empty((counts[0], 2))
        for a, x in enumerate(axes[0]):
            rows[a, 0] = x
            rows[a, 1] = system.infer(x)
        return rows
    rows = np.empty((counts[0] * counts[1], 3))
    r = 0
    for x1 in axes[0]:
        for x2 in axes[1]:
            rows[r, 0] = x1
            rows[r, 1] = x2
            rows[r, 2] = system.infer(x1, x2)
            r += 1
    return rows


def format_number(x: float) -> str:
    """CSV number formatting: 12 significant digits, locale-free."""
    return format(float(x), ".12g")


def write_surface_csv(path, system: FuzzySystem, grid: int | Sequence[int]) -> None:
    """Write the control surface as CSV with an ``in1[,in2],out`` header."""
    rows = control_surface(system, grid)
    header = "in1,out" if rows.shape[1] == 2 else "in1,in2,out"
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format_number(v) for v in row) + "\n")


def mirror_pairs(rows: Iterable[Sequence[float]]) -> list[tuple[float, float]]:
    """Helper for symmetry checks: (out(x), out(-x)) pairs from surface rows."""
    idx = {}
    pairs = []
    for row in rows:
        key = tuple(round(v, 12) for v in row[:-1])
        idx[key] = row[-1]
    for key, out in idx.items():
        mirrored = tuple(-v for v in key)
        if mirrored in idx:
            pairs.append((out, idx[mirrored]))
    return pairs
