"""Mamdani fuzzy supervisor: nine-level error map with one-to-one rules.

Pipeline: clamp the pH error into [-5, 5], fuzzify against nine input
sets, fire the one-to-one rule list (each antecedent degree clips its
consequent set at min), aggregate clipped sets pointwise by max over the
[-100, 100] output universe, and take the centroid of the aggregate.

The default tables are exact mirror images around zero, so the resulting
crisp map is odd and monotone. Custom tables can be loaded from JSON and
are validated for universe coverage and rule bijectivity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class EmptyAggregate(Exception):
    """All-zero aggregate membership; only possible with a malformed
    custom rule base (the default tables cover the whole universe)."""


@dataclass(frozen=True)
class MembershipFunction:
    """Triangle or trapezoid, stored as ascending breakpoints."""

    points: tuple[float, ...]   # (a, b, c) or (a, b, c, d)

    def __post_init__(self) -> None:
        if len(self.points) not in (3, 4):
            raise ValueError("membership function needs 3 or 4 breakpoints")
        if any(q < p for p, q in zip(self.points, self.points[1:])):
            raise ValueError(f"breakpoints must be ascending: {self.points}")

    @classmethod
    def triangle(cls, a: float, b: float, c: float) -> "MembershipFunction":
        return cls((a, b, c))

    @classmethod
    def trapezoid(cls, a: float, b: float, c: float, d: float) -> "MembershipFunction":
        return cls((a, b, c, d))

    @property
    def kind(self) -> str:
        return "triangle" if len(self.points) == 3 else "trapezoid"

    def __call__(self, x: float) -> float:
        return membership(self, x)


def membership(mf: MembershipFunction, x: float) -> float:
    """Piecewise-linear degree in [0, 1]; zero outside the support.

    Breakpoints are evaluated by the interpolation limit, so zero-width
    edges (e.g. a plateau starting at the universe boundary) read 1.
    """
    if len(mf.points) == 3:
        a, b, c, d = mf.points[0], mf.points[1], mf.points[1], mf.points[2]
    else:
        a, b, c, d = mf.points
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@dataclass(frozen=True)
class LinguisticSet:
    label: str
    mf: MembershipFunction


@dataclass(frozen=True)
class RuleBase:
    """Ordered (input label -> output label) pairs, one per input label."""

    rules: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        ins = [i for i, _ in self.rules]
        outs = [o for _, o in self.rules]
        if len(set(ins)) != len(ins) or len(set(outs)) != len(outs):
            raise ValueError("rule base must be a bijection between labels")

    def output_for(self, input_label: str) -> str:
        for i, o in self.rules:
            if i == input_label:
                return o
        raise KeyError(input_label)


def _tri(a, b, c):
    return MembershipFunction.triangle(a, b, c)


def _trap(a, b, c, d):
    return MembershipFunction.trapezoid(a, b, c, d)


INPUT_UNIVERSE = (-5.0, 5.0)
OUTPUT_UNIVERSE = (-100.0, 100.0)

INPUT_SETS: tuple[LinguisticSet, ...] = (
    LinguisticSet("NXL", _trap(-5.0, -5.0, -4.0, -2.0)),
    LinguisticSet("NL", _tri(-3.0, -2.0, -1.0)),
    LinguisticSet("NM", _tri(-2.0, -1.25, -0.5)),
    LinguisticSet("NS", _tri(-1.0, -0.5, 0.0)),
    LinguisticSet("Z", _tri(-0.5, 0.0, 0.5)),
    LinguisticSet("PS", _tri(0.0, 0.5, 1.0)),
    LinguisticSet("PM", _tri(0.5, 1.25, 2.0)),
    LinguisticSet("PL", _tri(1.0, 2.0, 3.0)),
    LinguisticSet("PXL", _trap(2.0, 4.0, 5.0, 5.0)),
)

OUTPUT_SETS: tuple[LinguisticSet, ...] = (
    LinguisticSet("ONXL", _trap(-100.0, -100.0, -60.0, -45.0)),
    LinguisticSet("ONL", _tri(-50.0, -40.0, -30.0)),
    LinguisticSet("ONM", _tri(-35.0, -25.0, -15.0)),
    LinguisticSet("ONS", _tri(-20.0, -10.0, 0.0)),
    LinguisticSet("OZ", _tri(-0.5, 0.0, 0.5)),
    LinguisticSet("OPS", _tri(0.0, 10.0, 20.0)),
    LinguisticSet("OPM", _tri(15.0, 25.0, 35.0)),
    LinguisticSet("OPL", _tri(30.0, 40.0, 50.0)),
    LinguisticSet("OPXL", _trap(45.0, 60.0, 100.0, 100.0)),
)

RULES = RuleBase(
    (
        ("NXL", "ONXL"),
        ("NL", "ONL"),
        ("NM", "ONM"),
        ("NS", "ONS"),
        ("Z", "OZ"),
        ("PS", "OPS"),
        ("PM", "OPM"),
        ("PL", "OPL"),
        ("PXL", "OPXL"),
    )
)


def fuzzify(e: float, sets: Sequence[LinguisticSet] = INPUT_SETS) -> dict[str, float]:
    """Degrees per label for the (clamped) error; at least one is positive."""
    e = min(max(e, INPUT_UNIVERSE[0]), INPUT_UNIVERSE[1])
    return {s.label: membership(s.mf, e) for s in sets}


def infer(
    degrees: Mapping[str, float],
    rules: RuleBase,
    output_sets: Sequence[LinguisticSet],
    grid: np.ndarray,
) -> np.ndarray:
    """Aggregate membership on `grid`: max over min-clipped consequents."""
    by_label = {s.label: s for s in output_sets}
    mu = np.zeros_like(grid)
    for in_label, out_label in rules.rules:
        degree = degrees.get(in_label, 0.0)
        if degree <= 0.0:
            continue
        mf = by_label[out_label].mf
        clipped = np.minimum(degree, _sample(mf, grid))
        np.maximum(mu, clipped, out=mu)
    return mu


def defuzzify(grid: np.ndarray, mu: np.ndarray) -> float:
    """Centroid of the aggregate by trapezoidal quadrature."""
    area = np.trapezoid(mu, grid)
    if area <= 0.0:
        raise EmptyAggregate("aggregate membership is identically zero")
    return float(np.trapezoid(mu * grid, grid) / area)


def _sample(mf: MembershipFunction, grid: np.ndarray) -> np.ndarray:
    return np.array([membership(mf, float(x)) for x in grid])


class FuzzyController:
    """Immutable error -> crisp-correction map over [-100, 100]."""

    def __init__(
        self,
        input_sets: Sequence[LinguisticSet] = INPUT_SETS,
        output_sets: Sequence[LinguisticSet] = OUTPUT_SETS,
        rules: RuleBase = RULES,
        defuzz_resolution: float = 0.01,
    ) -> None:
        if not defuzz_resolution > 0:
            raise ValueError("defuzz_resolution must be positive")
        self.input_sets = tuple(input_sets)
        self.output_sets = tuple(output_sets)
        self.rules = rules
        self.defuzz_resolution = defuzz_resolution
        lo, hi = OUTPUT_UNIVERSE
        n = int(round((hi - lo) / defuzz_resolution)) + 1
        self.grid = np.linspace(lo, hi, n)
        # Pre-sampled consequents make one inference a handful of numpy ops.
        self._sampled = {s.label: _sample(s.mf, self.grid) for s in self.output_sets}
        self._consequent = dict(rules.rules)
        self._validate()

    def _validate(self) -> None:
        in_labels = {s.label for s in self.input_sets}
        out_labels = {s.label for s in self.output_sets}
        if len(in_labels) != len(self.input_sets) or len(out_labels) != len(self.output_sets):
            raise ValueError("set labels must be unique within a family")
        rule_ins = {i for i, _ in self.rules.rules}
        rule_outs = {o for _, o in self.rules.rules}
        if rule_ins != in_labels or not rule_outs <= out_labels:
            raise ValueError("rules must map every input label to a known output label")
        for universe, sets in ((INPUT_UNIVERSE, self.input_sets), (OUTPUT_UNIVERSE, self.output_sets)):
            xs = np.linspace(universe[0], universe[1], 2001)
            cover = np.zeros_like(xs)
            for s in sets:
                cover = np.maximum(cover, _sample(s.mf, xs))
            if cover.min() <= 0.0:
                gap = xs[int(np.argmin(cover))]
                raise ValueError(f"sets leave the universe uncovered near {gap:g}")

    def fuzzify(self, e: float) -> dict[str, float]:
        return fuzzify(e, self.input_sets)

    def infer(self, degrees: Mapping[str, float]) -> np.ndarray:
        mu = np.zeros_like(self.grid)
        for in_label, degree in degrees.items():
            if degree <= 0.0:
                continue
            clipped = np.minimum(degree, self._sampled[self._consequent[in_label]])
            np.maximum(mu, clipped, out=mu)
        return mu

    def defuzzify(self, mu: np.ndarray) -> float:
        return defuzzify(self.grid, mu)

    def controller_output(self, e: float) -> float:
        """Crisp correction in [-100, 100] for a pH error (clamped to +-5)."""
        return self.defuzzify(self.infer(self.fuzzify(e)))

    @classmethod
    def from_dict(cls, data: Mapping, defuzz_resolution: float = 0.01) -> "FuzzyController":
        """Build from a JSON-shaped description.

        Expected keys: "input_sets" and "output_sets" (lists of
        {"label", "shape", "points"}) and "rules" (list of [in, out]).
        """
        def parse_sets(items) -> tuple[LinguisticSet, ...]:
            sets = []
            for item in items:
                shape = item["shape"]
                pts = tuple(float(p) for p in item["points"])
                if shape == "triangle" and len(pts) == 3:
                    mf = MembershipFunction.triangle(*pts)
                elif shape == "trapezoid" and len(pts) == 4:
                    mf = MembershipFunction.trapezoid(*pts)
                else:
                    raise ValueError(f"bad shape/points for set {item!r}")
                sets.append(LinguisticSet(str(item["label"]), mf))
            return tuple(sets)

        rules = RuleBase(tuple((str(i), str(o)) for i, o in data["rules"]))
        return cls(
            input_sets=parse_sets(data["input_sets"]),
            output_sets=parse_sets(data["output_sets"]),
            rules=rules,
            defuzz_resolution=defuzz_resolution,
        )

    @classmethod
    def from_json(cls, path, defuzz_resolution: float = 0.01) -> "FuzzyController":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), defuzz_resolution)
