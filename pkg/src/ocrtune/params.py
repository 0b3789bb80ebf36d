"""Parameter spaces of the pre-processing operators.

Each operator exposes a fixed list of integer-valued genes.  Genes that the
operator requires to be odd carry ``parity="odd"``; the tuner treats that
requirement as the inequality constraint ``|value % 2 - 1| <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np


class UnknownAlgorithm(KeyError):
    pass


class InvalidAssignment(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # "nominal" | "discrete" | "continuous"
    low: int
    high: int
    parity: str | None = None  # None or "odd"

    def __post_init__(self):
        if self.kind not in ("nominal", "discrete", "continuous"):
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if self.low > self.high:
            raise ValueError(f"{self.name}: low {self.low} > high {self.high}")
        if self.kind == "nominal" and (self.low != 0 or self.high < 1):
            raise ValueError(f"{self.name}: nominal codes must be 0..k-1 with k >= 2")
        if self.parity not in (None, "odd"):
            raise ValueError(f"unknown parity {self.parity!r}")

    @property
    def cardinality(self) -> int:
        return self.high - self.low + 1

    def admissible(self) -> range:
        """All values the tuner may draw for this gene."""
        if self.parity == "odd":
            return range(self.low | 1, self.high + 1, 2)
        return range(self.low, self.high + 1)

    def contains(self, value: int) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True, order=True)
class ParamAssignment:
    """One point of an operator's parameter space; ``values`` keeps schema order."""

    algorithm: str
    values: tuple[tuple[str, int], ...]

    @classmethod
    def of(cls, algorithm: str, values: Mapping[str, int]) -> ParamAssignment:
        names = [p.name for p in schema(algorithm)]
        return cls(algorithm, tuple((n, int(values[n])) for n in names if n in values)
                   + tuple((n, int(v)) for n, v in values.items() if n not in names))

    def as_dict(self) -> dict[str, int]:
        return dict(self.values)

    def __getitem__(self, name):
        return self.as_dict()[name]

    def to_text(self) -> str:
        return " ".join([self.algorithm] + [f"{k}={v}" for k, v in self.values])

    @classmethod
    def from_text(cls, line: str) -> ParamAssignment:
        parts = line.split()
        if not parts:
            raise InvalidAssignment("empty parameter line")
        algorithm, values = parts[0], {}
        for item in parts[1:]:
            key, sep, raw = item.partition("=")
            if not sep:
                raise InvalidAssignment(f"expected key=value, got {item!r}")
            try:
                values[key] = int(raw)
            except ValueError:
                raise InvalidAssignment(f"{key}: {raw!r} is not an integer") from None
        a = cls.of(algorithm, values)
        validate(a)
        return a


@dataclass(frozen=True)
class ConstraintReport:
    g_values: tuple[float, ...]

    @property
    def feasible(self) -> bool:
        return all(g == 0 for g in self.g_values)

    @property
    def total(self) -> float:
        return float(sum(self.g_values))


def _byte(name, kind="continuous"):
    return ParamSpec(name, kind, 0, 255)


def _nominal(name, k):
    return ParamSpec(name, "nominal", 0, k - 1)


_MORPH = (
    ParamSpec("kernel", "continuous", 1, 255),
    ParamSpec("iterations", "discrete", 1, 10),
    _nominal("borderType", 5),
)

SCHEMAS: dict[str, tuple[ParamSpec, ...]] = {
    "adaptive_threshold": (
        _byte("maxValue"),
        _nominal("adaptiveMethod", 2),
        _nominal("thresholdType", 2),
        ParamSpec("blockSize", "discrete", 3, 255, parity="odd"),
        _byte("c"),
    ),
    "otsu_threshold": (_byte("maxValue"), _nominal("type", 5)),
    "simple_threshold": (_byte("thresh"), _byte("maxValue"), _nominal("type", 5)),
    "triangle_threshold": (_byte("maxValue"), _nominal("type", 5)),
    "bilateral_filter": (
        ParamSpec("d", "discrete", 1, 15),
        ParamSpec("sigmaColor", "continuous", 1, 255),
        ParamSpec("sigmaSpace", "continuous", 1, 255),
    ),
    "gaussian_blur": (ParamSpec("ksize", "discrete", 1, 31, parity="odd"), _nominal("borderType", 5)),
    "box_blur": (ParamSpec("ksize", "discrete", 1, 31, parity="odd"), _nominal("borderType", 5)),
    "median_blur": (ParamSpec("ksize", "discrete", 1, 31, parity="odd"),),
    "black_hat": _MORPH,
    "closing": _MORPH,
    "dilation": _MORPH,
    "erosion": _MORPH,
    "morph_gradient": _MORPH,
    "opening": _MORPH,
    "top_hat": _MORPH,
}

ALGORITHMS = tuple(SCHEMAS)

ABBREVIATIONS = {
    "none": "N",
    "adaptive_threshold": "AT",
    "otsu_threshold": "OT",
    "simple_threshold": "ST",
    "triangle_threshold": "TT",
    "bilateral_filter": "BF",
    "gaussian_blur": "GB",
    "box_blur": "HB",
    "median_blur": "MB",
    "black_hat": "BH",
    "closing": "C",
    "dilation": "D",
    "erosion": "E",
    "morph_gradient": "MG",
    "opening": "O",
    "top_hat": "TH",
}

_MORPH_DEFAULT = {"kernel": 5, "iterations": 1, "borderType": 3}

DEFAULTS: dict[str, dict[str, int]] = {
    # the published default for adaptiveMethod is "0 or 1"; mean (0) is used
    "adaptive_threshold": {"maxValue": 255, "adaptiveMethod": 0, "thresholdType": 0,
                           "blockSize": 11, "c": 2},
    "otsu_threshold": {"maxValue": 255, "type": 0},
    "simple_threshold": {"thresh": 127, "maxValue": 255, "type": 0},
    "triangle_threshold": {"maxValue": 255, "type": 0},
    "bilateral_filter": {"d": 9, "sigmaColor": 75, "sigmaSpace": 75},
    "gaussian_blur": {"ksize": 5, "borderType": 3},
    "box_blur": {"ksize": 5, "borderType": 3},
    "median_blur": {"ksize": 5},
    **{name: dict(_MORPH_DEFAULT) for name in
       ("black_hat", "closing", "dilation", "erosion", "morph_gradient", "opening", "top_hat")},
}

# Tuned values published for the typewritten archive corpus, keyed by scope.
# Column order: global, letter, process-cover, structured-report,
# theatre-play-cover, non-structured-report.  ``None`` marks a missing entry.
REFERENCE_SCOPES = ("global", "letter", "process-cover", "structured-report",
                    "theatre-play-cover", "non-structured-report")

_REFERENCE_ROWS = {
    "adaptive_threshold": {
        "maxValue": (217, 24, 72, 13, 152, 32),
        "adaptiveMethod": (1, 0, 0, 0, 1, 0),
        "thresholdType": (0, 0, 0, 0, 1, 0),
        "blockSize": (33, 39, 65, 43, 57, 51),
        "c": (25, 30, 29, 43, 18, 32),
    },
    "bilateral_filter": {
        "d": (4, 4, 2, 2, 1, 2),
        "sigmaColor": (10, 4, 85, 36, 6, 18),
        "sigmaSpace": (231, 31, 52, 100, 191, 253),
    },
    "black_hat": {
        "kernel": (10, 6, 229, 139, 30, 38),
        "iterations": (7, 10, 7, 9, 2, 1),
        "borderType": (4, 4, 2, 3, 1, 1),
    },
    "closing": {
        "kernel": (1, 1, 1, 1, 1, 1),
        "iterations": (2, 2, 4, 9, 4, 3),
        "borderType": (3, 1, 0, 1, 2, 3),
    },
    "dilation": {
        "kernel": (32, None, 1, 1, 1, 1),
        "iterations": (8, None, 4, 7, 9, 8),
        "borderType": (2, None, 3, 2, 1, 2),
    },
    "erosion": {
        "kernel": (1, 1, 1, 1, 1, 2),
        "iterations": (5, 7, 1, 5, 2, 1),
        "borderType": (3, 2, 2, 1, 3, 1),
    },
    "gaussian_blur": {"ksize": (3, 3, 3, 3, 3, 3), "borderType": (1, 0, 1, 1, 1, 1)},
    "box_blur": {"ksize": (1, 1, 3, 1, 3, 3), "borderType": (1, 2, 3, 1, 0, 3)},
    "median_blur": {"ksize": (3, 3, 3, 5, 3, 3)},
    "morph_gradient": {
        "kernel": (2, 2, 2, 2, 105, 2),
        "iterations": (1, 1, 2, 1, 2, 2),
        "borderType": (2, 2, 0, 1, 1, 2),
    },
    "opening": {
        "kernel": (2, 1, 2, 1, 2, 2),
        "iterations": (2, 2, 1, 9, 1, 1),
        "borderType": (0, 4, 1, 4, 0, 3),
    },
    "otsu_threshold": {"maxValue": (199, 24, 251, 92, 34, 14), "type": (3, 0, 0, 3, 3, 0)},
    "simple_threshold": {
        "thresh": (152, 110, 33, 82, 240, 224),
        "maxValue": (45, 4, 10, 221, 3, 42),
        "type": (1, 3, 3, 3, 4, 4),
    },
    "top_hat": {
        "kernel": (90, 51, 217, 233, 139, 204),
        "iterations": (5, 7, 5, 2, 5, 2),
        "borderType": (2, 0, 0, 2, 2, 4),
    },
    "triangle_threshold": {"maxValue": (15, 74, 248, 220, 174, 238), "type": (3, 3, 2, 2, 3, 0)},
}


def schema(algorithm: str) -> tuple[ParamSpec, ...]:
    try:
        return SCHEMAS[algorithm]
    except KeyError:
        raise UnknownAlgorithm(f"unknown algorithm {algorithm!r}; known: {', '.join(ALGORITHMS)}") from None


def defaults(algorithm: str) -> ParamAssignment:
    schema(algorithm)
    return ParamAssignment.of(algorithm, DEFAULTS[algorithm])


def reference_tuned(algorithm: str, scope: str) -> ParamAssignment | None:
    """Published tuned values for ``scope``, or None where the table has a gap."""
    schema(algorithm)
    col = REFERENCE_SCOPES.index(scope)
    values = {name: row[col] for name, row in _REFERENCE_ROWS[algorithm].items()}
    if any(v is None for v in values.values()):
        return None
    return ParamAssignment.of(algorithm, values)


def validate(a: ParamAssignment, check_parity: bool = True) -> None:
    specs = schema(a.algorithm)
    got = a.as_dict()
    names = [p.name for p in specs]
    if sorted(got) != sorted(names):
        raise InvalidAssignment(
            f"{a.algorithm} expects parameters {names}, got {list(got)}"
        )
    for p in specs:
        v = got[p.name]
        if not p.contains(v):
            raise InvalidAssignment(f"{a.algorithm}.{p.name}={v} outside [{p.low}, {p.high}]")
        if check_parity and p.parity == "odd" and v % 2 == 0:
            raise InvalidAssignment(f"{a.algorithm}.{p.name}={v} must be odd")


def constraint_violation(a: ParamAssignment) -> ConstraintReport:
    got = a.as_dict()
    return ConstraintReport(tuple(
        float(abs(got[p.name] % 2 - 1)) for p in schema(a.algorithm) if p.parity == "odd"
    ))


def draw_gene(spec: ParamSpec, rng: np.random.Generator) -> int:
    choices = spec.admissible()
    return int(choices[int(rng.integers(len(choices)))])


def random_assignment(algorithm: str, rng: np.random.Generator) -> ParamAssignment:
    specs = schema(algorithm)
    return ParamAssignment(algorithm, tuple((p.name, draw_gene(p, rng)) for p in specs))
