"""Synthetic decision makers, answer simulation and bias injection."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import Criterion, PerformanceTable, PreferenceSet, PreferenceStatement

__all__ = [
    "TrueModel",
    "gen_true_model",
    "true_value",
    "true_values",
    "gen_comparisons",
    "inject_bias",
    "simulated_answer",
    "gen_performance_table",
]

log = logging.getLogger(__name__)

Shape = Literal["linear", "concave", "convex"]


@dataclass(frozen=True)
class TrueModel:
    weights: np.ndarray  # m-simplex
    curvatures: np.ndarray  # m reals, sign matches shape
    shapes: tuple[str, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        c = np.asarray(self.curvatures, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "curvatures", c)
        object.__setattr__(self, "shapes", tuple(self.shapes))
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie on the simplex")
        for shape, cj in zip(self.shapes, c):
            if shape == "concave" and cj <= 0:
                raise ValueError("concave marginals need positive curvature")
            if shape == "convex" and cj >= 0:
                raise ValueError("convex marginals need negative curvature")

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": self.weights.tolist(),
                "curvatures": self.curvatures.tolist(),
                "shapes": list(self.shapes),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TrueModel":
        d = json.loads(text)
        return cls(np.asarray(d["weights"]), np.asarray(d["curvatures"]), tuple(d["shapes"]))


def gen_true_model(m: int, shape_setting: str, rng: np.random.Generator) -> TrueModel:
    """Random additive model: Dirichlet(1) weights, per-criterion marginals."""
    if m < 1:
        raise ValueError("need at least one criterion")
    if shape_setting not in ("linear", "concave", "convex", "mixture"):
        raise ValueError(f"unknown shape setting {shape_setting!r}")
    weights = rng.dirichlet(np.ones(m))
    shapes = []
    curvatures = np.zeros(m)
    for j in range(m):
        shape = shape_setting
        if shape_setting == "mixture":
            shape = ("linear", "concave", "convex")[rng.integers(3)]
        shapes.append(shape)
        if shape == "linear":
            continue
        c = 0.0
        while abs(c) < 1e-6:
            c = rng.uniform(0.0, 10.0)
        curvatures[j] = c if shape == "concave" else -c
    return TrueModel(weights, curvatures, tuple(shapes))


def _normalized(table: PerformanceTable, alt: int) -> np.ndarray:
    lo = np.array([c.scale_min for c in table.criteria])
    hi = np.array([c.scale_max for c in table.criteria])
    return (table.performances[alt] - lo) / (hi - lo)


def true_value(model: TrueModel, table: PerformanceTable, alt: int) -> float:
    x = _normalized(table, alt)
    total = 0.0
    for j, shape in enumerate(model.shapes):
        w, c = model.weights[j], model.curvatures[j]
        if shape == "linear":
            total += w * x[j]
        else:
            total += w * (1.0 - math.exp(-c * x[j])) / (1.0 - math.exp(-c))
    return total


def true_values(model: TrueModel, table: PerformanceTable) -> np.ndarray:
    return np.array([true_value(model, table, i) for i in range(table.n)])


def gen_comparisons(
    model: TrueModel, table: PerformanceTable, count: int, rng: np.random.Generator
) -> PreferenceSet:
    """`count` distinct pairs, uniform without replacement, oriented by true value."""
    n = table.n
    if count > n * (n - 1) // 2:
        raise ValueError("count exceeds the number of unordered pairs")
    values = true_values(model, table)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if values[i] != values[j]]
    if count > len(pairs):
        raise ValueError("not enough non-tied pairs to draw from")
    chosen = rng.choice(len(pairs), size=count, replace=False)
    statements = []
    for idx in chosen:
        i, j = pairs[idx]
        if values[i] > values[j]:
            statements.append(PreferenceStatement(i, j))
        else:
            statements.append(PreferenceStatement(j, i))
    return PreferenceSet(tuple(statements))


def inject_bias(
    Q: PreferenceSet, model: TrueModel, table: PerformanceTable, proportion: float
) -> PreferenceSet:
    """Invert the floor(proportion * |Q|) statements with smallest true value gaps."""
    if not 0 <= proportion <= 1:
        raise ValueError("proportion must lie in [0, 1]")
    k = math.floor(proportion * len(Q))
    if k == 0:
        return Q
    values = true_values(model, table)
    gaps = [abs(values[s.preferred] - values[s.other]) for s in Q]
    order = sorted(range(len(Q)), key=lambda d: gaps[d])  # stable: original order on ties
    flip = set(order[:k])
    statements = tuple(
        s.flipped() if d in flip else s for d, s in enumerate(Q.statements)
    )
    return PreferenceSet(statements)


def simulated_answer(
    model: TrueModel,
    table: PerformanceTable,
    pair: tuple[int, int],
    rng: np.random.Generator,
    mode: Literal["deterministic", "bradley_terry"] = "deterministic",
) -> PreferenceStatement:
    i, j = pair
    ui, uj = true_value(model, table, i), true_value(model, table, j)
    if mode == "deterministic":
        if ui == uj:
            log.warning("exact true-value tie for pair (%d, %d); orienting by index", i, j)
            return PreferenceStatement(min(i, j), max(i, j))
        return PreferenceStatement(i, j) if ui > uj else PreferenceStatement(j, i)
    if mode == "bradley_terry":
        p_i = 1.0 / (1.0 + math.exp(-(ui - uj)))
        return PreferenceStatement(i, j) if rng.random() < p_i else PreferenceStatement(j, i)
    raise ValueError(f"unknown answer mode {mode!r}")


def gen_performance_table(
    n: int, m: int, rng: np.random.Generator, subintervals: int = 2
) -> PerformanceTable:
    """n x m iid Uniform[0,1] performances on [0,1] scales."""
    perf = rng.uniform(0.0, 1.0, size=(n, m))
    criteria = tuple(Criterion(f"g{j + 1}", 0.0, 1.0, subintervals) for j in range(m))
    ids = tuple(f"a{i + 1}" for i in range(n))
    return PerformanceTable(ids, criteria, perf)
