"""Alternatives, criteria and the piecewise-linear additive value model.

The comprehensive value of an alternative is the inner product of a
simplex-constrained weight vector with a characteristic vector built from
the alternative's performances, so every value lies in [0, 1].
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Criterion",
    "PerformanceTable",
    "PreferenceStatement",
    "PreferenceSet",
    "build_grid",
    "characteristic_vector",
    "characteristic_matrix",
    "comprehensive_value",
    "dominates",
    "load_table_csv",
]

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Criterion:
    name: str
    scale_min: float
    scale_max: float
    subintervals: int = 2

    def __post_init__(self) -> None:
        if not self.scale_min < self.scale_max:
            raise ValueError(
                f"criterion {self.name!r}: scale_min must be < scale_max "
                f"(got [{self.scale_min}, {self.scale_max}])"
            )
        if self.subintervals < 1:
            raise ValueError(f"criterion {self.name!r}: subintervals must be >= 1")

    @property
    def knots(self) -> np.ndarray:
        """Equal-length sub-interval boundaries, subintervals + 1 points."""
        return np.linspace(self.scale_min, self.scale_max, self.subintervals + 1)


@dataclass(frozen=True)
class PerformanceTable:
    alternatives: tuple[str, ...]
    criteria: tuple[Criterion, ...]
    performances: np.ndarray  # n x m

    def __post_init__(self) -> None:
        perf = np.asarray(self.performances, dtype=float)
        object.__setattr__(self, "performances", perf)
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        n, m = len(self.alternatives), len(self.criteria)
        if n < 2:
            raise ValueError("need at least 2 alternatives")
        if m < 1:
            raise ValueError("need at least 1 criterion")
        if len(set(self.alternatives)) != n:
            raise ValueError("alternative ids must be unique")
        if perf.shape != (n, m):
            raise ValueError(f"performances must be {n}x{m}, got {perf.shape}")
        for j, crit in enumerate(self.criteria):
            col = perf[:, j]
            if col.min() < crit.scale_min - SIMPLEX_TOL or col.max() > crit.scale_max + SIMPLEX_TOL:
                raise ValueError(
                    f"performances on {crit.name!r} fall outside "
                    f"[{crit.scale_min}, {crit.scale_max}]"
                )

    @property
    def n(self) -> int:
        return len(self.alternatives)

    @property
    def m(self) -> int:
        return len(self.criteria)

    @property
    def gamma(self) -> int:
        """Total model dimension: sum of sub-interval counts."""
        return sum(c.subintervals for c in self.criteria)


@dataclass(frozen=True)
class PreferenceStatement:
    """Strict statement: alternative `preferred` is better than `other`."""

    preferred: int
    other: int

    def __post_init__(self) -> None:
        if self.preferred == self.other:
            raise ValueError("a statement must involve two distinct alternatives")

    @property
    def pair(self) -> frozenset[int]:
        return frozenset((self.preferred, self.other))

    def flipped(self) -> "PreferenceStatement":
        return PreferenceStatement(self.other, self.preferred)


@dataclass(frozen=True)
class PreferenceSet:
    statements: tuple[PreferenceStatement, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "statements", tuple(self.statements))
        pairs = [s.pair for s in self.statements]
        if len(set(pairs)) != len(pairs):
            raise ValueError("a pair of alternatives may only be compared once")

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)

    @property
    def pairs(self) -> frozenset[frozenset[int]]:
        return frozenset(s.pair for s in self.statements)

    def contains_pair(self, i: int, j: int) -> bool:
        return frozenset((i, j)) in self.pairs

    def extended(self, statement: PreferenceStatement) -> "PreferenceSet":
        return PreferenceSet(self.statements + (statement,))

    def validate_against(self, table: PerformanceTable) -> None:
        for s in self.statements:
            for idx in (s.preferred, s.other):
                if not 0 <= idx < table.n:
                    raise ValueError(f"statement references invalid alternative {idx}")

    def key(self) -> tuple[int, ...]:
        """Flat canonical integer encoding (used for seeding/caching).

        Sorted by statement, so two sets holding the same oriented
        statements in different orders share seeds and cache entries.
        """
        out: list[int] = []
        for s in sorted(self.statements, key=lambda s: (s.preferred, s.other)):
            out.extend((s.preferred, s.other))
        return tuple(out)


def candidate_pairs(table: PerformanceTable, asked: PreferenceSet) -> list[tuple[int, int]]:
    """All unordered pairs not yet asked, in (i, j) index order."""
    done = asked.pairs
    return [
        (i, j)
        for i in range(table.n)
        for j in range(i + 1, table.n)
        if frozenset((i, j)) not in done
    ]


def build_grid(table: PerformanceTable) -> list[np.ndarray]:
    return [c.knots for c in table.criteria]


def characteristic_vector(table: PerformanceTable, alt: int) -> np.ndarray:
    """Encode an alternative so that U(a) = u . V(a).

    Per criterion block of length subintervals: 1 above the sub-interval,
    a linear fraction inside it, 0 below.
    """
    if not 0 <= alt < table.n:
        raise IndexError(f"alternative index {alt} out of range")
    blocks = []
    for j, crit in enumerate(table.criteria):
        g = table.performances[alt, j]
        knots = crit.knots
        block = np.zeros(crit.subintervals)
        for k in range(1, crit.subintervals + 1):
            lo, hi = knots[k - 1], knots[k]
            if g > hi:
                block[k - 1] = 1.0
            elif lo <= g <= hi:
                block[k - 1] = (g - lo) / (hi - lo)
            # else 0
        blocks.append(block)
    return np.concatenate(blocks)


def characteristic_matrix(table: PerformanceTable) -> np.ndarray:
    """n x gamma matrix stacking every alternative's characteristic vector."""
    return np.stack([characteristic_vector(table, i) for i in range(table.n)])


def comprehensive_value(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(u @ v)


def check_simplex(u: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    u = np.asarray(u, dtype=float)
    if (u < -tol).any() or abs(u.sum() - 1.0) > tol:
        raise ValueError("weight vector must be on the probability simplex")


def dominates(table: PerformanceTable, a: int, b: int) -> bool:
    """True iff a is at least as good as b everywhere, strictly somewhere."""
    if a == b:
        return False
    ga, gb = table.performances[a], table.performances[b]
    return bool((ga >= gb).all() and (ga > gb).any())


def load_table_csv(csv_path: str | Path, config_path: str | Path | None = None) -> PerformanceTable:
    """Load a performance table from CSV (header row, first column `id`).

    The sidecar JSON config maps criterion name to
    {"direction": "gain"|"cost", "subintervals": int,
     "scale_min": float, "scale_max": float}; all keys optional.
    Cost criteria are negated into gain form at ingestion. Scale bounds
    default to the observed column min/max.
    """
    csv_path = Path(csv_path)
    config: dict = {}
    if config_path is not None:
        config = json.loads(Path(config_path).read_text())
    per_crit = config.get("criteria", config)

    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip().lower() != "id":
            raise ValueError("first CSV column must be 'id'")
        names = [h.strip() for h in header[1:]]
        ids: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    perf = np.asarray(rows, dtype=float)
    if perf.shape[1] != len(names):
        raise ValueError("row length does not match header")

    criteria = []
    for j, name in enumerate(names):
        cfg = per_crit.get(name, {})
        if cfg.get("direction", "gain") == "cost":
            perf[:, j] = -perf[:, j]
        lo = cfg.get("scale_min", perf[:, j].min())
        hi = cfg.get("scale_max", perf[:, j].max())
        if cfg.get("direction", "gain") == "cost":
            # user-supplied bounds refer to the raw (cost) scale
            if "scale_min" in cfg or "scale_max" in cfg:
                lo, hi = -cfg.get("scale_max", -lo), -cfg.get("scale_min", -hi)
        if lo >= hi:
            raise ValueError(f"criterion {name!r} is constant; cannot build a scale")
        criteria.append(Criterion(name, float(lo), float(hi), int(cfg.get("subintervals", 2))))
    return PerformanceTable(tuple(ids), tuple(criteria), perf)
