"""Comparison questioning policies and the stochastic ordinal regression baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from .core import (
    PerformanceTable,
    PreferenceSet,
    PreferenceStatement,
    candidate_pairs,
    characteristic_matrix,
)
from .inference import InferenceContext
from .metrics import f_pwi, f_rai, poi_from_utilities, pwi_from_utilities, rai_from_utilities

__all__ = [
    "PolytopeSpec",
    "polytope_from_preferences",
    "h_myopic",
    "h_depth2",
    "h_dvf",
    "h_rand",
    "hit_and_run",
    "resolve_inconsistency",
    "sor_poi",
    "InfeasiblePolytopeError",
]

DEFAULT_DELTA = 1e-4


class InfeasiblePolytopeError(RuntimeError):
    """The preference constraints admit no value function."""


@dataclass(frozen=True)
class PolytopeSpec:
    """{u : u >= 0, 1.u = 1, A u >= b} with preference rows U(s1) - U(s2) >= delta."""

    dimension: int
    ineq_matrix: np.ndarray  # rows: c such that c . u >= rhs
    ineq_rhs: np.ndarray
    delta: float = DEFAULT_DELTA

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.ineq_matrix, dtype=float))
        if A.size == 0:
            A = np.zeros((0, self.dimension))
        b = np.asarray(self.ineq_rhs, dtype=float).reshape(-1)
        object.__setattr__(self, "ineq_matrix", A)
        object.__setattr__(self, "ineq_rhs", b)
        if A.shape != (b.shape[0], self.dimension):
            raise ValueError("inconsistent constraint shapes")


def polytope_from_preferences(
    Q: PreferenceSet, table: PerformanceTable, delta: float = DEFAULT_DELTA
) -> PolytopeSpec:
    V = characteristic_matrix(table)
    rows = [V[s.preferred] - V[s.other] for s in Q]
    A = np.stack(rows) if rows else np.zeros((0, table.gamma))
    b = np.full(len(rows), delta)
    return PolytopeSpec(table.gamma, A, b, delta)


def _interior_point(poly: PolytopeSpec) -> np.ndarray:
    """Chebyshev-style interior solve: maximize the uniform constraint margin."""
    d = poly.dimension
    # variables (u, s); maximize s subject to u_k - s >= 0, A u - s >= b, sum u = 1
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = []
    b_ub = []
    for k in range(d):  # -u_k + s <= 0
        row = np.zeros(d + 1)
        row[k] = -1.0
        row[-1] = 1.0
        A_ub.append(row)
        b_ub.append(0.0)
    for row_a, rhs in zip(poly.ineq_matrix, poly.ineq_rhs):  # -A u + s <= -b
        row = np.concatenate([-row_a, [1.0]])
        A_ub.append(row)
        b_ub.append(-rhs)
    A_eq = np.concatenate([np.ones(d), [0.0]]).reshape(1, -1)
    res = linprog(
        c,
        A_ub=np.asarray(A_ub),
        b_ub=np.asarray(b_ub),
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(None, None)] * d + [(None, None)],
        method="highs",
    )
    if not res.success or res.x[-1] <= 1e-10:
        raise InfeasiblePolytopeError("preference polytope has empty interior")
    return res.x[:-1]


def hit_and_run(
    poly: PolytopeSpec,
    W: int,
    rng: np.random.Generator,
    burn_in: int = 1000,
    thinning: int = 5,
) -> np.ndarray:
    """Approximately uniform samples from the polytope (on the simplex slice)."""
    d = poly.dimension
    x = _interior_point(poly)
    # full constraint stack: u >= 0 plus the preference rows
    A = np.vstack([np.eye(d), poly.ineq_matrix])
    b = np.concatenate([np.zeros(d), poly.ineq_rhs])
    out = np.empty((W, d))
    kept = 0
    step = 0
    while kept < W:
        direction = rng.standard_normal(d)
        direction -= direction.mean()  # stay on the sum-to-one hyperplane
        norm = np.linalg.norm(direction)
        if norm < 1e-12:
            continue
        direction /= norm
        ad = A @ direction
        slack = A @ x - b  # >= 0
        with np.errstate(divide="ignore"):
            t = -slack / ad
        lo = t[ad > 1e-14].max(initial=-np.inf)
        hi = t[ad < -1e-14].min(initial=np.inf)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            continue
        x = x + rng.uniform(lo, hi) * direction
        step += 1
        if step > burn_in and (step - burn_in) % thinning == 0:
            out[kept] = x
            kept += 1
    return out


def resolve_inconsistency(
    Q: PreferenceSet, table: PerformanceTable, delta: float = DEFAULT_DELTA
) -> PreferenceSet:
    """Maximal consistent subset via iterative slack-LP dropping.

    Minimize total constraint slack, drop the statement with the largest
    optimal slack, repeat until feasible; then greedily reinstate dropped
    statements that remain compatible, so no feasible superset exists.
    """
    active = list(range(len(Q.statements)))
    dropped: list[int] = []
    V = characteristic_matrix(table)

    def feasible(indices: list[int]) -> bool:
        sub = PreferenceSet(tuple(Q.statements[i] for i in indices))
        try:
            _interior_point(polytope_from_preferences(sub, table, delta))
            return True
        except InfeasiblePolytopeError:
            return False

    while active and not feasible(active):
        d = table.gamma
        k = len(active)
        # variables (u, slack); minimize sum slack s.t. row.u + slack >= delta
        c = np.concatenate([np.zeros(d), np.ones(k)])
        A_ub = []
        for col, idx in enumerate(active):
            s = Q.statements[idx]
            row = np.zeros(d + k)
            row[:d] = -(V[s.preferred] - V[s.other])
            row[d + col] = -1.0
            A_ub.append(row)
        res = linprog(
            c,
            A_ub=np.asarray(A_ub),
            b_ub=np.full(k, -delta),
            A_eq=np.concatenate([np.ones(d), np.zeros(k)]).reshape(1, -1),
            b_eq=[1.0],
            bounds=[(0, None)] * (d + k),
            method="highs",
        )
        if not res.success:
            raise RuntimeError("slack LP failed unexpectedly")
        slacks = res.x[d:]
        worst = active[int(np.argmax(slacks))]
        active.remove(worst)
        dropped.append(worst)

    for idx in dropped:
        if feasible(sorted(active + [idx])):
            active.append(idx)
    active.sort()
    return PreferenceSet(tuple(Q.statements[i] for i in active))


def sor_poi(
    Q: PreferenceSet,
    table: PerformanceTable,
    W: int,
    rng: np.random.Generator,
    delta: float = DEFAULT_DELTA,
    burn_in: int = 1000,
    thinning: int = 5,
) -> np.ndarray:
    """Pairwise outranking indices from uniform sampling of the constraint polytope."""
    samples = hit_and_run(polytope_from_preferences(Q, table, delta), W, rng, burn_in, thinning)
    utilities = samples @ characteristic_matrix(table).T
    return poi_from_utilities(utilities)


# ---------------------------------------------------------------------------
# questioning heuristics


def _hypothetical_metric(
    ctx: InferenceContext, Q: PreferenceSet, metric: Literal["PWI", "RAI"], W: int
) -> float:
    """f_X of the rollout-grade refit posterior for Q."""
    fit = ctx.fit(Q, budget="rollout")
    utilities = ctx.utilities(ctx.samples(fit.theta.params, W, Q.key()))
    if metric == "PWI":
        return f_pwi(pwi_from_utilities(utilities))
    return f_rai(rai_from_utilities(utilities))


def h_myopic(
    Q: PreferenceSet,
    table: PerformanceTable,
    metric: Literal["PWI", "RAI"],
    ctx: InferenceContext,
    W: int = 1000,
) -> tuple[int, int]:
    """Greedy expected entropy-reduction question (ties: lowest pair index)."""
    candidates = candidate_pairs(table, Q)
    if not candidates:
        raise ValueError("no candidate questions remain")
    pwi = ctx.pwi(Q, W, budget="rollout")
    base = _hypothetical_metric(ctx, Q, metric, W)
    best_pair, best_value = candidates[0], -np.inf
    for i, j in candidates:
        p_ij, p_ji = pwi[i, j], pwi[j, i]
        denom = p_ij + p_ji
        f_if_i = _hypothetical_metric(ctx, Q.extended(PreferenceStatement(i, j)), metric, W)
        f_if_j = _hypothetical_metric(ctx, Q.extended(PreferenceStatement(j, i)), metric, W)
        value = (p_ij * (base - f_if_i) + p_ji * (base - f_if_j)) / denom
        if value > best_value + 1e-15:
            best_pair, best_value = (i, j), value
    return best_pair


def h_depth2(
    Q: PreferenceSet,
    table: PerformanceTable,
    metric: Literal["PWI", "RAI"],
    ctx: InferenceContext,
    W: int = 1000,
) -> tuple[int, int]:
    """Two-level lookahead variant of the myopic heuristic."""
    candidates = candidate_pairs(table, Q)
    if not candidates:
        raise ValueError("no candidate questions remain")

    def value(Qc: PreferenceSet, depth: int, excluded: frozenset) -> float:
        if depth == 0:
            return -_hypothetical_metric(ctx, Qc, metric, W)
        inner = [p for p in candidate_pairs(table, Qc) if frozenset(p) not in excluded]
        if not inner:
            return -_hypothetical_metric(ctx, Qc, metric, W)
        pwi = ctx.pwi(Qc, W, budget="rollout")
        best = -np.inf
        for i, j in inner:
            p_ij, p_ji = pwi[i, j], pwi[j, i]
            denom = p_ij + p_ji
            v = (
                p_ij * value(Qc.extended(PreferenceStatement(i, j)), depth - 1, excluded)
                + p_ji * value(Qc.extended(PreferenceStatement(j, i)), depth - 1, excluded)
            ) / denom
            best = max(best, v)
        return best

    pwi = ctx.pwi(Q, W, budget="rollout")
    best_pair, best_value = candidates[0], -np.inf
    for i, j in candidates:
        p_ij, p_ji = pwi[i, j], pwi[j, i]
        denom = p_ij + p_ji
        excl = frozenset({frozenset((i, j))})
        v = (
            p_ij * value(Q.extended(PreferenceStatement(i, j)), 1, excl)
            + p_ji * value(Q.extended(PreferenceStatement(j, i)), 1, excl)
        ) / denom
        if v > best_value + 1e-15:
            best_pair, best_value = (i, j), v
    return best_pair


def h_dvf(
    Q: PreferenceSet,
    table: PerformanceTable,
    ctx: InferenceContext,
    W: int = 1000,
) -> tuple[int, int]:
    """Most even posterior split: maximize min(PWI(i,j), PWI(j,i))."""
    candidates = candidate_pairs(table, Q)
    if not candidates:
        raise ValueError("no candidate questions remain")
    pwi = ctx.pwi(Q, W, budget="rollout")
    best_pair, best_value = candidates[0], -np.inf
    for i, j in candidates:
        v = min(pwi[i, j], pwi[j, i])
        if v > best_value + 1e-15:
            best_pair, best_value = (i, j), v
    return best_pair


def h_rand(Q: PreferenceSet, table: PerformanceTable, rng: np.random.Generator) -> tuple[int, int]:
    candidates = candidate_pairs(table, Q)
    if not candidates:
        raise ValueError("no candidate questions remain")
    return candidates[rng.integers(len(candidates))]
