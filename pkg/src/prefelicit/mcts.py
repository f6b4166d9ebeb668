"""Question selection by Monte Carlo Tree Search over the question/answer MDP.

Each tree node is a candidate question; answers are sampled afresh on every
descent from the root posterior's predictive probabilities, and rewards are
the normalized posterior-variance reduction over the remaining horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from .core import PerformanceTable, PreferenceSet, PreferenceStatement, candidate_pairs
from .inference import InferenceContext, posterior_variance

__all__ = [
    "PolicyConfig",
    "QuestionTreeNode",
    "question_value",
    "select_question",
    "best_child",
    "simulate",
    "backpropagate",
    "dump_tree",
]


class ElicitationSaturatedError(RuntimeError):
    """Every unordered pair has already been asked."""


@dataclass(frozen=True)
class PolicyConfig:
    horizon: int
    budget: int = 300
    exploration: float = 1.0 / math.sqrt(2.0)
    predictive_samples: int = 1000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.budget < 1 or self.horizon < 1 or self.exploration < 0:
            raise ValueError("budget and horizon must be >= 1, exploration >= 0")


@dataclass
class QuestionTreeNode:
    question: Optional[tuple[int, int]]  # None at the root
    parent: Optional["QuestionTreeNode"]
    depth: int
    untried: list[tuple[int, int]]
    children: list["QuestionTreeNode"] = field(default_factory=list)
    visit_count: int = 0
    total_reward: float = 0.0

    def path_questions(self) -> list[tuple[int, int]]:
        out: list[tuple[int, int]] = []
        node = self
        while node.question is not None:
            out.append(node.question)
            node = node.parent
        out.reverse()
        return out

    def root(self) -> "QuestionTreeNode":
        node = self
        while node.parent is not None:
            node = node.parent
        return node


def best_child(node: QuestionTreeNode, c: float) -> QuestionTreeNode:
    """UCB argmax over children; unvisited children win under c > 0."""
    if not node.children:
        raise ValueError("node has no children")
    root_visits = node.root().visit_count
    best = None
    best_score = -math.inf
    for child in node.children:
        if child.visit_count == 0:
            if c > 0:
                return child
            continue
        score = child.total_reward / child.visit_count
        if c > 0:
            score += 2.0 * c * math.sqrt(2.0 * math.log(root_visits) / child.visit_count)
        if score > best_score:
            best, best_score = child, score
    if best is None:
        # all children unvisited and c == 0: deterministic first-index rule
        return node.children[0]
    return best


def backpropagate(node: QuestionTreeNode, delta: float) -> None:
    while node is not None:
        node.visit_count += 1
        node.total_reward += delta
        node = node.parent


def _select_and_expand(
    root: QuestionTreeNode, horizon: int, c: float, rng: np.random.Generator
) -> QuestionTreeNode:
    node = root
    while node.depth < horizon:
        if node.untried:
            idx = int(rng.integers(len(node.untried)))
            question = node.untried.pop(idx)
            remaining = [q for q in node.untried] + [ch.question for ch in node.children]
            child_untried = [q for q in remaining if q != question]
            child = QuestionTreeNode(
                question=question, parent=node, depth=node.depth + 1, untried=child_untried
            )
            node.children.append(child)
            return child
        if not node.children:
            return node  # question space exhausted below this node
        node = best_child(node, c)
    return node


def simulate(
    node: QuestionTreeNode,
    Q_root: PreferenceSet,
    root_var: float,
    root_pwi: np.ndarray,
    ctx: InferenceContext,
    horizon: int,
    rng: np.random.Generator,
) -> float:
    """Complete the node's path to the horizon and score the variance drop.

    Tree-path and rollout questions alike get answers sampled from the root
    posterior's predictive probabilities; the reward is the relative
    reduction of the rollout-grade refit variance, clamped to [0, 1].
    """
    path = node.path_questions()
    asked = set(Q_root.pairs) | {frozenset(q) for q in path}
    pool = [
        (i, j)
        for i in range(root_pwi.shape[0])
        for j in range(i + 1, root_pwi.shape[0])
        if frozenset((i, j)) not in asked
    ]
    remaining = horizon - len(path)
    if remaining > 0 and pool:
        take = min(remaining, len(pool))
        picks = rng.choice(len(pool), size=take, replace=False)
        path = path + [pool[k] for k in picks]

    statements = list(Q_root.statements)
    for i, j in path:
        if rng.random() < root_pwi[i, j]:
            statements.append(PreferenceStatement(i, j))
        else:
            statements.append(PreferenceStatement(j, i))
    Q_final = PreferenceSet(tuple(statements))
    if root_var <= 0:
        return 0.0
    final_var = posterior_variance(ctx.fit(Q_final, budget="rollout").theta)
    return float(np.clip((root_var - final_var) / root_var, 0.0, 1.0))


def select_question(
    Q: PreferenceSet,
    table: PerformanceTable,
    ctx: InferenceContext,
    config: PolicyConfig,
    round_t: int = 1,
) -> tuple[int, int]:
    """Run the MCTS budget from a root at state Q and return the best question."""
    candidates = candidate_pairs(table, Q)
    if not candidates:
        raise ElicitationSaturatedError("no unasked pairs remain")
    horizon = max(1, config.horizon - round_t + 1)
    rng = np.random.default_rng(config.rng_seed)

    root_fit = ctx.fit(Q, budget="rollout")
    root_var = posterior_variance(root_fit.theta)
    root_pwi = ctx.pwi(Q, config.predictive_samples, budget="rollout")

    root = QuestionTreeNode(question=None, parent=None, depth=0, untried=list(candidates))
    for _ in range(config.budget):
        node = _select_and_expand(root, horizon, config.exploration, rng)
        delta = simulate(node, Q, root_var, root_pwi, ctx, horizon, rng)
        backpropagate(node, delta)
    return best_child(root, 0.0).question


def question_value(
    Q: PreferenceSet,
    pair: tuple[int, int],
    ctx: InferenceContext,
    W: int = 1000,
    budget: Literal["full", "rollout"] = "rollout",
) -> float:
    """Myopic expected variance reduction of asking `pair` at state Q."""
    i, j = pair
    if Q.contains_pair(i, j):
        raise ValueError("pair already asked")
    var_q = posterior_variance(ctx.fit(Q, budget=budget).theta)
    pwi = ctx.pwi(Q, W, budget=budget)
    var_i = posterior_variance(ctx.fit(Q.extended(PreferenceStatement(i, j)), budget=budget).theta)
    var_j = posterior_variance(ctx.fit(Q.extended(PreferenceStatement(j, i)), budget=budget).theta)
    return float(pwi[i, j] * (var_q - var_i) + pwi[j, i] * (var_q - var_j))


def dump_tree(root: QuestionTreeNode, path: str | Path | None = None, max_depth: int = 3) -> dict:
    """JSON-friendly snapshot of the search tree for debugging and UI display."""

    def encode(node: QuestionTreeNode) -> dict:
        d = {
            "question": list(node.question) if node.question else None,
            "N": node.visit_count,
            "V": node.total_reward,
            "depth": node.depth,
        }
        if node.depth < max_depth:
            d["children"] = [encode(ch) for ch in node.children]
        return d

    tree = encode(root)
    if path is not None:
        Path(path).write_text(json.dumps(tree, indent=2))
    return tree
