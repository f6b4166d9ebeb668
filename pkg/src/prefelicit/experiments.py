"""Batch experiment harness: preference-inference study, questioning-policy
study and the gradient-variance comparison, all deterministic per seed."""

from __future__ import annotations

import csv
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import __version__
from .baselines import h_depth2, h_dvf, h_myopic, h_rand, resolve_inconsistency, sor_poi
from .core import PreferenceSet
from .inference import InferenceContext, posterior_variance, rt_gradient, score_gradient
from .mcts import PolicyConfig, select_question
from .metrics import asp, compute_pwi, compute_rai, f_pwi, f_rai, poi_from_utilities
from .simulation import (
    gen_comparisons,
    gen_performance_table,
    gen_true_model,
    inject_bias,
    simulated_answer,
    true_values,
)

__all__ = [
    "ExperimentPlan",
    "run_inference_study",
    "run_policy_study",
    "run_gradient_variance_study",
    "write_records_csv",
    "write_manifest",
]

INFERENCE_METHODS = ("rt", "no_rt", "sor")
POLICY_NAMES = ("mcts", "h_pwi", "h_rai", "h_pwi_2", "h_rai_2", "h_dvf", "h_rand")


@dataclass(frozen=True)
class ExperimentPlan:
    study: Literal["inference", "policy"]
    base_seed: int = 0
    repetitions: int = 5
    output_path: str | None = None
    # inference-study factors
    shapes: tuple[str, ...] = ("linear",)
    comparison_counts: tuple[int, ...] = (20, 40)
    bias_proportions: tuple[float, ...] = (0.0,)
    methods: tuple[str, ...] = INFERENCE_METHODS
    n_alternatives: int = 14
    m_criteria: int = 5
    subintervals: int = 2
    posterior_samples: int = 10_000
    sor_samples: int = 1000
    # policy-study factors
    settings: tuple[tuple[int, int], ...] = ((6, 3),)  # (n, m)
    checkpoints: tuple[int, ...] = (2, 4, 6, 8)
    policies: tuple[str, ...] = POLICY_NAMES
    mcts_budget: int = 300
    fit_budget: Literal["full", "rollout"] = "rollout"
    answer_mode: str = "deterministic"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=list)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        d = json.loads(text)
        for key in ("shapes", "comparison_counts", "bias_proportions", "methods",
                    "checkpoints", "policies"):
            if key in d:
                d[key] = tuple(d[key])
        if "settings" in d:
            d["settings"] = tuple(tuple(s) for s in d["settings"])
        return cls(**d)


def _cell_seed(base_seed: int, *parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, *parts])


# ---------------------------------------------------------------------------
# preference-inference study (ASP comparison of rt / no_rt / sor)


def _run_inference_cell(args) -> list[dict]:
    plan, cell_idx, shape, count, bias, rep = args
    ss = _cell_seed(plan.base_seed, 1, cell_idx, rep)
    rng = np.random.default_rng(ss)
    base = int(ss.generate_state(1)[0])

    table = gen_performance_table(plan.n_alternatives, plan.m_criteria, rng, plan.subintervals)
    model = gen_true_model(plan.m_criteria, shape, rng)
    Q = inject_bias(gen_comparisons(model, table, count, rng), model, table, bias)
    tv = true_values(model, table)

    common = {
        "instance_id": f"cell{cell_idx}_rep{rep}",
        "seed": base,
        "shape": shape,
        "comparisons": count,
        "bias": bias,
        "n": plan.n_alternatives,
        "m": plan.m_criteria,
    }
    records = []
    for method in plan.methods:
        record = dict(common, method=method)
        try:
            if method in ("rt", "no_rt"):
                ctx = InferenceContext(table, base_seed=base)
                fit = ctx.fit(Q, budget="full", estimator="rt" if method == "rt" else "score")
                samples = ctx.samples(fit.theta.params, plan.posterior_samples, Q.key())
                poi = poi_from_utilities(ctx.utilities(samples))
            elif method == "sor":
                consistent = resolve_inconsistency(Q, table)
                poi = sor_poi(consistent, table, plan.sor_samples, np.random.default_rng(base))
            else:
                raise ValueError(f"unknown method {method!r}")
            record["asp"] = repr(asp(poi, tv))
        except Exception as exc:  # per-cell failures recorded, run continues
            record["asp"] = ""
            record["error"] = f"{type(exc).__name__}: {exc}"
        records.append(record)
    return records


def run_inference_study(plan: ExperimentPlan, workers: int = 1) -> list[dict]:
    cells = []
    cell_idx = 0
    for shape in plan.shapes:
        for count in plan.comparison_counts:
            for bias in plan.bias_proportions:
                for rep in range(plan.repetitions):
                    cells.append((plan, cell_idx, shape, count, bias, rep))
                cell_idx += 1
    results = _map_cells(_run_inference_cell, cells, workers)
    return [rec for cell in results for rec in cell]


# ---------------------------------------------------------------------------
# questioning-policy study


def _policy_step(policy: str, Q: PreferenceSet, table, ctx, plan: ExperimentPlan,
                 round_t: int, horizon: int, seed: int) -> tuple[int, int]:
    if policy == "mcts":
        cfg = PolicyConfig(horizon=horizon, budget=plan.mcts_budget, rng_seed=seed)
        return select_question(Q, table, ctx, cfg, round_t=round_t)
    if policy == "h_pwi":
        return h_myopic(Q, table, "PWI", ctx)
    if policy == "h_rai":
        return h_myopic(Q, table, "RAI", ctx)
    if policy == "h_pwi_2":
        return h_depth2(Q, table, "PWI", ctx)
    if policy == "h_rai_2":
        return h_depth2(Q, table, "RAI", ctx)
    if policy == "h_dvf":
        return h_dvf(Q, table, ctx)
    if policy == "h_rand":
        return h_rand(Q, table, np.random.default_rng(seed))
    raise ValueError(f"unknown policy {policy!r}")


def _run_policy_instance(args) -> list[dict]:
    plan, setting_idx, n, m, rep = args
    ss = _cell_seed(plan.base_seed, 2, setting_idx, rep)
    rng = np.random.default_rng(ss)
    base = int(ss.generate_state(1)[0])

    table = gen_performance_table(n, m, rng, plan.subintervals)
    model = gen_true_model(m, "mixture", rng)
    ctx = InferenceContext(table, base_seed=base)
    horizon = max(plan.checkpoints)

    records = []
    for policy in plan.policies:
        Q = PreferenceSet()
        for t in range(1, horizon + 1):
            step_seed = int(_cell_seed(base, 3, POLICY_NAMES.index(policy), t).generate_state(1)[0])
            try:
                pair = _policy_step(policy, Q, table, ctx, plan, t, horizon, step_seed)
            except Exception as exc:
                records.append({
                    "instance_id": f"set{setting_idx}_rep{rep}", "seed": base, "policy": policy,
                    "n": n, "m": m, "round": t, "error": f"{type(exc).__name__}: {exc}",
                })
                break
            answer = simulated_answer(
                model, table, pair, np.random.default_rng(step_seed), mode=plan.answer_mode
            )
            Q = Q.extended(answer)
            if t in plan.checkpoints:
                fit = ctx.fit(Q, budget=plan.fit_budget)
                samples = ctx.samples(fit.theta.params, plan.posterior_samples, Q.key())
                pwi = compute_pwi(samples, table)
                rai = compute_rai(samples, table)
                records.append({
                    "instance_id": f"set{setting_idx}_rep{rep}",
                    "seed": base,
                    "policy": policy,
                    "n": n,
                    "m": m,
                    "round": t,
                    "f_var": repr(posterior_variance(fit.theta)),
                    "f_pwi": repr(f_pwi(pwi)),
                    "f_rai": repr(f_rai(rai)),
                })
    return records


def run_policy_study(plan: ExperimentPlan, workers: int = 1) -> list[dict]:
    cells = []
    for setting_idx, (n, m) in enumerate(plan.settings):
        for rep in range(plan.repetitions):
            cells.append((plan, setting_idx, n, m, rep))
    results = _map_cells(_run_policy_instance, cells, workers)
    return [rec for cell in results for rec in cell]


# ---------------------------------------------------------------------------
# gradient-variance study


def run_gradient_variance_study(
    n_configs: int = 10,
    gamma_criteria: int = 5,
    subintervals: int = 2,
    comparisons: int = 20,
    grad_samples: int = 1000,
    repeats: int = 100,
    base_seed: int = 0,
) -> list[dict]:
    """Per-coordinate variance of both estimators over repeated evaluations."""
    records = []
    for cfg in range(n_configs):
        ss = _cell_seed(base_seed, 4, cfg)
        rng = np.random.default_rng(ss)
        table = gen_performance_table(10, gamma_criteria, rng, subintervals)
        model = gen_true_model(gamma_criteria, "mixture", rng)
        Q = gen_comparisons(model, table, comparisons, rng)
        gamma = table.gamma
        phi = np.exp(rng.normal(0.0, 0.3, size=gamma))
        theta = phi**2
        alpha = np.ones(gamma)

        grads = {"rt": [], "score": []}
        for r in range(repeats):
            rep_rng = np.random.default_rng(_cell_seed(base_seed, 5, cfg, r))
            grads["rt"].append(rt_gradient(phi, Q, alpha, table, grad_samples, rep_rng))
            rep_rng = np.random.default_rng(_cell_seed(base_seed, 6, cfg, r))
            # score gradient expressed w.r.t. phi for a like-for-like comparison
            grads["score"].append(
                score_gradient(theta, Q, alpha, table, grad_samples, rep_rng) * 2.0 * phi
            )
        variances = {k: np.var(np.stack(v), axis=0) for k, v in grads.items()}
        for estimator in ("rt", "score"):
            records.append({
                "config": cfg,
                "estimator": estimator,
                "gamma": gamma,
                "mean_variance": repr(float(variances[estimator].mean())),
                "median_variance": repr(float(np.median(variances[estimator]))),
            })
        records.append({
            "config": cfg,
            "estimator": "ratio_rt_over_score",
            "gamma": gamma,
            "mean_variance": repr(float(variances["rt"].mean() / variances["score"].mean())),
            "median_variance": repr(float(np.median(variances["rt"] / variances["score"]))),
        })
    return records


# ---------------------------------------------------------------------------
# output plumbing


def _map_cells(fn, cells: list, workers: int) -> list:
    if workers <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def write_records_csv(records: list[dict], path: str | Path) -> None:
    path = Path(path)
    fieldnames: list[str] = []
    for rec in records:
        for key in rec:
            if key not in fieldnames:
                fieldnames.append(key)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, restval="")
        writer.writeheader()
        writer.writerows(records)


def write_manifest(plan: ExperimentPlan | None, path: str | Path, extra: dict | None = None) -> None:
    manifest = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if plan is not None:
        manifest["plan"] = json.loads(plan.to_json())
        manifest["base_seed"] = plan.base_seed
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2))
