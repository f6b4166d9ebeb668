"""Evaluation quantities: PWI, RAI, POI, ASP and the entropy summaries."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import PerformanceTable, characteristic_matrix
from .inference import PosteriorSamples, posterior_variance

__all__ = [
    "pwi_from_utilities",
    "poi_from_utilities",
    "rai_from_utilities",
    "compute_pwi",
    "compute_rai",
    "compute_poi",
    "asp",
    "f_var",
    "f_pwi",
    "f_rai",
    "export_poi_csv",
    "export_metric_records",
]


def _sample_utilities(samples: PosteriorSamples, table: PerformanceTable) -> np.ndarray:
    return samples.samples @ characteristic_matrix(table).T


def pwi_from_utilities(utilities: np.ndarray) -> np.ndarray:
    """Pairwise winning indices from a W x n utility matrix, ties split 0.5."""
    n = utilities.shape[1]
    pwi = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            p = np.mean(
                (utilities[:, i] > utilities[:, j])
                + 0.5 * (utilities[:, i] == utilities[:, j])
            )
            pwi[i, j] = p
            pwi[j, i] = 1.0 - p
    return pwi


def poi_from_utilities(utilities: np.ndarray) -> np.ndarray:
    """Pairwise outranking indices: share of samples where i is not worse than j."""
    n = utilities.shape[1]
    poi = np.ones((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                poi[i, j] = np.mean(utilities[:, i] >= utilities[:, j])
    return poi


def rai_from_utilities(utilities: np.ndarray) -> np.ndarray:
    """Rank acceptability indices; rank ties broken by alternative index."""
    W, n = utilities.shape
    # argsort on (-utility, index): stable sort over descending value
    order = np.argsort(-utilities, axis=1, kind="stable")
    rai = np.zeros((n, n))
    rows = order.ravel()
    cols = np.tile(np.arange(n), W)
    np.add.at(rai, (rows, cols), 1.0)
    return rai / W


def compute_pwi(samples: PosteriorSamples, table: PerformanceTable) -> np.ndarray:
    return pwi_from_utilities(_sample_utilities(samples, table))


def compute_poi(samples: PosteriorSamples, table: PerformanceTable) -> np.ndarray:
    return poi_from_utilities(_sample_utilities(samples, table))


def compute_rai(samples: PosteriorSamples, table: PerformanceTable) -> np.ndarray:
    return rai_from_utilities(_sample_utilities(samples, table))


def asp(poi: np.ndarray, true_values: np.ndarray) -> float:
    """Average support of the outranking indices against the true order."""
    poi = np.asarray(poi, dtype=float)
    true_values = np.asarray(true_values, dtype=float)
    n = poi.shape[0]
    if n < 2:
        raise ValueError("asp needs at least two alternatives")
    agree = true_values[:, None] >= true_values[None, :]
    off = ~np.eye(n, dtype=bool)
    return float(2.0 / (n * (n - 1)) * (poi * agree)[off].sum())


def f_var(theta) -> float:
    return posterior_variance(theta)


def _entropy_terms(p: np.ndarray) -> np.ndarray:
    # 0 log 0 := 0
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = -p[mask] * np.log2(p[mask])
    return out


def f_pwi(pwi: np.ndarray) -> float:
    pwi = np.asarray(pwi, dtype=float)
    n = pwi.shape[0]
    off = ~np.eye(n, dtype=bool)
    return float(_entropy_terms(pwi)[off].sum() / (n * (n - 1)))


def f_rai(rai: np.ndarray) -> float:
    rai = np.asarray(rai, dtype=float)
    n = rai.shape[0]
    return float(_entropy_terms(rai).sum() / n)


def export_poi_csv(poi: np.ndarray, ids, path: str | Path) -> None:
    ids = list(ids)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *ids])
        for name, row in zip(ids, np.asarray(poi)):
            writer.writerow([name, *[repr(float(x)) for x in row]])


def export_metric_records(records: list[dict], json_path: str | Path | None = None,
                          csv_path: str | Path | None = None) -> None:
    """Flat {instance_id, policy, round, f_var, f_pwi, f_rai} records."""
    if json_path is not None:
        Path(json_path).write_text(json.dumps(records, indent=2))
    if csv_path is not None:
        if not records:
            Path(csv_path).write_text("")
            return
        keys = list(records[0].keys())
        with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(records)
