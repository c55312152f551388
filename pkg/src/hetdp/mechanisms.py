"""Randomized mean estimators: Laplace noise, the threshold and affine mechanisms.

Every mechanism draws its noise through an explicit generator; use
:func:`make_rng` for reproducible, independently keyed streams.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .optimize import AffinePlan
from .profile import INF, PrivacyProfile

_TINY = np.finfo(float).tiny


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream ``(seed, *key)``.

    Equal arguments give bit-identical streams; distinct keys give independent
    streams, which is how parallel trials should be seeded.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def laplace_quantile(u, scale: float):
    """Map ``u`` in (-1/2, 1/2) to a Laplace(0, scale) variate by inverting the CDF."""
    u = np.asarray(u, dtype=float)
    return -scale * np.sign(u) * np.log(np.maximum(1.0 - 2.0 * np.abs(u), _TINY))


def sample_laplace(scale: float, rng, size=None):
    """Laplace(0, scale) draw(s); variance is ``2 * scale**2``."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    out = laplace_quantile(rng.uniform(-0.5, 0.5, size), scale)
    return float(out) if size is None else out


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Records with values in [-1/2, 1/2] and per-record budgets (``inf`` = public)."""

    values: np.ndarray
    budgets: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        budgets = np.asarray(self.budgets, dtype=float).reshape(-1)
        if values.shape != budgets.shape:
            raise DatasetError("values and budgets must have the same length")
        if values.size == 0:
            raise DatasetError("dataset is empty")
        if np.any(~np.isfinite(values)) or np.any(np.abs(values) > 0.5):
            raise DatasetError("values must lie in [-1/2, 1/2]")
        if np.any(np.isnan(budgets)) or np.any(budgets <= 0):
            raise DatasetError("budgets must be positive")
        values.setflags(write=False)
        budgets.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "budgets", budgets)

    @classmethod
    def from_records(cls, records: Iterable[tuple[float, float]]) -> "Dataset":
        recs = list(records)
        return cls(np.array([v for v, _ in recs]), np.array([e for _, e in recs]))

    @classmethod
    def read_csv(cls, path: str | Path) -> "Dataset":
        """Read a ``value,epsilon`` file (header required, ``inf`` for public)."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or {"value", "epsilon"} - set(reader.fieldnames):
                raise DatasetError("dataset CSV needs columns 'value,epsilon'")
            recs = [(float(r["value"]), float(r["epsilon"])) for r in reader]
        return cls.from_records(recs)

    def profile(self) -> PrivacyProfile:
        return PrivacyProfile.from_budgets(self.budgets.tolist())

    def __len__(self) -> int:
        return self.values.size


def threshold_weights(budgets, eps: float) -> tuple[np.ndarray, float]:
    """Record weights and Laplace scale of the threshold mechanism at ``eps``."""
    budgets = np.asarray(budgets, dtype=float)
    keep = budgets >= eps
    n_eps = int(keep.sum())
    if n_eps == 0:
        raise ValueError(f"no record has budget >= {eps}")
    scale = 0.0 if math.isinf(eps) else 1.0 / (n_eps * eps)
    return keep / n_eps, scale


def affine_weights(budgets, plan: AffinePlan) -> tuple[np.ndarray, float]:
    """Record weights and Laplace scale of an affine plan applied to ``budgets``."""
    budgets = np.asarray(budgets, dtype=float)
    table = dict(plan.weights)
    try:
        w = np.array([table[b] for b in budgets.tolist()], dtype=float)
    except KeyError as exc:
        raise ValueError(f"plan has no weight for budget {exc.args[0]}") from None
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"plan weights sum to {w.sum()} on this dataset, expected 1")
    return w, plan.eta


def release(values, weights, scale: float, rng):
    """Noisy weighted sum ``values @ weights + Lap(scale)``.

    ``values`` may carry leading batch axes; one noise draw per row. A zero
    scale (public-only release) adds no noise.
    """
    values = np.asarray(values, dtype=float)
    est = values @ np.asarray(weights, dtype=float)
    if scale == 0:
        return est
    noise = laplace_quantile(rng.uniform(-0.5, 0.5, np.shape(est)), scale)
    return est + noise


def threshold_mechanism(data: Dataset, eps: float, rng) -> float:
    """Mean of records with budget >= ``eps`` plus Lap(1/(n_eps*eps)) noise."""
    w, scale = threshold_weights(data.budgets, eps)
    return float(release(data.values, w, scale, rng))


def affine_mechanism(data: Dataset, plan: AffinePlan, rng) -> float:
    """Weighted sum of the records under ``plan`` plus Lap(eta) noise."""
    w, scale = affine_weights(data.budgets, plan)
    return float(release(data.values, w, scale, rng))


def effective_epsilons(weights, scale: float) -> np.ndarray:
    """Privacy loss ``w_i / scale`` actually spent on each record."""
    w = np.asarray(weights, dtype=float)
    if scale == 0:
        return np.where(w > 0, INF, 0.0)
    return w / scale
