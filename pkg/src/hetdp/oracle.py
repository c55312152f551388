"""Brute-force oracles: Monte Carlo risk estimates and dense-grid minimization.

Nothing here relies on the segment decomposition used by the optimizers, so
these can be used to check it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .mechanisms import affine_weights, make_rng, release, threshold_weights
from .optimize import AffinePlan
from .profile import PrivacyProfile

MIN_TRIALS = 1000
_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class McResult:
    empirical_mse: float
    trials: int
    stderr: float

    def to_dict(self) -> dict:
        return {"empirical_mse": self.empirical_mse, "trials": self.trials, "stderr": self.stderr}


@dataclass(frozen=True)
class SourceDistribution:
    """Data law on [-1/2, 1/2]: ``rademacher_half`` or ``point_mass`` at ``loc``."""

    kind: str
    loc: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("rademacher_half", "point_mass"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not -0.5 <= self.loc <= 0.5:
            raise ValueError("point-mass location must lie in [-1/2, 1/2]")

    @classmethod
    def rademacher_half(cls) -> "SourceDistribution":
        return cls("rademacher_half")

    @classmethod
    def point_mass(cls, c: float = 0.0) -> "SourceDistribution":
        return cls("point_mass", float(c))

    @property
    def mean(self) -> float:
        return 0.0 if self.kind == "rademacher_half" else self.loc

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "rademacher_half":
            return rng.integers(0, 2, size=shape).astype(float) - 0.5
        return np.full(shape, self.loc)


@dataclass(frozen=True)
class Threshold:
    eps: float


Estimator = Union[Threshold, AffinePlan]


def _weights(profile: PrivacyProfile, estimator: Estimator):
    budgets = np.asarray(profile.budgets(), dtype=float)
    if isinstance(estimator, Threshold):
        return threshold_weights(budgets, estimator.eps)
    if isinstance(estimator, AffinePlan):
        return affine_weights(budgets, estimator)
    raise TypeError(f"unsupported estimator {estimator!r}")


def _merge(a, b):
    # Chan et al. pairwise update of (count, mean, M2)
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, sa + sb + d * d * na * nb / n


def empirical_mse(
    profile: PrivacyProfile,
    estimator: Estimator,
    dist: SourceDistribution,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    rng_factory: Callable[..., np.random.Generator] = make_rng,
) -> McResult:
    """Monte Carlo estimate of ``E[(estimate - mean)^2]`` under i.i.d. data from ``dist``.

    Trials run in fixed-size chunks, each with its own stream ``(seed, chunk)``,
    and are merged in chunk order, so the result does not depend on ``workers``.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    w, scale = _weights(profile, estimator)
    n = w.size
    rows = max(1, min(1 << 16, _CHUNK_CELLS // n))
    bounds = [(i, min(rows, trials - i * rows)) for i in range(math.ceil(trials / rows))]
    mu = dist.mean

    def run(chunk):
        idx, size = chunk
        rng = rng_factory(seed, idx)
        x = dist.sample(rng, (size, n))
        err = (release(x, w, scale, rng) - mu) ** 2
        m = float(err.mean())
        return size, m, float(((err - m) ** 2).sum())

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    count, mean, m2 = acc
    var = m2 / (count - 1)
    return McResult(mean, count, math.sqrt(var / count))


def grid_oracle_affine(profile: PrivacyProfile, grid_points: int = 100_000) -> tuple[float, float]:
    """Minimize the affine risk by brute force over a log-spaced grid of ``tau``.

    The grid spans ``eps_1/4`` to four times the largest of ``eps_m`` and the
    public-data stationary point; the budgets themselves, where the objective
    has kinks, are added to the grid.
    """
    if grid_points < 1000:
        raise ValueError("grid_points must be >= 1000")
    if not profile.levels:
        raise ValueError("grid oracle needs at least one finite budget")
    eps = np.array(profile.epsilons)
    cnt = np.array(profile.counts, dtype=float)
    top = eps[-1]
    if profile.public_count:
        s, q = float(cnt @ eps), float(cnt @ eps**2)
        top = max(top, (q + 8.0) / s)
    taus = np.union1d(np.geomspace(eps[0] / 4, 4 * top, grid_points), eps)
    best_tau, best = math.nan, math.inf
    for block in np.array_split(taus, max(1, taus.size * eps.size // 2_000_000 + 1)):
        clipped = np.minimum(eps[None, :], block[:, None])
        s = clipped @ cnt + profile.public_count * block
        q = (clipped**2) @ cnt + profile.public_count * block**2
        vals = (q + 8.0) / (4.0 * s * s)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best_tau, best = float(block[i]), float(vals[i])
    return best_tau, best
