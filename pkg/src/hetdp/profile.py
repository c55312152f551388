"""Privacy profiles and the closed-form risk functionals evaluated on them.

A profile is the multiset of per-record privacy budgets, stored as sorted
``(epsilon, count)`` pairs plus a count of public (``epsilon = inf``) records.
Data are assumed to lie in ``[-1/2, 1/2]`` so the mean has sensitivity 1.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

INF = math.inf


class ProfileError(ValueError):
    """Raised for malformed privacy profiles or profile sources."""


@dataclass(frozen=True)
class PrivacyProfile:
    levels: tuple[tuple[float, int], ...]
    public_count: int = 0

    def __post_init__(self) -> None:
        levels = tuple((float(e), int(c)) for e, c in self.levels)
        prev = 0.0
        for eps, count in levels:
            if not math.isfinite(eps) or eps <= 0:
                raise ProfileError(f"epsilon must be finite and positive, got {eps}")
            if eps <= prev:
                raise ProfileError("epsilons must be strictly increasing")
            if count < 1:
                raise ProfileError(f"count for epsilon={eps} must be >= 1, got {count}")
            prev = eps
        if int(self.public_count) < 0:
            raise ProfileError("public_count must be non-negative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "public_count", int(self.public_count))
        if self.total_count < 1:
            raise ProfileError("profile must contain at least one record")

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[float, int]], public_count: int = 0
    ) -> "PrivacyProfile":
        """Build a profile from unordered pairs, merging duplicate budgets.

        A pair whose epsilon is ``inf`` is folded into ``public_count``.
        """
        merged: Counter[float] = Counter()
        public = int(public_count)
        for eps, count in pairs:
            eps = float(eps)
            if eps == INF:
                public += int(count)
            else:
                merged[eps] += int(count)
        return cls(tuple(sorted(merged.items())), public)

    @classmethod
    def from_budgets(cls, budgets: Iterable[float]) -> "PrivacyProfile":
        return cls.from_pairs((float(b), 1) for b in budgets)

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(e for e, _ in self.levels)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.levels)

    @property
    def m(self) -> int:
        """Number of distinct finite levels."""
        return len(self.levels)

    @property
    def total_count(self) -> int:
        return sum(c for _, c in self.levels) + self.public_count

    def budgets(self) -> list[float]:
        """Expanded per-record budget list, ascending, public records last."""
        out = [e for e, c in self.levels for _ in range(c)]
        out.extend([INF] * self.public_count)
        return out

    def scaled(self, factor: float) -> "PrivacyProfile":
        return PrivacyProfile(
            tuple((e * factor, c) for e, c in self.levels), self.public_count
        )

    def to_dict(self) -> dict:
        return {"levels": [[e, c] for e, c in self.levels], "public_count": self.public_count}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "PrivacyProfile":
        if not isinstance(obj, dict):
            raise ProfileError("profile JSON must be an object")
        if "levels" not in obj:
            raise ProfileError("missing field 'levels'")
        levels = obj["levels"]
        if not isinstance(levels, list):
            raise ProfileError("field 'levels' must be a list of [eps, count] pairs")
        pairs = []
        for item in levels:
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                raise ProfileError(f"field 'levels' has malformed entry {item!r}")
            eps, count = item
            pairs.append((_parse_eps(eps, "levels"), _parse_count(count, "levels")))
        public = _parse_count(obj.get("public_count", 0), "public_count")
        return cls.from_pairs(pairs, public)

    @classmethod
    def from_json(cls, text: str) -> "PrivacyProfile":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"invalid profile JSON: {exc}") from exc
        return cls.from_dict(obj)


def _parse_eps(value, field: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return INF
    try:
        eps = float(value)
    except (TypeError, ValueError):
        raise ProfileError(f"field '{field}': cannot parse epsilon {value!r}") from None
    if math.isnan(eps) or eps <= 0:
        raise ProfileError(f"field '{field}': epsilon must be positive, got {value!r}")
    return eps


def _parse_count(value, field: str) -> int:
    if isinstance(value, bool):
        raise ProfileError(f"field '{field}': count must be an integer")
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ProfileError(f"field '{field}': cannot parse count {value!r}") from None
    if not f.is_integer() or f < 0:
        raise ProfileError(f"field '{field}': count must be a non-negative integer, got {value!r}")
    return int(f)


def read_budget_csv(path: str | Path) -> PrivacyProfile:
    """Aggregate a file of raw per-record budgets (one per line, ``inf`` = public)."""
    budgets = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            token = row[0].strip()
            if lineno == 1 and token.lower() in ("epsilon", "eps", "budget"):
                continue
            budgets.append(_parse_eps(token, f"line {lineno}"))
    if not budgets:
        raise ProfileError(f"no budgets found in {path}")
    return PrivacyProfile.from_budgets(budgets)


@dataclass(frozen=True)
class ClippedStats:
    """Sum and sum of squares of budgets clipped at ``tau``."""

    s_tau: float
    q_tau: float
    tau: float


def n_at_threshold(profile: PrivacyProfile, eps: float) -> int:
    """Number of records whose budget is at least ``eps`` (public included)."""
    if eps == INF:
        return profile.public_count
    return sum(c for e, c in profile.levels if e >= eps) + profile.public_count


def clipped_sums(profile: PrivacyProfile, tau: float) -> ClippedStats:
    if not (math.isfinite(tau) and tau > 0):
        raise ValueError(f"tau must be positive and finite, got {tau}")
    s = q = 0.0
    for eps, count in profile.levels:
        c = min(eps, tau)
        s += count * c
        q += count * c * c
    s += profile.public_count * tau
    q += profile.public_count * tau * tau
    return ClippedStats(s, q, tau)


def mse_threshold_at(profile: PrivacyProfile, eps: float) -> float:
    """Worst-case MSE of the threshold mechanism at a fixed threshold.

    Returns ``inf`` when no record clears the threshold.
    """
    n = n_at_threshold(profile, eps)
    if n == 0:
        return INF
    if eps == INF:
        return 1.0 / (4 * n)
    return 1.0 / (4 * n) + 2.0 / (eps * n) ** 2


def mse_affine_at(profile: PrivacyProfile, tau: float) -> float:
    """Worst-case MSE of the clipped-weight affine estimator at clip level ``tau``."""
    st = clipped_sums(profile, tau)
    if st.s_tau == 0:
        return INF
    return (st.q_tau + 8.0) / (4.0 * st.s_tau**2)
