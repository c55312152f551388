"""Extremal profile constructions and checks of the approximation-ratio bounds.

Bounds checked, for ``ratio = MSE_thr / MSE_aff``:

* one finite level plus public records: ``ratio <= 2``
* exactly two finite levels: ``ratio <= 4``
* any profile: ``ratio <= min((1 + log2 n)**2, m**2)``
* equal-revenue construction with ``m`` levels: ``ratio >= m**2 / 5``

Public records count as one extra level in ``m``; clipped at any ``tau`` they
take a single value, which is what the general bound needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .optimize import ratio as risk_ratio
from .profile import (
    INF,
    PrivacyProfile,
    clipped_sums,
    mse_affine_at,
    mse_threshold_at,
    n_at_threshold,
)

REL_TOL = 1e-9
EULER_GAMMA = 0.57721566490153286061


def make_public_private(n1: int, eps1: float, n2: int) -> PrivacyProfile:
    if n1 < 1 or n2 < 1 or not eps1 > 0:
        raise ValueError("need n1 >= 1, n2 >= 1 and eps1 > 0")
    return PrivacyProfile(((float(eps1), int(n1)),), int(n2))


def make_two_level(n1: int, eps1: float, n2: int, eps2: float) -> PrivacyProfile:
    return PrivacyProfile.from_pairs([(eps1, n1), (eps2, n2)])


def make_equal_revenue(m: int) -> PrivacyProfile:
    """Levels ``eps_i = 2**-(i-1)`` holding ``2**(i-1)`` records each, so ``n_i*eps_i = 1``."""
    if not 2 <= m <= 30:
        raise ValueError(f"m must be in [2, 30], got {m}")
    return PrivacyProfile(tuple((2.0 ** -(m - 1 - k), 2 ** (m - 1 - k)) for k in range(m)))


def is_equal_revenue(profile: PrivacyProfile) -> bool:
    m = profile.m
    if profile.public_count or not 2 <= m <= 30:
        return False
    return profile == make_equal_revenue(m)


def ridge_n2(n1: float, eps1: float) -> float:
    """Public count at which private-only and public-only risks coincide."""
    return n1 / (1.0 + 8.0 / (n1 * eps1 * eps1))


def harmonic(n: int) -> float:
    """``H_n = sum_{k<=n} 1/k``.

    Correctly rounded summation up to 10**4 terms; beyond that the asymptotic
    series, whose truncation error is far below double precision there.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= 10_000:
        return math.fsum(1.0 / k for k in range(n, 0, -1))
    x = float(n)
    x2 = x * x
    return (math.log(x) + EULER_GAMMA + 1 / (2 * x) - 1 / (12 * x2)
            + 1 / (120 * x2 * x2) - 1 / (252 * x2 * x2 * x2))


def effective_levels(profile: PrivacyProfile) -> int:
    """Distinct levels with public records counted as one."""
    return profile.m + (1 if profile.public_count else 0)


def select_threshold_for_tau(profile: PrivacyProfile, tau: float) -> tuple[float, float]:
    """Threshold maximizing ``u_j = (n - j + 1) * clipped_j`` over sorted clipped budgets.

    Within a run of equal clipped values the first index dominates, so only
    the distinct values are scanned. Ties go to the largest clipped value.
    Returns ``(eps_star, u_star)``; ``u_star == eps_star * n_at_threshold(eps_star)``.
    """
    if not (math.isfinite(tau) and tau > 0):
        raise ValueError(f"tau must be positive and finite, got {tau}")
    values: list[tuple[float, int]] = []
    at_tau = profile.public_count
    for eps, count in profile.levels:
        if eps < tau:
            values.append((eps, count))
        else:
            at_tau += count
    if at_tau:
        values.append((tau, at_tau))
    remaining = profile.total_count
    best_eps, best_u = None, -INF
    for v, count in values:
        u = remaining * v
        if u >= best_u:
            best_eps, best_u = v, u
        remaining -= count
    return best_eps, best_u


@dataclass(frozen=True)
class BoundCheck:
    name: str
    kind: str  # "upper" or "lower"
    bound: float
    applicable: bool
    satisfied: bool


@dataclass(frozen=True)
class BoundReport:
    profile: dict
    m: int
    n: int
    ratio: float
    checks: tuple[BoundCheck, ...] = field(default_factory=tuple)
    m_convention: str = "public records count as one level"

    @property
    def ok(self) -> bool:
        return all(c.satisfied for c in self.checks if c.applicable)

    def check(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "m": self.m,
            "n": self.n,
            "ratio": self.ratio,
            "m_convention": self.m_convention,
            "ok": self.ok,
            "checks": [
                {"name": c.name, "kind": c.kind, "bound": c.bound,
                 "applicable": c.applicable, "satisfied": c.satisfied}
                for c in self.checks
            ],
        }


def general_upper_bound(profile: PrivacyProfile) -> float:
    n = profile.total_count
    m = effective_levels(profile)
    return min((1.0 + math.log2(n)) ** 2, float(m * m))


def _upper(name, r, bound, applicable):
    return BoundCheck(name, "upper", bound, applicable, r <= bound * (1 + REL_TOL))


def verify_bounds(profile: PrivacyProfile) -> BoundReport:
    """Compute the ratio and test every bound, flagging which ones apply."""
    r = risk_ratio(profile).ratio
    one_plus_public = profile.m == 1 and profile.public_count > 0
    two_private = profile.m == 2 and profile.public_count == 0
    checks = [
        _upper("public_private_factor2", r, 2.0, one_plus_public),
        _upper("two_level_factor4", r, 4.0, two_private),
        _upper("general_upper", r, general_upper_bound(profile), True),
    ]
    er = is_equal_revenue(profile)
    lower = profile.m**2 / 5.0
    checks.append(BoundCheck("equal_revenue_lower", "lower", lower, er,
                             r >= lower * (1 - REL_TOL)))
    return BoundReport(profile.to_dict(), effective_levels(profile), profile.total_count,
                       r, tuple(checks))


def random_profile(
    rng: np.random.Generator,
    *,
    max_levels: int = 12,
    eps_range: tuple[float, float] = (1e-4, 1e2),
    count_range: tuple[float, float] = (1, 1e6),
    public_prob: float = 0.5,
    levels: int | None = None,
) -> PrivacyProfile:
    """Random profile: level count uniform (unless ``levels`` is given), budgets
    and counts log-uniform. Duplicate budget draws merge, so a profile can end
    up with fewer levels than requested.
    """
    m = int(rng.integers(1, max_levels + 1)) if levels is None else levels
    lo, hi = np.log(eps_range)
    eps = np.unique(np.exp(rng.uniform(lo, hi, m)))
    clo, chi = np.log(count_range)
    counts = np.rint(np.exp(rng.uniform(clo, chi, eps.size))).astype(int)
    public = 0
    if rng.random() < public_prob:
        public = int(np.rint(np.exp(rng.uniform(clo, chi))))
    return PrivacyProfile(tuple(zip(eps.tolist(), np.maximum(counts, 1).tolist())), public)


def _line(suite, instance, r, bound, kind, **extra) -> dict:
    ok = r <= bound * (1 + REL_TOL) if kind == "upper" else r >= bound * (1 - REL_TOL)
    margin = bound - r if kind == "upper" else r - bound
    return {"suite": suite, "instance": instance, "ratio": r, "bound": bound,
            "kind": kind, "margin": margin, "ok": bool(ok), **extra}


def check_thm1(instances: int = 400, seed: int = 0) -> Iterator[dict]:
    """Public-plus-one-level grid; ``instances`` cells split over four public counts."""
    side = max(2, math.ceil(math.sqrt(instances / 4)))
    k = 0
    for n2 in (1, 12, 100, 1000):
        for n1 in np.geomspace(1e2, 1e7, side):
            for eps1 in np.geomspace(1e-4, 1.0, side):
                p = make_public_private(int(round(n1)), float(eps1), n2)
                r = risk_ratio(p).ratio
                yield _line("thm1", k, r, 2.0, "upper", profile=p.to_dict())
                k += 1


def check_thm2(instances: int = 10_000, seed: int = 0) -> Iterator[dict]:
    """Random two-level profiles, budgets log-uniform in [1e-4, 1e2], counts in [1, 1e6]."""
    rng = np.random.default_rng(seed)
    k = 0
    while k < instances:
        e1, e2 = np.sort(np.exp(rng.uniform(np.log(1e-4), np.log(1e2), 2)))
        if e1 == e2:
            continue
        n1, n2 = np.rint(np.exp(rng.uniform(0, np.log(1e6), 2))).astype(int)
        p = make_two_level(int(n1), float(e1), int(n2), float(e2))
        yield _line("thm2", k, risk_ratio(p).ratio, 4.0, "upper", profile=p.to_dict())
        k += 1


def check_thm34(m_max: int = 14) -> Iterator[dict]:
    """Equal-revenue sandwich for m = 2..m_max, plus ``eps * n_eps < 2`` per level."""
    for m in range(2, m_max + 1):
        p = make_equal_revenue(m)
        r = risk_ratio(p).ratio
        yield _line("thm3", m, r, m * m / 5.0, "lower", m=m)
        yield _line("thm4", m, r, general_upper_bound(p), "upper", m=m)
        revenue = max(e * n_at_threshold(p, e) for e in p.epsilons)
        line = _line("saturation", m, revenue, 2.0, "upper", m=m)
        line["ok"] = revenue < 2.0  # strict
        yield line


def check_lemma(instances: int = 1000, seed: int = 0, taus_per_profile: int = 10) -> Iterator[dict]:
    """Threshold-selection lemma on random profiles and random ``tau``.

    Two lines per (profile, tau): the revenue gap ``s_tau / (eps* n_eps*)``
    against ``min(m, H_n)``, and the risk gap against ``min(m, H_n)**2``.
    """
    rng = np.random.default_rng(seed)
    for k in range(instances):
        p = random_profile(rng)
        m = effective_levels(p)
        h = harmonic(p.total_count)
        factor = min(float(m), h)
        for tau in np.exp(rng.uniform(np.log(1e-5), np.log(1e3), taus_per_profile)):
            tau = float(tau)
            eps_star, u_star = select_threshold_for_tau(p, tau)
            s = clipped_sums(p, tau).s_tau
            revenue = eps_star * n_at_threshold(p, eps_star)
            yield _line("lemma_revenue", k, s / revenue, factor, "upper", tau=tau, eps_star=eps_star)
            gap = mse_threshold_at(p, eps_star) / mse_affine_at(p, tau)
            yield _line("lemma_risk", k, gap, factor * factor, "upper", tau=tau, eps_star=eps_star)


SUITES = {
    "thm1": lambda instances, seed: check_thm1(instances, seed),
    "thm2": lambda instances, seed: check_thm2(instances, seed),
    "thm34": lambda instances, seed: check_thm34(),
    "lemma": lambda instances, seed: check_lemma(instances, seed),
}
