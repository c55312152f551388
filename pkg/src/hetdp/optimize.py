"""Exact optimization of the threshold and affine estimators.

The affine objective at clip level ``tau`` is piecewise rational between
consecutive budgets. On a piece where ``A`` records have budget >= tau and the
remaining records contribute ``B = sum(n*eps)`` and ``C = sum(n*eps**2)``, it
reads ``(C + A*tau**2 + 8) / (4*(B + A*tau)**2)``. Its derivative has the sign
of ``B*tau - C - 8``, so each piece is minimized at ``(C + 8) / B`` clamped to
the piece, or at the right end when ``B == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .profile import INF, PrivacyProfile, mse_affine_at, mse_threshold_at


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass(frozen=True)
class Segment:
    """One piece ``[lo, hi]`` of the affine objective (``hi`` may be inf)."""

    lo: float
    hi: float
    above: int  # A: records with budget >= tau on this piece, public included
    lin: float  # B
    quad: float  # C

    @property
    def stationary(self) -> float:
        """Unconstrained minimizer ``(C + 8) / B``; inf when ``B == 0``."""
        if self.lin == 0:
            return INF
        return (self.quad + 8.0) / self.lin

    def value(self, tau: float) -> float:
        if math.isinf(tau):
            return 1.0 / (4 * self.above) if self.above else INF
        denom = self.lin + self.above * tau
        return (self.quad + self.above * tau * tau + 8.0) / (4.0 * denom * denom)


def affine_segments(profile: PrivacyProfile) -> list[Segment]:
    """Pieces of the affine objective, ordered by ``tau``.

    The first piece starts at 0 (exclusive). A final unbounded piece exists only
    when the profile holds public records; without them the objective is flat
    past the largest budget.
    """
    eps = profile.epsilons
    counts = profile.counts
    above = profile.total_count
    lin = quad = 0.0
    lo = 0.0
    segs = []
    for e, c in zip(eps, counts):
        segs.append(Segment(lo, e, above, lin, quad))
        above -= c
        lin += c * e
        quad += c * e * e
        lo = e
    if profile.public_count:
        segs.append(Segment(lo, INF, above, lin, quad))
    return segs


@dataclass(frozen=True)
class AffinePlan:
    """Per-level weights and Laplace scale of a clipped-weight estimator.

    ``weights`` maps each budget (``inf`` for public records) to the weight of a
    single record at that budget.
    """

    tau_star: float
    weights: tuple[tuple[float, float], ...]
    eta: float
    mse: float

    def weight_for(self, eps: float) -> float:
        for e, w in self.weights:
            if e == eps:
                return w
        raise KeyError(eps)

    def to_dict(self) -> dict:
        return {
            "tau_star": _json_float(self.tau_star),
            "weights": [[_json_float(e), w] for e, w in self.weights],
            "eta": self.eta,
            "mse": _json_float(self.mse),
        }


def plan_for_tau(profile: PrivacyProfile, tau: float) -> AffinePlan:
    """Clipped-weight plan at a given ``tau`` (``inf`` allowed with public data)."""
    if math.isinf(tau):
        if not profile.public_count:
            raise ValueError("tau = inf requires public records")
        # limit of the clipped weights: all mass on public records, no noise
        weights = [(e, 0.0) for e in profile.epsilons]
        weights.append((INF, 1.0 / profile.public_count))
        return AffinePlan(INF, tuple(weights), 0.0, 1.0 / (4 * profile.public_count))
    s = sum(c * min(e, tau) for e, c in profile.levels) + profile.public_count * tau
    eta = 1.0 / s
    weights = [(e, min(e, tau) * eta) for e in profile.epsilons]
    if profile.public_count:
        weights.append((INF, tau * eta))
    return AffinePlan(tau, tuple(weights), eta, mse_affine_at(profile, tau))


def optimize_threshold(profile: PrivacyProfile) -> tuple[float, float]:
    """Best threshold and its MSE; ties go to the largest threshold.

    Only budgets present in the profile (and ``inf`` when public records exist)
    need checking: between budgets the count is constant and the risk decreases
    in the threshold.
    """
    candidates = list(profile.epsilons)
    if profile.public_count:
        candidates.append(INF)
    best_eps, best = None, INF
    for eps in candidates:
        val = mse_threshold_at(profile, eps)
        if val <= best:
            best_eps, best = eps, val
    return best_eps, best


def optimize_affine(profile: PrivacyProfile) -> AffinePlan:
    """Exact minimizer over ``tau`` of the clipped-weight affine risk.

    Ties go to the smallest ``tau``. An all-public profile has no finite
    minimizer; its plan is the noiseless empirical mean with ``tau_star = inf``.
    """
    best_tau, best = None, INF
    for seg in affine_segments(profile):
        cands = [seg.lo, seg.hi]
        stat = seg.stationary
        if math.isfinite(stat):
            cands.append(min(max(stat, seg.lo), seg.hi))
        for tau in sorted(cands):
            if tau <= 0:
                continue
            val = seg.value(tau)
            if val < best or (val == best and tau < best_tau):
                best_tau, best = tau, val
    plan = plan_for_tau(profile, best_tau)
    if math.isfinite(best_tau):
        # report the objective as evaluated from clipped sums, not the piece formula
        return AffinePlan(plan.tau_star, plan.weights, plan.eta, mse_affine_at(profile, best_tau))
    return plan


@dataclass(frozen=True)
class RiskReport:
    eps_star: float
    mse_thr: float
    tau_star: float
    mse_aff: float
    ratio: float

    def to_dict(self) -> dict:
        return {k: _json_float(getattr(self, k)) for k in
                ("eps_star", "mse_thr", "tau_star", "mse_aff", "ratio")}


def ratio(profile: PrivacyProfile) -> RiskReport:
    """Both optimal risks and the threshold-to-affine ratio."""
    eps_star, mse_thr = optimize_threshold(profile)
    plan = optimize_affine(profile)
    return RiskReport(eps_star, mse_thr, plan.tau_star, plan.mse, mse_thr / plan.mse)


def two_level_affine_closed_form(n1: int, eps1: float, n2: int, eps2: float) -> float:
    """Optimal affine risk for two finite budget levels.

    Below the switch point ``eps2 <= R*eps1`` with ``R = 1 + 8/(n1*eps1**2)``
    nothing is clipped; above it the larger budget is clipped to ``R*eps1``.
    """
    if not 0 < eps1 < eps2 < INF:
        raise ValueError("need 0 < eps1 < eps2 < inf")
    if n1 < 1 or n2 < 1:
        raise ValueError("counts must be >= 1")
    r = 1.0 + 8.0 / (n1 * eps1 * eps1)
    if eps2 <= r * eps1:
        return (n1 * eps1**2 + n2 * eps2**2 + 8.0) / (4.0 * (n1 * eps1 + n2 * eps2) ** 2)
    return r / (4.0 * (n1 + n2 * r))


def public_private_affine(n1: int, eps1: float, n2: int) -> float:
    """Optimal affine risk with ``n1`` private records at ``eps1`` and ``n2`` public ones.

    The inverse-variance combination of the private-only and public-only means.
    """
    if n1 < 1 or n2 < 1 or not eps1 > 0:
        raise ValueError("need n1, n2 >= 1 and eps1 > 0")
    priv = 1.0 / (4 * n1) + 2.0 / (n1 * eps1) ** 2
    pub = 1.0 / (4 * n2)
    return priv * pub / (priv + pub)
