"""Mean estimation under heterogeneous privacy budgets: threshold vs. affine estimators."""

from .optimize import (
    AffinePlan,
    RiskReport,
    optimize_affine,
    optimize_threshold,
    public_private_affine,
    ratio,
    two_level_affine_closed_form,
)
from .profile import (
    ClippedStats,
    PrivacyProfile,
    ProfileError,
    clipped_sums,
    mse_affine_at,
    mse_threshold_at,
    n_at_threshold,
)

__all__ = [
    "AffinePlan",
    "ClippedStats",
    "PrivacyProfile",
    "ProfileError",
    "RiskReport",
    "clipped_sums",
    "mse_affine_at",
    "mse_threshold_at",
    "n_at_threshold",
    "optimize_affine",
    "optimize_threshold",
    "public_private_affine",
    "ratio",
    "two_level_affine_closed_form",
]
