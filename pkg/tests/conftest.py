import math

import pytest
from hypothesis import strategies as st

from hetdp.bounds import make_equal_revenue
from hetdp.profile import PrivacyProfile


@pytest.fixture
def example_profile():
    return PrivacyProfile.from_pairs([(0.5, 1), (1.0, 1)])


@pytest.fixture
def er3():
    return make_equal_revenue(3)


@pytest.fixture
def tight_public():
    return PrivacyProfile(((0.001, 10_000),), 12)


budgets = st.floats(min_value=1e-3, max_value=1e2, allow_nan=False, allow_infinity=False)


@st.composite
def profiles(draw, max_levels=8, allow_public=True, max_count=1000):
    eps = draw(st.lists(budgets, min_size=0 if allow_public else 1, max_size=max_levels, unique=True))
    counts = draw(st.lists(st.integers(1, max_count), min_size=len(eps), max_size=len(eps)))
    public = draw(st.integers(0, max_count)) if allow_public else 0
    if not eps and public == 0:
        public = 1
    return PrivacyProfile.from_pairs(list(zip(eps, counts)), public)


def rel_close(a, b, tol):
    return math.isclose(a, b, rel_tol=tol, abs_tol=0.0)
