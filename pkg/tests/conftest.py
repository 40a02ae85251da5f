import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dyadic_bellman import ProbTree, StepFunction

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def step_functions(draw, max_pieces=12, lo=1e-2, hi=1e2):
    n = draw(st.integers(1, max_pieces))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    lengths = np.array(raw) / sum(raw)
    vals = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n))
    return StepFunction(lengths, np.sort(vals)[::-1])


@st.composite
def trees_with_values(draw, max_depth=3, lo=1e-2, hi=1e2):
    arity = draw(st.integers(2, 3))
    depth = draw(st.integers(1, max_depth))
    tree = ProbTree.uniform(arity, depth)
    vals = draw(st.lists(st.floats(lo, hi), min_size=tree.n_leaves, max_size=tree.n_leaves))
    return tree, np.array(vals)


@pytest.fixture
def two_step():
    return StepFunction([0.5, 0.5], [2.0, 1.0])


@pytest.fixture
def four_step():
    return StepFunction([0.25] * 4, [4.0, 2.0, 1.0, 1.0])


@pytest.fixture
def binary2():
    return ProbTree.uniform(2, 2)
