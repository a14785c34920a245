import pytest

from matchlab.market import Market, Matching, PreferenceProfile


@pytest.fixture
def e1():
    """2x2 instance with two stable matchings.

    d1: h1 > h2, d2: h2 > h1, h1: d2 > d1, h2: d1 > d2 (indices 0-based here).
    """
    return PreferenceProfile.from_lists([[0, 1], [1, 0]], [[1, 0], [0, 1]])


@pytest.fixture
def mu_d():
    return Matching.from_pairs(Market(2, 2), [(0, 0), (1, 1)])


@pytest.fixture
def mu_h():
    return Matching.from_pairs(Market(2, 2), [(0, 1), (1, 0)])


@pytest.fixture
def one_by_two():
    """One doctor preferring h1 to h2; both hospitals rank the doctor."""
    return PreferenceProfile.from_lists([[0, 1]], [[0], [0]])
