import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from alphafair.errors import BadGranularity, EpsilonTooLarge, NonPositiveUtility
from alphafair.welfare import (
    build_utility_matrix,
    is_log_branch,
    normalize_utilities,
    welfare,
    write_matrices_csv,
)

EPS = 1e-3
unit = st.floats(1e-3, 1.0)
alphas = st.floats(0.0, 8.0)


def test_utility_rows():
    assert build_utility_matrix([7], 100, 50).values[0].tolist()[:5] == [2, 4, 6, 0, 0]
    assert build_utility_matrix([7], 100, 50).values[0, 3:].sum() == 0
    assert build_utility_matrix([100], 100, 50).values[0].tolist() == list(range(2, 101, 2))
    assert build_utility_matrix([5], 8, 4).values[0].tolist() == [2, 4, 0, 0]
    assert build_utility_matrix([1], 8, 4).values[0].tolist() == [0, 0, 0, 0]


@pytest.mark.parametrize("M,m", [(100, 0), (10, 20), (100, 30)])
def test_bad_granularity(M, m):
    with pytest.raises(BadGranularity):
        build_utility_matrix([5], M, m)


def test_normalized_rows():
    U = build_utility_matrix([7, 8], 8, 4)
    Uh = normalize_utilities(U, epsilon=EPS)
    assert Uh.values[1, 3] == 1.0
    assert np.allclose(Uh.values[0], [2 / 7, 4 / 7, 6 / 7, EPS], rtol=0, atol=1e-15)
    with pytest.raises(EpsilonTooLarge):
        normalize_utilities(U, epsilon=0.5)
    with pytest.raises(EpsilonTooLarge):
        normalize_utilities(U, epsilon=0.0)


def test_worked_examples():
    assert welfare([1, 1], 0) == pytest.approx(2.0, rel=1e-12, abs=1e-12)
    assert welfare([1, 1], 1) == pytest.approx(0.0, abs=1e-12)
    assert welfare([0.5], 2) == pytest.approx(-2.0, rel=1e-12)
    assert welfare([0.25, 0.75], 0.5) == pytest.approx(2.7320508075688772, rel=1e-12)


def test_log_branch_seam():
    assert is_log_branch(1.0) and is_log_branch(1 + 5e-10) and not is_log_branch(1 + 1e-6)
    assert welfare([math.e], 1.0) == pytest.approx(1.0)


def test_domain_errors():
    assert welfare([], 2) == 0.0
    with pytest.raises(NonPositiveUtility):
        welfare([0.0, 1.0], 0.5)
    with pytest.raises(ValueError):
        welfare([1.0], -0.1)


@settings(max_examples=200, deadline=None)
@given(st.lists(unit, min_size=1, max_size=6), st.integers(0, 5), st.floats(1e-3, 0.5), alphas)
def test_monotone_in_each_coordinate(values, idx, bump, alpha):
    idx %= len(values)
    up = list(values)
    up[idx] = values[idx] + bump
    # the changed term rises strictly; in the sum it may be absorbed by a huge negative term
    assert welfare([up[idx]], alpha) > welfare([values[idx]], alpha)
    assert welfare(up, alpha) >= welfare(values, alpha)


@settings(max_examples=1000, deadline=None)
@given(unit, unit, st.floats(0.0, 1.0), alphas)
def test_concave_in_each_term(x, y, t, alpha):
    mid = t * x + (1 - t) * y
    lhs = welfare([mid], alpha)
    rhs = t * welfare([x], alpha) + (1 - t) * welfare([y], alpha)
    assert lhs >= rhs - 1e-9 * max(1.0, abs(rhs))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(unit, min_size=2, max_size=2), min_size=2, max_size=6))
def test_argmax_continuous_across_log_seam(candidates):
    """Rankings at alpha=1 match those just either side of it (up to near-ties)."""
    logs = [welfare(c, 1.0) for c in candidates]
    best = int(np.argmax(logs))
    runner = sorted(logs)[-2]
    assume(logs[best] - runner > 1e-4)
    for a in (1 - 1e-7, 1 + 1e-7):
        w = [welfare(c, a) for c in candidates]
        assert int(np.argmax(w)) == best


def test_matrices_csv(tmp_path):
    U = build_utility_matrix([5], 8, 4)
    Uh = normalize_utilities(U, epsilon=EPS)
    path = tmp_path / "m.csv"
    write_matrices_csv(U, Uh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,u_ij,u_hat_ij"
    assert lines[1] == "0,1,2,0.4" and lines[4] == "0,4,0,0.001"
