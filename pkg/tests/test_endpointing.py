import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streams2s.endpointing import EndpointState, covering_endpoint, observe_endpoint, update_fixation
from streams2s.models.common import InputError


def one_hot(n, i):
    a = np.zeros(n)
    a[i] = 1.0
    return a


def test_covering_endpoint_examples():
    assert covering_endpoint(one_hot(8, 3), 0.95) == 3
    assert covering_endpoint(np.full(10, 0.1), 0.95) == 9
    assert covering_endpoint(np.full(10, 0.1), 0.5) == 4
    assert covering_endpoint(np.array([0.5, 0.5, 0.0, 0.0]), 1.0) == 1
    assert covering_endpoint(np.array([1.0]), 0.95) == 0


def test_covering_endpoint_rejects_bad_input():
    with pytest.raises(InputError):
        covering_endpoint(np.array([]))
    with pytest.raises(InputError):
        covering_endpoint(np.ones(3) / 3, 0.0)
    with pytest.raises(InputError):
        covering_endpoint(np.ones(3) / 3, 1.5)


attention = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=1000, deadline=None)
@given(attention, st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_covering_endpoint_monotone_in_theta(raw, a, b):
    attn = np.array(raw) / sum(raw)
    lo, hi = sorted((a, b))
    t_lo, t_hi = covering_endpoint(attn, lo), covering_endpoint(attn, hi)
    assert 0 <= t_lo <= t_hi < attn.size
    assert attn[: t_hi + 1].sum() >= hi - 1e-9


def test_fixation_needs_two_equal_observations():
    s = update_fixation(EndpointState(), one_hot(40, 5), 40, delta=20)
    assert s.t_c == 5 and not s.fixed
    s = update_fixation(s, one_hot(50, 5), 50, delta=20)
    assert s.fixed and s.t_c == 5 and s.last_observed_t == 50


def test_fixation_requires_delta_gap():
    s = update_fixation(EndpointState(), one_hot(20, 5), 20, delta=20)
    s = update_fixation(s, one_hot(25, 5), 25, delta=20)
    assert s.t_c == 5 and not s.fixed
    s = update_fixation(s, one_hot(26, 5), 26, delta=20)
    assert s.fixed


def test_moving_endpoint_does_not_fix():
    s = update_fixation(EndpointState(), one_hot(40, 5), 40, delta=0)
    s = update_fixation(s, one_hot(45, 6), 45, delta=0)
    assert s.t_c == 6 and not s.fixed


def test_fixed_is_sticky():
    s = observe_endpoint(EndpointState(), 3, 30, 10)
    s = observe_endpoint(s, 3, 31, 10)
    assert s.fixed
    s = update_fixation(s, one_hot(60, 50), 60, delta=10)
    assert s.fixed and s.t_c == 3 and s.last_observed_t == 60


def test_infinite_delta_never_fixes():
    s = EndpointState()
    for t in range(10, 200, 10):
        s = observe_endpoint(s, 2, t, float("inf"))
    assert not s.fixed


def test_frontier_must_not_move_back():
    s = observe_endpoint(EndpointState(), 3, 30, 10)
    with pytest.raises(InputError):
        observe_endpoint(s, 3, 29, 10)


observations = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 8)), min_size=1, max_size=25)


@settings(max_examples=1000, deadline=None)
@given(observations, st.integers(0, 20))
def test_fixation_never_unfixes(trace, delta):
    s, t = EndpointState(), 1
    fixed_at = None
    for t_c, step in trace:
        t += step
        s = update_fixation(s, one_hot(t, min(t_c, t - 1)), t, delta=delta)
        if fixed_at is not None:
            assert s.fixed and s.t_c == fixed_at
        elif s.fixed:
            fixed_at = s.t_c
            assert s.t_c < t - delta
        assert s.last_observed_t == t
