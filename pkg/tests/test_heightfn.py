import math

import pytest
from hypothesis import assume, given, strategies as st

from png_toda.heightfn import (NEG_INF, HeightFunction, flat, from_dict, narrow_wedge,
                               parse_initial_data, two_step)


def test_flat_is_constant():
    h = flat(3)
    assert h(-7.2) == 3 and h(0) == 3 and h(1e6) == 3


def test_narrow_wedge_values():
    h = narrow_wedge(0.5)
    assert h(0.5) == 0
    assert h(0.49) == NEG_INF and h(0.51) == NEG_INF


def test_two_step_upper_semicontinuous():
    h = two_step()
    assert h(-0.1) == 0 and h(0.0) == 1 and h(0.5) == 1
    # the jump down at 1 keeps the larger value at the breakpoint
    assert h(1.0) == 1 and h(1.01) == -1


def test_negate_is_lower_semicontinuous():
    g = two_step().negate()
    assert g(1.0) == -1 and g(0.0) == -1 and g(-1.0) == 0


def test_running_max():
    h = two_step()
    assert h.running_max(0.0, 2.0) == -1
    assert h.running_max(0.5, 1.4) == 1
    assert h.running_max(0.3, -0.5) == 0
    assert narrow_wedge().running_max(1.0, 1.0) == 0
    assert narrow_wedge().running_max(1.0, 1.01) == NEG_INF


def test_intervals_and_support():
    h = HeightFunction(NEG_INF, [(0.0, 2), (1.0, NEG_INF)], [(3.0, 5)])
    assert sorted(h.intervals()) == [(0.0, 1.0, 2), (3.0, 3.0, 5)]
    assert h.finite_support() == (0.0, 3.0)
    assert flat().finite_support() is None


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        HeightFunction(0, [(1.0, 1), (0.0, 2)])
    with pytest.raises(ValueError):
        HeightFunction(0, [(0.0, 1.5)])
    with pytest.raises(ValueError):
        HeightFunction(NEG_INF)


def test_parse_presets():
    assert parse_initial_data("flat") == flat()
    assert parse_initial_data("flat:-2") == flat(-2)
    assert parse_initial_data("narrow-wedge:0.25") == narrow_wedge(0.25)
    assert parse_initial_data("two-step") == two_step()
    with pytest.raises(ValueError):
        parse_initial_data("wedge")
    with pytest.raises(ValueError):
        parse_initial_data("two-step:3")


def test_dict_roundtrip():
    h = HeightFunction(0, [(0.0, 1), (1.0, NEG_INF)], [(2.0, 4)])
    assert from_dict(h.to_dict()) == h


profiles = st.builds(
    lambda left, steps, spikes: HeightFunction(
        left,
        sorted({round(x, 3): v for x, v in steps}.items()),
        sorted({round(x, 3): v for x, v in spikes}.items())),
    st.integers(-3, 3),
    st.lists(st.tuples(st.floats(-5, 5), st.integers(-3, 3)), max_size=5),
    st.lists(st.tuples(st.floats(-5, 5), st.integers(-3, 6)), max_size=2),
)
points = st.floats(-6, 6)


@given(profiles, points)
def test_reflect_twice_is_identity(h, x):
    assert h.reflect().reflect()(x) == h(x)
    assert h.reflect()(-x) == h(x)


@given(profiles, points, st.floats(-3, 3))
def test_shift(h, x, y):
    assume((x + y) - y == x)  # x + y must not round onto a breakpoint
    assert h.shift(y)(x + y) == h(x)


@given(profiles, st.lists(points, min_size=1, max_size=20))
def test_eval_many_matches_eval(h, xs):
    assert list(h.eval_many(xs)) == [float(h(x)) for x in xs]


@given(profiles, points, st.floats(0, 3), st.floats(0, 3))
def test_running_max_monotone_in_time(h, x, s, t):
    lo, hi = sorted((s, t))
    assert h.running_max(lo, x) <= h.running_max(hi, x)
    assert h.running_max(0.0, x) == h(x)


@given(profiles, points)
def test_upper_semicontinuity(h, x):
    # the value at x dominates values just beside it
    eps = 1e-9
    assert h(x) >= h(x - eps) or any(abs(p - x) < 2 * eps for p in h.critical_points())
    assert h(x) >= h.piece_value(x)
    assert math.isfinite(h(x)) or h(x) == NEG_INF
