import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from png_toda import simulate as S
from png_toda.closedforms import flat_toeplitz_hankel
from png_toda.heightfn import NEG_INF, HeightFunction, flat, narrow_wedge, two_step

PRESETS = [flat(), narrow_wedge(), two_step()]


def empty_field(h, t, xs):
    return S.PoissonField(0, 0, t, S.cone_region(h, t, xs), np.zeros((0, 2)))


def one_point_field(h, t, xs, tau, y):
    return S.PoissonField(0, 0, t, S.cone_region(h, t, xs), np.array([[tau, y]]))


@pytest.mark.parametrize("h", PRESETS, ids=["flat", "wedge", "two-step"])
def test_empty_field_gives_running_max(h):
    t, xs = 0.8, [-0.5, 0.3, 1.2]
    f = empty_field(h, t, xs)
    expected = [h.running_max(t, x) for x in xs]
    assert list(S.sample_event_driven(h, t, xs, f)) == expected
    assert list(S.sample_lastpassage(h, t, xs, f)) == expected


def test_single_nucleation_on_flat():
    t, x = 1.0, 0.2
    f = one_point_field(flat(), t, [x], t / 2, x)
    assert S.sample_event_driven(flat(), t, [x], f)[0] == 1
    assert S.sample_lastpassage(flat(), t, [x], f)[0] == 1


def test_nucleation_on_minus_infinity_is_ignored():
    t = 1.0
    f = S.PoissonField(0, 0, t, (S.Lens(-5, 5, -5, 5),), np.array([[0.2, 0.9]]))
    assert S.sample_event_driven(narrow_wedge(), t, [0.0], f)[0] == 0
    assert S.sample_event_driven(narrow_wedge(), t, [1.5], f)[0] == NEG_INF


def test_profile_collisions():
    # valley between equal plateaus closes and merges
    p = S.Profile([0.0, 1.0], [1, 0, 1])
    p.advance(0.6)
    assert p.P == [] and p.V == [1]
    # valley between unequal plateaus leaves one step, moving with the higher side
    p = S.Profile([0.0, 1.0], [2, 0, 1])
    p.advance(0.5)
    assert p.V == [2, 1] and p.P == [pytest.approx(0.5)]
    p.advance(1.0)
    assert p.P == [pytest.approx(1.0)]


def test_profile_spike_expands():
    p = S.Profile.from_height(narrow_wedge(0.0, 3))
    assert p.P == [0.0, 0.0] and p.V == [NEG_INF, 3, NEG_INF]
    p.advance(0.5)
    assert p.P == [-0.5, 0.5]
    assert p.eval(0.5) == 3 and p.eval(0.51) == NEG_INF


def test_longest_chain():
    assert S.longest_chain([]) == 0
    assert S.longest_chain([3, 1, 2, 5, 4]) == 3
    assert S.longest_chain([5, 4, 3]) == 1


def test_field_density():
    t, lens = 1.0, S.Lens(-math.inf, math.inf, -2.0, 2.0)
    counts = [len(S.poisson_field(t, (lens,), 9, i)) for i in range(3000)]
    area = t * 4.0 + t * t
    assert abs(np.mean(counts) - 2 * area) < 4 * math.sqrt(2 * area / 3000)


def test_field_points_inside_region():
    t = 1.3
    h = two_step()
    f = S.field_for(h, t, [0.0, 0.8], 4, 2)
    tau, y = f.points[:, 0], f.points[:, 1]
    assert np.all(np.diff(tau) >= 0)
    inside = np.zeros(len(f), dtype=bool)
    for x in (0.0, 0.8):
        inside |= np.abs(y - x) <= t - tau
    assert inside.all()


def test_field_must_cover_cones():
    f = S.field_for(flat(), 1.0, [0.0], 1)
    with pytest.raises(ValueError):
        S.sample_lastpassage(flat(), 1.0, [0.5], f)
    with pytest.raises(ValueError):
        S.sample_event_driven(flat(), 0.5, [0.0], f)


def test_streams_do_not_overlap():
    a = S.sample_rng(3, 5, 0).integers(0, 2 ** 63, 4000)
    b = S.sample_rng(3, 5, 1).integers(0, 2 ** 63, 4000)
    c = S.sample_rng(3, 6, 0).integers(0, 2 ** 63, 4000)
    assert not set(a) & set(b) and not set(a) & set(c)


def test_batch_reproducible_and_ordered():
    a = S.sample_batch(two_step(), 0.7, [0.0, 0.5], 300, seed=8)
    b = S.sample_batch(two_step(), 0.7, [0.0, 0.5], 300, seed=8)
    assert np.array_equal(a.heights, b.heights)
    one = S.sample_lastpassage(two_step(), 0.7, [0.0, 0.5], S.field_for(two_step(), 0.7, [0.0, 0.5], 8, 123))
    assert np.array_equal(a.heights[123], one)


def test_batch_methods_agree():
    a = S.sample_batch(two_step(), 0.9, [0.1, 0.7], 500, seed=2, method="event")
    b = S.sample_batch(two_step(), 0.9, [0.1, 0.7], 500, seed=2, method="lastpassage")
    assert np.array_equal(a.heights, b.heights)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("PNG_TODA_THREADS", "3")
    assert S.default_workers() == 3
    monkeypatch.setenv("PNG_TODA_THREADS", "x")
    assert S.default_workers() == 1


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32), st.sampled_from(range(3)), st.floats(0.1, 2.0))
def test_pathwise_agreement(seed, k, t):
    h = PRESETS[k]
    xs = [-0.6, 0.1, 0.9]
    f = S.field_for(h, t, xs, seed)
    assert np.array_equal(S.sample_event_driven(h, t, xs, f), S.sample_lastpassage(h, t, xs, f))


profiles = st.builds(
    lambda left, steps: HeightFunction(left, sorted({round(x, 2): v for x, v in steps}.items())),
    st.integers(-2, 2),
    st.lists(st.tuples(st.floats(-2, 2), st.integers(-2, 2)), max_size=4),
)


@settings(max_examples=40)
@given(profiles, st.integers(1, 3), st.integers(0, 2 ** 32))
def test_monotone_coupling(h, k, seed):
    t, xs = 1.0, [-0.5, 0.4]
    f = S.poisson_field(t, (S.Lens(-math.inf, math.inf, -0.5, 0.4),), seed)
    low = S.sample_event_driven(h, t, xs, f)
    high = S.sample_event_driven(h.raise_by(k), t, xs, f)
    assert np.all(high >= low)
    assert np.all(S.sample_lastpassage(h.raise_by(k), t, xs, f) == high)


def test_below_floor_estimate_is_zero():
    p, se = S.estimate_cdf(two_step(), 0.5, [0.7], [0], 200, seed=1)
    assert p == 0.0 and se == 0.0


@pytest.mark.slow
def test_narrow_wedge_level_zero_estimate():
    p, se = S.estimate_cdf(narrow_wedge(), 1.0, [0.0], [0], 100000, seed=1)
    assert abs(p - math.exp(-1)) < 4 * se


@pytest.mark.slow
def test_flat_estimate_against_closed_form():
    p, se = S.estimate_cdf(flat(), 0.8, [0.0], [1], 200000, seed=2)
    assert abs(p - flat_toeplitz_hankel(0.8, 1)) < 4 * se


def test_invariance_at_time_zero_keeps_profile():
    h0 = S.random_walk_profile(1.0, 5.0, S.sample_rng(1, 0, S.DATA_STREAM))
    prof = S.evolve(h0, 0.0, S.poisson_field(0.0, (), 1))
    for x in np.linspace(-4.9, 4.9, 97):
        assert prof.eval(x) == h0(x)
    assert h0(0.0) == 0


def test_invariance_statistics():
    res = S.invariance_test(1.0, 8.0, 1.0, 300, seed=12)
    assert res.p_value > 1e-3
    assert abs(res.mean_increment) < 4 * res.increment_stderr + 1e-12
    res0 = S.invariance_test(1.0, 8.0, 0.0, 300, seed=12)
    assert res0.p_value > 1e-3


def test_skew_reversal_symmetric_case():
    # f = g = narrow wedge: both sides are P(no point in the rhombus) = e^{-t^2}
    res = S.skew_reversal_test(narrow_wedge(), narrow_wedge(), 1.0, 20000, seed=3)
    assert abs(res.z) < 4
    assert res.fredholm == pytest.approx(math.exp(-1), abs=1e-10)
    assert abs(res.lhs - math.exp(-1)) < 4 * res.lhs_stderr


def test_skew_reversal_flat_and_wedge():
    res = S.skew_reversal_test(flat(-2), narrow_wedge(), 1.0, 20000, seed=4)
    assert abs(res.z) < 4
    assert abs(res.lhs - res.fredholm) < 4 * res.lhs_stderr
    assert abs(res.rhs - res.fredholm) < 4 * res.rhs_stderr


def test_skew_reversal_needs_finite_support():
    with pytest.raises(ValueError):
        S.skew_reversal_test(flat(), flat(), 1.0, 10, seed=0)


def test_reflection_and_shift():
    assert S.reflection_test(two_step(), 1.0, [0.3, 0.8], 10000, seed=4).p_value > 1e-3
    assert S.shift_test(two_step(), 1.0, [0.3, 0.8], 0.7, 10000, seed=4).p_value > 1e-3


def test_homogeneity_detects_difference():
    rng = np.random.default_rng(0)
    a = rng.poisson(2.0, (3000, 1))
    b = rng.poisson(2.4, (3000, 1))
    assert S.homogeneity_test(a, b).p_value < 1e-6
    assert S.homogeneity_test(a, a).p_value == pytest.approx(1.0)
