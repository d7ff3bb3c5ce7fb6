import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import iv

from png_toda import closedforms as C

# [DERIVED] from the 40-digit sums over l <= 0 of J_{u-l}(2) J_{v-l}(2)
BESSEL_22 = 0.1423249556255626498589233926841910329753
BESSEL_23 = 0.05012708098446956850536563632037433465108
# [DERIVED] alpha_0(s = 1) = I_1(2)/I_0(2) from the degree-one monic polynomial
ALPHA0 = 0.6977746579640079820067905925517525994867


def test_narrow_wedge_level_zero():
    assert C.narrow_wedge_toeplitz(1.3, 0) == pytest.approx(math.exp(-1.69))


def test_narrow_wedge_level_one():
    assert C.narrow_wedge_toeplitz(0.9, 1) == pytest.approx(math.exp(-0.81) * iv(0, 1.8))


def test_flat_level_zero_and_one():
    t = 0.6
    assert C.flat_toeplitz_hankel(t, 0) == pytest.approx(math.exp(-2 * t * t))
    assert C.flat_toeplitz_hankel(t, 1) == pytest.approx(math.exp(-2 * t * t) * (iv(0, 4 * t) - iv(2, 4 * t)))


def test_negative_levels_have_zero_probability():
    assert C.narrow_wedge_toeplitz(1.0, -1) == 0.0 and C.flat_toeplitz_hankel(1.0, -1) == 0.0


def test_discrete_bessel_frozen():
    assert C.discrete_bessel_kernel(1.0, 2, 2) == pytest.approx(BESSEL_22, abs=1e-14)
    assert C.discrete_bessel_kernel(1.0, 2, 3) == pytest.approx(BESSEL_23, abs=1e-14)


@pytest.mark.parametrize("s", [0.4, 1.0, 2.2])
def test_discrete_bessel_forms_agree(s):
    for u in range(-2, 6):
        for v in range(-2, 6):
            assert C.discrete_bessel_kernel(s, u, v) == pytest.approx(C.discrete_bessel_series(s, u, v), abs=1e-11)


def test_discrete_bessel_small_s_vanishes():
    assert abs(C.discrete_bessel_kernel(1e-6, 1, 1)) < 1e-10
    assert abs(C.discrete_bessel_kernel(1e-6, 2, 3)) < 1e-10


@pytest.mark.parametrize("s, r", [(0.5, 2), (1.0, 3), (1.7, 5)])
def test_discrete_bessel_determinant(s, r):
    B = C.discrete_bessel_matrix(s, r + 1, r + 80)
    assert np.linalg.det(np.eye(80) - B) == pytest.approx(C.narrow_wedge_toeplitz(s, r), abs=1e-8)


def test_discrete_bessel_matrix_matches_pointwise():
    B = C.discrete_bessel_matrix(1.1, -1, 4)
    for i, u in enumerate(range(-1, 5)):
        for j, v in enumerate(range(-1, 5)):
            assert B[i, j] == pytest.approx(C.discrete_bessel_kernel(1.1, u, v), abs=1e-12)


def test_conjugation_leaves_determinant():
    # the off-axis kernel differs from an on-axis one by a diagonal similarity
    t, x = 1.0, 0.3
    K = C.extended_bessel_kernel(t, x, x, 2, 60, 2, 60)
    s = math.sqrt(t * t - x * x)
    B = C.discrete_bessel_matrix(s, 2, 60)
    assert abs(np.linalg.det(np.eye(59) - K) - np.linalg.det(np.eye(59) - B)) < 1e-10


def test_verblunsky_frozen_and_small_s():
    assert C.verblunsky(1.0, 0)[0] == pytest.approx(ALPHA0, abs=1e-14)
    assert C.verblunsky(1.0, 3)[-1] == -1.0
    assert max(abs(a) for a in C.verblunsky(1e-4, 5).alphas) < 1e-3


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_verblunsky_magnitude_identity(s):
    a = C.verblunsky(s, 6)
    for r in range(6):
        ratio = C.toeplitz_det(s, r + 2) * C.toeplitz_det(s, r) / C.toeplitz_det(s, r + 1) ** 2
        assert 1 - a[r] ** 2 == pytest.approx(ratio, abs=1e-9)


def test_verblunsky_magnitude_in_probability_form():
    # 1 - alpha_r^2 = F_r F_{r+2} / F_{r+1}^2 with F_r = e^{-s^2} D_r
    s = 1.2
    a = C.verblunsky(s, 4)
    F = [C.narrow_wedge_toeplitz(s, r) for r in range(7)]
    for r in range(4):
        assert 1 - a[r] ** 2 == pytest.approx(F[r] * F[r + 2] / F[r + 1] ** 2, abs=1e-10)


def test_dpii_small_s():
    assert C.dpII_residual(1e-5, 2) < 1e-12


def test_dpii_stable_under_enlargement():
    a = C.verblunsky(1.0, 4)
    b = C.verblunsky(1.0, 9)
    assert all(abs(a[r] - b[r]) < 1e-13 for r in range(5))


def test_ablowitz_ladik_order():
    rep = C.ablowitz_ladik_residual(1.0, 2, 1e-2)
    assert 1.9 < rep.richardson_order < 2.1


def test_flat_opuc_ratio():
    assert C.flat_opuc_ratio(0.8, 1) < 1e-7
    assert C.flat_opuc_ratio(0.8, 0) < 1e-7
    assert C.flat_opuc_ratio(1.5, 3) < 1e-7


def test_ill_conditioned_moment_system():
    with pytest.raises(C.ConditioningError):
        C.monic_opuc(5.0, 20, max_cond=1e6)


@given(st.floats(0.05, 2.5), st.integers(0, 8))
def test_toeplitz_positive(s, r):
    assert C.toeplitz_det(s, r) > 0
    assert C.toeplitz_hankel_det(s, r) > 0


@given(st.floats(0.1, 2.0), st.integers(0, 8))
def test_verblunsky_inside_disk(s, R):
    assert all(abs(a) < 1 for a in C.verblunsky(s, R).alphas)
