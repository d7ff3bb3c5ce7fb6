import numpy as np
import pytest

from png_toda.closedforms import extended_bessel_kernel
from png_toda.fredholm import fredholm_det
from png_toda.heightfn import flat, narrow_wedge, two_step
from png_toda.kernel import (conjugator_tail, extended_block, extended_block_raw, matrix_kernel,
                             theta_conjugate)
from png_toda.walk_ops import Window, heat_kernel


@pytest.mark.parametrize("h", [narrow_wedge(), flat(), two_step()], ids=["wedge", "flat", "two-step"])
@pytest.mark.parametrize("xi, xj", [(0.1, 0.4), (0.4, 0.1), (0.2, 0.2)])
def test_block_matches_four_factor_form(h, xi, xj):
    w = Window(1, 10)
    a = extended_block(h, 0.6, xi, xj, w).entries
    b = extended_block_raw(h, 0.6, xi, xj, w).entries
    assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("xi, xj", [(0.2, -0.3), (-0.3, 0.2), (0.0, 0.0)])
def test_narrow_wedge_block_matches_bessel_sum(xi, xj):
    w = Window(1, 8)
    a = extended_block(narrow_wedge(), 1.0, xi, xj, w).entries
    b = extended_bessel_kernel(1.0, xi, xj, 1, 8, 1, 8)
    assert np.max(np.abs(a - b)) < 1e-13


def test_block_at_time_zero_is_triangular():
    # at t = 0 and heights above h(x_i), K(x_i, .; x_j, .) vanishes unless x_i < x_j
    w = Window(2, 7)
    assert np.all(extended_block(two_step(), 0.0, 0.7, 0.2, w).entries == 0)
    same = extended_block(two_step(), 0.0, 0.3, 0.3, w).entries
    assert np.max(np.abs(same)) < 1e-15


def test_block_at_time_zero_hit_minus_heat():
    h = two_step()
    w = Window(0, 5)
    k = extended_block(h, 0.0, 0.3, 1.5, w).entries
    from png_toda.hit import nohit
    assert np.allclose(k, -nohit(h, 0.3, 1.5, w).entries, atol=1e-15)


def test_matrix_kernel_layout():
    K = matrix_kernel(two_step(), 0.5, [0.0, 0.8], [1, 2], M=12)
    assert K.n == 2 and K.size == 12 and K.matrix().shape == (24, 24)
    direct = extended_block(two_step(), 0.5, 0.0, 0.8, Window(2, 13), Window(3, 14)).entries
    assert np.array_equal(K.block(0, 1).entries, direct)


def test_matrix_kernel_validates():
    with pytest.raises(ValueError):
        matrix_kernel(flat(), 1.0, [0.5, 0.1], [1, 1])
    with pytest.raises(ValueError):
        matrix_kernel(flat(), 1.0, [0.1], [1, 1])


def test_far_apart_points_give_zero_block():
    K = matrix_kernel(flat(), 0.5, [-1.0, 1.0], [1, 1], M=10)
    assert np.all(K.block(1, 0).entries == 0)


@pytest.mark.parametrize("h, xs, rs", [(two_step(), [0.2, 0.9], [2, 2]), (narrow_wedge(), [-0.3, 0.4], [1, 2]),
                                       (flat(), [0.0, 0.3], [1, 1])])
def test_theta_conjugation_keeps_determinant(h, xs, rs):
    K = matrix_kernel(h, 1.0, xs, rs)
    a = fredholm_det(K, with_q=False).value
    b = fredholm_det(theta_conjugate(K), with_q=False).value
    c = fredholm_det(theta_conjugate(theta_conjugate(K), inverse=True), with_q=False).value
    assert abs(a - b) < 1e-12 and abs(a - c) < 1e-13


def test_conjugator_tail_grows_with_time():
    assert conjugator_tail(0) == 0
    assert conjugator_tail(0.5) < conjugator_tail(1.0) < conjugator_tail(2.0)


def test_heat_part_only_for_ordered_points():
    h = flat(-50)
    w = Window(1, 6)
    k = extended_block(h, 0.0, 0.0, 0.5, w).entries
    assert np.allclose(k, -heat_kernel(0.5, w).entries, atol=1e-14)
