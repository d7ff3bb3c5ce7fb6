"""Closed forms for narrow wedge and flat data, and the OPUC side of the story.

The weight on the unit circle is phi_s(z) = exp(s (z + 1/z)), with moments
c_k = I_k(2s).  D_n(s) below is the n x n Toeplitz determinant det(c_{i-j}).
Verblunsky coefficients follow the convention alpha_r = -Phi_{r+1}(0) for
the monic orthogonal polynomials Phi_k, with alpha_{-1} = -1; with this sign
the discrete Painleve II and Ablowitz-Ladik residuals vanish.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, iv, jv

from .integrable import ResidualReport


def _det(a):
    sign, logdet = np.linalg.slogdet(a)
    return float(sign * math.exp(logdet))


def toeplitz_det(s, n):
    """D_n(s) = det(I_{i-j}(2s))_{i,j<n}; equal to 1 for n <= 0."""
    if n <= 0:
        return 1.0
    i = np.arange(n)
    return _det(iv(i[:, None] - i[None, :], 2 * s))


def narrow_wedge_toeplitz(s, r):
    """F_r(s) = e^{-s^2} det(I_{i-j}(2s))_{r x r}: P(h(t, x) <= r) from a narrow wedge, s^2 = t^2 - x^2."""
    if r < 0:
        return 0.0
    return math.exp(-s * s) * toeplitz_det(s, r)


def toeplitz_hankel_det(s, n):
    """det(I_{i-j}(2s) - I_{i+j+2}(2s))_{i,j<n}; equal to 1 for n <= 0."""
    if n <= 0:
        return 1.0
    i = np.arange(n)
    return _det(iv(i[:, None] - i[None, :], 2 * s) - iv(i[:, None] + i[None, :] + 2, 2 * s))


def flat_toeplitz_hankel(t, r):
    """P(h(t, 0) <= r) from flat data: e^{-2t^2} det(I_{i-j}(4t) - I_{i+j+2}(4t))_{r x r}.

    In weight variables this is e^{-s^2/2} times the Toeplitz-plus-Hankel
    determinant at s = 2t.
    """
    if r < 0:
        return 0.0
    return math.exp(-2 * t * t) * toeplitz_hankel_det(2 * t, r)


# -- discrete Bessel kernel ------------------------------------------------------

def _dJ_dorder(n, x):
    """d/dnu J_nu(x) at integer nu = n >= 0, from the power series in x."""
    if n < 0:
        raise ValueError("order derivative implemented for n >= 0")
    half = 0.5 * x
    lh = math.log(half)
    total = []
    k = 0
    while True:
        lt = (2 * k + n) * lh - gammaln(k + 1) - gammaln(n + k + 1)
        term = (-1) ** k * math.exp(lt) * (lh - digamma(n + k + 1))
        total.append(term)
        if k > half * half and abs(term) < 1e-18:
            break
        k += 1
    return math.fsum(total)


def discrete_bessel_kernel(s, u, v):
    """B_s(u, v) through its integrable form; the diagonal uses order derivatives."""
    z = 2 * s
    if u != v:
        return s * (jv(u - 1, z) * jv(v, z) - jv(u, z) * jv(v - 1, z)) / (u - v)
    if s == 0:
        return 0.0 if u >= 1 else 1.0
    if u >= 1:
        return s * (jv(u, z) * _dJ_dorder(u - 1, z) - jv(u - 1, z) * _dJ_dorder(u, z))
    return discrete_bessel_series(s, u, v)


def discrete_bessel_series(s, u, v, tol=1e-18):
    """B_s(u, v) = sum_{l <= 0} J_{u-l}(2s) J_{v-l}(2s), summed until terms are negligible."""
    z = 2 * s
    acc = []
    l = 0
    while True:
        term = jv(u - l, z) * jv(v - l, z)
        acc.append(term)
        if -l > max(abs(u), abs(v)) + z and abs(term) < tol:
            break
        l -= 1
    return math.fsum(acc)


def discrete_bessel_matrix(s, lo, hi):
    """B_s on heights lo..hi."""
    u = np.arange(lo, hi + 1)
    z = 2 * s
    depth = int(hi - lo + 4 * z + 60)
    l = -np.arange(depth + max(0, -lo) + 1)
    a = jv(u[:, None] - l[None, :], z)
    return a @ a.T


def extended_bessel_kernel(t, xi, xj, lo_i, hi_i, lo_j, hi_j):
    """Narrow-wedge K^ext(x_i, u; x_j, v) as a sum of J-products, for |x_i|, |x_j| < t.

    A(u, l) = e^{2 x_i} ((t + x_i)/(t - x_i))^{(l-u)/2} J_{u-l}(2 s_i) and
    B(l, v) = e^{-2 x_j} ((t + x_j)/(t - x_j))^{(v-l)/2} J_{v-l}(2 s_j); the
    kernel is sum_{l <= 0} A B when x_i >= x_j and -sum_{l >= 1} A B otherwise.
    """
    si, sj = math.sqrt(t * t - xi * xi), math.sqrt(t * t - xj * xj)
    ri, rj = math.log((t + xi) / (t - xi)), math.log((t + xj) / (t - xj))
    u = np.arange(lo_i, hi_i + 1)
    v = np.arange(lo_j, hi_j + 1)
    depth = int(max(hi_i, hi_j) - min(lo_i, lo_j) + 4 * t + 80)
    if xi >= xj:
        l = -np.arange(depth + max(0, -min(lo_i, lo_j)) + 1)
        sign = 1.0
    else:
        l = np.arange(1, depth + max(hi_i, hi_j) + 1)
        sign = -1.0
    a = np.exp(2 * xi + 0.5 * ri * (l[None, :] - u[:, None])) * jv(u[:, None] - l[None, :], 2 * si)
    b = np.exp(-2 * xj + 0.5 * rj * (v[None, :] - l[:, None])) * jv(v[None, :] - l[:, None], 2 * sj)
    return sign * (a @ b)


# -- orthogonal polynomials on the unit circle ----------------------------------

class ConditioningError(RuntimeError):
    pass


def monic_opuc(s, k, max_cond=1e12):
    """Coefficients (z^0 .. z^k) of the monic orthogonal polynomial of degree k for phi_s."""
    if k == 0:
        return np.array([1.0])
    i = np.arange(k)
    gram = iv(i[:, None] - i[None, :], 2 * s)
    if np.linalg.cond(gram) > max_cond:
        raise ConditioningError(f"moment matrix too ill-conditioned at s={s}, k={k}")
    c = np.linalg.solve(gram, -iv(k - i, 2 * s))
    return np.append(c, 1.0)


@dataclass(frozen=True)
class VerblunskySequence:
    s: float
    alphas: tuple

    def __getitem__(self, r):
        return -1.0 if r == -1 else self.alphas[r]


def verblunsky(s, R):
    """alpha_0 .. alpha_R for phi_s."""
    alphas = tuple(float(-monic_opuc(s, r + 1)[0]) for r in range(R + 1))
    if any(abs(a) >= 1 for a in alphas):
        raise ConditioningError("Verblunsky coefficient left the unit disk")
    return VerblunskySequence(float(s), alphas)


def dpII_residual(s, r):
    """|-s (1 - a_r^2)(a_{r+1} + a_{r-1}) - (r + 1) a_r|."""
    a = verblunsky(s, r + 1)
    return abs(-s * (1 - a[r] ** 2) * (a[r + 1] + a[r - 1]) - (r + 1) * a[r])


def ablowitz_ladik_residual(s, r, delta=1e-2, with_order=True):
    """Central-difference residual of d/ds a_r = (1 - a_r^2)(a_{r+1} - a_{r-1})."""
    a = verblunsky(s, r + 1)
    rhs = (1 - a[r] ** 2) * (a[r + 1] - a[r - 1])

    def res(d):
        lhs = (verblunsky(s + d, r)[r] - verblunsky(s - d, r)[r]) / (2 * d)
        return abs(lhs - rhs)

    r1 = res(delta)
    order = math.log2(r1 / res(delta / 2)) if with_order else math.nan
    return ResidualReport(r1, delta, order, (s, r))


def opuc_norm(s, k):
    """Squared norm N_k = D_{k+1}/D_k of the degree-k monic polynomial."""
    return toeplitz_det(s, k + 1) / toeplitz_det(s, k)


def flat_opuc_ratio(s, r):
    """|T_r/T_{r+1} + a_{2r+3}(1 + b_{2r+2})| with T_n the Toeplitz-plus-Hankel determinant at s.

    b_k = -Phi_k(0) and a_k = -1/N_{k-1}.  Flat data at time t corresponds to s = 2t.
    """
    b = -monic_opuc(s, 2 * r + 2)[0]
    a = -1.0 / opuc_norm(s, 2 * r + 2)
    lhs = toeplitz_hankel_det(s, r) / toeplitz_hankel_det(s, r + 1)
    return abs(lhs + a * (1 + b))
