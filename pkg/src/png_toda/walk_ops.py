"""Kernels of the continuous-time simple random walk on the integers.

Every kernel here is Toeplitz: A(u, v) = a_{v-u}, with symbol sum_k a_k z^k.
The generator of the walk is Delta (symbol z + 1/z - 2) and the symmetric
difference 2*nabla has symbol z - 1/z, so

    e^{2t nabla + x Delta}(u, v) = e^{-2x} [z^{v-u}] exp((t+x) z + (x-t)/z).

Vectorized builders use scipy's exponentially scaled Bessel functions; the
power-series Bessel routines and the contour quadrature below are kept as
independent checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ive, jv


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")

    @property
    def size(self):
        return self.hi - self.lo + 1

    def heights(self):
        return np.arange(self.lo, self.hi + 1)

    def index(self, u):
        return u - self.lo

    def contains(self, other):
        return self.lo <= other.lo and other.hi <= self.hi

    def widen(self, below, above):
        return Window(self.lo - below, self.hi + above)


@dataclass(frozen=True, eq=False)
class IntegerKernel:
    """Dense kernel A(u, v) with u in ``window`` and v in ``cols`` (defaults to ``window``)."""

    window: Window
    entries: np.ndarray
    col_window: Window | None = None

    def __post_init__(self):
        shape = (self.window.size, self.cols.size)
        if self.entries.shape != shape:
            raise ValueError(f"entries have shape {self.entries.shape}, expected {shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("kernel has non-finite entries")

    @property
    def cols(self):
        return self.col_window if self.col_window is not None else self.window

    def __call__(self, u, v):
        return self.entries[u - self.window.lo, v - self.cols.lo]

    def __matmul__(self, other):
        if self.cols != other.window:
            raise ValueError("composition needs matching windows")
        return IntegerKernel(self.window, self.entries @ other.entries, other.col_window)

    def restrict(self, rows, cols=None):
        cols = rows if cols is None else cols
        if not (self.window.contains(rows) and self.cols.contains(cols)):
            raise ValueError("restriction outside the kernel window")
        i, j = rows.lo - self.window.lo, cols.lo - self.cols.lo
        sub = self.entries[i:i + rows.size, j:j + cols.size]
        return IntegerKernel(rows, sub.copy(), None if cols == rows else cols)


def _offsets(rows, cols):
    return cols.heights()[None, :] - rows.heights()[:, None]


def identity(w):
    return IntegerKernel(w, np.eye(w.size))


def heat_kernel(x, w, cols=None):
    """e^{x Delta}(u, v) = e^{-2x} I_{|u-v|}(2x) for x >= 0."""
    if x < 0:
        raise ValueError("heat kernel needs x >= 0")
    cols = w if cols is None else cols
    n = np.abs(_offsets(w, cols))
    if x == 0:
        m = (n == 0).astype(float)
    else:
        m = ive(n, 2.0 * x)
    return IntegerKernel(w, m, None if cols == w else cols)


def _laurent_coefficients(a, b, n):
    """[z^n] exp(a z + b / z) for integer arrays n, any real a, b."""
    n = np.asarray(n)
    out = np.zeros(n.shape)
    if a == 0 and b == 0:
        return (n == 0).astype(float)
    if b == 0:
        k = n >= 0
        nk = n[k]
        out[k] = np.exp(nk * math.log(abs(a)) - gammaln(nk + 1)) * np.where((a < 0) & (nk % 2 == 1), -1.0, 1.0)
        return out
    if a == 0:
        k = n <= 0
        nk = -n[k]
        out[k] = np.exp(nk * math.log(abs(b)) - gammaln(nk + 1)) * np.where((b < 0) & (nk % 2 == 1), -1.0, 1.0)
        return out
    y = 2.0 * math.sqrt(abs(a * b))
    logratio = 0.5 * math.log(abs(a) / abs(b))
    if a * b > 0:
        # z = c w with c^2 = b/a turns the exponent into sign(a) sqrt(ab) (w + 1/w)
        base = ive(np.abs(n), y)
        scale = math.exp(y)
        sign = np.where((a < 0) & (n % 2 != 0), -1.0, 1.0)
    else:
        # z = c w with c^2 = -b/a turns it into sign(a) sqrt(-ab) (w - 1/w)
        base = jv(n, y)
        scale = 1.0
        sign = np.where((a < 0) & (n % 2 != 0), -1.0, 1.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logmag = np.log(np.abs(base)) + n * logratio + math.log(scale)
        vals = np.where(base == 0, 0.0, np.sign(base) * np.exp(logmag))
    return sign * vals


def drift_kernel(t, x, w, cols=None):
    """e^{2t nabla + x Delta}(u, v) for real t and x (both signs allowed)."""
    cols = w if cols is None else cols
    n = _offsets(w, cols)
    m = math.exp(-2.0 * x) * _laurent_coefficients(t + x, x - t, n)
    if not np.all(np.isfinite(m)):
        raise OverflowError("drift kernel overflowed; shrink the window or the parameters")
    return IntegerKernel(w, m, None if cols == w else cols)


def triangular_conjugator(t, sign, w, cols=None):
    """e^{2t nabla - t Delta} (sign=+1, lower triangular) or its transpose (sign=-1).

    Entry (u, v) of the sign=+1 kernel is e^{2t} (-2t)^{u-v} / (u-v)! for u >= v.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    cols = w if cols is None else cols
    k = -_offsets(w, cols) if sign == 1 else _offsets(w, cols)
    kk = np.maximum(k, 0)
    if t == 0:
        vals = (kk == 0).astype(float)
    else:
        vals = np.exp(2 * t + kk * math.log(2 * t) - gammaln(kk + 1))
        vals = np.where(kk % 2 == 1, -vals, vals)
    return IntegerKernel(w, np.where(k >= 0, vals, 0.0), None if cols == w else cols)


# -- scalar special functions ---------------------------------------------------

def _series(n, x, sign):
    """sum_k sign^k (x/2)^{2k+n} / (k! (n+k)!) summed with a term-ratio stop."""
    half = 0.5 * x
    term = math.exp(n * math.log(half) - math.lgamma(n + 1)) if half != 0 else (1.0 if n == 0 else 0.0)
    if term == 0.0:
        return 0.0
    terms = [term]
    q = half * half
    k = 0
    while True:
        k += 1
        term *= sign * q / (k * (n + k))
        terms.append(term)
        if abs(term) <= 1e-17 * abs(terms[0]) and k > q:
            break
    return math.fsum(terms)


def bessel_I(n, x):
    """Modified Bessel function I_n(x) by power series."""
    n = abs(int(n))
    if x < 0:
        return (-1) ** n * bessel_I(n, -x)
    return _series(n, x, 1.0)


def bessel_J(n, x):
    """Bessel function J_n(x) by power series; J_{-n} = (-1)^n J_n."""
    n = int(n)
    if n < 0:
        return (-1) ** n * bessel_J(-n, x)
    if x < 0:
        return (-1) ** n * bessel_J(n, -x)
    return _series(n, x, -1.0)


# -- contour quadrature oracle -------------------------------------------------

class QuadratureError(RuntimeError):
    pass


def quadrature_oracle(t, x, u, v, lam=0.5, radius=None, tol=1e-13, max_points=2 ** 20):
    """e^{2t nabla + x Delta}(u, v) by the trapezoid rule on a circle around 0.

    The default radius is lam when u > v and 1/lam otherwise.
    """
    n = v - u
    rho = radius if radius is not None else (lam if u > v else 1.0 / lam)
    npts = 16
    prev = None
    while npts <= max_points:
        theta = 2 * np.pi * np.arange(npts) / npts
        z = rho * np.exp(1j * theta)
        vals = np.exp((t + x) * z + (x - t) / z - 2 * x - n * np.log(z))
        est = float(np.mean(vals).real)
        if prev is not None and abs(est - prev) < tol:
            return est
        prev = est
        npts *= 2
    raise QuadratureError(f"trapezoid rule did not settle for (t={t}, x={x}, u={u}, v={v})")
