"""Extended kernel and the n x n matrix kernel K_r.

Blocks are assembled as

    K(x_i, u; x_j, v) = -1{x_i < x_j} e^{(x_j - x_i) Delta}(u, v)
                        + [e^{-2t nabla - t Delta} P^hit_{x_i - t, x_j + t} e^{2t nabla - t Delta}](u, v).

The two outer factors are triangular with factorially decaying entries, so
only hit-kernel rows and columns at heights >= u (resp. >= v) enter and a
finite tail above the window suffices.  The form with four drift factors
(backward heat kernels included) is kept in :func:`extended_block_raw` as a
test oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hit import DEFAULT_BUFFER, hit
from .walk_ops import IntegerKernel, Window, drift_kernel, heat_kernel, triangular_conjugator

DEFAULT_M = 60


def conjugator_tail(t, eps=1e-17):
    """Number of extra heights above a window needed by the triangular conjugators."""
    if t == 0:
        return 0
    # e^{2t} (2t)^k / k! times the norm bound e^{4t} of the other factor
    logc = 6 * t
    k = 0
    logterm = logc
    while logterm > math.log(eps) or k < 2 * t:
        k += 1
        logterm = logc + k * math.log(2 * t) - math.lgamma(k + 1)
    return k + 5


def extended_block(h, t, xi, xj, w, cols=None, buffer=DEFAULT_BUFFER, tail=None):
    """K^ext(x_i, u; x_j, v) for u in w and v in cols (default w)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    cols = w if cols is None else cols
    tail = conjugator_tail(t) if tail is None else tail
    big = Window(min(w.lo, cols.lo), max(w.hi, cols.hi) + tail)
    p = hit(h, xi - t, xj + t, big, buffer).entries
    if t > 0:
        p = triangular_conjugator(t, -1, big).entries @ p @ triangular_conjugator(t, 1, big).entries
    i, j = w.lo - big.lo, cols.lo - big.lo
    out = p[i:i + w.size, j:j + cols.size]
    if xi < xj:
        out = out - heat_kernel(xj - xi, w, cols).entries
    return IntegerKernel(w, np.ascontiguousarray(out), None if cols == w else cols)


def extended_block_raw(h, t, xi, xj, w, cols=None, pad=80, buffer=DEFAULT_BUFFER):
    """Same block through e^{-2t nabla - x_i Delta} e^{a Delta} P^hit e^{-b Delta} e^{2t nabla + x_j Delta}.

    Each factor is a finite truncation; ``pad`` extra heights on both sides
    keep the products accurate on w.  Meant for testing only.
    """
    cols = w if cols is None else cols
    a, b = xi - t, xj + t
    big = Window(min(w.lo, cols.lo) - pad, max(w.hi, cols.hi) + pad)
    p = hit(h, a, b, big, buffer).entries
    m = (drift_kernel(-t, -xi, big).entries @ drift_kernel(0.0, a, big).entries @ p
         @ drift_kernel(0.0, -b, big).entries @ drift_kernel(t, xj, big).entries)
    i, j = w.lo - big.lo, cols.lo - big.lo
    out = m[i:i + w.size, j:j + cols.size]
    if xi < xj:
        out = out - heat_kernel(xj - xi, w, cols).entries
    return IntegerKernel(w, out.copy(), None if cols == w else cols)


@dataclass(frozen=True, eq=False)
class BlockKernel:
    """n x n blocks on Window(1, M); block (i, j) at (u, v) is K^ext(x_i, u + r_i; x_j, v + r_j)."""

    points: tuple
    shifts: tuple
    blocks: tuple
    t: float = 0.0

    @property
    def n(self):
        return len(self.points)

    @property
    def size(self):
        return self.blocks[0][0].window.size

    def matrix(self):
        return np.block([[b.entries for b in row] for row in self.blocks])

    def block(self, i, j):
        return self.blocks[i][j]


def matrix_kernel(h, t, xs, rs, M=DEFAULT_M, buffer=DEFAULT_BUFFER, tail=None):
    """Assemble K_r for points xs (strictly increasing) and integer levels rs."""
    xs = tuple(float(x) for x in xs)
    rs = tuple(int(r) for r in rs)
    if len(xs) != len(rs) or not xs:
        raise ValueError("xs and rs must be nonempty and of equal length")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("xs must be strictly increasing")
    base = Window(1, M)
    blocks = []
    for xi, ri in zip(xs, rs):
        row = []
        for xj, rj in zip(xs, rs):
            if xi - t > xj + t:
                row.append(IntegerKernel(base, np.zeros((M, M))))
                continue
            k = extended_block(h, t, xi, xj, Window(ri + 1, ri + M), Window(rj + 1, rj + M),
                               buffer=buffer, tail=tail)
            row.append(IntegerKernel(base, k.entries))
        blocks.append(tuple(row))
    return BlockKernel(xs, rs, tuple(blocks), float(t))


def theta_weights(n, M):
    """log of theta_i(u) = (1 + u^2)^i for i = 1..n, u = 1..M."""
    u = np.arange(1, M + 1, dtype=float)
    return [i * np.log1p(u * u) for i in range(1, n + 1)]


def theta_conjugate(K, inverse=False):
    """Entrywise theta_i(u) K_ij(u, v) / theta_j(v) (or the inverse conjugation)."""
    logs = theta_weights(K.n, K.size)
    sgn = -1.0 if inverse else 1.0
    blocks = []
    for i in range(K.n):
        row = []
        for j in range(K.n):
            scale = np.exp(sgn * (logs[i][:, None] - logs[j][None, :]))
            b = K.blocks[i][j]
            row.append(IntegerKernel(b.window, b.entries * scale))
        blocks.append(tuple(row))
    return BlockKernel(K.points, K.shifts, tuple(blocks), K.t)
