"""Fredholm determinants det(I - K_r), the corner resolvent Q_r and the PNG CDF."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .hit import DEFAULT_BUFFER
from .kernel import DEFAULT_M, conjugator_tail, matrix_kernel


@dataclass
class FredholmResult:
    value: float
    Q: np.ndarray | None
    window_size: int
    converged: bool
    tail_estimate: float
    history: list = field(default_factory=list)


def fredholm_det(K, with_q=True):
    """det(I - K) of the truncated block kernel by pivoted LU, plus Q = R(1, 1).

    Q_ij = delta_ij + [(I - K)^{-1} K]_{ij}(1, 1), read off at the first
    index of each block.
    """
    kmat = K.matrix()
    n, M = K.n, K.size
    a = np.eye(kmat.shape[0]) - kmat
    lu, piv = lu_factor(a, check_finite=False)
    diag = np.diag(lu)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    value = float(np.prod(diag)) * (-1.0) ** swaps
    q = None
    if with_q and np.all(diag != 0):
        idx = np.arange(n) * M
        x = lu_solve((lu, piv), kmat[:, idx], check_finite=False)
        q = np.eye(n) + x[idx, :]
    return FredholmResult(value, q, M, True, 0.0)


def below_floor(h, t, xs, rs):
    """True when some r_i lies below the deterministic level r_0(t, x_i)."""
    return any(r < h.running_max(t, x) for x, r in zip(xs, rs))


def png_cdf(h, t, xs, rs, M=None, adaptive=True, tol=1e-8, max_M=480,
            buffer=DEFAULT_BUFFER, tail=None, with_q=True, floor="zero"):
    """P(h(t, x_i) <= r_i for all i) for PNG started from the profile h.

    With ``adaptive`` the truncation M (together with the walk buffer and the
    conjugator tail) is doubled until two consecutive doublings move the
    value by less than ``tol``.  Below the deterministic floor the value is 0
    unless ``floor="compute"`` asks for the raw truncated determinant.
    """
    xs = [float(x) for x in np.atleast_1d(xs)]
    rs = [int(r) for r in np.atleast_1d(rs)]
    if len(xs) != len(rs):
        raise ValueError("xs and rs must have equal length")
    if floor not in ("zero", "compute"):
        raise ValueError("floor must be 'zero' or 'compute'")
    if floor == "zero" and below_floor(h, t, xs, rs):
        return FredholmResult(0.0, None, 0, True, 0.0)
    M = DEFAULT_M if M is None else int(M)
    tail = conjugator_tail(t) if tail is None else tail
    if not adaptive:
        return fredholm_det(matrix_kernel(h, t, xs, rs, M, buffer, tail), with_q)
    history = []
    results = []
    m, b, tl = M, buffer, tail
    while True:
        res = fredholm_det(matrix_kernel(h, t, xs, rs, m, b, tl), with_q)
        results.append(res)
        history.append((m, res.value))
        if len(results) >= 3:
            d1 = abs(results[-1].value - results[-2].value)
            d2 = abs(results[-2].value - results[-3].value)
            if d1 < tol and d2 < tol:
                res.tail_estimate = d1
                res.history = history
                return res
        if 2 * m > max_M:
            res.converged = False
            res.tail_estimate = abs(results[-1].value - results[-2].value) if len(results) > 1 else math.nan
            res.history = history
            return res
        m, b, tl = 2 * m, 2 * b, 2 * tl
