"""Numerical checks of the Toda structure of PNG transition probabilities.

Derivative conventions.  A step of size d in eta moves (t, x_i) to
(t + d/2, x_i + d/2) for every i; a step d in zeta moves it to
(t + d/2, x_i - d/2).  With these,

    d_eta K_r(u, v) = K_{r-1}(u+1, v) - K_r(u+1, v),
    d_zeta K_r(u, v) = K_{r-1}(u, v+1) - K_r(u, v+1),

and for one point d_eta d_zeta = (1/4)(d_t^2 - d_x^2).  Shifts r -> r +- 1
move every r_i.  All r-direction operations are exact lattice shifts; only
t and the x_i are differenced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fredholm import below_floor, png_cdf
from .heightfn import NEG_INF, flat
from .hit import DEFAULT_BUFFER, killed_kernel
from .kernel import DEFAULT_M, conjugator_tail, matrix_kernel
from .walk_ops import Window


@dataclass
class ResidualReport:
    residual: float
    step: float
    richardson_order: float
    location: tuple


class DomainError(ValueError):
    pass


def moved(t, xs, deta=0.0, dzeta=0.0):
    """(t, xs) after moving eta by deta and zeta by dzeta."""
    return t + 0.5 * (deta + dzeta), [x + 0.5 * (deta - dzeta) for x in xs]


class _Evaluator:
    """F and Q at fixed truncation so finite differences see a smooth function."""

    def __init__(self, h, M=DEFAULT_M, buffer=DEFAULT_BUFFER, tail=None, t_max=None):
        self.h = h
        self.M = M
        self.buffer = buffer
        self.tail = tail if tail is not None else conjugator_tail(t_max if t_max else 1.0)

    def result(self, t, xs, rs, with_q=False):
        if below_floor(self.h, t, xs, rs):
            return None
        return png_cdf(self.h, t, xs, rs, M=self.M, adaptive=False, buffer=self.buffer,
                       tail=self.tail, with_q=with_q)

    def F(self, t, xs, rs):
        res = self.result(t, xs, rs)
        return 0.0 if res is None else res.value

    def Q(self, t, xs, rs):
        res = self.result(t, xs, rs, with_q=True)
        if res is None or res.Q is None:
            raise DomainError(f"Q undefined at t={t}, xs={xs}, rs={rs}")
        return res.Q


def _order(r1, r2):
    if r2 == 0 or r1 == 0:
        return math.nan
    return math.log2(r1 / r2)


def _check_interior(h, t, xs, rs, strict=True):
    for x, r in zip(xs, rs):
        r0 = h.running_max(t, x)
        if (r <= r0) if strict else (r < r0):
            raise DomainError(f"r={r} is not above r_0={r0} at x={x}")


def toda_scalar_residual(h, t, x, r, delta=1e-2, M=DEFAULT_M, with_order=True):
    """|(1/4)(d_t^2 - d_x^2) log F_r - (F_{r+1} F_{r-1} / F_r^2 - 1)| by central differences."""
    _check_interior(h, t, [x], [r])
    if t <= delta:
        raise DomainError("need t > delta")
    ev = _Evaluator(h, M, t_max=t + delta)
    f0 = ev.F(t, [x], [r])
    rhs = ev.F(t, [x], [r + 1]) * ev.F(t, [x], [r - 1]) / f0 ** 2 - 1.0

    def res(d):
        vals = [ev.F(t + d, [x], [r]), ev.F(t - d, [x], [r]), ev.F(t, [x + d], [r]), ev.F(t, [x - d], [r])]
        if min(vals + [f0]) <= 0:
            raise DomainError("F vanishes on the stencil")
        lt = (math.log(vals[0]) - 2 * math.log(f0) + math.log(vals[1])) / d ** 2
        lx = (math.log(vals[2]) - 2 * math.log(f0) + math.log(vals[3])) / d ** 2
        return abs(0.25 * (lt - lx) - rhs)

    r1 = res(delta)
    order = _order(r1, res(delta / 2)) if with_order else math.nan
    return ResidualReport(r1, delta, order, (t, x, r))


def toda_1d_residual(t, r, delta=1e-2, M=DEFAULT_M, with_order=True):
    """Classic Toda lattice for flat data in time tau = 2t, g_r = log F_r - log F_{r-1}.

    ``delta`` is the step in tau.  The right side is written through F so
    that F_{-1} = 0 is allowed at the bottom of the lattice.
    """
    if r < 1:
        raise DomainError("need r >= 1")
    h = flat()
    ev = _Evaluator(h, M, t_max=t + delta)

    def F(tt, k):
        return ev.F(tt, [0.0], [k])

    def g(tt):
        return math.log(F(tt, r)) - math.log(F(tt, r - 1))

    def ratio(k):
        return F(t, k + 1) * F(t, k - 1) / F(t, k) ** 2

    rhs = ratio(r) - ratio(r - 1)

    def res(d):
        lhs = (g(t + d / 2) - 2 * g(t) + g(t - d / 2)) / d ** 2
        return abs(lhs - rhs)

    r1 = res(delta)
    order = _order(r1, res(delta / 2)) if with_order else math.nan
    return ResidualReport(r1, delta, order, (t, r))


def nonabelian_residual(h, t, xs, rs, delta=1e-2, M=DEFAULT_M, with_order=True):
    """max-norm of d_zeta V_r + U_{r+1} - U_r with U_r = Q_r Q_{r-1}^{-1}, V_r = -d_eta Q_r Q_r^{-1}."""
    xs = [float(x) for x in xs]
    rs = [int(r) for r in rs]
    _check_interior(h, t, xs, rs)
    if t <= delta:
        raise DomainError("need t > delta")
    ev = _Evaluator(h, M, t_max=t + delta)
    up = [r + 1 for r in rs]
    dn = [r - 1 for r in rs]
    q0 = ev.Q(t, xs, rs)
    u_r = q0 @ np.linalg.inv(ev.Q(t, xs, dn))
    u_r1 = ev.Q(t, xs, up) @ np.linalg.inv(q0)

    def V(dz, d):
        tp, xp = moved(t, xs, d, dz)
        tm, xm = moved(t, xs, -d, dz)
        tc, xc = moved(t, xs, 0.0, dz)
        dq = (ev.Q(tp, xp, rs) - ev.Q(tm, xm, rs)) / (2 * d)
        return -dq @ np.linalg.inv(ev.Q(tc, xc, rs))

    def res(d):
        dv = (V(d, d) - V(-d, d)) / (2 * d)
        return float(np.max(np.abs(dv + u_r1 - u_r)))

    r1 = res(delta)
    order = _order(r1, res(delta / 2)) if with_order else math.nan
    return ResidualReport(r1, delta, order, (t, tuple(xs), tuple(rs)))


def ratio_identity_check(h, t, xs, rs, M=None):
    """|F(r+1)/F(r) - det Q_r|."""
    _check_interior(h, t, xs, rs)
    base = png_cdf(h, t, xs, rs, M=M)
    nxt = png_cdf(h, t, xs, [r + 1 for r in rs], M=M, with_q=False)
    if base.Q is None or base.value == 0:
        raise DomainError("F_r vanishes")
    return abs(nxt.value / base.value - float(np.linalg.det(base.Q)))


def kernel_evolution_residual(h, t, xs, rs, delta=1e-2, which="eta", sub=10, M=DEFAULT_M, with_order=True):
    """Entrywise residual of the eta (or zeta) evolution identity on the leading sub x sub corner."""
    if which not in ("eta", "zeta"):
        raise ValueError("which must be 'eta' or 'zeta'")
    xs = [float(x) for x in xs]
    rs = [int(r) for r in rs]
    _check_interior(h, t, xs, rs, strict=False)
    tail = conjugator_tail(t + delta)

    def K(tt, xx, rr):
        return matrix_kernel(h, tt, xx, rr, M=M, tail=tail)

    base = K(t, xs, rs)
    lower = K(t, xs, [r - 1 for r in rs])
    n = len(xs)
    rhs = np.zeros((n, n, sub, sub))
    for i in range(n):
        for j in range(n):
            a, b = lower.blocks[i][j].entries, base.blocks[i][j].entries
            if which == "eta":
                rhs[i, j] = a[1:sub + 1, :sub] - b[1:sub + 1, :sub]
            else:
                rhs[i, j] = a[:sub, 1:sub + 1] - b[:sub, 1:sub + 1]

    def res(d):
        if which == "eta":
            (tp, xp), (tm, xm) = moved(t, xs, d, 0), moved(t, xs, -d, 0)
        else:
            (tp, xp), (tm, xm) = moved(t, xs, 0, d), moved(t, xs, 0, -d)
        kp, km = K(tp, xp, rs), K(tm, xm, rs)
        worst = 0.0
        for i in range(n):
            for j in range(n):
                fd = (kp.blocks[i][j].entries - km.blocks[i][j].entries)[:sub, :sub] / (2 * d)
                worst = max(worst, float(np.max(np.abs(fd - rhs[i, j]))))
        return worst

    r1 = res(delta)
    order = _order(r1, res(delta / 2)) if with_order else math.nan
    return ResidualReport(r1, delta, order, (which, t, tuple(xs), tuple(rs)))


# -- initial data at t = 0 --------------------------------------------------------

@dataclass
class PinnedPathMatrix:
    """Strictly upper triangular matrices of pinned walk probabilities at t = 0.

    ge_lt:   N >= h_0 on [x_i, x_j], N(x_l) < r_l inside, from r_i to r_j
    ge_le:   same with N(x_l) <= r_l
    gt_le:   N > h_0, N(x_l) <= r_l, from r_i to r_j
    touch_le_plus:   N >= h_0 touching h_0, N(x_l) <= r_l, from r_i + 1 to r_j
    ordered_plus:    as touch_le_plus, with some N(x_l) = r_l after the first touching
    """

    ge_lt: np.ndarray
    ge_le: np.ndarray
    gt_le: np.ndarray
    touch_le_plus: np.ndarray
    ordered_plus: np.ndarray

    @property
    def Q(self):
        return np.eye(len(self.ge_lt)) - self.ge_lt

    @property
    def Q_inv(self):
        return np.eye(len(self.ge_lt)) + self.ge_le

    @property
    def dQ_eta(self):
        return self.touch_le_plus - self.ordered_plus

    @property
    def U(self):
        return self.Q @ (np.eye(len(self.ge_lt)) + self.gt_le)

    @property
    def V(self):
        return -self.dQ_eta @ self.Q_inv


def _pinned_transfer(h, xa, xb, u, interior, W):
    """Propagate a walk started at height u at xa to xb, in two phases.

    Phase A: strictly above h so far.  Phase B: has touched h (stayed >= h).
    ``interior`` lists (x, cap_A, cap_B): at x the walk must be <= cap in its
    phase.  Returns the phase A and B arrays over W at xb.
    """
    heights = W.heights()
    pts = sorted(set([xa, xb] + h.critical_points(xa, xb) + [x for x, _, _ in interior]))
    caps = {x: (ca, cb) for x, ca, cb in interior}
    A = (heights == u).astype(float)
    B = np.zeros(W.size)

    def at_point(p, A, B):
        hp = h.eval(p)
        if p in caps:
            ca, cb = caps[p]
            A = A * (heights <= ca)
            B = B * (heights <= cb)
        if p == xa or p == xb or p in h.critical_points(xa - 1, xb + 1):
            if hp != NEG_INF:
                B = (B + A * (heights == hp)) * (heights >= hp)
                A = A * (heights > hp)
        return A, B

    A, B = at_point(xa, A, B)
    for p, q in zip(pts, pts[1:]):
        c = h.piece_value(0.5 * (p + q))
        length = q - p
        if c == NEG_INF:
            free = killed_kernel(NEG_INF, length, W)
            A, B = A @ free, B @ free
        else:
            gt = killed_kernel(c, length, W)
            ge = killed_kernel(c - 1, length, W)
            A, B = A @ gt, A @ (ge - gt) + B @ ge
        A, B = at_point(q, A, B)
    return A, B


def pinned_matrices_t0(h, xs, rs, buffer=DEFAULT_BUFFER):
    """Pinned-walk matrices between the points xs for levels rs, at t = 0."""
    xs = [float(x) for x in xs]
    rs = [int(r) for r in rs]
    for x, r in zip(xs, rs):
        if r < h.eval(x):
            raise DomainError(f"need r >= h_0(x) at x={x}")
    n = len(xs)
    finite = [int(v) for v in h.values() if v != NEG_INF]
    lo = min(finite + rs) - 1 - buffer
    W = Window(lo, max(rs) + 1 + buffer)
    mats = {k: np.zeros((n, n)) for k in ("ge_lt", "ge_le", "gt_le", "touch_le_plus", "ordered_plus")}
    for i in range(n):
        for j in range(i + 1, n):
            inner = [(xs[l], rs[l]) for l in range(i + 1, j)]
            vj = rs[j] - W.lo
            a, b = _pinned_transfer(h, xs[i], xs[j], rs[i], [(x, r - 1, r - 1) for x, r in inner], W)
            mats["ge_lt"][i, j] = a[vj] + b[vj]
            a, b = _pinned_transfer(h, xs[i], xs[j], rs[i], [(x, r, r) for x, r in inner], W)
            mats["ge_le"][i, j] = a[vj] + b[vj]
            mats["gt_le"][i, j] = a[vj]
            _, b1 = _pinned_transfer(h, xs[i], xs[j], rs[i] + 1, [(x, r, r) for x, r in inner], W)
            _, b2 = _pinned_transfer(h, xs[i], xs[j], rs[i] + 1, [(x, r, r - 1) for x, r in inner], W)
            mats["touch_le_plus"][i, j] = b1[vj]
            mats["ordered_plus"][i, j] = b1[vj] - b2[vj]
    return PinnedPathMatrix(**mats)


def initial_data_check(h, xs, rs, delta=1e-3, M=DEFAULT_M):
    """Deviations between the Fredholm pipeline and the pinned-path formulas at t = 0.

    Returns a dict with the Q match, the inverse identity, and the one-sided
    difference estimate of d_eta Q against its pinned-path expression.
    """
    xs = [float(x) for x in xs]
    pm = pinned_matrices_t0(h, xs, rs)
    ev = _Evaluator(h, M, t_max=delta)
    q0 = ev.Q(0.0, xs, rs)
    t1, x1 = moved(0.0, xs, delta, 0.0)
    dq = (ev.Q(t1, x1, rs) - q0) / delta
    n = len(xs)
    return {
        "Q": float(np.max(np.abs(q0 - pm.Q))),
        "inverse": float(np.max(np.abs(pm.Q @ pm.Q_inv - np.eye(n)))),
        "dQ_eta": float(np.max(np.abs(dq - pm.dQ_eta))),
    }
