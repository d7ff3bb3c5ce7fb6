"""Hit and no-hit kernels of the rate (1, 1) walk against a profile's hypograph.

The walk N runs in "time" y from a to b.  It hits hypo(h) if N(y) <= h(y) for
some y in [a, b].  Between consecutive breakpoints or spikes the barrier is a
constant level c, where staying strictly above c is the walk killed at c,
with kernel given by the reflection formula.  At the points themselves (and
at a, b) the walk is projected onto heights strictly above the
semicontinuous value of h there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ive
from scipy.stats import poisson

from .heightfn import NEG_INF
from .walk_ops import IntegerKernel, Window, heat_kernel

DEFAULT_BUFFER = 40


@dataclass(frozen=True)
class BarrierSegment:
    """Open stretch of [a, b] of given length on which h is the constant ``level``."""

    length: float
    level: float


def killed_kernel(level, s, w, reflected=False):
    """Dense matrix of the walk on window w killed on entering heights <= level, after time s.

    With ``reflected=True`` also return heat - killed, computed directly (the
    reflected term above the level, the free kernel elsewhere) so that no
    cancellation occurs.
    """
    u = w.heights()
    if s == 0:
        free = np.eye(w.size)
    else:
        free = ive(np.abs(u[:, None] - u[None, :]), 2.0 * s)
    if level == NEG_INF:
        return (free, np.zeros_like(free)) if reflected else free
    c = int(level)
    alive = (u > c)[:, None] & (u > c)[None, :]
    if s > 0:
        mirror = ive(np.abs(u[:, None] + u[None, :] - 2 * c), 2.0 * s)
    else:
        mirror = np.zeros_like(free)
    killed = np.where(alive, free - mirror, 0.0)
    if reflected:
        return killed, np.where(alive, mirror, free)
    return killed


def nohit_constant(level, s, w):
    """Kernel of paths staying strictly above a constant level for time s (reflection formula)."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if level == NEG_INF:
        return heat_kernel(s, w)
    return IntegerKernel(w, killed_kernel(level, s, w))


def nohit_constant_uniformized(level, s, w, tail=1e-14):
    """Same kernel by uniformization: Poisson(2s)-weighted powers of the killed +-1 step.

    The step count is cut where the Poisson tail drops below ``tail``; the
    window is padded by that many sites, so no other truncation enters.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    lam = 2.0 * s
    kmax = int(poisson.isf(tail, lam)) + 1 if lam > 0 else 0
    big = w.widen(kmax, kmax)
    u = big.heights()
    step = 0.5 * (np.eye(big.size, k=1) + np.eye(big.size, k=-1))
    if level != NEG_INF:
        alive = (u > level).astype(float)
        step = step * alive[:, None] * alive[None, :]
        start = np.diag(alive)
    else:
        start = np.eye(big.size)
    weights = poisson.pmf(np.arange(kmax + 1), lam)
    acc = weights[0] * start
    power = start
    for k in range(1, kmax + 1):
        power = power @ step
        acc = acc + weights[k] * power
    i = kmax
    return IntegerKernel(w, acc[i:i + w.size, i:i + w.size].copy())


def barrier_segments(h, a, b):
    """Decompose [a, b]: returns (points, segments) with points a = p_0 < ... < p_m = b."""
    pts = [a] + h.critical_points(a, b) + [b]
    segs = [BarrierSegment(q - p, h.piece_value(0.5 * (p + q))) for p, q in zip(pts, pts[1:])]
    return pts, segs


def _composition_window(h, a, b, w, buffer):
    pts, segs = barrier_segments(h, a, b)
    levels = [s.level for s in segs] + [h.eval(p) for p in pts]
    finite = [int(c) for c in levels if c != NEG_INF]
    lo, hi = w.lo, w.hi
    if finite:
        lo = min(lo, min(finite) + 1)
        hi = max(hi, max(finite))
    if any(s.level == NEG_INF for s in segs):
        lo -= buffer
    return Window(lo, hi + buffer), pts, segs


def nohit(h, a, b, w, buffer=DEFAULT_BUFFER):
    """Kernel of walk paths from a to b staying strictly above h on all of [a, b]."""
    if a > b:
        raise ValueError("nohit needs a <= b")
    big, pts, segs = _composition_window(h, a, b, w, buffer)
    u = big.heights()
    acc = np.diag((u > h.eval(pts[0])).astype(float))
    for p, seg in zip(pts[1:], segs):
        if seg.length > 0:
            acc = acc @ killed_kernel(seg.level, seg.length, big)
        acc = acc * (u > h.eval(p))[None, :]
    i = w.lo - big.lo
    return IntegerKernel(w, acc[i:i + w.size, i:i + w.size].copy())


def hit(h, a, b, w, buffer=DEFAULT_BUFFER):
    """P^hit_{a,b}: walk kernel from a to b restricted to paths touching hypo(h).

    Zero when a > b; the projection onto heights <= h(a) when a == b.  Built
    segment by segment from the first touching: paths that touched before
    p_k carry on freely, the others either touch during the next segment or
    at its right end.  All terms are nonnegative.
    """
    if a > b:
        return IntegerKernel(w, np.zeros((w.size, w.size)))
    if a == b:
        return IntegerKernel(w, np.diag((w.heights() <= h.eval(a)).astype(float)))
    big, pts, segs = _composition_window(h, a, b, w, buffer)
    # after touching, paths move freely and may go below the barrier
    big = Window(min(big.lo, w.lo - buffer), big.hi)
    u = big.heights()
    h0 = h.eval(pts[0])
    touched = np.diag((u <= h0).astype(float))
    clear = np.diag((u > h0).astype(float))
    for p, seg in zip(pts[1:], segs):
        killed, rest = killed_kernel(seg.level, seg.length, big, reflected=True)
        free = killed + rest
        below = (u <= h.eval(p))
        touched = touched @ free + clear @ (rest + killed * below[None, :])
        clear = (clear @ killed) * (~below)[None, :]
    i = w.lo - big.lo
    return IntegerKernel(w, touched[i:i + w.size, i:i + w.size].copy())


def mc_walk_oracle(h, a, b, u, v, n_samples, seed, event="hit"):
    """Monte Carlo estimate of P(N(b) = v, event | N(a) = u), with its standard error.

    ``event`` is "hit" (the path touches hypo(h)) or "nohit".  Jumps come at
    rate 2 and go up or down with probability 1/2 each.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if event not in ("hit", "nohit"):
        raise ValueError("event must be 'hit' or 'nohit'")
    rng = np.random.default_rng(seed)
    pos = np.full(n_samples, int(u))
    time = np.full(n_samples, float(a))
    touched = np.zeros(n_samples, dtype=bool)
    active = np.ones(n_samples, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        wait = rng.exponential(0.5, idx.size)
        end = np.minimum(time[idx] + wait, b)
        sup = _sup_on_intervals(h, time[idx], end)
        touched[idx] |= pos[idx] <= sup
        done = time[idx] + wait >= b
        time[idx] = end
        moving = idx[~done]
        pos[moving] += rng.choice((-1, 1), moving.size)
        active[idx[done]] = False
    hitmask = touched if event == "hit" else ~touched
    x = (hitmask & (pos == v)).astype(float)
    est = float(x.mean())
    err = float(x.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.nan
    return est, err


def _sup_on_intervals(h, lo, hi):
    """Vectorized sup of h over the closed intervals [lo_k, hi_k]."""
    out = h.eval_many(lo)
    for p in h.critical_points():
        inside = (lo <= p) & (p <= hi)
        if inside.any():
            out[inside] = np.maximum(out[inside], h.eval(p))
    return out
