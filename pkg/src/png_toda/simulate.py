"""Exact PNG sampling by two routes on one Poisson realization, and statistical checks.

Nucleations form a rate-2 Poisson process in space-time.  By finite
propagation speed only points inside the backward light cones of the
evaluation points matter, so a field is generated on a union of "lenses"
{(tau, y): 0 <= tau <= t, a - tau <= y <= b + tau, c - (t - tau) <= y <= d + (t - tau)},
the set of space-time points lying on some Lipschitz-1 path from [a, b] at
time 0 to [c, d] at time t.

Heights are returned as float arrays holding integers, with -inf where the
profile is -inf.

Each sample owns a Philox stream keyed by the master seed, starting at
counter (0, 0, sample index, stream); the generator only advances the low
words, so streams never overlap.  Stream 0 drives the field, stream 1
random initial data, so every estimate is reproducible sample by sample.
"""
from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import stats

from .heightfn import NEG_INF, HeightFunction

FIELD_STREAM = 0
DATA_STREAM = 1


def sample_rng(seed, index, stream=FIELD_STREAM):
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(index), stream]))


# -- Poisson fields --------------------------------------------------------------

@dataclass(frozen=True)
class Lens:
    """Points reachable by Lipschitz-1 paths from [a, b] at time 0 to [c, d] at time t."""

    a: float
    b: float
    c: float
    d: float

    def contains(self, t, tau, y):
        return ((y >= self.a - tau) & (y <= self.b + tau)
                & (y >= self.c - (t - tau)) & (y <= self.d + (t - tau)))

    def y_range(self, t):
        lo, hi = max(self.a, self.c) - t, min(self.b, self.d) + t
        if math.isinf(lo) or math.isinf(hi):
            raise ValueError("a lens needs a finite bound on at least one end")
        return lo, hi


@dataclass(frozen=True, eq=False)
class PoissonField:
    """Rate-2 space-time points (time, position) on a union of lenses, sorted by time."""

    seed: int
    index: int
    t: float
    region: tuple
    points: np.ndarray

    def __len__(self):
        return len(self.points)

    def light_cone(self):
        """Coordinates alpha = tau + y and beta = tau - y."""
        tau, y = self.points[:, 0], self.points[:, 1]
        return tau + y, tau - y

    def covers(self, t, x, support=None):
        """True if the backward cone of (t, x), cut to the forward cone of ``support``, lies in the region."""
        if t != self.t:
            return False
        lo, hi = (-math.inf, math.inf) if support is None else support
        need_a, need_b = max(lo, x - t), min(hi, x + t)
        return any(l.c <= x <= l.d and l.a <= need_a and l.b >= need_b for l in self.region)


def poisson_field(t, region, seed, index=0, rng=None):
    """Rate-2 Poisson points on the union of the lenses in ``region``."""
    region = tuple(region)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0 or not region:
        return PoissonField(int(seed), int(index), float(t), region, np.zeros((0, 2)))
    rng = sample_rng(seed, index) if rng is None else rng
    ranges = [l.y_range(t) for l in region]
    ylo, yhi = min(r[0] for r in ranges), max(r[1] for r in ranges)
    n = rng.poisson(2.0 * t * (yhi - ylo))
    u = rng.random((n, 2))
    tau = t * u[:, 0]
    y = ylo + (yhi - ylo) * u[:, 1]
    keep = np.zeros(n, dtype=bool)
    for l in region:
        keep |= l.contains(t, tau, y)
    pts = np.column_stack([tau[keep], y[keep]])
    return PoissonField(int(seed), int(index), float(t), region, pts[np.argsort(pts[:, 0], kind="stable")])


def cone_region(h, t, xs):
    """Lenses from the support of h to each evaluation point."""
    sup = h.finite_support()
    a, b = (-math.inf, math.inf) if sup is None else sup
    return tuple(Lens(a, b, x, x) for x in xs)


def field_for(h, t, xs, seed, index=0):
    return poisson_field(t, cone_region(h, t, xs), seed, index)


def _check_cover(h, t, xs, field):
    for x in xs:
        if not field.covers(t, x, h.finite_support()):
            raise ValueError(f"field region does not contain the backward light cone of ({t}, {x})")


# -- event-driven route ----------------------------------------------------------

class Profile:
    """Piecewise-constant profile as breakpoints P and values V (V[k] lives between P[k-1] and P[k]).

    Adjacent values always differ.  A breakpoint moves left (speed 1) when the
    value to its right is larger and right otherwise, i.e. the higher side
    spreads.  Zero-width plateaus stand for spikes.
    """

    def __init__(self, positions, values):
        self.P = list(positions)
        self.V = list(values)
        self.time = 0.0

    @classmethod
    def from_height(cls, h):
        if h.lower:
            raise ValueError("event-driven evolution needs an upper semicontinuous profile")
        P, V = [], [h.left_value]
        spikes = dict(h.spikes)
        bps = dict(h.pieces)
        for x in sorted(set(bps) | set(spikes)):
            left = V[-1]
            right = bps.get(x, left)
            s = spikes.get(x, NEG_INF)
            if s > max(left, right):
                P += [x, x]
                V += [s, right]
            elif right != left:
                P.append(x)
                V.append(right)
        return cls(P, V)

    def velocity(self, k):
        return -1.0 if self.V[k + 1] > self.V[k] else 1.0

    def _move(self, dt):
        if dt > 0:
            self.P = [p + dt * self.velocity(k) for k, p in enumerate(self.P)]
        self.time += dt

    def advance(self, target):
        """Evolve deterministically up to time ``target``, resolving collisions in order."""
        while True:
            remaining = target - self.time
            best, kbest = math.inf, -1
            for k in range(len(self.P) - 1):
                if self.V[k] > self.V[k + 1] < self.V[k + 2]:
                    gap = 0.5 * (self.P[k + 1] - self.P[k])
                    if gap < best:
                        best, kbest = gap, k
            if kbest < 0 or best > remaining:
                self._move(remaining)
                return
            self._move(best)
            self._collide(kbest)

    def _collide(self, k):
        x = 0.5 * (self.P[k] + self.P[k + 1])
        if self.V[k] == self.V[k + 2]:
            del self.P[k:k + 2]
            del self.V[k + 1:k + 3]
        else:
            self.P[k] = x
            del self.P[k + 1]
            del self.V[k + 1]

    def nucleate(self, y):
        k = bisect.bisect_right(self.P, y)
        v = self.V[k]
        if v == NEG_INF:
            return
        self.P[k:k] = [y, y]
        self.V[k:k + 1] = [v, v + 1, v]

    def eval(self, x):
        lo = bisect.bisect_left(self.P, x)
        hi = bisect.bisect_right(self.P, x)
        return max(self.V[lo:hi + 1])

    def steps_in(self, a, b):
        """Number of up steps and down steps (counted with size) at positions in [a, b)."""
        up = down = 0
        for k in range(bisect.bisect_left(self.P, a), bisect.bisect_left(self.P, b)):
            d = self.V[k + 1] - self.V[k]
            if d > 0:
                up += d
            else:
                down -= d
        return up, down


def evolve(h, t, field):
    """Profile at time t, with nucleations taken from ``field``."""
    prof = Profile.from_height(h)
    for tau, y in field.points:
        if tau > t:
            break
        prof.advance(tau)
        prof.nucleate(y)
    prof.advance(t)
    return prof


def sample_event_driven(h, t, xs, field):
    """Heights h(t, x_i) by running kink/antikink dynamics through the nucleations of ``field``."""
    xs = [float(x) for x in xs]
    _check_cover(h, t, xs, field)
    prof = evolve(h, t, field)
    return np.array([prof.eval(x) for x in xs], dtype=float)


# -- last-passage route ----------------------------------------------------------

def longest_chain(beta):
    """Length of the longest strictly increasing subsequence (patience sorting)."""
    piles = []
    for b in beta:
        k = bisect.bisect_left(piles, b)
        if k == len(piles):
            piles.append(b)
        else:
            piles[k] = b
    return len(piles)


def lpp_sup(alpha, beta, t, starts, ends):
    """max over start pieces (l, r, c) and end pieces (l', r', c') of c + c' + last passage between them.

    Points must already be sorted by alpha.  A point is usable when a
    Lipschitz-1 path from [l, r] at time 0 reaches it (alpha >= l,
    beta >= -r) and it can still reach [l', r'] at time t
    (alpha <= t + r', beta <= t - l').  Returns -inf if no pair is within
    distance t.
    """
    best = NEG_INF
    for l, r, c in starts:
        for l2, r2, c2 in ends:
            if l > r2 + t or l2 > r + t:
                continue
            mask = (alpha >= l) & (beta >= -r) & (alpha <= t + r2) & (beta <= t - l2)
            best = max(best, c + c2 + longest_chain(beta[mask].tolist()))
    return best


def sample_lastpassage(h, t, xs, field):
    """Heights h(t, x_i) = max over pieces of h of (value + curve-to-point last passage time)."""
    xs = [float(x) for x in xs]
    _check_cover(h, t, xs, field)
    alpha, beta = field.light_cone()
    order = np.argsort(alpha, kind="stable")
    alpha, beta = alpha[order], beta[order]
    pieces = h.intervals()
    return np.array([lpp_sup(alpha, beta, t, pieces, [(x, x, 0)]) for x in xs], dtype=float)


SAMPLERS = {"event": sample_event_driven, "lastpassage": sample_lastpassage}


# -- batches and estimates -------------------------------------------------------

@dataclass
class SampleBatch:
    h: HeightFunction
    t: float
    xs: tuple
    seed: int
    heights: np.ndarray
    method: str = "lastpassage"
    fields: list = dc_field(default_factory=list)

    @property
    def n_samples(self):
        return len(self.heights)

    def cdf(self, rs):
        """Empirical P(h(t, x_i) <= r_i for all i) with its binomial standard error."""
        hit = np.all(self.heights <= np.asarray(rs, dtype=float)[None, :], axis=1)
        p = float(hit.mean())
        return p, math.sqrt(max(p * (1 - p), 0.0) / self.n_samples)


def _sample_chunk(args):
    h, t, xs, seed, lo, hi, method, keep = args
    region = cone_region(h, t, xs)
    out = np.empty((hi - lo, len(xs)))
    fields = []
    sampler = SAMPLERS[method]
    for i in range(lo, hi):
        f = poisson_field(t, region, seed, i)
        out[i - lo] = sampler(h, t, xs, f)
        if keep:
            fields.append(f)
    return out, fields


def default_workers():
    try:
        return max(1, int(os.environ.get("PNG_TODA_THREADS", "1")))
    except ValueError:
        return 1


def sample_batch(h, t, xs, n_samples, seed, method="lastpassage", workers=None, keep_fields=False):
    """n_samples independent draws of (h(t, x_1), ..., h(t, x_n)), in sample order."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if method not in SAMPLERS:
        raise ValueError(f"unknown method {method!r}")
    xs = tuple(float(x) for x in xs)
    workers = default_workers() if workers is None else max(1, int(workers))
    chunk = max(1, -(-n_samples // (4 * workers)))
    jobs = [(h, t, xs, seed, lo, min(lo + chunk, n_samples), method, keep_fields)
            for lo in range(0, n_samples, chunk)]
    if workers == 1:
        parts = [_sample_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_sample_chunk, jobs))
    heights = np.concatenate([p[0] for p in parts])
    fields = [f for p in parts for f in p[1]]
    return SampleBatch(h, float(t), xs, int(seed), heights, method, fields)


def estimate_cdf(h, t, xs, rs, n_samples, seed, method="lastpassage", workers=None):
    """Monte Carlo estimate of P(h(t, x_i) <= r_i for all i) and its standard error."""
    xs = np.atleast_1d(xs)
    rs = np.atleast_1d(rs)
    if len(xs) != len(rs):
        raise ValueError("xs and rs must have equal length")
    return sample_batch(h, t, xs, n_samples, seed, method, workers).cdf(rs)


# -- statistical properties -------------------------------------------------------

def random_walk_profile(rho, L, rng):
    """Two-sided walk on [-L, L]: up steps at rate rho, down steps at rate 1/rho, h(0) = 0, constant outside."""
    ups = rng.uniform(-L, L, rng.poisson(2 * L * rho))
    downs = rng.uniform(-L, L, rng.poisson(2 * L / rho))
    pos = np.concatenate([ups, downs])
    jumps = np.concatenate([np.ones(len(ups), dtype=int), -np.ones(len(downs), dtype=int)])
    order = np.argsort(pos)
    pos, jumps = pos[order], jumps[order]
    level = np.cumsum(jumps)
    k0 = int(np.searchsorted(pos, 0.0, side="right"))
    offset = int(level[k0 - 1]) if k0 > 0 else 0
    return HeightFunction(-offset, list(zip(pos.tolist(), (level - offset).tolist())))


@dataclass
class InvarianceResult:
    statistic: float
    dof: int
    p_value: float
    mean_increment: float
    increment_stderr: float
    n_windows: int


def _poisson_chisq(counts, mean):
    """Chi-square statistic and dof of integer counts against Poisson(mean), tail-pooled bins."""
    n = len(counts)
    kmax = 0
    while n * (1 - stats.poisson.cdf(kmax, mean)) >= 5:
        kmax += 1
    probs = np.append(stats.poisson.pmf(np.arange(kmax), mean), stats.poisson.sf(kmax - 1, mean))
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    expected = n * probs
    return float(np.sum((observed - expected) ** 2 / expected)), kmax


def invariance_test(rho=1.0, L=8.0, t=1.0, n_samples=200, seed=0, sub_len=1.0):
    """Chi-square test that PNG started from the two-sided walk keeps that law of increments.

    Up- and down-step counts of h(t, .) in disjoint windows of length
    ``sub_len`` inside [-L + t, L - t] are compared with Poisson(rho * sub_len)
    and Poisson(sub_len / rho).  Also reports the mean of h(t, 1) - h(t, 0).
    """
    if L <= t + sub_len:
        raise ValueError("need L larger than t + sub_len")
    a, b = -L + t, L - t
    m = int((b - a) // sub_len)
    ups, downs, incs = [], [], []
    for i in range(n_samples):
        h0 = random_walk_profile(rho, L, sample_rng(seed, i, DATA_STREAM))
        f = poisson_field(t, (Lens(-math.inf, math.inf, a, b),), seed, i)
        prof = evolve(h0, t, f)
        for k in range(m):
            u, d = prof.steps_in(a + k * sub_len, a + (k + 1) * sub_len)
            ups.append(u)
            downs.append(d)
        incs.append(prof.eval(1.0) - prof.eval(0.0))
    c1, k1 = _poisson_chisq(np.array(ups), rho * sub_len)
    c2, k2 = _poisson_chisq(np.array(downs), sub_len / rho)
    stat, dof = c1 + c2, k1 + k2
    incs = np.array(incs, dtype=float)
    return InvarianceResult(stat, dof, float(stats.chi2.sf(stat, dof)), float(incs.mean()),
                            float(incs.std(ddof=1) / math.sqrt(len(incs))), m * n_samples)


@dataclass
class SkewReversalResult:
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    z: float
    fredholm: float | None = None


def _lens(start_support, end_support):
    a, b = start_support if start_support else (-math.inf, math.inf)
    c, d = end_support if end_support else (-math.inf, math.inf)
    return Lens(a, b, c, d)


def _below_event_prob(g, f, t, n_samples, seed, stream):
    """P(h(t; g) <= -f): the event sup_{x, y} (A_t(x, y) + g(y) + f(x)) <= 0."""
    lens = _lens(g.finite_support(), f.finite_support())
    starts, ends = g.intervals(), f.intervals()
    hits = 0
    for i in range(n_samples):
        fld = poisson_field(t, (lens,), seed, i, rng=sample_rng(seed, i, stream))
        alpha, beta = fld.light_cone()
        order = np.argsort(alpha, kind="stable")
        hits += lpp_sup(alpha[order], beta[order], t, starts, ends) <= 0
    p = hits / n_samples
    return p, math.sqrt(p * (1 - p) / n_samples)


def _point_levels(f):
    """If -f is finite only at isolated points, those points and levels; else None."""
    if f.left_value != NEG_INF or any(v != NEG_INF for _, v in f.pieces) or not f.spikes:
        return None
    pts = [(x, -v) for x, v in f.spikes if v != NEG_INF]
    return [x for x, _ in pts], [int(r) for _, r in pts]


def skew_reversal_test(f, g, t, n_samples, seed, with_fredholm=True):
    """Monte Carlo check of P(h(t; g) <= -f) = P(h(t; f) <= -g) with independent fields for the two sides.

    When -g (or -f) is finite only at isolated points the corresponding side
    is also evaluated by the Fredholm determinant.
    """
    if f.finite_support() is None and g.finite_support() is None:
        raise ValueError("at least one of f, g must have finite support")
    lhs, se1 = _below_event_prob(g, f, t, n_samples, seed, 2)
    rhs, se2 = _below_event_prob(f, g, t, n_samples, seed, 3)
    se = math.hypot(se1, se2)
    z = 0.0 if se == 0 else (lhs - rhs) / se
    fred = None
    if with_fredholm:
        from .fredholm import png_cdf
        pl = _point_levels(g)
        if pl is not None:
            fred = png_cdf(f, t, pl[0], pl[1]).value
        else:
            pl = _point_levels(f)
            if pl is not None:
                fred = png_cdf(g, t, pl[0], pl[1]).value
    return SkewReversalResult(lhs, se1, rhs, se2, z, fred)


@dataclass
class HomogeneityResult:
    statistic: float
    dof: int
    p_value: float


def homogeneity_test(a, b):
    """Chi-square test that two integer samples (rows = samples) share one distribution."""
    a = np.asarray(a)
    b = np.asarray(b)
    keys = sorted(set(map(tuple, a.tolist())) | set(map(tuple, b.tolist())))
    index = {k: i for i, k in enumerate(keys)}
    table = np.zeros((2, len(keys)))
    for row, sample in enumerate((a, b)):
        for k in map(tuple, sample.tolist()):
            table[row, index[k]] += 1
    # pool sparse cells so expected counts stay >= 5
    order = np.argsort(-table.sum(axis=0))
    table = table[:, order]
    cols, acc = [], np.zeros(2)
    for j in range(table.shape[1]):
        acc = acc + table[:, j]
        if acc.sum() * min(len(a), len(b)) / (len(a) + len(b)) >= 5:
            cols.append(acc)
            acc = np.zeros(2)
    if acc.sum() > 0:
        if cols:
            cols[-1] = cols[-1] + acc
        else:
            cols.append(acc)
    table = np.array(cols).T
    if table.shape[1] < 2:
        return HomogeneityResult(0.0, 0, 1.0)
    chi2, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return HomogeneityResult(float(chi2), int(dof), float(p))


def reflection_test(h, t, xs, n_samples, seed):
    """Compare h(t, x; h_0) with h(t, -x; R h_0) on independent fields."""
    xs = np.asarray(xs, dtype=float)
    a = sample_batch(h, t, xs, n_samples, seed).heights
    b = sample_batch(h.reflect(), t, -xs, n_samples, seed + 1).heights
    return homogeneity_test(a, b)


def shift_test(h, t, xs, y, n_samples, seed):
    """Compare h(t, x; h_0) with h(t, x + y; h_0(. - y)) on independent fields."""
    xs = np.asarray(xs, dtype=float)
    a = sample_batch(h, t, xs, n_samples, seed).heights
    b = sample_batch(h.shift(y), t, xs + y, n_samples, seed + 1).heights
    return homogeneity_test(a, b)
