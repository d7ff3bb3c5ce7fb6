"""Piecewise-constant upper semicontinuous height profiles.

A profile is stored as a value on (-inf, b_1), a list of breakpoints
b_1 < ... < b_m with the value on [b_k, b_{k+1}), and a list of isolated
spikes.  Values are integers or NEG_INF.  Evaluation at a breakpoint or a
spike takes the maximum of everything meeting there, so the stored data
never has to duplicate the semicontinuity convention.

Profiles produced by :meth:`HeightFunction.negate` carry ``lower=True``
and are evaluated with minima instead (lower semicontinuous).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

NEG_INF = -math.inf
POS_INF = math.inf


def as_height(v):
    """Normalize a height to an int, or to +-inf."""
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("-inf", "neg_inf", "-infinity"):
            return NEG_INF
        if s in ("inf", "+inf", "infinity"):
            return POS_INF
        v = int(s)
    if v == NEG_INF or v == POS_INF:
        return float(v)
    if int(v) != v:
        raise ValueError(f"height values must be integers, got {v!r}")
    return int(v)


def height_repr(v):
    if v == NEG_INF:
        return "-inf"
    if v == POS_INF:
        return "inf"
    return str(int(v))


@dataclass(frozen=True)
class HeightFunction:
    left_value: float = NEG_INF
    pieces: tuple = ()
    spikes: tuple = ()
    lower: bool = False

    def __post_init__(self):
        pieces = tuple((float(x), as_height(v)) for x, v in self.pieces)
        spikes = tuple(sorted((float(x), as_height(v)) for x, v in self.spikes))
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "spikes", spikes)
        object.__setattr__(self, "left_value", as_height(self.left_value))
        xs = [x for x, _ in pieces]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        ps = [x for x, _ in spikes]
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("spikes must sit at distinct positions")
        if any(not math.isfinite(x) for x in xs + ps):
            raise ValueError("breakpoints and spikes must be finite")
        if not self.lower and max(self.values()) == NEG_INF:
            raise ValueError("a profile needs at least one finite value")

    # -- structure ---------------------------------------------------------

    @property
    def breakpoints(self):
        return [x for x, _ in self.pieces]

    def values(self):
        return [self.left_value] + [v for _, v in self.pieces] + [v for _, v in self.spikes]

    def critical_points(self, a=-math.inf, b=math.inf):
        """Sorted breakpoints and spike positions inside the open interval (a, b)."""
        pts = {x for x in self.breakpoints if a < x < b}
        pts.update(x for x, _ in self.spikes if a < x < b)
        return sorted(pts)

    def piece_value(self, x):
        """Value of the piece containing x, ignoring spikes and semicontinuity."""
        k = bisect.bisect_right(self.breakpoints, x)
        return self.left_value if k == 0 else self.pieces[k - 1][1]

    def intervals(self):
        """Closed constancy intervals (l, r, value), spikes included as (p, p, value).

        Intervals with value NEG_INF are dropped.  Infinite ends are +-inf.
        """
        xs = [-math.inf] + self.breakpoints + [math.inf]
        vals = [self.left_value] + [v for _, v in self.pieces]
        out = [(xs[k], xs[k + 1], vals[k]) for k in range(len(vals)) if vals[k] != NEG_INF]
        out += [(p, p, v) for p, v in self.spikes if v != NEG_INF]
        return out

    def finite_support(self):
        """Smallest closed interval outside which the profile is NEG_INF (None if unbounded)."""
        iv = self.intervals()
        lo = min(l for l, _, _ in iv)
        hi = max(r for _, r, _ in iv)
        if math.isinf(lo) or math.isinf(hi):
            return None
        return lo, hi

    # -- evaluation --------------------------------------------------------

    def eval(self, x):
        xs = self.breakpoints
        k = bisect.bisect_right(xs, x)
        vals = [self.left_value if k == 0 else self.pieces[k - 1][1]]
        if k > 0 and xs[k - 1] == x:
            vals.append(self.left_value if k == 1 else self.pieces[k - 2][1])
        j = bisect.bisect_left(self.spikes, (x, NEG_INF))
        if j < len(self.spikes) and self.spikes[j][0] == x:
            vals.append(self.spikes[j][1])
        return min(vals) if self.lower else max(vals)

    __call__ = eval

    def eval_many(self, xs):
        """Vectorized :meth:`eval` returning a float array."""
        xs = np.asarray(xs, dtype=float)
        bps = np.array(self.breakpoints, dtype=float)
        vals = np.array([self.left_value] + [v for _, v in self.pieces], dtype=float)
        pick = np.minimum if self.lower else np.maximum
        k = np.searchsorted(bps, xs, side="right")
        out = vals[k]
        if bps.size:
            on = (k > 0) & (bps[np.maximum(k - 1, 0)] == xs)
            out[on] = pick(out[on], vals[k[on] - 1])
        for p, v in self.spikes:
            at = xs == p
            out[at] = pick(out[at], v)
        return out

    def sup_on(self, a, b):
        """Supremum of the (upper semicontinuous) profile over [a, b]."""
        if b < a:
            raise ValueError("empty interval")
        cands = [a, b] + self.critical_points(a, b)
        return max(self.eval(y) for y in cands)

    def running_max(self, t, x):
        """Level reached at x after time t by pure lateral spreading: sup over [x-t, x+t]."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        return self.sup_on(x - t, x + t)

    # -- transforms --------------------------------------------------------

    def shift(self, y):
        """Profile x -> h(x - y)."""
        return HeightFunction(self.left_value, [(x + y, v) for x, v in self.pieces],
                              [(x + y, v) for x, v in self.spikes], self.lower)

    def reflect(self):
        """Profile x -> h(-x)."""
        vals = [self.left_value] + [v for _, v in self.pieces]
        xs = self.breakpoints
        m = len(xs)
        pieces = [(-xs[m - 1 - k], vals[m - 1 - k]) for k in range(m)]
        return HeightFunction(vals[-1], pieces, [(-x, v) for x, v in self.spikes], self.lower)

    def negate(self):
        """Profile x -> -h(x), which flips the semicontinuity."""
        return HeightFunction(-self.left_value, [(x, -v) for x, v in self.pieces],
                              [(x, -v) for x, v in self.spikes], not self.lower)

    def raise_by(self, k):
        return HeightFunction(self.left_value + k, [(x, v + k) for x, v in self.pieces],
                              [(x, v + k) for x, v in self.spikes], self.lower)

    def to_dict(self):
        return {
            "left_value": height_repr(self.left_value),
            "pieces": [{"at": x, "value": height_repr(v)} for x, v in self.pieces],
            "spikes": [{"at": x, "value": height_repr(v)} for x, v in self.spikes],
        }


# -- presets and parsing ------------------------------------------------------

def flat(level=0):
    return HeightFunction(level)


def narrow_wedge(y=0.0, level=0):
    return HeightFunction(NEG_INF, (), ((y, level),))


def two_step():
    """0 on (-inf, 0), 1 on [0, 1), -1 on [1, inf)."""
    return HeightFunction(0, ((0.0, 1), (1.0, -1)))


PRESETS = {"flat": flat, "narrow-wedge": narrow_wedge, "two-step": two_step}


def from_dict(d):
    return HeightFunction(d.get("left_value", NEG_INF),
                          [(p["at"], p["value"]) for p in d.get("pieces", [])],
                          [(p["at"], p["value"]) for p in d.get("spikes", [])])


def parse_initial_data(value):
    """Build a profile from a preset string ("flat", "narrow-wedge:<y>", "two-step") or a dict."""
    if isinstance(value, HeightFunction):
        return value
    if isinstance(value, dict):
        return from_dict(value)
    name, _, arg = str(value).partition(":")
    name = name.strip()
    if name not in PRESETS:
        raise ValueError(f"unknown initial data preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "narrow-wedge":
        return narrow_wedge(float(arg) if arg else 0.0)
    if name == "flat":
        return flat(int(arg) if arg else 0)
    if arg:
        raise ValueError(f"preset {name!r} takes no argument")
    return two_step()
