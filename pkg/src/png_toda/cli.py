"""Command-line interface: `png-toda <command> [options]`.

Every run is configured by flags, optionally on top of a TOML or JSON file
given with --config (flags win).  Output is CSV (default) or JSON lines,
preceded by a provenance header naming the code revision, seed and
tolerances.  Exit codes: 0 ok, 2 invalid configuration, 3 numerical
non-convergence, 4 a --check condition failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_UNCONVERGED, EXIT_CHECK = 0, 2, 3, 4

COMMANDS = ("cdf", "simulate", "compare", "toda-check", "painleve", "closed-form", "initdata")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    init: str = "narrow-wedge"
    t: list = field(default_factory=lambda: [1.0])
    xs: list = field(default_factory=lambda: [0.0])
    rs: list | None = None
    r_range: tuple | None = None
    tol: float = 1e-8
    delta: float = 1e-2
    n_samples: int = 10000
    seed: int = 0
    method: str = "lastpassage"
    kind: str = "scalar"
    s: list = field(default_factory=lambda: [1.0])
    output: str | None = None
    format: str = "csv"
    threads: int | None = None
    allow_unconverged: bool = False
    check: bool = False
    source: str | None = None
    lines: dict = field(default_factory=dict)
    h: object = None

    def where(self, key):
        if self.source and key in self.lines:
            return f"{self.source}:{self.lines[key]}: "
        if self.source:
            return f"{self.source}: "
        return ""

    def r_vectors(self):
        """List of r-vectors: the explicit rs, or every common level in r_range."""
        n = len(self.xs)
        if self.r_range is not None:
            lo, hi = self.r_range
            return [[k] * n for k in range(lo, hi + 1)]
        return [list(self.rs)] if self.rs is not None else [[0] * n]


# -- config loading ------------------------------------------------------------

def _floats(v):
    if isinstance(v, str):
        v = [p for p in re.split(r"[,\s]+", v.strip()) if p]
    if not isinstance(v, (list, tuple)):
        v = [v]
    return [float(x) for x in v]


def _ints(v):
    vals = _floats(v)
    if any(x != int(x) for x in vals):
        raise ValueError("levels must be integers")
    return [int(x) for x in vals]


def _range(v):
    if isinstance(v, str):
        lo, _, hi = v.partition(":")
        return int(lo), int(hi)
    lo, hi = v
    return int(lo), int(hi)


PARSERS = {
    "init": lambda v: v if isinstance(v, dict) else str(v),
    "t": _floats, "xs": _floats, "s": _floats, "rs": _ints, "r_range": _range,
    "tol": float, "delta": float, "n_samples": int, "seed": int, "threads": int,
    "method": str, "kind": str, "output": str, "format": str,
    "allow_unconverged": bool, "check": bool,
}


def _key_lines(text, suffix):
    lines = {}
    for i, line in enumerate(text.splitlines(), 1):
        m = (re.match(r'\s*"([A-Za-z_-]+)"\s*:', line) if suffix == ".json"
             else re.match(r"\s*([A-Za-z_-]+)\s*=", line))
        if m:
            lines.setdefault(m.group(1).replace("-", "_"), i)
    return lines


def load_config_file(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read: {e.strerror}") from e
    try:
        if p.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return {k.replace("-", "_"): v for k, v in data.items()}, _key_lines(text, p.suffix)


def build_config(args):
    values, lines, source = {}, {}, None
    if args.config:
        values, lines = load_config_file(args.config)
        source = args.config
    for key in PARSERS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
            lines.pop(key, None)
    cfg = RunConfig(args.command, source=source, lines=lines)
    for key, v in values.items():
        if key not in PARSERS:
            raise ConfigError(f"{cfg.where(key)}unknown key {key!r}")
        try:
            setattr(cfg, key, PARSERS[key](v))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{cfg.where(key)}bad value for {key!r}: {e}") from e
    validate(cfg)
    return cfg


def validate(cfg):
    from .heightfn import parse_initial_data

    def fail(key, msg):
        raise ConfigError(f"{cfg.where(key)}{msg}")

    try:
        cfg.h = parse_initial_data(cfg.init)
    except (KeyError, ValueError, TypeError) as e:
        fail("init", f"invalid initial data: {e}")
    if not cfg.xs:
        fail("xs", "need at least one point")
    if any(b <= a for a, b in zip(cfg.xs, cfg.xs[1:])):
        fail("xs", "points must be strictly increasing")
    if any(t < 0 for t in cfg.t):
        fail("t", "times must be nonnegative")
    if cfg.rs is not None and len(cfg.rs) != len(cfg.xs):
        fail("rs", f"got {len(cfg.rs)} levels for {len(cfg.xs)} points")
    if cfg.r_range is not None and cfg.r_range[0] > cfg.r_range[1]:
        fail("r_range", "empty range")
    if cfg.tol <= 0:
        fail("tol", "tolerance must be positive")
    if cfg.delta <= 0:
        fail("delta", "step must be positive")
    if cfg.n_samples < 1:
        fail("n_samples", "need at least one sample")
    if cfg.seed < 0:
        fail("seed", "seed must be nonnegative")
    if cfg.format not in ("csv", "json"):
        fail("format", "format must be csv or json")
    if cfg.method not in ("lastpassage", "event", "both"):
        fail("method", "method must be lastpassage, event or both")
    if cfg.kind not in ("scalar", "1d", "nonabelian"):
        fail("kind", "kind must be scalar, 1d or nonabelian")
    if cfg.threads is not None and cfg.threads < 1:
        fail("threads", "threads must be positive")


# -- output --------------------------------------------------------------------

def git_revision():
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _cell(v):
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        if math.isinf(v) or math.isnan(v):
            return str(float(v))
        return repr(float(v))
    return str(v)


@dataclass
class Table:
    columns: list
    units: dict
    rows: list = field(default_factory=list)
    failed: bool = False
    unconverged: bool = False

    def add(self, **row):
        self.rows.append(row)


def render(table, cfg):
    meta = {
        "command": cfg.command,
        "version": __version__,
        "revision": git_revision(),
        "seed": cfg.seed,
        "tol": cfg.tol,
        "delta": cfg.delta,
        "init": cfg.init if isinstance(cfg.init, str) else json.dumps(cfg.init, sort_keys=True),
    }
    buf = io.StringIO()
    if cfg.format == "csv":
        for k, v in meta.items():
            buf.write(f"# {k}: {v}\n")
        for c in table.columns:
            buf.write(f"# column {c}: {table.units.get(c, '')}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(row.get(c, "")) for c in table.columns])
    else:
        meta["columns"] = {c: table.units.get(c, "") for c in table.columns}
        buf.write(json.dumps({"provenance": meta}, sort_keys=True) + "\n")
        for row in table.rows:
            buf.write(json.dumps({c: _jsonable(row.get(c)) for c in table.columns}) + "\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


# -- commands ------------------------------------------------------------------

def cmd_cdf(cfg):
    from .fredholm import png_cdf
    tab = Table(["t", "xs", "rs", "F", "converged", "window", "tail_estimate"],
                {"t": "time", "xs": "positions (;-separated)", "rs": "levels",
                 "F": f"P(h(t,x_i) <= r_i), doubling tolerance {cfg.tol}",
                 "converged": "two consecutive window doublings within tol",
                 "window": "heights per block", "tail_estimate": "last doubling change"})
    for t in cfg.t:
        for rs in cfg.r_vectors():
            res = png_cdf(cfg.h, t, cfg.xs, rs, tol=cfg.tol, with_q=False)
            tab.add(t=t, xs=cfg.xs, rs=rs, F=res.value, converged=res.converged,
                    window=res.window_size, tail_estimate=res.tail_estimate)
            tab.unconverged |= not res.converged
    return tab


def cmd_simulate(cfg):
    from .simulate import field_for, sample_batch, sample_event_driven, sample_lastpassage
    cols = ["t", "sample"] + [f"h{i + 1}" for i in range(len(cfg.xs))]
    tab = Table(cols, {"t": "time", "sample": "sample index (seeded stream)",
                       **{f"h{i + 1}": f"height at x={x}" for i, x in enumerate(cfg.xs)}})
    for t in cfg.t:
        if cfg.method == "both":
            for i in range(cfg.n_samples):
                f = field_for(cfg.h, t, cfg.xs, cfg.seed, i)
                a = sample_event_driven(cfg.h, t, cfg.xs, f)
                b = sample_lastpassage(cfg.h, t, cfg.xs, f)
                tab.failed |= not np.array_equal(a, b)
                tab.add(t=t, sample=i, **{f"h{k + 1}": v for k, v in enumerate(a)})
            continue
        method = "event" if cfg.method == "event" else "lastpassage"
        batch = sample_batch(cfg.h, t, cfg.xs, cfg.n_samples, cfg.seed, method, cfg.threads)
        for i, row in enumerate(batch.heights):
            tab.add(t=t, sample=i, **{f"h{k + 1}": v for k, v in enumerate(row)})
    return tab


def cmd_compare(cfg):
    from .fredholm import png_cdf
    from .simulate import sample_batch
    tab = Table(["t", "xs", "rs", "mc", "stderr", "F", "z", "converged"],
                {"t": "time", "xs": "positions", "rs": "levels",
                 "mc": f"Monte Carlo frequency over {cfg.n_samples} samples", "stderr": "binomial standard error",
                 "F": f"Fredholm value, tolerance {cfg.tol}", "z": "(mc - F)/stderr, 0 when both exact",
                 "converged": "Fredholm truncation converged"})
    method = "event" if cfg.method == "event" else "lastpassage"
    for t in cfg.t:
        batch = sample_batch(cfg.h, t, cfg.xs, cfg.n_samples, cfg.seed, method, cfg.threads)
        for rs in cfg.r_vectors():
            p, se = batch.cdf(rs)
            res = png_cdf(cfg.h, t, cfg.xs, rs, tol=cfg.tol, with_q=False)
            if se > 0:
                z = (p - res.value) / se
            else:
                z = 0.0 if abs(p - res.value) <= cfg.tol else math.inf
            tab.add(t=t, xs=cfg.xs, rs=rs, mc=p, stderr=se, F=res.value, z=z, converged=res.converged)
            tab.unconverged |= not res.converged
            tab.failed |= abs(z) > 4
    return tab


def cmd_toda_check(cfg):
    from . import integrable as I
    tab = Table(["kind", "t", "xs", "rs", "delta", "residual", "residual_half", "ratio", "order"],
                {"kind": "equation", "t": "time", "xs": "positions", "rs": "levels",
                 "delta": "finite-difference step", "residual": "residual at delta (max norm)",
                 "residual_half": "residual at delta/2", "ratio": "residual/residual_half, 4 for second order",
                 "order": "log2 of ratio"})
    for t in cfg.t:
        for rs in cfg.r_vectors():
            if cfg.kind == "scalar":
                rep = I.toda_scalar_residual(cfg.h, t, cfg.xs[0], rs[0], cfg.delta)
            elif cfg.kind == "1d":
                rep = I.toda_1d_residual(t, rs[0], cfg.delta)
            else:
                rep = I.nonabelian_residual(cfg.h, t, cfg.xs, rs, cfg.delta)
            half = rep.residual / 2 ** rep.richardson_order if rep.residual else 0.0
            ratio = 2 ** rep.richardson_order
            tab.add(kind=cfg.kind, t=t, xs=cfg.xs, rs=rs, delta=cfg.delta, residual=rep.residual,
                    residual_half=half, ratio=ratio, order=rep.richardson_order)
            tab.failed |= not (3.5 <= ratio <= 4.5 and rep.residual <= cfg.tol)
    return tab


def cmd_painleve(cfg):
    from .closedforms import ablowitz_ladik_residual, dpII_residual
    tab = Table(["s", "r", "dpII", "al_residual", "al_order"],
                {"s": "weight parameter", "r": "index", "dpII": "discrete Painleve II residual",
                 "al_residual": f"Ablowitz-Ladik residual at step {cfg.delta}", "al_order": "Richardson order"})
    lo, hi = cfg.r_range if cfg.r_range else (1, 8)
    for s in cfg.s:
        for r in range(lo, hi + 1):
            d = dpII_residual(s, r)
            al = ablowitz_ladik_residual(s, r, cfg.delta)
            tab.add(s=s, r=r, dpII=d, al_residual=al.residual, al_order=al.richardson_order)
            tab.failed |= d > cfg.tol
    return tab


def cmd_closed_form(cfg):
    from .closedforms import flat_toeplitz_hankel, narrow_wedge_toeplitz
    from .fredholm import png_cdf
    from .heightfn import flat, narrow_wedge
    tab = Table(["family", "t", "x", "r", "closed_form", "F", "difference"],
                {"family": "narrow-wedge (Toeplitz) or flat (Toeplitz plus Hankel)", "t": "time",
                 "x": "position", "r": "level", "closed_form": "determinant formula",
                 "F": "Fredholm pipeline", "difference": "absolute difference"})
    lo, hi = cfg.r_range if cfg.r_range else (0, 8)
    families = [cfg.init] if cfg.init in ("flat", "narrow-wedge") else ["narrow-wedge", "flat"]
    for fam in families:
        for t in cfg.t:
            for x in cfg.xs:
                if fam == "narrow-wedge" and abs(x) >= t:
                    continue
                for r in range(lo, hi + 1):
                    if fam == "flat":
                        cf, h = flat_toeplitz_hankel(t, r), flat()
                    else:
                        cf, h = narrow_wedge_toeplitz(math.sqrt(t * t - x * x), r), narrow_wedge()
                    F = png_cdf(h, t, [x], [r], tol=cfg.tol, with_q=False).value
                    tab.add(family=fam, t=t, x=x, r=r, closed_form=cf, F=F, difference=abs(cf - F))
                    tab.failed |= abs(cf - F) > cfg.tol
    return tab


def cmd_initdata(cfg):
    from .integrable import initial_data_check, pinned_matrices_t0
    tab = Table(["xs", "rs", "Q_deviation", "inverse_deviation", "dQ_eta_deviation", "Q"],
                {"xs": "positions", "rs": "levels",
                 "Q_deviation": "max |Q(t=0) - (I - P)| with P the pinned-walk matrix",
                 "inverse_deviation": "max |(I - P<)(I + P<=) - I|",
                 "dQ_eta_deviation": f"one-sided difference in eta, step {cfg.delta}",
                 "Q": "Q at t=0, row-major"})
    for rs in cfg.r_vectors():
        dev = initial_data_check(cfg.h, cfg.xs, rs, delta=cfg.delta)
        pm = pinned_matrices_t0(cfg.h, cfg.xs, rs)
        tab.add(xs=cfg.xs, rs=rs, Q_deviation=dev["Q"], inverse_deviation=dev["inverse"],
                dQ_eta_deviation=dev["dQ_eta"], Q=pm.Q.ravel().tolist())
        tab.failed |= dev["Q"] > 1e-9 or dev["inverse"] > 1e-10 or dev["dQ_eta"] > 5 * cfg.delta
    return tab


DISPATCH = {"cdf": cmd_cdf, "simulate": cmd_simulate, "compare": cmd_compare,
            "toda-check": cmd_toda_check, "painleve": cmd_painleve,
            "closed-form": cmd_closed_form, "initdata": cmd_initdata}


# -- argument parsing ------------------------------------------------------------

def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file with run settings (flags override)")
    common.add_argument("--init", help="initial data: flat[:level], narrow-wedge[:y], two-step")
    common.add_argument("--t", help="time(s), comma separated")
    common.add_argument("--xs", "--x", dest="xs", help="position(s), comma separated, increasing")
    common.add_argument("--rs", "--r", dest="rs", help="level per position, comma separated")
    common.add_argument("--r-range", dest="r_range", help="common level range lo:hi (inclusive)")
    common.add_argument("--s", help="weight parameter(s) for painleve")
    common.add_argument("--tol", type=float, help="tolerance")
    common.add_argument("--delta", type=float, help="finite-difference step")
    common.add_argument("--n-samples", dest="n_samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--method", help="sampler: lastpassage, event, or both (checks agreement)")
    common.add_argument("--kind", help="toda-check equation: scalar, 1d, nonabelian")
    common.add_argument("--format", help="csv or json")
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--threads", type=int, help="worker processes (default PNG_TODA_THREADS or 1)")
    common.add_argument("--allow-unconverged", dest="allow_unconverged", action="store_true",
                        help="exit 0 even if a determinant did not converge")
    common.add_argument("--check", action="store_true", help="exit 4 if a consistency check fails")
    p = argparse.ArgumentParser(prog="png-toda", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "cdf": "joint CDF of PNG heights by Fredholm determinant",
        "simulate": "Monte Carlo samples of PNG heights",
        "compare": "Monte Carlo frequencies against Fredholm values",
        "toda-check": "finite-difference residuals of the Toda equations",
        "painleve": "discrete Painleve II and Ablowitz-Ladik residuals",
        "closed-form": "Toeplitz and Toeplitz-plus-Hankel determinants against the Fredholm values",
        "initdata": "t = 0 matrices against pinned random-walk probabilities",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as e:
        print(f"png-toda: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = DISPATCH[cfg.command](cfg)
    except ValueError as e:
        print(f"png-toda: {e}", file=sys.stderr)
        return EXIT_CONFIG
    text = render(table, cfg)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    if table.unconverged and not cfg.allow_unconverged:
        print("png-toda: a determinant did not converge (use --allow-unconverged to accept)", file=sys.stderr)
        return EXIT_UNCONVERGED
    if cfg.check and table.failed:
        print("png-toda: check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
