"""Command-line front end: ``hetdp analyze | sweep | verify | simulate``.

Exit codes: 0 success, 1 bound violation, 2 input error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds
from .optimize import optimize_affine, optimize_threshold, ratio
from .oracle import SourceDistribution, Threshold, empirical_mse
from .profile import PrivacyProfile, ProfileError, mse_threshold_at, read_budget_csv

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


class InputError(Exception):
    pass


def parse_levels(text: str) -> list[tuple[float, int]]:
    """Parse ``eps:count[,eps:count...]``."""
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise InputError(f"--levels: expected eps:count, got {item!r}")
        try:
            eps, count = float(parts[0]), float(parts[1])
        except ValueError:
            raise InputError(f"--levels: cannot parse {item!r}") from None
        if not count.is_integer():
            raise InputError(f"--levels: count must be an integer in {item!r}")
        pairs.append((eps, int(count)))
    if not pairs:
        raise InputError("--levels: no levels given")
    return pairs


def load_profile(args) -> PrivacyProfile:
    sources = [s for s in (args.levels, args.json, args.csv) if s is not None]
    if len(sources) > 1:
        raise InputError("give only one of --levels, --json, --csv")
    try:
        if args.json is not None:
            profile = PrivacyProfile.from_json(args.json)
            if args.public:
                profile = PrivacyProfile(profile.levels, profile.public_count + args.public)
            return profile
        if args.csv is not None:
            try:
                profile = read_budget_csv(args.csv)
            except OSError as exc:
                raise InputError(f"--csv: {exc}") from None
            if args.public:
                profile = PrivacyProfile(profile.levels, profile.public_count + args.public)
            return profile
        pairs = parse_levels(args.levels) if args.levels is not None else []
        return PrivacyProfile.from_pairs(pairs, args.public)
    except ProfileError as exc:
        raise InputError(str(exc)) from None


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=False)


# -- analyze -----------------------------------------------------------------

def cmd_analyze(args) -> int:
    profile = load_profile(args)
    print(_dump(ratio(profile).to_dict()))
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

FAMILY_PARAMS = {
    "public_private": ("n1", "eps1", "n2"),
    "two_level": ("n1", "eps1", "n2", "eps2"),
}
_COUNT_PARAMS = {"n1", "n2"}


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    scale: str
    steps: int

    def values(self) -> np.ndarray:
        if self.scale == "log":
            vals = np.geomspace(self.lo, self.hi, self.steps)
        else:
            vals = np.linspace(self.lo, self.hi, self.steps)
        if self.name in _COUNT_PARAMS:
            vals = np.maximum(np.rint(vals), 1)
        return vals


@dataclass(frozen=True)
class SweepSpec:
    family: str
    fixed: dict
    axis1: Axis
    axis2: Axis
    out: str | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILY_PARAMS:
            raise InputError(f"--family: unknown family {self.family!r}")
        names = FAMILY_PARAMS[self.family]
        given = set(self.fixed) | {self.axis1.name, self.axis2.name}
        if self.axis1.name == self.axis2.name:
            raise InputError("axes must sweep different parameters")
        for name in given:
            if name not in names:
                raise InputError(f"parameter {name!r} does not belong to family {self.family}")
        missing = set(names) - given
        if missing:
            raise InputError(f"--fixed: missing value for {sorted(missing)}")
        for ax in (self.axis1, self.axis2):
            if ax.steps < 2:
                raise InputError(f"axis {ax.name}: steps must be >= 2")
            if not (ax.lo > 0 and ax.hi > 0):
                raise InputError(f"axis {ax.name}: range must be positive")
            if ax.scale not in ("log", "linear"):
                raise InputError(f"axis {ax.name}: scale must be log or linear")


def parse_axis(text: str) -> Axis:
    parts = text.split(":")
    if len(parts) != 5:
        raise InputError(f"axis: expected name:lo:hi:scale:steps, got {text!r}")
    name, lo, hi, scale, steps = parts
    try:
        return Axis(name, float(lo), float(hi), scale, int(steps))
    except ValueError:
        raise InputError(f"axis: cannot parse {text!r}") from None


def parse_fixed(items) -> dict:
    fixed = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--fixed: expected name=value, got {item!r}")
        try:
            fixed[key.strip()] = float(value)
        except ValueError:
            raise InputError(f"--fixed: cannot parse value in {item!r}") from None
    return fixed


def sweep_profile(family: str, params: dict) -> PrivacyProfile:
    if family == "public_private":
        return bounds.make_public_private(int(params["n1"]), params["eps1"], int(params["n2"]))
    return bounds.make_two_level(int(params["n1"]), params["eps1"],
                                 int(params["n2"]), params["eps2"])


def run_sweep(spec: SweepSpec) -> list[tuple[float, float, float, float, float]]:
    """Grid rows ``(axis1, axis2, mse_thr, mse_aff, ratio)``, axis 1 outermost."""
    rows = []
    for a in spec.axis1.values():
        for b in spec.axis2.values():
            params = dict(spec.fixed)
            params[spec.axis1.name] = float(a)
            params[spec.axis2.name] = float(b)
            rep = ratio(sweep_profile(spec.family, params))
            rows.append((float(a), float(b), rep.mse_thr, rep.mse_aff, rep.ratio))
    return rows


def write_sweep_csv(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["axis1", "axis2", "mse_thr", "mse_aff", "ratio"])
    for row in rows:
        writer.writerow([repr(x) for x in row])


def cmd_sweep(args) -> int:
    spec = SweepSpec(args.family, parse_fixed(args.fixed), parse_axis(args.axis1),
                     parse_axis(args.axis2), args.out)
    rows = run_sweep(spec)
    if spec.out in (None, "-"):
        write_sweep_csv(rows, sys.stdout)
        return EXIT_OK
    try:
        with open(spec.out, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    except OSError as exc:
        print(f"error: cannot write {spec.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# -- verify ------------------------------------------------------------------

DEFAULT_INSTANCES = {"thm1": 400, "thm2": 10_000, "thm34": 13, "lemma": 1000}


def cmd_verify(args) -> int:
    suites = list(bounds.SUITES) if args.suite == "all" else [args.suite]
    out = sys.stdout
    close = False
    if args.out not in (None, "-"):
        try:
            out = open(args.out, "w")
            close = True
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    failures = total = 0
    try:
        for name in suites:
            instances = args.instances or DEFAULT_INSTANCES[name]
            for line in bounds.SUITES[name](instances, args.seed):
                total += 1
                failures += not line["ok"]
                out.write(_dump(line) + "\n")
    finally:
        if close:
            out.close()
    print(f"{total - failures}/{total} checks passed", file=sys.stderr)
    return EXIT_VIOLATION if failures else EXIT_OK


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    profile = load_profile(args)
    if args.trials < 1000:
        raise InputError("--trials must be >= 1000")
    if args.estimator == "threshold":
        eps_star, analytic = optimize_threshold(profile)
        estimator = Threshold(eps_star)
        est_info = {"kind": "threshold", "eps": _num(eps_star)}
    else:
        plan = optimize_affine(profile)
        estimator, analytic = plan, plan.mse
        est_info = {"kind": "affine", **plan.to_dict()}
    dist = (SourceDistribution.rademacher_half() if args.dist == "rademacher"
            else SourceDistribution.point_mass(0.0))
    mc = empirical_mse(profile, estimator, dist, args.trials, args.seed, workers=args.workers)
    z = (mc.empirical_mse - analytic) / mc.stderr if mc.stderr > 0 else 0.0
    print(_dump({"estimator": est_info, "dist": args.dist, "analytic_mse": analytic,
                 "mc": mc.to_dict(), "z_score": z}))
    return EXIT_OK


def _num(x: float):
    return "inf" if math.isinf(x) else x


# -- entry point ---------------------------------------------------------------

def _default_seed() -> int:
    raw = os.environ.get("HETDP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"HETDP_SEED must be an integer, got {raw!r}") from None


def _add_profile_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--levels", help="budgets as eps:count[,eps:count...]")
    p.add_argument("--public", type=int, default=0, help="number of public records")
    p.add_argument("--json", help='profile JSON {"levels": [[eps, count], ...], "public_count": k}')
    p.add_argument("--csv", help="file of per-record budgets, one per line, 'inf' for public")


def build_parser(default_seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="optimal threshold and affine risks of a profile")
    _add_profile_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="ratio grid over two parameters, written as CSV")
    p.add_argument("--family", required=True, choices=sorted(FAMILY_PARAMS))
    p.add_argument("--fixed", action="append", metavar="NAME=VALUE")
    p.add_argument("--axis1", required=True, metavar="NAME:LO:HI:SCALE:STEPS")
    p.add_argument("--axis2", required=True, metavar="NAME:LO:HI:SCALE:STEPS")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check the ratio bounds, one JSON line per check")
    p.add_argument("suite", choices=[*bounds.SUITES, "all"])
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--out", help="JSON-lines output path (default stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo risk of the optimized estimator")
    _add_profile_args(p)
    p.add_argument("--estimator", choices=("threshold", "affine"), default="affine")
    p.add_argument("--dist", choices=("rademacher", "delta0"), default="rademacher")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser(_default_seed())
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_INPUT if exc.code else EXIT_OK
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
