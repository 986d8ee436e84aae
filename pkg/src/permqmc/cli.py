"""
Command-line front end; every subcommand writes CSV.

Columns start with ``schema_version``; floats carry 17 significant digits.
Exit codes: 0 success, 1 failed ``verify`` check, 2 bad arguments,
3 parameters outside a formula's domain, 4 search space too large,
5 any other library error (tail tolerance, permutation guard).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import bounds, lattice, oracle
from ._numtheory import primes_upto
from .errors import ParameterDomain, PermQMCError, SearchSpaceTooLarge
from .spaces import InvarianceSpec, SpaceParams, Truncation

SCHEMA_VERSION = 1
SUBCOMMANDS = ("constants", "wce", "rms", "search", "average-check", "convergence", "verify")


@dataclass
class RunConfig:
    """All inputs of one CLI run; serialises to and from JSON."""

    subcommand: str = "constants"
    profile: str = "korobov"
    alpha: float = 1.0
    beta0: float = 1.0
    beta1: float = 1.0
    d: int = 1
    invariant: list[int] = field(default_factory=list)
    n: int = 5
    z: list[int] = field(default_factory=list)
    objective: str = "rms"
    mode: str = "exhaustive"
    count: int = 100
    seed: int = 0
    lam: float = 1.0
    primes_upto: int = 60
    box_radius: int = 4096
    tail_tol: float = 1e-6
    threads: int = 0
    output: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @property
    def params(self) -> SpaceParams:
        return SpaceParams(self.alpha, self.beta0, self.beta1, self.profile)

    @property
    def inv(self) -> InvarianceSpec:
        return InvarianceSpec(self.d, tuple(self.invariant))

    @property
    def trunc(self) -> Truncation:
        return Truncation(self.box_radius, self.tail_tol)

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("space")
    g.add_argument("--profile", choices=["korobov", "sobolev2pi", "mixed"])
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta0", type=float)
    g.add_argument("--beta1", type=float)
    g.add_argument("--d", type=int)
    g.add_argument("--invariant", type=_int_list, help="1-based indices, e.g. 1,2")
    g = common.add_argument_group("run")
    g.add_argument("--n", type=int)
    g.add_argument("--z", type=_int_list)
    g.add_argument("--objective", choices=["wce", "rms"])
    g.add_argument("--mode", choices=["exhaustive", "random"])
    g.add_argument("--count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--primes-upto", dest="primes_upto", type=int)
    g.add_argument("--box-radius", dest="box_radius", type=int)
    g.add_argument("--tail-tol", dest="tail_tol", type=float)
    g.add_argument("--threads", type=int)
    g.add_argument("--output")
    g.add_argument("--config", help="JSON file with RunConfig fields")

    parser = argparse.ArgumentParser(prog="permqmc", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    ns = _build_parser().parse_args(list(argv))
    cfg = RunConfig()
    if ns.config:
        with open(ns.config) as fh:
            cfg = RunConfig.from_json(fh.read())
    updates = {k: v for k, v in vars(ns).items() if v is not None and k != "config"}
    cfg = dataclasses.replace(cfg, **updates)
    if cfg.subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {cfg.subcommand!r}")
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (tuple, list)):
        return " ".join(str(int(x)) for x in v)
    if v is None:
        return ""
    return str(v)


def _emit(rows: list[dict], out) -> None:
    if not rows:
        return
    cols = ["schema_version"]
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(SCHEMA_VERSION if c == "schema_version" else r.get(c)) for c in cols])


def _space_cols(cfg: RunConfig) -> dict:
    return {"profile": cfg.profile, "alpha": cfg.alpha, "beta0": cfg.beta0, "beta1": cfg.beta1,
            "d": cfg.d, "invariant": cfg.invariant}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _constants(cfg: RunConfig) -> tuple[list[dict], int]:
    p, inv = cfg.params, cfg.inv
    tc = bounds.tractability_constants(p, inv, cfg.trunc)
    eta0 = bounds.eta_star(p, 0)
    row = dict(_space_cols(cfg), s_d=tc.s_d, m2_invariant=tc.m2_invariant,
               m2_full=tc.m2_full, m1_full=tc.m1_full, v_star=tc.v_star, eta_star=tc.eta_star,
               eta_star_0=eta0,
               rate_constant=math.sqrt(tc.v_star + 1.0 / (1.0 - tc.eta_star)))
    return [row], 0


def _lattice_from(cfg: RunConfig) -> lattice.Lattice:
    z = cfg.z or [1] * cfg.d
    if len(z) != cfg.d:
        raise ParameterDomain(f"--z has {len(z)} entries, expected {cfg.d}")
    return lattice.Lattice(cfg.n, tuple(z))


def _error(cfg: RunConfig, kind: str) -> tuple[list[dict], int]:
    lat = _lattice_from(cfg)
    fn = lattice.wce_unshifted if kind == "wce" else lattice.rms_shifted
    rep = fn(cfg.params, cfg.inv, lat, cfg.trunc)
    return [dict(_space_cols(cfg), n=lat.n, z=lat.z, quantity=kind, value=rep.value,
                 tail_bound=rep.tail_bound)], 0


def _mode(cfg: RunConfig):
    if cfg.mode == "random":
        return lattice.RandomSample(cfg.count, cfg.seed)
    return lattice.Exhaustive()


def _search(cfg: RunConfig) -> tuple[list[dict], int]:
    res = lattice.search(cfg.params, cfg.inv, cfg.n, cfg.objective, _mode(cfg), cfg.trunc,
                         threads=cfg.workers)
    return [dict(_space_cols(cfg), n=cfg.n, objective=res.objective.value, mode=cfg.mode,
                 seed=cfg.seed if cfg.mode == "random" else None, best_z=res.best_z,
                 best_value=res.best_value, tail_bound=res.tail_bound,
                 candidates_examined=res.candidates_examined)], 0


def _average(cfg: RunConfig) -> tuple[list[dict], int]:
    chk = lattice.average_over_z(cfg.params, cfg.inv, cfg.n, cfg.lam, cfg.trunc, cfg.workers)
    return [dict(_space_cols(cfg), n=cfg.n, lam=cfg.lam, empirical_average=chk.empirical_average,
                 bound=chk.bound, tail_bound=chk.tail_bound, holds=chk.holds)], 0


def _convergence(cfg: RunConfig) -> tuple[list[dict], int]:
    ns = [p for p in primes_upto(cfg.primes_upto)]
    if len(ns) < 2:
        raise ParameterDomain("need at least two primes for a slope")
    rows = []
    for n in ns:
        res = lattice.search(cfg.params, cfg.inv, n, cfg.objective, _mode(cfg), cfg.trunc,
                             threads=cfg.workers)
        rows.append(dict(_space_cols(cfg), kind="point", n=n, objective=res.objective.value,
                         best_z=res.best_z, value=res.best_value, tail_bound=res.tail_bound))
    x = np.log([r["n"] for r in rows])
    y = np.log([r["value"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    rows.append(dict(_space_cols(cfg), kind="fit", objective=cfg.objective,
                     slope=float(slope), intercept=float(intercept)))
    return rows, 0


def _verify_checks(cfg: RunConfig) -> Iterable[tuple[str, str, bool, float]]:
    """Small property suite; yields ``(check, case, passed, discrepancy)``."""
    p = cfg.params
    trunc = Truncation(1 << 16, 1e-6)
    for d, k in ((1, 0), (2, 0), (2, 2)):
        inv = InvarianceSpec(d, tuple(range(1, k + 1)))
        for n in (2, 3, 5):
            wce_min = rms_min = math.inf
            for z in itertools.product(range(n), repeat=d):
                lat = lattice.Lattice(n, z)
                a = lattice.wce_unshifted(p, inv, lat, trunc)
                b = oracle.wce_quadratic_form(p, inv, lat.points(), lat.weights(), trunc)
                c = oracle.general_error_formula(p, inv, lat.points(), lat.weights(), trunc)
                r = lattice.rms_shifted(p, inv, lat, trunc)
                case = f"d={d} I={k} n={n} z={z}"
                gap = abs(a.value - b.value)
                yield "oracle_dual", case, gap <= 1e-6 + a.tail_bound + b.tail_bound, gap
                gap = abs(c.value - b.value)
                yield "oracle_fourier", case, gap <= 1e-6 + c.tail_bound + b.tail_bound, gap
                gap = r.value - a.value
                yield "rms_below_wce", case, gap <= r.tail_bound + a.tail_bound, gap
                wce_min = min(wce_min, a.value)
                rms_min = min(rms_min, r.value)
            case = f"d={d} I={k} n={n}"
            lo = bounds.unshifted_lower_bound(p, inv, n)
            yield "unshifted_lower", case, lo <= wce_min + 1e-12, lo - wce_min
            lo = bounds.rmse_lower_bound(p, inv, n)
            yield "rms_lower", case, lo <= rms_min + 1e-12, lo - rms_min
            for lam in (1.0, 1.5):
                if 2.0 * p.alpha / lam <= 1.0:
                    continue
                chk = lattice.average_over_z(p, inv, n, lam, trunc)
                yield "average_over_z", f"{case} lam={lam}", chk.holds, chk.empirical_average - chk.bound
    from fractions import Fraction
    for n in (3, 5):
        for h in itertools.product(range(-3, 4), repeat=2):
            expect = Fraction(1) if all(v % n == 0 for v in h) else Fraction(1, n)
            got = lattice.character_average(h, n)
            yield "character", f"n={n} h={h}", got == expect, float(got - expect)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    for i in range(20):
        seq = np.concatenate([[1.0], np.sort(rng.random(int(rng.integers(1, 8))))[::-1]])
        d = int(rng.integers(1, 7))
        for v in range(4):
            s = bounds.lemma_bound_sides(seq, d, v)
            ok = s.lhs <= s.rhs * (1 + 1e-12)
            if v == 0:
                ok = ok and abs(s.lhs - s.rhs) <= 1e-10 * s.rhs
            yield "lemma_sides", f"seq={i} d={d} v={v}", ok, s.lhs - s.rhs


def _verify(cfg: RunConfig) -> tuple[list[dict], int]:
    rows = []
    failures = 0
    for check, case, ok, gap in _verify_checks(cfg):
        rows.append(dict(check=check, case=case, passed=bool(ok), discrepancy=float(gap)))
        failures += not ok
    return rows, 1 if failures else 0


_HANDLERS = {
    "constants": _constants,
    "wce": lambda c: _error(c, "wce"),
    "rms": lambda c: _error(c, "rms"),
    "search": _search,
    "average-check": _average,
    "convergence": _convergence,
    "verify": _verify,
}


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Execute one CLI invocation and return its exit code."""
    stdout = stdout or sys.stdout
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        rows, code = _HANDLERS[cfg.subcommand](cfg)
    except SearchSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ParameterDomain as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PermQMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    buf = io.StringIO()
    _emit(rows, buf)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
