"""Acceptance criteria 1-9, each reported as one PASS/FAIL line."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from permqmc import bounds
from permqmc._numtheory import primes_upto
from permqmc.lattice import Lattice, average_over_z, character_average, search, squared_errors
from permqmc.oracle import general_error_formula, wce_quadratic_form
from permqmc.spaces import InvarianceSpec, SpaceParams, Truncation

GRID_DIMS = [(d, k) for d in (1, 2, 3) for k in (0, 2, 3) if k <= d]
GRID_PRIMES = (2, 3, 5, 7)
GRID_PROFILES = ("korobov", "sobolev2pi")


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def spec(d, k):
    return InvarianceSpec(d, tuple(range(1, k + 1)))


def test_criterion_1_constants():
    t0 = time.perf_counter()
    sob = (1 - bounds.eta_star(SpaceParams(1.0, profile="sobolev2pi"), 0)) ** -0.5
    mix1 = bounds.eta_star(SpaceParams(1.0, profile="mixed"), 0)
    eta2 = bounds.eta_star(SpaceParams(2.0, profile="mixed"), 0)
    mix2 = (1 - eta2) ** -0.5
    dt = time.perf_counter() - t0
    ok = (abs(sob - 1.044465936) <= 1e-8 and abs(mix1 - 2.15335) <= 1e-4
          and abs(eta2 - 0.613674) <= 1e-5 and abs(mix2 - 1.60888) <= 1e-4 and dt < 1.0)
    report(1, ok, f"sobolev {sob:.10f}, mixed a=1 eta {mix1:.6f}, mixed a=2 eta {eta2:.7f} "
                  f"const {mix2:.6f}, {dt:.3f}s")


def test_criterion_2_threshold_roots():
    t0 = time.perf_counter()
    a_sob = bounds.alpha_star("sobolev2pi")
    a_mix = bounds.alpha_star("mixed")
    dt = time.perf_counter() - t0
    ok = abs(a_sob - 0.61769976) <= 1e-6 and abs(a_mix - 1.521196) <= 1e-5 and dt < 1.0
    report(2, ok, f"sobolev {a_sob:.9f}, mixed {a_mix:.7f}, {dt:.3f}s")


def test_criterion_3_oracle_equivalence():
    tr = Truncation(1 << 18, 1e-6)
    worst_dual = worst_fourier = 0.0
    max_tail = 0.0
    cases = 0
    for prof in GRID_PROFILES:
        p = SpaceParams(1.0, profile=prof)
        for d, k in GRID_DIMS:
            inv = spec(d, k)
            for n in GRID_PRIMES:
                Z = list(itertools.product(range(n), repeat=d))
                vals, errs = squared_errors(p, inv, n, Z, "wce")
                for z, v, e in zip(Z, vals, errs):
                    lat = Lattice(n, z)
                    q = wce_quadratic_form(p, inv, lat.points(), lat.weights(), tr)
                    f = general_error_formula(p, inv, lat.points(), lat.weights(), tr)
                    w = math.sqrt(max(v, 0.0))
                    w_tail = math.sqrt(v + e) - w
                    max_tail = max(max_tail, q.stats["squared_tail"], f.stats["squared_tail"], e)
                    worst_dual = max(worst_dual, abs(w - q.value) - (w_tail + q.tail_bound))
                    worst_fourier = max(worst_fourier, abs(f.value - q.value) - (f.tail_bound + q.tail_bound))
                    cases += 1
    ok = worst_dual <= 1e-6 and worst_fourier <= 1e-6 and max_tail <= 1e-8
    report(3, ok, f"{cases} rules, excess dual {worst_dual:.2e}, excess fourier {worst_fourier:.2e}, "
                  f"max squared tail {max_tail:.1e}")


def test_criterion_4_bound_chain():
    violations = []
    checks = 0
    for prof in GRID_PROFILES:
        p = SpaceParams(1.0, profile=prof)
        for d, k in GRID_DIMS:
            inv = spec(d, k)
            for n in GRID_PRIMES:
                Z = list(itertools.product(range(n), repeat=d))
                w2, we = squared_errors(p, inv, n, Z, "wce")
                r2, re = squared_errors(p, inv, n, Z, "rms")
                case = f"{prof} d={d} k={k} n={n}"
                bad = np.flatnonzero(r2 > w2 + we + re)
                if bad.size:
                    violations.append(f"rms>wce {case}")
                lo_u = bounds.unshifted_lower_bound(p, inv, n)
                lo_r = bounds.rmse_lower_bound(p, inv, n)
                if lo_u > math.sqrt(np.min(w2 + we)):
                    violations.append(f"unshifted lower {case}")
                if lo_r > math.sqrt(np.min(r2 + re)):
                    violations.append(f"rms lower {case}")
                for lam in (1.0, 1.5):
                    if not average_over_z(p, inv, n, lam).holds:
                        violations.append(f"average lam={lam} {case}")
                checks += 3 + len(Z)
    report(4, not violations, f"{checks} inequalities, violations: {violations[:3] or 'none'}")


def test_criterion_5_character_identity():
    mismatches = 0
    total = 0
    for n in (3, 5, 7):
        for d in (1, 2):
            for h in itertools.product(range(-3, 4), repeat=d):
                expect = Fraction(1) if all(v % n == 0 for v in h) else Fraction(1, n)
                mismatches += character_average(h, n) != expect
                total += 1
    report(5, mismatches == 0, f"{total} frequency vectors, {mismatches} mismatches")


def test_criterion_6_lemma_sides():
    rng = np.random.Generator(np.random.Philox(2024))
    worst_eq = 0.0
    ineq_fail = 0
    for _ in range(100):
        M = int(rng.integers(0, 9))
        l0 = float(rng.uniform(0.1, 3.0))
        seq = [l0] + list(rng.uniform(0, l0, M))
        d = int(rng.integers(1, 7))
        for v in range(4):
            s = bounds.lemma_bound_sides(seq, d, v)
            if s.lhs > s.rhs * (1 + 1e-12):
                ineq_fail += 1
            if v == 0:
                worst_eq = max(worst_eq, abs(s.lhs - s.rhs) / s.rhs)
    ok = ineq_fail == 0 and worst_eq <= 1e-10
    report(6, ok, f"100 sequences, inequality failures {ineq_fail}, worst V=0 relative gap {worst_eq:.1e}")


def test_criterion_7_sandwich_and_scaling():
    failures = []
    checked = 0
    grid = [
        SpaceParams(1.0, 1.0, 0.5, "korobov"),
        SpaceParams(1.5, 1.0, 1.0, "sobolev2pi"),
        SpaceParams(2.0, 2.0, 0.7, "mixed"),
        SpaceParams(1.2, 0.5, 1.5, "mixed"),
    ]
    for p in grid:
        for d in (1, 2, 3):
            for k in sorted({0, 1, min(2, d), d}):
                inv = spec(d, k)
                for lam in (1.0, 1.2, 1.5):
                    if not 2 * p.alpha / lam > 1:
                        continue
                    exact = bounds.c_d_lambda(p, inv, lam)
                    aux = []
                    if lam > 1:
                        lo_a, hi_a = (lam - 1) / 2, p.alpha - 0.5
                        for A in np.linspace(lo_a, hi_a, 5)[1:-1]:
                            for gamma in (0.5, 1.0, 2.0):
                                aux.append((float(A), gamma))
                    lower = bounds.c_d_lambda_bounds(p, inv, lam).lower
                    if lower > exact.value + exact.tail_bound:
                        failures.append(f"lower {p} d={d} k={k} lam={lam}")
                    for A, gamma in aux:
                        ub = bounds.c_d_lambda_bounds(p, inv, lam, A=A, gamma=gamma).upper
                        if exact.value - exact.tail_bound > ub:
                            failures.append(f"upper {p} d={d} k={k} lam={lam} A={A} g={gamma}")
                        checked += 1
                    checked += 1
    worst_scale = 0.0
    for p in grid:
        q = p.replace(beta0=1.0, beta1=p.beta1 / p.beta0)
        for d, k in ((2, 2), (3, 1), (3, 3)):
            inv = spec(d, k)
            for lam in (1.0, 1.2, 1.5):
                if not 2 * p.alpha / lam > 1:
                    continue
                a = bounds.c_d_lambda(p, inv, lam).value
                b = bounds.s_d(p, inv) * bounds.c_d_lambda(q, inv, lam).value
                worst_scale = max(worst_scale, abs(a - b) / abs(a))
    ok = not failures and worst_scale <= 1e-10
    report(7, ok, f"{checked} sandwich checks, failures {failures[:3] or 'none'}, "
                  f"worst scaling gap {worst_scale:.1e}")


def test_criterion_8_convergence_slope():
    p = SpaceParams(1.0, profile="sobolev2pi")
    inv = InvarianceSpec.full(2)
    ns = primes_upto(200)
    best = [search(p, inv, n, "rms").best_value for n in ns]
    slope = float(np.polyfit(np.log(ns), np.log(best), 1)[0])
    report(8, -1.35 <= slope <= -0.85, f"{len(ns)} primes up to {ns[-1]}, slope {slope:.4f}")


def test_criterion_9_degenerate_identities():
    worst_n1 = 0.0
    zero_exact = True
    for prof in ("korobov", "sobolev2pi", "mixed"):
        for beta0 in (0.5, 1.0, 2.0):
            p = SpaceParams(1.3, beta0, 0.8, prof)
            for d, k in ((1, 0), (2, 2), (3, 2), (3, 3)):
                inv = spec(d, k)
                v, e = squared_errors(p, inv, 1, [(0,) * d], "wce")
                got = math.sqrt(v[0])
                want = math.sqrt(bounds.m2_full(p, d) - bounds.s_d(p, inv))
                worst_n1 = max(worst_n1, abs(got - want) - math.sqrt(v[0] + e[0]) + got)
                pts = np.random.default_rng(d).random((3, d))
                e0 = math.sqrt(bounds.s_d(p, inv))
                q = wce_quadratic_form(p, inv, pts, np.zeros(3), Truncation(64, 1.0)).value
                f = general_error_formula(p, inv, pts, np.zeros(3), Truncation(4, 1.0)).value
                zero_exact = zero_exact and q == e0 and f == e0
    ok = worst_n1 <= 1e-10 and zero_exact
    report(9, ok, f"n=1 worst excess {worst_n1:.1e}, zero-weight rule exact: {zero_exact}")
