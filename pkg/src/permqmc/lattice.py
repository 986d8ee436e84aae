"""
Rank-1 lattice rules on permutation-invariant spaces.

Two evaluation strategies are provided for the squared errors.

``method="character"`` (default) is exact up to the one-dimensional series
errors.  Frequencies are grouped by residue class modulo ``n``: with
``G_c(a) = sum_{m = a (mod n)} w(m)^c`` and its discrete Fourier transform
``Ghat_c``, the character property gives

    sum_{h : h.z = 0 (mod n)} prod_l w(h_l)^{c_l} = (1/n) sum_j prod_l Ghat_{c_l}(j z_l).

The shift-averaged error splits over the cycle structure of the permutations
(frequencies fixed by ``P`` are constant on its cycles) and the worst-case
error over pairs ``(z, P z)``.

``method="box"`` enumerates ``nabla_d`` in the box ``|h_j| <= H``, counts the
permutations ``P`` with ``P(k)`` in the dual lattice and bounds the rest of
``Z^d`` by the tensor-product tail.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._numtheory import is_prime
from .bounds import c_d_lambda
from .errors import ParameterDomain, SearchSpaceTooLarge, TailToleranceExceeded, TooManyPermutations
from .spaces import (
    MAX_PERMUTED,
    ErrorReport,
    InvarianceSpec,
    SpaceParams,
    Truncation,
    cycle_set_partitions,
    decay_sum,
    nabla_array,
    residue_sums,
)

__all__ = [
    "Lattice",
    "Shift",
    "Objective",
    "Exhaustive",
    "RandomSample",
    "SearchResult",
    "AverageCheck",
    "dual_contains",
    "wce_unshifted",
    "rms_shifted",
    "wce_shifted",
    "squared_errors",
    "search",
    "average_over_z",
    "character_average",
    "MAX_EXHAUSTIVE",
]

#: Guard on the number of generating vectors visited by exhaustive loops.
MAX_EXHAUSTIVE = 10_000_000
#: Relative gap below which two objective values are treated as tied.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Lattice:
    """Rank-1 lattice with ``n`` points and generating vector ``z``.

    ``n`` must be prime; ``n = 1`` is admitted as a degenerate rule.
    """

    n: int
    z: tuple[int, ...]

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 1:
            raise ParameterDomain(f"n must be a positive integer (got {self.n})")
        if n != 1 and not is_prime(n):
            raise ParameterDomain(f"n = {n} is not prime")
        z = tuple(int(v) for v in np.atleast_1d(self.z))
        if not z:
            raise ParameterDomain("empty generating vector")
        if any(v < 0 or v >= max(n, 1) for v in z) and n > 1:
            raise ParameterDomain(f"generating vector {z} outside Z_{n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "z", tuple(v % n for v in z))

    @property
    def d(self) -> int:
        return len(self.z)

    def points(self) -> np.ndarray:
        """Nodes ``(j z mod n) / n`` for ``j = 0..n-1``, shape ``(n, d)``."""
        j = np.arange(self.n, dtype=np.int64)[:, None]
        return (j * np.asarray(self.z, dtype=np.int64)[None, :] % self.n) / self.n

    def weights(self) -> np.ndarray:
        return np.ones(self.n)


@dataclass(frozen=True)
class Shift:
    delta: tuple[float, ...]

    def __post_init__(self):
        delta = tuple(float(v) for v in np.atleast_1d(self.delta))
        if any(not (0.0 <= v < 1.0) for v in delta):
            raise ParameterDomain(f"shift {delta} not in [0, 1)^d")
        object.__setattr__(self, "delta", delta)


class Objective(str, enum.Enum):
    UNSHIFTED_WCE = "wce"
    RMS_SHIFTED = "rms"


@dataclass(frozen=True)
class Exhaustive:
    pass


@dataclass(frozen=True)
class RandomSample:
    count: int
    seed: int = 0


@dataclass(frozen=True)
class SearchResult:
    best_z: tuple[int, ...]
    best_value: float
    candidates_examined: int
    objective: Objective
    tail_bound: float = 0.0


def dual_contains(lat: Lattice, h: Sequence[int]) -> bool:
    """``h . z = 0 (mod n)``, reducing each product before accumulating."""
    h = tuple(int(v) for v in h)
    if len(h) != lat.d:
        raise ParameterDomain("dimension mismatch")
    acc = 0
    for hv, zv in zip(h, lat.z):
        acc = (acc + (hv % lat.n) * zv) % lat.n
    return acc == 0


# ---------------------------------------------------------------------------
# character-sum evaluation
# ---------------------------------------------------------------------------

def _ghat(params: SpaceParams, n: int, power: int, tol: float) -> tuple[np.ndarray, float]:
    G, err = residue_sums(params, n, power, tol)
    Gh = np.fft.fft(G).real
    eps = float(np.sum(err)) + 4.0 * np.finfo(float).eps * float(np.sum(G)) * math.log2(n + 1)
    return Gh, eps


def _dual_sums(n: int, factors, batch: int) -> tuple[np.ndarray, np.ndarray]:
    """``(1/n) sum_j prod_f Ghat_f[(j c_f) mod n]`` per batch column, with error bounds.

    ``factors`` holds ``(Ghat, eps, coeff)`` with ``coeff`` an int array of
    length ``batch``.
    """
    j = np.arange(n, dtype=np.int64)[:, None]
    val = np.ones((n, batch))
    absv = np.ones((n, batch))
    upper = np.ones((n, batch))
    for Gh, eps, coeff in factors:
        g = Gh[(j * coeff[None, :]) % n]
        val *= g
        a = np.abs(g)
        absv *= a
        upper *= a + eps
    return val.mean(axis=0), (upper - absv).mean(axis=0)


def _rms_character(params: SpaceParams, inv: InvarianceSpec, n: int, Z: np.ndarray, tol: float):
    N = Z.shape[0]
    free = list(inv.free_positions)
    cache = {}

    def ghat(c):
        if c not in cache:
            cache[c] = _ghat(params, n, c, tol)
        return cache[c]

    g1 = ghat(1)
    free_f = [(g1[0], g1[1], Z[:, l]) for l in free]
    total = np.zeros(N)
    err = np.zeros(N)
    for blocks, w in cycle_set_partitions(inv.positions):
        fac = []
        for b in blocks:
            Gh, eps = ghat(len(b))
            fac.append((Gh, eps, Z[:, list(b)].sum(axis=1) % n))
        v, e = _dual_sums(n, fac + free_f, N)
        total += w * v
        err += w * e
    g = inv.group_size
    b0 = params.beta0 ** inv.d
    return total / g - b0, err / g + 4.0 * np.finfo(float).eps * np.abs(total / g)


def _wce_character(params: SpaceParams, inv: InvarianceSpec, n: int, Z: np.ndarray, tol: float):
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    N, d = Z.shape
    Gh, eps = _ghat(params, n, 1, tol)
    pos = list(inv.positions)
    total = np.zeros(N)
    err = np.zeros(N)
    count = 0
    j = np.arange(n, dtype=np.int64)
    for perm in itertools.permutations(pos):
        cols = list(range(d))
        for p, q in zip(pos, perm):
            cols[p] = q
        Zp = Z[:, cols]
        # (1/n^2) sum_{j,k} prod_l Ghat[(j z_l + k z'_l) mod n]
        acc = np.zeros(N)
        acc_err = np.zeros(N)
        for jj in range(n):
            base = (jj * Z) % n
            idx = (base[None, :, :] + j[:, None, None] * Zp[None, :, :]) % n
            g = Gh[idx]
            a = np.abs(g)
            acc += np.prod(g, axis=2).sum(axis=0)
            acc_err += (np.prod(a + eps, axis=2) - np.prod(a, axis=2)).sum(axis=0)
        total += acc / n ** 2
        err += acc_err / n ** 2
        count += 1
    b0 = params.beta0 ** d
    mean = total / count
    return mean - b0, err / count + 4.0 * np.finfo(float).eps * np.abs(mean)


# ---------------------------------------------------------------------------
# box enumeration
# ---------------------------------------------------------------------------

def _box_counts(inv: InvarianceSpec, K: np.ndarray, n: int, Z: np.ndarray) -> np.ndarray:
    """``s[i, b] = #{P : P(K_i) in L(Z_b)^perp}`` over all permutations of ``I_d``."""
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    pos = list(inv.positions)
    Km = K % n
    s = np.zeros((K.shape[0], Z.shape[0]), dtype=np.int64)
    for perm in itertools.permutations(pos):
        cols = list(range(inv.d))
        for p, q in zip(pos, perm):
            cols[p] = q
        dots = (Km[:, cols] @ Z.T) % n
        s += dots == 0
    return s


def _box_errors(params: SpaceParams, inv: InvarianceSpec, n: int, Z: np.ndarray,
                trunc: Truncation):
    H = trunc.box_radius
    K = nabla_array(inv, H)
    K = K[np.any(K != 0, axis=1)]
    A = np.abs(K).astype(float)
    nz = A > 0
    w = np.prod(np.where(nz, params.beta1 * params.profile.decay(np.where(nz, A, 1.0),
                                                                   2.0 * params.alpha),
                         params.beta0), axis=1)
    pos = list(inv.positions)
    block = K[:, pos]
    mfact = np.ones(K.shape[0])
    run = np.ones(K.shape[0])
    for j in range(1, inv.k):
        same = block[:, j] == block[:, j - 1]
        run = np.where(same, run + 1.0, 1.0)
        mfact *= np.where(same, run, 1.0)
    g = float(inv.group_size)
    wce2 = np.zeros(Z.shape[0])
    rms2 = np.zeros(Z.shape[0])
    chunk = max(1, 2_000_000 // max(K.shape[0], 1))
    for a in range(0, Z.shape[0], chunk):
        s = _box_counts(inv, K, n, Z[a:a + chunk]).astype(float)
        wce2[a:a + chunk] = (w[:, None] * s * s / (mfact[:, None] * g)).sum(axis=0)
        rms2[a:a + chunk] = (w[:, None] * s / g).sum(axis=0)
    one = params.beta0 + 2.0 * params.beta1 * decay_sum(params.profile, 2.0 * params.alpha)[0]
    one += 2.0 * params.beta1 * decay_sum(params.profile, 2.0 * params.alpha)[1]
    m = np.arange(1, H + 1, dtype=float)
    boxed = params.beta0 + 2.0 * params.beta1 * math.fsum(
        params.profile.decay(m, 2.0 * params.alpha).tolist())
    tail = max(one ** inv.d - boxed ** inv.d, 0.0)
    return wce2, rms2, tail, int(K.shape[0])


# ---------------------------------------------------------------------------
# public evaluators
# ---------------------------------------------------------------------------

def squared_errors(params: SpaceParams, inv: InvarianceSpec, n: int, Z, objective,
                   trunc: Truncation = Truncation(), method: str = "character"):
    """Squared errors and error bounds for a batch of generating vectors ``Z``.

    Returns ``(values, bounds)`` as arrays of length ``len(Z)``.
    """
    objective = Objective(objective)
    Z = np.atleast_2d(np.asarray(Z, dtype=np.int64)) % max(n, 1)
    if Z.shape[1] != inv.d:
        raise ParameterDomain("generating vectors do not match the dimension")
    if method == "character":
        if objective is Objective.RMS_SHIFTED:
            return _rms_character(params, inv, n, Z, trunc.series_tol)
        return _wce_character(params, inv, n, Z, trunc.series_tol)
    if method == "box":
        wce2, rms2, tail, _ = _box_errors(params, inv, n, Z, trunc)
        vals = rms2 if objective is Objective.RMS_SHIFTED else wce2
        return vals, np.full(vals.shape, tail)
    raise ParameterDomain(f"unknown method {method!r}")


def _report(sq: float, err: float, trunc: Truncation, stats: dict) -> ErrorReport:
    if err > trunc.tail_tol:
        raise TailToleranceExceeded(f"tail bound {err:.3e} > {trunc.tail_tol:.3e}")
    value = math.sqrt(max(sq, 0.0))
    hi = math.sqrt(max(sq + err, 0.0))
    lo = math.sqrt(max(sq - err, 0.0))
    stats = dict(stats, squared=sq, squared_tail=err)
    return ErrorReport(value, max(hi - value, value - lo), stats)


def _single(params, inv, lat: Lattice, trunc, method, objective) -> ErrorReport:
    if lat.d != inv.d:
        raise ParameterDomain("lattice dimension does not match the invariance spec")
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    if method == "box":
        wce2, rms2, tail, count = _box_errors(params, inv, lat.n,
                                              np.asarray([lat.z], dtype=np.int64), trunc)
        sq = (rms2 if objective is Objective.RMS_SHIFTED else wce2)[0]
        return _report(float(sq), tail, trunc, {"method": "box", "enumerated": count})
    v, e = squared_errors(params, inv, lat.n, [lat.z], objective, trunc, method)
    return _report(float(v[0]), float(e[0]), trunc, {"method": method})


def wce_unshifted(params: SpaceParams, inv: InvarianceSpec, lat: Lattice,
                  trunc: Truncation = Truncation(), method: str = "character") -> ErrorReport:
    """Worst-case error of the unshifted rule on the invariant subspace.

    ``e^2 = sum_{0 != h in L^perp} r^{-1}(h) #{P : P(h) in L^perp} / #S``.
    """
    return _single(params, inv, lat, trunc, method, Objective.UNSHIFTED_WCE)


def rms_shifted(params: SpaceParams, inv: InvarianceSpec, lat: Lattice,
                trunc: Truncation = Truncation(), method: str = "character") -> ErrorReport:
    """Root mean square over uniform shifts, ``E^2 = sum_{0 != h in L^perp} M(h)!/#S r^{-1}(h)``."""
    return _single(params, inv, lat, trunc, method, Objective.RMS_SHIFTED)


def wce_shifted(params: SpaceParams, inv: InvarianceSpec, lat: Lattice, shift: Shift,
                trunc: Truncation = Truncation()) -> ErrorReport:
    """Worst-case error of the shifted rule via the kernel quadratic form."""
    from .oracle import wce_quadratic_form

    if len(shift.delta) != lat.d:
        raise ParameterDomain("shift dimension mismatch")
    pts = np.mod(lat.points() + np.asarray(shift.delta)[None, :], 1.0)
    return wce_quadratic_form(params, inv, pts, lat.weights(), trunc)


# ---------------------------------------------------------------------------
# search and averaging
# ---------------------------------------------------------------------------

def _all_vectors(n: int, d: int) -> np.ndarray:
    total = n ** d
    if total > MAX_EXHAUSTIVE:
        raise SearchSpaceTooLarge(f"{n}^{d} = {total} generating vectors exceed {MAX_EXHAUSTIVE}")
    idx = np.arange(total, dtype=np.int64)
    out = np.empty((total, d), dtype=np.int64)
    for l in range(d - 1, -1, -1):
        out[:, l] = idx % n
        idx //= n
    return out


def _evaluate(params, inv, n, Z, objective, trunc, method, threads: int | None):
    chunk = max(1, 4096 // max(n, 1))
    parts = [Z[a:a + chunk] for a in range(0, Z.shape[0], chunk)]

    def run(part):
        return squared_errors(params, inv, n, part, objective, trunc, method)

    if threads is not None and threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            res = list(pool.map(run, parts))
    else:
        res = [run(p) for p in parts]
    vals = np.concatenate([r[0] for r in res])
    errs = np.concatenate([r[1] for r in res])
    return vals, errs


def search(params: SpaceParams, inv: InvarianceSpec, n: int, objective, mode=Exhaustive(),
           trunc: Truncation = Truncation(), method: str = "character",
           threads: int | None = None) -> SearchResult:
    """Generating vector minimising the chosen error.

    Candidates are visited in lexicographic order.  Values within a relative
    ``TIE_RTOL`` of the minimum count as ties and the lexicographically
    smallest ``z`` among them wins, so results do not depend on ``threads``.
    """
    objective = Objective(objective)
    Lattice(n, (0,) * inv.d)
    if isinstance(mode, Exhaustive):
        Z = _all_vectors(n, inv.d)
    elif isinstance(mode, RandomSample):
        if mode.count < 1:
            raise ParameterDomain("sample count must be positive")
        rng = np.random.Generator(np.random.Philox(mode.seed))
        Z = rng.integers(0, n, size=(mode.count, inv.d), dtype=np.int64)
        Z = np.unique(Z, axis=0)
    else:
        raise ParameterDomain(f"unknown search mode {mode!r}")
    vals, errs = _evaluate(params, inv, n, Z, objective, trunc, method, threads)
    # rounding-level ties go to the lexicographically smallest candidate
    vmin = float(np.min(vals))
    i = int(np.flatnonzero(vals <= vmin + TIE_RTOL * abs(vmin))[0])
    examined = int(mode.count) if isinstance(mode, RandomSample) else int(Z.shape[0])
    rep = _report(float(vals[i]), float(errs[i]), trunc, {})
    return SearchResult(tuple(int(v) for v in Z[i]), rep.value, examined, objective, rep.tail_bound)


@dataclass(frozen=True)
class AverageCheck:
    empirical_average: float
    bound: float
    tail_bound: float
    holds: bool
    stats: dict = field(default_factory=dict, compare=False)


def average_over_z(params: SpaceParams, inv: InvarianceSpec, n: int, lam: float,
                   trunc: Truncation = Truncation(), threads: int | None = None) -> AverageCheck:
    """``(1/n^d) sum_z E(Q_n(z))^(2/lam)`` against ``(1 + c_R) C_{d,lam}^(1/lam) / n``."""
    if n != 1 and not is_prime(n):
        raise ParameterDomain(f"n = {n} is not prime")
    Z = _all_vectors(n, inv.d)
    vals, errs = _evaluate(params, inv, n, Z, Objective.RMS_SHIFTED, trunc, "character", threads)
    vals = np.maximum(vals, 0.0)
    p = 1.0 / lam
    emp = float(np.mean(vals ** p))
    emp_hi = float(np.mean((vals + errs) ** p))
    C = c_d_lambda(params, inv, lam, trunc)
    bound = (1.0 + params.profile.c_r) * C.value ** p / n
    bound_lo = (1.0 + params.profile.c_r) * max(C.value - C.tail_bound, 0.0) ** p / n
    tail = (emp_hi - emp) + (bound - bound_lo)
    return AverageCheck(emp, bound, float(tail), bool(emp <= bound + tail),
                        {"vectors": int(Z.shape[0]), "c_d_lambda": C.value})


def character_average(h: Sequence[int], n: int) -> Fraction:
    """``(1/n^d) #{z in Z_n^d : h.z = 0 (mod n)}`` in exact arithmetic."""
    h = [int(v) % n for v in h]
    d = len(h)
    hits = 0
    for z in itertools.product(range(n), repeat=d):
        if sum(a * b for a, b in zip(h, z)) % n == 0:
            hits += 1
    return Fraction(hits, n ** d)
