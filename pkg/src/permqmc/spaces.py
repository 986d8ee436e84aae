"""
Function-space parameters and frequency combinatorics.

The weighted Korobov-type spaces handled here are fixed by a decay profile
``R``, a smoothness ``alpha`` and two weights ``beta0`` (zero frequencies)
and ``beta1`` (nonzero frequencies).  The Fourier weight of a frequency
vector ``h`` is

    r(h)^{-1} = prod_l [ beta0            if h_l == 0
                         beta1 R(|h_l|)^{-2 alpha}  otherwise ].

Permutation invariance acts on a subset ``I`` of the coordinates.  This
module supplies the orbit combinatorics used everywhere else: multiplicity
factorials, sorted representatives (the set "nabla"), distinct
rearrangements and the cycle-set decomposition of the symmetric group.

All infinite one-dimensional series ``sum_k R(a + k*step)^{-s}`` are
evaluated by :func:`decay_sum`, which sums a finite head and brackets the
remainder between a trapezoid and a midpoint integral comparison.  Both
comparisons are valid because every built-in ``t -> R(t)^{-s}`` is convex
and decreasing on ``t >= 1``, so the returned error is a certified bound
(up to floating-point rounding).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import DivergentSeries, ParameterDomain, TooManyPermutations

__all__ = [
    "Profile",
    "DecayProfile",
    "SpaceParams",
    "InvarianceSpec",
    "Truncation",
    "ErrorReport",
    "decay_sum",
    "n_r",
    "residue_sums",
    "weight_inv",
    "weight_inv_array",
    "multiplicity_factorial",
    "log_multiplicity_factorial",
    "enumerate_nabla",
    "nabla_array",
    "distinct_rearrangements",
    "cycle_set_partitions",
    "MAX_PERMUTED",
]

#: Largest invariant block for which permutations are enumerated.
MAX_PERMUTED = 12

_TWO_PI = 2.0 * math.pi


class Profile(str, enum.Enum):
    KOROBOV = "korobov"
    SOBOLEV_TWO_PI = "sobolev2pi"
    MIXED_SMOOTHNESS = "mixed"


@dataclass(frozen=True)
class DecayProfile:
    """The decay function ``R`` of a space family.

    ``korobov``: ``R(m) = m``; ``sobolev2pi``: ``R(m) = 2 pi m``;
    ``mixed``: ``R(m) = sqrt(1 + m^2)``.
    """

    kind: Profile

    def __post_init__(self):
        object.__setattr__(self, "kind", Profile(self.kind))

    @property
    def c_r(self) -> float:
        """Smallest ``c`` with ``R(m)/c <= R(n m)/n`` for all ``n, m >= 1``."""
        if self.kind is Profile.MIXED_SMOOTHNESS:
            return math.sqrt(2.0)
        return 1.0

    def R(self, m):
        m = np.asarray(m, dtype=float)
        if self.kind is Profile.KOROBOV:
            return m
        if self.kind is Profile.SOBOLEV_TWO_PI:
            return _TWO_PI * m
        return np.sqrt(1.0 + m * m)

    def decay(self, t, s: float):
        """``R(t)^{-s}`` evaluated without forming ``R`` first."""
        t = np.asarray(t, dtype=float)
        if self.kind is Profile.KOROBOV:
            return t ** (-s)
        if self.kind is Profile.SOBOLEV_TWO_PI:
            return (_TWO_PI * t) ** (-s)
        return (1.0 + t * t) ** (-0.5 * s)

    def _tail_integral(self, x: float, s: float) -> tuple[float, float]:
        # lower/upper bounds on int_x^inf R(t)^{-s} dt, x >= 1
        base = x ** (1.0 - s) / (s - 1.0)
        if self.kind is Profile.KOROBOV:
            return base, base
        if self.kind is Profile.SOBOLEV_TWO_PI:
            v = _TWO_PI ** (-s) * base
            return v, v
        # (1 + u)^{-p} lies between 1 - p u and 1 - p u + p (p+1)/2 u^2
        p = 0.5 * s
        c1 = p * x ** (-1.0 - s) / (s + 1.0)
        c2 = 0.5 * p * (p + 1.0) * x ** (-3.0 - s) / (s + 3.0)
        return base - c1, base - c1 + c2


@dataclass(frozen=True)
class SpaceParams:
    """Smoothness, weights and decay profile of ``F_d(r_{alpha,beta})``.

    ``beta1 = 0`` is accepted as a degenerate testing case (constant kernel).
    """

    alpha: float
    beta0: float = 1.0
    beta1: float = 1.0
    profile: DecayProfile = field(default_factory=lambda: DecayProfile(Profile.KOROBOV))

    def __post_init__(self):
        if isinstance(self.profile, (str, Profile)):
            object.__setattr__(self, "profile", DecayProfile(Profile(self.profile)))
        if not self.alpha > 0.5:
            raise ParameterDomain(f"alpha must exceed 1/2 (got {self.alpha})")
        if not self.beta0 > 0:
            raise ParameterDomain(f"beta0 must be positive (got {self.beta0})")
        if not self.beta1 >= 0:
            raise ParameterDomain(f"beta1 must be nonnegative (got {self.beta1})")

    def replace(self, **changes) -> "SpaceParams":
        kw = dict(alpha=self.alpha, beta0=self.beta0, beta1=self.beta1, profile=self.profile)
        kw.update(changes)
        return SpaceParams(**kw)

    def one_dim_sum(self, tol: float = 1e-14) -> tuple[float, float]:
        """``beta0 + 2 beta1 N_R(alpha)`` and its error bound."""
        n, err = n_r(self, self.alpha, tol)
        return self.beta0 + 2.0 * self.beta1 * n, 2.0 * self.beta1 * err


@dataclass(frozen=True)
class InvarianceSpec:
    """Dimension ``d`` and the 1-based coordinate set ``I_d``."""

    d: int
    invariant_set: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterDomain(f"d must be a positive integer (got {self.d})")
        idx = tuple(int(i) for i in self.invariant_set)
        if len(set(idx)) != len(idx):
            raise ParameterDomain(f"duplicate invariant indices {idx}")
        if any(i < 1 or i > self.d for i in idx):
            raise ParameterDomain(f"invariant indices {idx} outside 1..{self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "invariant_set", tuple(sorted(idx)))

    @classmethod
    def full(cls, d: int) -> "InvarianceSpec":
        return cls(d, tuple(range(1, d + 1)))

    @property
    def k(self) -> int:
        """``#I_d``."""
        return len(self.invariant_set)

    @property
    def positions(self) -> tuple[int, ...]:
        """0-based positions of the invariant coordinates."""
        return tuple(i - 1 for i in self.invariant_set)

    @property
    def free_positions(self) -> tuple[int, ...]:
        inv = set(self.positions)
        return tuple(i for i in range(self.d) if i not in inv)

    @property
    def group_size(self) -> int:
        """``#S_d = (#I_d)!`` as an exact integer."""
        return math.factorial(self.k)

    @property
    def log_group_size(self) -> float:
        return math.lgamma(self.k + 1)


@dataclass(frozen=True)
class Truncation:
    """Per-coordinate frequency cutoff ``|h_j| <= box_radius`` and tail budget.

    Residue-class evaluations are exact up to ``series_tol`` and ignore the
    box radius.
    """

    box_radius: int = 4096
    tail_tol: float = 1e-6
    series_tol: float = 1e-14

    def __post_init__(self):
        if int(self.box_radius) != self.box_radius or self.box_radius < 1:
            raise ParameterDomain("box_radius must be a positive integer")
        if not self.tail_tol > 0:
            raise ParameterDomain("tail_tol must be positive")


@dataclass
class ErrorReport:
    """A computed value with its certified truncation error and statistics."""

    value: float
    tail_bound: float = 0.0
    stats: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# one-dimensional series
# ---------------------------------------------------------------------------

_MAX_HEAD = 1 << 25
_CHUNK = 1 << 20


@lru_cache(maxsize=65536)
def _decay_sum(kind: Profile, s: float, start: int, step: int, tol: float) -> tuple[float, float]:
    prof = DecayProfile(kind)
    # midpoint/trapezoid gap is about (step/8) |f'(x)| ~ step s x^{-s-1} / 8
    x_target = (step * s / (8.0 * tol)) ** (1.0 / (s + 1.0))
    K = max(1, int(math.ceil((x_target - start) / step)) + 1)
    while True:
        K = min(K, _MAX_HEAD)
        xk = start + K * step
        lo_int, _ = prof._tail_integral(xk, s)
        _, hi_int = prof._tail_integral(xk - 0.5 * step, s)
        fk = float(prof.decay(xk, s))
        lower = lo_int / step + 0.5 * fk
        upper = hi_int / step
        gap = 0.5 * max(upper - lower, 0.0)
        if gap <= tol or K == _MAX_HEAD:
            break
        K *= 2
    head = 0.0
    for a in range(0, K, _CHUNK):
        k = np.arange(a, min(K, a + _CHUNK), dtype=float)
        head += float(np.sum(prof.decay(start + k * step, s)[::-1]))
    value = head + 0.5 * (lower + upper)
    rounding = 4.0 * np.finfo(float).eps * value * math.log2(K + 2)
    return float(value), float(gap + rounding)


def decay_sum(profile: DecayProfile, s: float, start: int = 1, step: int = 1,
              tol: float = 1e-14) -> tuple[float, float]:
    """``sum_{k>=0} R(start + k step)^{-s}`` with a certified error bound.

    Raises
    ------
    DivergentSeries
        If ``s <= 1``.
    """
    if not s > 1.0:
        raise DivergentSeries(f"decay exponent {s} <= 1: series diverges")
    if start < 1 or step < 1:
        raise ParameterDomain("start and step must be positive integers")
    return _decay_sum(Profile(profile.kind), float(s), int(start), int(step), float(tol))


def n_r(params: SpaceParams, a: float, tol: float = 1e-14) -> tuple[float, float]:
    """``N_R(a) = sum_{m>=1} R(m)^{-2a}`` and its error bound."""
    if not 2.0 * a > 1.0:
        raise DivergentSeries(f"N_R({a}) diverges (need 2a > 1)")
    return decay_sum(params.profile, 2.0 * a, 1, 1, tol)


@lru_cache(maxsize=4096)
def _residue_sums(params: SpaceParams, power: int, n: int, tol: float):
    s = 2.0 * params.alpha * power
    T = np.empty(n + 1)
    E = np.empty(n + 1)
    for b in range(1, n + 1):
        T[b], E[b] = decay_sum(params.profile, s, b, n, tol)
    b1 = params.beta1 ** power
    G = np.empty(n)
    err = np.empty(n)
    G[0] = params.beta0 ** power + b1 * 2.0 * T[n]
    err[0] = b1 * 2.0 * E[n]
    for a in range(1, n):
        G[a] = b1 * (T[a] + T[n - a])
        err[a] = b1 * (E[a] + E[n - a])
    G.setflags(write=False)
    err.setflags(write=False)
    return G, err


def residue_sums(params: SpaceParams, n: int, power: int = 1,
                 tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Fourier weights aggregated by residue class modulo ``n``.

    Returns ``G`` with ``G[a] = sum_{m = a (mod n)} w(m)^power`` where
    ``w(0) = beta0`` and ``w(m) = beta1 R(|m|)^{-2 alpha}``, together with
    elementwise error bounds.
    """
    if n < 1:
        raise ParameterDomain("modulus must be positive")
    return _residue_sums(params, int(power), int(n), float(tol))


# ---------------------------------------------------------------------------
# Fourier weights
# ---------------------------------------------------------------------------

def weight_inv(params: SpaceParams, h: Sequence[int]) -> float:
    """``r_{alpha,beta}(h)^{-1}``; products over more than 50 factors go through logs."""
    h = np.atleast_1d(np.asarray(h))
    nz = h != 0
    if params.beta1 == 0 and nz.any():
        return 0.0
    if h.size > 50:
        logs = np.where(nz, math.log(params.beta1 or 1.0)
                        - 2.0 * params.alpha * np.log(params.profile.R(np.maximum(np.abs(h), 1))),
                        math.log(params.beta0))
        return float(math.exp(math.fsum(logs)))
    out = 1.0
    for v in h:
        if v == 0:
            out *= params.beta0
        else:
            out *= params.beta1 * float(params.profile.R(abs(int(v)))) ** (-2.0 * params.alpha)
    return out


def weight_inv_array(params: SpaceParams, H: np.ndarray, power: float = 1.0) -> np.ndarray:
    """Row-wise ``r(h)^{-power}`` for an integer array of shape ``(N, d)``."""
    H = np.asarray(H)
    A = np.abs(H).astype(float)
    nz = A > 0
    f = np.where(nz, params.beta1 * params.profile.decay(np.where(nz, A, 1.0), 2.0 * params.alpha),
                 params.beta0)
    if power != 1.0:
        f = f ** power
    return np.prod(f, axis=1)


# ---------------------------------------------------------------------------
# permutation combinatorics
# ---------------------------------------------------------------------------

def _block_counts(h, inv: InvarianceSpec) -> list[int]:
    vals = [h[p] for p in inv.positions]
    counts: dict = {}
    for v in vals:
        counts[v] = counts.get(v, 0) + 1
    return list(counts.values())


def multiplicity_factorial(h: Sequence, inv: InvarianceSpec) -> int:
    """``M_d(h)!``: number of permutations of the ``I_d`` coordinates fixing ``h``."""
    out = 1
    for c in _block_counts(h, inv):
        out *= math.factorial(c)
    return out


def log_multiplicity_factorial(h: Sequence, inv: InvarianceSpec) -> float:
    return math.fsum(math.lgamma(c + 1) for c in _block_counts(h, inv))


def enumerate_nabla(inv: InvarianceSpec, trunc: Truncation) -> Iterator[tuple[int, ...]]:
    """Yield ``h`` in the box with nondecreasing ``I_d`` coordinates, lexicographically."""
    H = int(trunc.box_radius)
    d = inv.d
    inv_pos = set(inv.positions)
    h = [0] * d

    def rec(j: int, lo: int):
        if j == d:
            yield tuple(h)
            return
        start = lo if j in inv_pos else -H
        nxt_lo = lo
        for v in range(start, H + 1):
            h[j] = v
            yield from rec(j + 1, v if j in inv_pos else nxt_lo)

    yield from rec(0, -H)


def nabla_array(inv: InvarianceSpec, H: int, limit: int = 20_000_000) -> np.ndarray:
    """All members of ``nabla_d`` in the box ``|h_j| <= H`` as an int array, lexicographic."""
    k = inv.k
    m = 2 * H + 1
    count = math.comb(m + k - 1, k) * m ** (inv.d - k)
    if count > limit:
        raise ParameterDomain(f"box enumeration of {count} vectors exceeds limit {limit}")
    rows = list(itertools.combinations_with_replacement(range(-H, H + 1), k))
    block = np.array(rows, dtype=np.int64).reshape(len(rows), k)
    free = inv.free_positions
    rows = list(itertools.product(range(-H, H + 1), repeat=len(free)))
    rest = np.array(rows, dtype=np.int64).reshape(len(rows), len(free))
    out = np.empty((block.shape[0] * rest.shape[0], inv.d), dtype=np.int64)
    out[:, list(inv.positions)] = np.repeat(block, rest.shape[0], axis=0)
    out[:, list(free)] = np.tile(rest, (block.shape[0], 1))
    order = np.lexsort(out.T[::-1])
    return out[order]


def _next_permutation(a: list) -> bool:
    i = len(a) - 2
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = len(a) - 1
    while a[j] <= a[i]:
        j -= 1
    a[i], a[j] = a[j], a[i]
    a[i + 1:] = reversed(a[i + 1:])
    return True


def distinct_rearrangements(h: Sequence, inv: InvarianceSpec) -> Iterator[tuple]:
    """Each distinct image ``P(h)``, ``P`` permuting the ``I_d`` coordinates, once.

    Images come in lexicographic order of the permuted block.
    """
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    pos = inv.positions
    block = sorted(h[p] for p in pos)
    base = list(h)
    while True:
        for p, v in zip(pos, block):
            base[p] = v
        yield tuple(base)
        if not _next_permutation(block):
            return


def cycle_set_partitions(items: Sequence[int]) -> Iterator[tuple[tuple[tuple[int, ...], ...], int]]:
    """Set partitions of ``items`` weighted by the number of permutations with those cycles.

    A permutation is determined by its cycles; the number of permutations
    whose cycles are exactly the blocks ``B`` is ``prod (|B| - 1)!``.  The
    weights therefore sum to ``len(items)!``.
    """
    items = list(items)
    if len(items) > MAX_PERMUTED:
        raise TooManyPermutations(f"{len(items)} > {MAX_PERMUTED} permuted coordinates")

    def rec(rest):
        if not rest:
            yield ()
            return
        first, others = rest[0], rest[1:]
        for r in range(len(others) + 1):
            for comb in itertools.combinations(others, r):
                remaining = [x for x in others if x not in comb]
                for tail in rec(remaining):
                    yield ((first,) + comb,) + tail

    for blocks in rec(items):
        w = 1
        for b in blocks:
            w *= math.factorial(len(b) - 1)
        yield blocks, w
