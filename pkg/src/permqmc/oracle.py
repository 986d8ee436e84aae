"""
Brute-force verifiers that share nothing with the dual-lattice code.

* :func:`wce_quadratic_form` evaluates the worst-case error of an arbitrary
  cubature rule from kernel values.
* :func:`general_error_formula` evaluates the Fourier-side expression of the
  same quantity, ``beta0^d (1 - 2 W) + sum_h r^{-1}(h) conj(A(h)) B(h)`` with
  ``A`` the rule's exponential sums and ``B`` their permutation average.
* :func:`m1_invariant_mc` is a Monte Carlo estimate of
  ``(int sqrt(K(x, x)) dx)^2``.

Random numbers come from numpy's Philox counter-based generator.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NegativeSquareBeyondTolerance, ParameterDomain, TailToleranceExceeded, TooManyPermutations
from .kernels import kernel_invariant_matrix
from .spaces import (
    MAX_PERMUTED,
    ErrorReport,
    InvarianceSpec,
    SpaceParams,
    Truncation,
    decay_sum,
    residue_sums,
)

__all__ = [
    "wce_quadratic_form",
    "general_error_formula",
    "m1_invariant_mc",
    "MCEstimate",
    "common_denominator",
]

log = logging.getLogger(__name__)

_CLAMP_SLACK = 1e-10
_MAX_DENOM = 256
_MAX_RESIDUE_GRID = 2_000_000


def _prepare(inv: InvarianceSpec, points, weights):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if pts.shape[0] != w.shape[0]:
        raise ParameterDomain("points and weights differ in length")
    if pts.shape[1] != inv.d:
        raise ParameterDomain("points do not match the dimension")
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    return pts, w


def _finish(sq: float, tail: float, trunc: Truncation, stats: dict) -> ErrorReport:
    if tail > trunc.tail_tol:
        raise TailToleranceExceeded(f"tail bound {tail:.3e} > {trunc.tail_tol:.3e}")
    if sq < 0.0:
        if sq < -(tail + _CLAMP_SLACK):
            raise NegativeSquareBeyondTolerance(f"squared error {sq:.3e} below -{tail:.3e}")
        log.info("clamping squared error %.3e to zero", sq)
        stats = dict(stats, clamped=sq)
    value = math.sqrt(max(sq, 0.0))
    hi = math.sqrt(max(sq + tail, 0.0))
    lo = math.sqrt(max(sq - tail, 0.0))
    stats = dict(stats, squared=sq, squared_tail=tail)
    return ErrorReport(value, max(hi - value, value - lo), stats)


def wce_quadratic_form(params: SpaceParams, inv: InvarianceSpec, points, weights,
                       trunc: Truncation = Truncation()) -> ErrorReport:
    """Worst-case error of ``Q(f) = (1/n) sum_j w_j f(t_j)`` on the invariant subspace.

    Uses ``int int K = int K(x, t) dx = beta0^d`` and the double sum of
    ``K_{d,I_d}(t_j, t_l)``; a negative squared error within its error
    budget is clamped to zero.

    Raises
    ------
    NegativeSquareBeyondTolerance
        If the quadratic form is below ``-(tail + 1e-10)``.
    """
    pts, w = _prepare(inv, points, weights)
    n = pts.shape[0]
    b0 = params.beta0 ** inv.d
    K, T = kernel_invariant_matrix(params, inv, pts, pts, trunc.box_radius)
    ww = np.outer(w, w) / n ** 2
    sq = b0 - 2.0 * b0 * float(np.sum(w)) / n + float(np.sum(ww * K))
    tail = float(np.sum(np.abs(ww) * T)) + 8.0 * np.finfo(float).eps * (
        b0 * (1.0 + 2.0 * float(np.sum(np.abs(w))) / n) + float(np.sum(np.abs(ww * K))))
    return _finish(sq, tail, trunc, {"method": "quadratic_form"})


def common_denominator(points, max_denom: int = _MAX_DENOM, atol: float = 1e-12) -> int | None:
    """Smallest ``N <= max_denom`` with ``N * points`` integral, or ``None``."""
    flat = np.mod(np.asarray(points, dtype=float).ravel(), 1.0)
    N = 1
    for x in np.unique(flat):
        f = Fraction(float(x)).limit_denominator(max_denom)
        if abs(float(f) - x) > atol:
            return None
        N = N * f.denominator // math.gcd(N, f.denominator)
        if N > max_denom:
            return None
    return N


def _permuted_points(inv: InvarianceSpec, pts: np.ndarray) -> list[np.ndarray]:
    pos = list(inv.positions)
    out = []
    for perm in itertools.permutations(pos):
        cols = list(range(inv.d))
        for p, q in zip(pos, perm):
            cols[p] = q
        out.append(pts[:, cols])
    return out


def _residue_mode(params, inv, pts, w, N, trunc):
    d = inv.d
    n = pts.shape[0]
    P = np.rint(np.mod(pts, 1.0) * N).astype(np.int64) % N
    perms = _permuted_points(inv, P.astype(float))
    perms = [q.astype(np.int64) for q in perms]
    G, gerr = residue_sums(params, N, 1, trunc.series_tol)
    roots = np.exp(2j * np.pi * np.arange(N) / N)
    total = 0.0
    abs_total = 0.0
    err_total = 0.0
    grid = N ** d
    chunk = max(1, 2_000_000 // max(n * len(perms), 1))
    for start in range(0, grid, chunk):
        idx = np.arange(start, min(grid, start + chunk), dtype=np.int64)
        A_res = np.empty((idx.size, d), dtype=np.int64)
        rem = idx.copy()
        for l in range(d - 1, -1, -1):
            A_res[:, l] = rem % N
            rem //= N
        weight = np.prod(G[A_res], axis=1)
        werr = np.prod(G[A_res] + gerr[A_res], axis=1) - weight
        A = (roots[(A_res @ P.T) % N] @ w) / n
        B = np.zeros(idx.size, dtype=complex)
        for q in perms:
            B += (roots[(A_res @ q.T) % N] @ w) / n
        B /= len(perms)
        prod = np.conj(A) * B
        total += float(np.sum(weight * prod.real))
        abs_total += float(np.sum(weight * np.abs(prod)))
        err_total += float(np.sum(werr * np.abs(prod)))
    return total, err_total + 8.0 * np.finfo(float).eps * abs_total * math.log2(grid + 1), grid


def _box_mode(params, inv, pts, w, trunc):
    d = inv.d
    n = pts.shape[0]
    H = trunc.box_radius
    m = (2 * H + 1) ** d
    if m > _MAX_RESIDUE_GRID:
        raise ParameterDomain(f"box of {m} frequencies too large for the oracle")
    perms = _permuted_points(inv, pts)
    rng = np.arange(-H, H + 1)
    hs = np.array(list(itertools.product(rng, repeat=d)), dtype=float).reshape(-1, d)
    a = np.abs(hs)
    nz = a > 0
    weight = np.prod(np.where(nz, params.beta1 * params.profile.decay(np.where(nz, a, 1.0),
                                                                       2.0 * params.alpha),
                              params.beta0), axis=1)
    A = np.exp(2j * np.pi * hs @ pts.T) @ w / n
    B = np.zeros(hs.shape[0], dtype=complex)
    for q in perms:
        B += np.exp(2j * np.pi * hs @ q.T) @ w / n
    B /= len(perms)
    total = float(np.sum(weight * (np.conj(A) * B).real))
    W = float(np.sum(np.abs(w))) / n
    s, e = decay_sum(params.profile, 2.0 * params.alpha)
    full = params.beta0 + 2.0 * params.beta1 * (s + e)
    boxed = params.beta0 + 2.0 * params.beta1 * math.fsum(
        params.profile.decay(np.arange(1, H + 1, dtype=float), 2.0 * params.alpha).tolist())
    tail = W * W * max(full ** d - boxed ** d, 0.0)
    tail += 8.0 * np.finfo(float).eps * float(np.sum(weight)) * W * W * (d + math.log2(m + 1))
    return total, tail, m


def general_error_formula(params: SpaceParams, inv: InvarianceSpec, points, weights,
                          trunc: Truncation = Truncation(), mode: str = "auto") -> ErrorReport:
    """Worst-case error from its Fourier-side expression.

    Parameters
    ----------
    mode : {"auto", "residue", "box"}
        ``"residue"`` needs all coordinates to be multiples of ``1/N`` and
        folds the frequency sum into residue classes modulo ``N`` (exact up
        to series errors).  ``"box"`` sums over ``|h_j| <= box_radius`` and
        bounds the rest through ``|A|, |B| <= sum |w_j| / n``.  ``"auto"``
        picks ``"residue"`` whenever a small common denominator exists.
    """
    pts, w = _prepare(inv, points, weights)
    n = pts.shape[0]
    b0 = params.beta0 ** inv.d
    first = b0 * (1.0 - 2.0 * float(np.sum(w)) / n)
    N = None
    if mode in ("auto", "residue"):
        N = common_denominator(pts)
        if N is not None and N ** inv.d > _MAX_RESIDUE_GRID:
            N = None
        if N is None and mode == "residue":
            raise ParameterDomain("points have no admissible common denominator")
    elif mode != "box":
        raise ParameterDomain(f"unknown mode {mode!r}")
    if N is not None:
        second, tail, size = _residue_mode(params, inv, pts, w, N, trunc)
        stats = {"method": "residue", "denominator": N, "grid": size}
    else:
        second, tail, size = _box_mode(params, inv, pts, w, trunc)
        stats = {"method": "box", "grid": size}
    return _finish(first + second, tail, trunc, stats)


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    samples: int


def m1_invariant_mc(params: SpaceParams, inv: InvarianceSpec, samples: int, seed: int = 0,
                    trunc: Truncation = Truncation(box_radius=1024), chunk: int = 4096) -> MCEstimate:
    """Monte Carlo estimate of ``(E sqrt(K_{d,I_d}(X, X)))^2`` for uniform ``X``.

    The standard error is propagated to first order, ``2 mean std / sqrt(N)``;
    the kernel truncation bias is not part of it.
    """
    if samples < 2:
        raise ParameterDomain("need at least two samples")
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    rng = np.random.Generator(np.random.Philox(seed))
    roots = []
    from .kernels import _full  # diagonal only, no full Gram matrix

    pos = list(inv.positions)
    perms = []
    for perm in itertools.permutations(pos):
        cols = list(range(inv.d))
        for p, q in zip(pos, perm):
            cols[p] = q
        perms.append(cols)
    for start in range(0, samples, chunk):
        X = rng.random((min(chunk, samples - start), inv.d))
        diag = np.zeros(X.shape[0])
        for cols in perms:
            v, _ = _full(params, X[:, cols] - X, trunc.box_radius)
            diag += v
        roots.append(np.sqrt(np.maximum(diag / len(perms), 0.0)))
    r = np.concatenate(roots)
    mean = float(np.mean(r))
    std = float(np.std(r, ddof=1))
    return MCEstimate(mean * mean, 2.0 * mean * std / math.sqrt(samples), int(samples))
