"""
Reproducing kernels of the full, permutation-invariant and shift-invariant spaces.

Every kernel is a product of one-dimensional cosine series

    phi_s(u) = sum_{m=1}^{H} R(m)^{-s} cos(2 pi m u),

so no complex arithmetic is ever formed.  The remainder ``m > H`` is
bounded by summation by parts, ``|tail| <= R(H+1)^{-s} / |sin(pi u)|``,
capped by the absolute tail; at ``u = 0 (mod 1)`` the remainder is summed
exactly by :func:`permqmc.spaces.decay_sum` instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import TailToleranceExceeded, TooManyPermutations
from .spaces import (
    MAX_PERMUTED,
    InvarianceSpec,
    Profile,
    SpaceParams,
    Truncation,
    cycle_set_partitions,
    decay_sum,
    distinct_rearrangements,
    multiplicity_factorial,
)

__all__ = [
    "KernelValue",
    "cos_series",
    "kernel_full",
    "kernel_invariant",
    "kernel_shift_invariant",
    "kernel_invariant_matrix",
]

_ZERO_SNAP = 1e-13
_memo: dict = {}
_MEMO_LIMIT = 2_000_000


@dataclass(frozen=True)
class KernelValue:
    value: float
    tail_bound: float

    def __float__(self):
        return self.value


def _series_block(params: SpaceParams, s: float, H: int, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    prof = params.profile
    vals = np.zeros(u.size)
    chunk = max(1, 4_000_000 // max(u.size, 1))
    for a in range(1, H + 1, chunk):
        m = np.arange(a, min(H, a + chunk - 1) + 1, dtype=float)
        f = prof.decay(m, s)
        vals += np.cos(2.0 * math.pi * np.outer(u, m)) @ f
    tail_sum, tail_err = decay_sum(prof, s, H + 1, 1)
    f_next = float(prof.decay(H + 1, s))
    zero = u == 0.0
    sin = np.abs(np.sin(math.pi * u))
    with np.errstate(divide="ignore"):
        abel = np.where(zero, np.inf, f_next / np.where(zero, 1.0, sin))
    tails = np.minimum(abel, tail_sum + tail_err)
    vals = np.where(zero, vals + tail_sum, vals)
    tails = np.where(zero, tail_err, tails)
    return vals, tails


def cos_series(params: SpaceParams, s: float, H: int, u) -> tuple[np.ndarray, np.ndarray]:
    """``phi_s(u)`` truncated at ``H`` plus elementwise remainder bounds.

    Results are memoised per ``(profile, s, H, u mod 1)``.
    """
    u = np.asarray(u, dtype=float)
    shape = u.shape
    r = np.mod(u.ravel(), 1.0)
    r[(r < _ZERO_SNAP) | (r > 1.0 - _ZERO_SNAP)] = 0.0
    uniq, inverse = np.unique(r, return_inverse=True)
    key = (Profile(params.profile.kind), float(s), int(H))
    table = _memo.setdefault(key, {})
    missing = np.array([x for x in uniq.tolist() if x not in table])
    if missing.size:
        v, t = _series_block(params, s, H, missing)
        if sum(len(x) for x in _memo.values()) + missing.size > _MEMO_LIMIT:
            _memo.clear()
            table = _memo.setdefault(key, {})
        table.update(zip(missing.tolist(), zip(v.tolist(), t.tolist())))
    vt = np.array([table[x] for x in uniq.tolist()]).reshape(-1, 2)
    return vt[inverse, 0].reshape(shape), vt[inverse, 1].reshape(shape)


def _factor(params: SpaceParams, power: int, H: int, u) -> tuple[np.ndarray, np.ndarray]:
    # beta0^c + sum_{m != 0} (beta1 R(|m|)^{-2 alpha})^c e^{2 pi i m u}
    b1 = params.beta1 ** power
    if b1 == 0.0:
        u = np.asarray(u, dtype=float)
        return np.full(u.shape, params.beta0 ** power), np.zeros(u.shape)
    phi, tail = cos_series(params, 2.0 * params.alpha * power, H, u)
    return params.beta0 ** power + 2.0 * b1 * phi, 2.0 * b1 * tail


def _product(factors: list[tuple[np.ndarray, np.ndarray]]):
    val = 1.0
    upper = 1.0
    absval = 1.0
    for a, t in factors:
        val = val * a
        absval = absval * np.abs(a)
        upper = upper * (np.abs(a) + t)
    return val, upper - absval


def _check(value, tail, trunc: Truncation) -> KernelValue:
    if tail > trunc.tail_tol:
        raise TailToleranceExceeded(f"kernel tail bound {tail:.3e} > {trunc.tail_tol:.3e}")
    return KernelValue(float(value), float(tail))


def _full(params: SpaceParams, u: np.ndarray, H: int):
    return _product([_factor(params, 1, H, u[..., l]) for l in range(u.shape[-1])])


def kernel_full(params: SpaceParams, x, y, trunc: Truncation = Truncation()) -> KernelValue:
    """Tensor-product kernel ``K_d(x, y)``."""
    u = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    v, t = _full(params, u, trunc.box_radius)
    return _check(v, t, trunc)


def kernel_invariant(params: SpaceParams, inv: InvarianceSpec, x, y,
                     trunc: Truncation = Truncation()) -> KernelValue:
    """``K_{d,I_d}(x, y)``: average of ``K_d(P x, y)`` over the permutations of ``I_d``.

    The sum runs over distinct images of ``x``; each stands for ``M(x)!`` permutations.
    """
    x = tuple(float(v) for v in x)
    y = np.asarray(y, dtype=float)
    images = np.array(list(distinct_rearrangements(x, inv)))
    weight = multiplicity_factorial(x, inv) / inv.group_size
    v, t = _full(params, images - y, trunc.box_radius)
    return _check(weight * np.sum(v), weight * np.sum(t), trunc)


def kernel_shift_invariant(params: SpaceParams, inv: InvarianceSpec, x, y,
                           trunc: Truncation = Truncation()) -> KernelValue:
    """Shift-averaged kernel, a function of ``x - y`` only.

    Evaluates ``sum_h r(h)^{-1} M(h)!/#S cos(2 pi h.(x - y))`` over the box by
    grouping permutations by their cycles: a frequency fixed by ``P`` is
    constant on each cycle, so each cycle ``B`` contributes the 1D factor
    ``sum_m w(m)^{|B|} cos(2 pi m sum_{l in B} u_l)``.
    """
    u = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    H = trunc.box_radius
    free = [_factor(params, 1, H, u[l]) for l in inv.free_positions]
    total = 0.0
    tail = 0.0
    for blocks, w in cycle_set_partitions(inv.positions):
        fac = [_factor(params, len(b), H, sum(u[l] for l in b)) for b in blocks]
        v, t = _product(fac + free)
        total += w * float(v)
        tail += w * float(t)
    g = inv.group_size
    return _check(total / g, tail / g, trunc)


def kernel_invariant_matrix(params: SpaceParams, inv: InvarianceSpec, X, Y, H: int):
    """Matrix of ``K_{d,I_d}(X_i, Y_j)`` and elementwise tail bounds.

    Averages over all ``(#I_d)!`` coordinate permutations of the rows of ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if inv.k > MAX_PERMUTED:
        raise TooManyPermutations(f"#I_d = {inv.k} > {MAX_PERMUTED}")
    pos = list(inv.positions)
    K = np.zeros((X.shape[0], Y.shape[0]))
    T = np.zeros_like(K)
    count = 0
    for perm in itertools.permutations(pos):
        cols = list(range(inv.d))
        for p, q in zip(pos, perm):
            cols[p] = q
        U = X[:, cols][:, None, :] - Y[None, :, :]
        v, t = _full(params, U, H)
        K += v
        T += t
        count += 1
    return K / count, T / count
