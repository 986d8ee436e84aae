"""
Closed-form constants and error bounds.

Sums over the sorted frequency set ``nabla_d`` factor into a free part, a
plain tensor product, and an invariant block.  The invariant block is a sum
over multisets of ``#I_d`` integers, which is evaluated exactly through the
power-sum generating function

    sum_{multisets} prod_v c(mu_v) u_v^{mu_v} = [t^k] exp( sum_q b_q P_q t^q ),

where ``P_q = sum_v u_v^q`` are one-dimensional decay series and ``b_q`` the
logarithm coefficients of ``F(u) = sum_mu c(mu) u^mu``.  Box enumeration of
``nabla_d`` is kept as an independent check (``method="box"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._numtheory import is_prime
from .errors import AssumptionViolated, DivergentSeries, ParameterDomain, TailToleranceExceeded
from .spaces import (
    ErrorReport,
    InvarianceSpec,
    SpaceParams,
    Truncation,
    decay_sum,
    n_r,
    nabla_array,
)

__all__ = [
    "TractabilityConstants",
    "ConstantBounds",
    "LemmaSides",
    "s_d",
    "m2_full",
    "m1_full",
    "m2_invariant",
    "eta_star",
    "v_star",
    "alpha_star",
    "tractability_constants",
    "theorem_upper_bound",
    "unshifted_lower_bound",
    "unshifted_lower_bounds",
    "rmse_lower_bound",
    "rmse_lower_bounds",
    "c_d_lambda",
    "c_d_lambda_bounds",
    "lemma_bound_sides",
]


# ---------------------------------------------------------------------------
# invariant-block generating function
# ---------------------------------------------------------------------------

def _log_coefficients(k: int, lam: float) -> np.ndarray:
    """``b_1..b_k`` with ``log F(u) = sum b_q u^q``, ``F(u) = sum mu!^(1/lam - 1) u^mu``."""
    e = 1.0 / lam - 1.0
    a = np.array([math.exp(e * math.lgamma(m + 1)) for m in range(k + 1)])
    b = np.zeros(k + 1)
    for q in range(1, k + 1):
        acc = q * a[q]
        for j in range(1, q):
            acc -= j * b[j] * a[q - j]
        b[q] = acc / q
    return b


def _exp_coefficient(c: np.ndarray, k: int):
    """``[t^k] exp(sum_q c_q t^q)``; works for complex ``c``."""
    E = np.zeros(k + 1, dtype=c.dtype)
    E[0] = 1.0
    for j in range(1, k + 1):
        acc = 0.0
        for q in range(1, j + 1):
            acc = acc + q * c[q] * E[j - q]
        E[j] = acc / j
    return E[k]


def _power_sums(params: SpaceParams, k: int, lam: float, tol: float):
    """``P_q = beta0^(q/lam) + 2 beta1^(q/lam) N_R(alpha q / lam)`` for ``q = 1..k``."""
    P = np.zeros(k + 1)
    err = np.zeros(k + 1)
    for q in range(1, k + 1):
        e = q / lam
        b1 = params.beta1 ** e
        if b1 == 0.0:
            P[q] = params.beta0 ** e
            continue
        n, ne = n_r(params, params.alpha * e, tol)
        P[q] = params.beta0 ** e + 2.0 * b1 * n
        err[q] = 2.0 * b1 * ne
    return P, err


def _block_sum(params: SpaceParams, k: int, lam: float, tol: float) -> tuple[float, float]:
    """Sum over sorted ``k``-blocks of ``(k!/M!)^(1-1/lam) prod w(v)^(1/lam)`` and an error bound."""
    if k == 0:
        return 1.0, 0.0
    P, perr = _power_sums(params, k, lam, tol)
    b = _log_coefficients(k, lam)
    scale = math.exp((1.0 - 1.0 / lam) * math.lgamma(k + 1))
    value = scale * float(_exp_coefficient(b * P, k))
    # E_k is a polynomial in P: complex-step derivatives are exact
    err = 0.0
    step = 1e-30
    for q in range(1, k + 1):
        if perr[q] == 0.0:
            continue
        c = (b * P).astype(complex)
        c[q] += 1j * step * b[q]
        err += abs(scale * _exp_coefficient(c, k).imag / step) * perr[q]
    err += 8.0 * np.finfo(float).eps * k * abs(value)
    return value, 2.0 * err


def _invariant_total(params: SpaceParams, inv: InvarianceSpec, lam: float, tol: float):
    """Whole-space sum of ``(#S/M!)^(1-1/lam) r^(-1/lam)`` over ``nabla_d`` and its error."""
    block, berr = _block_sum(params, inv.k, lam, tol)
    free = inv.d - inv.k
    one, oerr = _block_sum(params, 1, lam, tol)
    rest = one ** free
    rest_err = (one + oerr) ** free - rest
    total = block * rest
    err = (block + berr) * (rest + rest_err) - total
    return total, err


# ---------------------------------------------------------------------------
# initial error and norms of the diagonal
# ---------------------------------------------------------------------------

def s_d(params: SpaceParams, inv: InvarianceSpec) -> float:
    """Squared initial error ``beta0^d``."""
    d = inv.d
    if d > 50:
        return math.exp(d * math.log(params.beta0))
    return params.beta0 ** d


def m2_full(params: SpaceParams, d: int, tol: float = 1e-14) -> float:
    """``beta0^d (1 + 2 beta1 N_R(alpha) / beta0)^d`` for the full space."""
    one, _ = params.one_dim_sum(tol)
    if d > 50:
        return math.exp(d * math.log(one))
    return one ** d


def m1_full(params: SpaceParams, d: int, tol: float = 1e-14) -> float:
    """Equal to :func:`m2_full`; the diagonal ``K_d(x, x)`` is constant."""
    return m2_full(params, d, tol)


def m2_invariant(params: SpaceParams, inv: InvarianceSpec, trunc: Truncation = Truncation(),
                 method: str = "exact") -> ErrorReport:
    """``M_{2,d}(K_{d,I_d})``, the sum of ``r^{-1}`` over ``nabla_d``.

    Parameters
    ----------
    method : {"exact", "box"}
        ``"exact"`` sums every multiset class through the generating function
        (error bound from the decay-series errors).  ``"box"`` enumerates
        ``nabla_d`` inside ``|h_j| <= box_radius`` and bounds the remainder
        by the full-box tail of the tensor product.
    """
    if method == "exact":
        v, e = _invariant_total(params, inv, 1.0, trunc.series_tol)
        rep = ErrorReport(v, e, {"method": "exact"})
    elif method == "box":
        rep = _box_sum(params, inv, 1.0, trunc, include_zero=True)
    else:
        raise ParameterDomain(f"unknown method {method!r}")
    if rep.tail_bound > trunc.tail_tol:
        raise TailToleranceExceeded(f"tail bound {rep.tail_bound:.3e} > {trunc.tail_tol:.3e}")
    return rep


def _box_sum(params: SpaceParams, inv: InvarianceSpec, lam: float, trunc: Truncation,
             include_zero: bool) -> ErrorReport:
    H = trunc.box_radius
    K = nabla_array(inv, H)
    pos = list(inv.positions)
    block = K[:, pos]
    # log M! by run lengths of the sorted block
    logm = np.zeros(K.shape[0])
    run = np.ones(K.shape[0])
    for j in range(1, inv.k):
        same = block[:, j] == block[:, j - 1]
        run = np.where(same, run + 1.0, 1.0)
        logm += np.where(same, np.log(run), 0.0)
    A = np.abs(K).astype(float)
    nz = A > 0
    if params.beta1 == 0:
        terms = np.where(np.any(nz, axis=1), 0.0, params.beta0 ** (inv.d / lam))
    else:
        logw = np.where(nz, math.log(params.beta1) - 2.0 * params.alpha
                        * np.log(params.profile.R(np.where(nz, A, 1.0))), math.log(params.beta0))
        logs = np.sum(logw, axis=1) / lam + (1.0 - 1.0 / lam) * (inv.log_group_size - logm)
        terms = np.exp(logs)
    if not include_zero:
        terms = np.where(np.any(K != 0, axis=1), terms, 0.0)
    value = math.fsum(terms.tolist())
    # remainder <= sum over Z^d outside the box of r^{-1/lam}
    full, ferr = _block_sum(params, 1, lam, trunc.series_tol)
    m = np.arange(1, H + 1, dtype=float)
    boxed = params.beta0 ** (1.0 / lam) + 2.0 * params.beta1 ** (1.0 / lam) * math.fsum(
        params.profile.decay(m, 2.0 * params.alpha / lam).tolist())
    tail = max(float((full + ferr) ** inv.d - boxed ** inv.d), 0.0)
    return ErrorReport(value, tail, {"method": "box", "enumerated": int(K.shape[0]), "box_radius": H})


# ---------------------------------------------------------------------------
# eta*, V*, alpha*
# ---------------------------------------------------------------------------

def eta_star(params: SpaceParams, v: int = 0, tol: float = 1e-14) -> float:
    """``(2 beta1 / beta0) sum_{m > v} R(m)^{-2 alpha}``."""
    if v < 0 or int(v) != v:
        raise ParameterDomain("v must be a nonnegative integer")
    if not 2.0 * params.alpha > 1.0:
        raise DivergentSeries("2 alpha must exceed 1")
    tail, _ = decay_sum(params.profile, 2.0 * params.alpha, int(v) + 1, 1, tol)
    return 2.0 * params.beta1 / params.beta0 * tail


def v_star(params: SpaceParams, tol: float = 1e-14) -> int:
    """Smallest ``V >= 0`` with ``eta_star(V) < 1``."""
    v = 0
    while eta_star(params, v, tol) >= 1.0:
        v += 1
    return v


def alpha_star(profile, beta0: float = 1.0, beta1: float = 1.0, xtol: float = 1e-9) -> float:
    """Smoothness at which ``eta_star(0) = 1``, by bisection.

    Raises ``ParameterDomain`` if ``eta_star(0) >= 1`` for every ``alpha``.
    """
    def eta(a):
        return eta_star(SpaceParams(a, beta0, beta1, profile), 0, 1e-13)

    lo = 0.5 + 1e-6
    if eta(lo) <= 1.0:
        raise ParameterDomain("eta_star(0) <= 1 already at alpha -> 1/2")
    hi = 1.0
    while eta(hi) >= 1.0:
        hi *= 2.0
        if hi > 1e3:
            raise ParameterDomain("eta_star(0) stays >= 1 for all alpha")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if eta(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TractabilityConstants:
    s_d: float
    m2_invariant: float
    m2_full: float
    m1_full: float
    v_star: int
    eta_star: float
    m2_invariant_tail: float = 0.0


def tractability_constants(params: SpaceParams, inv: InvarianceSpec,
                           trunc: Truncation = Truncation()) -> TractabilityConstants:
    vs = v_star(params, trunc.series_tol)
    m2 = m2_invariant(params, inv, trunc)
    return TractabilityConstants(
        s_d=s_d(params, inv),
        m2_invariant=m2.value,
        m2_full=m2_full(params, inv.d, trunc.series_tol),
        m1_full=m1_full(params, inv.d, trunc.series_tol),
        v_star=vs,
        eta_star=eta_star(params, vs, trunc.series_tol),
        m2_invariant_tail=m2.tail_bound,
    )


# ---------------------------------------------------------------------------
# worst-case error bounds
# ---------------------------------------------------------------------------

def _check_assumption(params: SpaceParams) -> None:
    x = 2.0 * params.beta1 / (params.beta0 * float(params.profile.R(1)) ** (2.0 * params.alpha))
    if x > 1.0 + 1e-12:
        raise AssumptionViolated(f"2 beta1 / (beta0 R(1)^(2 alpha)) = {x:.6g} > 1")


def theorem_upper_bound(params: SpaceParams, inv: InvarianceSpec, n: int) -> float:
    """Upper bound on the n-th minimal error from the averaging argument.

    ``e(0) sqrt(V* + 1/(1 - eta*)) (1 + 2 beta1 N_R / beta0)^((d - #I)/2) (#I)^(V*/2) / sqrt(n)``.
    """
    _check_assumption(params)
    if inv.k < 2:
        raise ParameterDomain("the bound needs #I_d >= 2")
    if n < 1:
        raise ParameterDomain("n must be positive")
    vs = v_star(params)
    eta = eta_star(params, vs)
    nr, _ = n_r(params, params.alpha)
    e0 = math.sqrt(s_d(params, inv))
    free = inv.d - inv.k
    factor = math.exp(0.5 * free * math.log1p(2.0 * params.beta1 * nr / params.beta0)
                      + 0.5 * vs * math.log(inv.k))
    return e0 * math.sqrt(vs + 1.0 / (1.0 - eta)) * factor / math.sqrt(n)


def unshifted_lower_bounds(params: SpaceParams, inv: InvarianceSpec, n: int) -> tuple[float, float]:
    """Exact and weakened lower bounds for any rank-1 lattice rule with ``n`` points.

    Returns ``(exact, weak)``.  The exact form uses ``sum_m R(n m)^{-2 alpha}``,
    the weak one ``N_R(alpha) / n^(2 alpha)``.
    """
    if n < 1:
        raise ParameterDomain("n must be positive")
    d = inv.d
    ratio = 2.0 * params.beta1 / params.beta0
    half_log_e0 = 0.5 * d * math.log(params.beta0)
    if params.beta1 == 0:
        return 0.0, 0.0
    first = float(params.profile.decay(n, 2.0 * params.alpha))
    tail, _ = decay_sum(params.profile, 2.0 * params.alpha, n, n, max(1e-13 * first, 1e-300))
    nr, _ = n_r(params, params.alpha)
    exact = math.exp(half_log_e0) * math.sqrt(math.expm1(d * math.log1p(ratio * tail)))
    weak = math.exp(half_log_e0) * math.sqrt(
        math.expm1(d * math.log1p(ratio * nr * float(n) ** (-2.0 * params.alpha))))
    return exact, weak


def unshifted_lower_bound(params: SpaceParams, inv: InvarianceSpec, n: int) -> float:
    return unshifted_lower_bounds(params, inv, n)[0]


def _check_prime(n: int) -> None:
    if n != 1 and not is_prime(n):
        raise ParameterDomain(f"n = {n} is not prime")


def rmse_lower_bounds(params: SpaceParams, inv: InvarianceSpec, n: int) -> tuple[float, float]:
    """Lower bounds on the shift-averaged error of any rank-1 lattice rule.

    Returns ``(full, simplified)`` where ``simplified`` is
    ``e(0) sqrt(2 beta1 N_R / beta0) max(d - #I, 1)^(1/2) n^(-alpha)``.
    """
    _check_prime(n)
    d, k = inv.d, inv.k
    e0 = math.sqrt(s_d(params, inv))
    if params.beta1 == 0:
        return 0.0, 0.0
    n2a = float(n) ** (-2.0 * params.alpha)
    top = k if k < d else d

    def term(l):
        nl, _ = n_r(params, params.alpha * l)
        return (params.beta1 * nl ** (1.0 / l) / params.beta0 * n2a) ** l

    series = 2.0 * math.fsum(term(l) for l in range(1, top + 1))
    nr, _ = n_r(params, params.alpha)
    if k < d:
        first = math.expm1((d - k) * math.log1p(2.0 * params.beta1 * nr / params.beta0 * n2a))
        full = e0 * math.sqrt(first * (1.0 + series))
    else:
        full = e0 * math.sqrt(series)
    simple = e0 * math.sqrt(2.0 * params.beta1 * nr / params.beta0) * math.sqrt(max(d - k, 1)) \
        * float(n) ** (-params.alpha)
    return full, simple


def rmse_lower_bound(params: SpaceParams, inv: InvarianceSpec, n: int) -> float:
    return rmse_lower_bounds(params, inv, n)[0]


# ---------------------------------------------------------------------------
# C_{d, lambda}
# ---------------------------------------------------------------------------

def c_d_lambda(params: SpaceParams, inv: InvarianceSpec, lam: float,
               trunc: Truncation = Truncation(), method: str = "exact") -> ErrorReport:
    """``( sum_{h != 0} [M(h)!/#S r^{-1}(h)]^(1/lam) )^lam``.

    The inner sum runs over ``nabla_d`` with each orbit counted
    ``#S/M!`` times; ``method`` is as in :func:`m2_invariant`.
    """
    if not lam >= 1.0:
        raise ParameterDomain("lambda must be >= 1")
    if not 2.0 * params.alpha / lam > 1.0:
        raise DivergentSeries(f"2 alpha / lambda = {2 * params.alpha / lam} <= 1")
    if method == "exact":
        total, err = _invariant_total(params, inv, lam, trunc.series_tol)
        inner = total - params.beta0 ** (inv.d / lam)
        stats = {"method": "exact"}
    elif method == "box":
        rep = _box_sum(params, inv, lam, trunc, include_zero=False)
        inner, err, stats = rep.value, rep.tail_bound, rep.stats
    else:
        raise ParameterDomain(f"unknown method {method!r}")
    inner = max(inner, 0.0)
    value = inner ** lam
    tail = (inner + err) ** lam - value
    if tail > trunc.tail_tol * max(1.0, value):
        raise TailToleranceExceeded(f"tail bound {tail:.3e} exceeds tolerance")
    return ErrorReport(value, tail, dict(stats, inner=inner))


@dataclass(frozen=True)
class ConstantBounds:
    lower: float
    upper: float | None = None


def c_d_lambda_bounds(params: SpaceParams, inv: InvarianceSpec, lam: float,
                      A: float | None = None, gamma: float | None = None,
                      trunc: Truncation = Truncation()) -> ConstantBounds:
    """Lower bound on ``C_{d,lambda}`` and, given ``A`` and ``gamma``, an upper bound.

    The upper bound needs ``1 < lam < 2 alpha``, ``alpha > A + 1/2 > lam/2``,
    ``A > 0`` and ``gamma > 0``.
    """
    if not lam >= 1.0:
        raise ParameterDomain("lambda must be >= 1")
    d, k = inv.d, inv.k
    e02 = s_d(params, inv)
    x = params.beta1 / (params.beta0 * float(params.profile.R(1)) ** (2.0 * params.alpha))

    def block(m):
        if lam == 1.0:
            return 2.0 * math.fsum(x ** l for l in range(1, m + 1))
        if m == 0 or x == 0.0:
            return 0.0
        # log((1 + y)^m - 1) with y = x^(1/(lam-1)), which underflows as lam -> 1
        log_y = math.log(x) / (lam - 1.0)
        if log_y > -700.0:
            log_inner = math.log(math.expm1(m * math.log1p(math.exp(log_y))))
        else:
            log_inner = math.log(m) + log_y
        return 2.0 ** lam * math.exp((lam - 1.0) * log_inner)

    if k == d:
        lower = e02 * block(d)
    else:
        nr, _ = n_r(params, params.alpha / lam)
        t = 2.0 * (params.beta1 / params.beta0) ** (1.0 / lam) * nr
        lower = e02 * math.expm1((d - k) * math.log1p(t)) ** lam * (1.0 + block(k))

    upper = None
    if A is not None or gamma is not None:
        if A is None or gamma is None:
            raise ParameterDomain("both A and gamma are needed for the upper bound")
        if not (1.0 < lam < 2.0 * params.alpha):
            raise ParameterDomain("upper bound needs 1 < lambda < 2 alpha")
        if not (A > 0 and params.alpha > A + 0.5 > lam / 2.0):
            raise ParameterDomain("upper bound needs alpha > A + 1/2 > lambda/2 with A > 0")
        if not gamma > 0:
            raise ParameterDomain("gamma must be positive")
        aux = params.replace(alpha=params.alpha - A, beta1=params.beta1 * gamma)
        c1 = c_d_lambda(aux, inv, 1.0, trunc)
        na, _ = n_r(params, A / (lam - 1.0))
        g = 2.0 * na * math.exp(-math.log(gamma) / (lam - 1.0))
        upper = (c1.value + c1.tail_bound) * math.expm1(d * math.log1p(g)) ** (lam - 1.0)
    return ConstantBounds(lower, upper)


# ---------------------------------------------------------------------------
# combinatorial lemma
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaSides:
    lhs: float
    rhs: float


def _complete_homogeneous(values: Sequence[float], top: int) -> np.ndarray:
    """``h_0..h_top`` of the given variables."""
    E = np.zeros(top + 1)
    E[0] = 1.0
    for x in values:
        for L in range(1, top + 1):
            E[L] += x * E[L - 1]
    return E


def lemma_bound_sides(lambda_seq: Sequence[float], d: int, v: int) -> LemmaSides:
    """Both sides of the sorted-index product bound for a finite sequence.

    ``lhs = sum_{0 <= k_1 <= ... <= k_d} prod lambda_{k_l}`` and
    ``rhs = lambda_0^d d^v (1 + v + sum_{L=1}^d lambda_0^{-L} h_L(lambda_{v+1}, ...))``.
    """
    lam = [float(x) for x in lambda_seq]
    if not lam or not lam[0] > 0:
        raise ParameterDomain("lambda_0 must be positive")
    if any(x < 0 or x > lam[0] for x in lam[1:]):
        raise ParameterDomain("need lambda_0 >= lambda_m >= 0")
    if d < 1 or v < 0:
        raise ParameterDomain("need d >= 1 and v >= 0")
    lhs = _complete_homogeneous(lam, d)[d]
    tail = _complete_homogeneous(lam[v + 1:], d)
    l0 = lam[0]
    s = math.fsum(tail[L] * l0 ** (-L) for L in range(1, d + 1))
    rhs = l0 ** d * float(d) ** v * (1.0 + v + s)
    return LemmaSides(float(lhs), float(rhs))
