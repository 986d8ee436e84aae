import itertools
import math

import numpy as np
import pytest

from permqmc import bounds
from permqmc.errors import NegativeSquareBeyondTolerance, ParameterDomain
from permqmc.lattice import Lattice, wce_unshifted
from permqmc.oracle import common_denominator, general_error_formula, m1_invariant_mc, wce_quadratic_form
from permqmc.spaces import InvarianceSpec, SpaceParams, Truncation

Z2 = math.pi ** 2 / 6
KOR = SpaceParams(1.0)
TR = Truncation(1 << 16, 1e-6)


def test_single_node_rule():
    for t in (0.0, 0.3, 0.77):
        r = wce_quadratic_form(KOR, InvarianceSpec(1), [[t]], [1.0], TR)
        assert r.value == pytest.approx(math.sqrt(2 * Z2), abs=1e-9)
    assert math.sqrt(2 * Z2) == pytest.approx(1.813800, abs=1e-6)


@pytest.mark.parametrize("beta0", [0.3, 1.0, 2.0, 3.7])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_zero_weights_give_initial_error(beta0, d):
    p = SpaceParams(1.0, beta0, 1.0)
    inv = InvarianceSpec.full(d)
    pts = np.random.default_rng(d).random((4, d))
    e0 = math.sqrt(bounds.s_d(p, inv))
    assert wce_quadratic_form(p, inv, pts, np.zeros(4), TR).value == e0
    assert general_error_formula(p, inv, pts, np.zeros(4), Truncation(8, 1.0)).value == e0


def test_qmc_first_term():
    # unit weights: the Fourier side equals -beta0^d plus the frequency sum
    p = SpaceParams(1.2, 1.5, 0.8, "mixed")
    inv = InvarianceSpec.full(2)
    lat = Lattice(5, (1, 3))
    r = general_error_formula(p, inv, lat.points(), lat.weights(), TR)
    assert r.stats["method"] == "residue"
    w = wce_unshifted(p, inv, lat)
    assert abs(r.value - w.value) <= 1e-10 + r.tail_bound + w.tail_bound


@pytest.mark.parametrize("prof", ["korobov", "sobolev2pi", "mixed"])
@pytest.mark.parametrize("d,I", [(1, ()), (2, (1, 2)), (3, (1, 2)), (3, (1, 2, 3))])
def test_oracles_agree_on_lattices(prof, d, I):
    p = SpaceParams(1.0, 1.0, 1.0, prof)
    inv = InvarianceSpec(d, I)
    tr = Truncation(1 << 18, 1e-6)
    for z in itertools.product(range(5), repeat=d):
        lat = Lattice(5, z)
        q = wce_quadratic_form(p, inv, lat.points(), lat.weights(), tr)
        f = general_error_formula(p, inv, lat.points(), lat.weights(), tr)
        w = wce_unshifted(p, inv, lat)
        assert abs(q.value - f.value) <= 1e-6 + q.tail_bound + f.tail_bound
        assert abs(q.value - w.value) <= 1e-6 + q.tail_bound + w.tail_bound


def _random_rules(count, seed, rational):
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(count):
        d = int(rng.integers(1, 4))
        k = int(rng.integers(0, d + 1))
        n = int(rng.integers(1, 6))
        if rational:
            pts = rng.integers(0, 16, size=(n, d)) / 16
        else:
            pts = rng.random((n, d))
        w = rng.uniform(0, 2, size=n)
        yield InvarianceSpec(d, tuple(range(1, k + 1))), pts, w


def test_fifty_random_rational_rules():
    p = SpaceParams(1.0)
    tr = Truncation(1 << 16, 1e-6)
    for inv, pts, w in _random_rules(50, 11, rational=True):
        q = wce_quadratic_form(p, inv, pts, w, tr)
        f = general_error_formula(p, inv, pts, w, tr)
        assert f.stats["method"] == "residue"
        assert abs(q.value - f.value) <= 1e-6 + q.tail_bound + f.tail_bound


def test_fifty_random_real_rules():
    # smooth space so the box tail of the Fourier side is small
    p = SpaceParams(2.0, 1.0, 1.0, "sobolev2pi")
    for inv, pts, w in _random_rules(50, 5, rational=False):
        H = {1: 2000, 2: 200, 3: 40}[inv.d]
        tr = Truncation(H, 1e-6)
        q = wce_quadratic_form(p, inv, pts, w, Truncation(1 << 14, 1e-6))
        f = general_error_formula(p, inv, pts, w, tr, mode="box")
        assert abs(q.value - f.value) <= 1e-6 + q.tail_bound + f.tail_bound


def test_random_three_point_rule_fully_invariant():
    p = SpaceParams(1.0)
    inv = InvarianceSpec.full(2)
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 64, size=(3, 2)) / 64
    w = rng.uniform(0, 2, 3)
    q = wce_quadratic_form(p, inv, pts, w, Truncation(1 << 18, 1e-6))
    f = general_error_formula(p, inv, pts, w, Truncation(1 << 18, 1e-6))
    assert abs(q.value - f.value) <= 1e-6 + q.tail_bound + f.tail_bound


def test_common_denominator():
    assert common_denominator([[0.25, 0.5], [0.75, 0.0]]) == 4
    assert common_denominator([[1 / 3, 0.2]]) == 15
    assert common_denominator([[math.pi - 3]]) is None


def test_general_error_formula_modes():
    pts = [[math.pi - 3, 0.5]]
    with pytest.raises(ParameterDomain):
        general_error_formula(KOR, InvarianceSpec(2), pts, [1.0], TR, mode="residue")
    with pytest.raises(ParameterDomain):
        general_error_formula(KOR, InvarianceSpec(2), pts, [1.0], TR, mode="nope")


def test_negative_square_detection(monkeypatch):
    import permqmc.oracle as oracle_mod

    def fake(params, inv, X, Y, H):
        n = np.asarray(X).shape[0]
        return np.zeros((n, n)), np.zeros((n, n))

    monkeypatch.setattr(oracle_mod, "kernel_invariant_matrix", fake)
    with pytest.raises(NegativeSquareBeyondTolerance):
        wce_quadratic_form(KOR, InvarianceSpec(1), [[0.1]], [1.0], TR)


def test_clamping_within_tolerance(monkeypatch):
    import permqmc.oracle as oracle_mod

    def fake(params, inv, X, Y, H):
        n = np.asarray(X).shape[0]
        # 1 - 2 + K = -1e-11
        return np.full((n, n), 1.0 - 1e-11), np.zeros((n, n))

    monkeypatch.setattr(oracle_mod, "kernel_invariant_matrix", fake)
    r = wce_quadratic_form(KOR, InvarianceSpec(1), [[0.1]], [1.0], TR)
    assert r.value == 0.0
    assert r.stats["clamped"] < 0


def test_m1_mc_trivial_invariance():
    for inv in (InvarianceSpec(2), InvarianceSpec(3, (2,))):
        est = m1_invariant_mc(KOR, inv, 200, seed=1)
        assert est.estimate == pytest.approx(bounds.m2_full(KOR, inv.d), rel=1e-12)
        assert est.std_error <= 1e-10


def test_m1_mc_brackets_and_determinism():
    for p in (KOR, SpaceParams(1.5, 0.8, 1.2, "mixed")):
        inv = InvarianceSpec.full(3)
        est = m1_invariant_mc(p, inv, 3000, seed=9)
        assert est == m1_invariant_mc(p, inv, 3000, seed=9)
        s = bounds.s_d(p, inv)
        m2 = bounds.m2_invariant(p, inv).value
        assert s - 3 * est.std_error <= est.estimate <= m2 + 3 * est.std_error
