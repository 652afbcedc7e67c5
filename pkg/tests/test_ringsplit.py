"""Half-ring factorization: the split map and its arithmetic homomorphism."""

import numpy as np
import pytest

from medha.polyring import (
    MINUS,
    PLUS,
    STANDARD,
    ResiduePoly,
    dyadic,
    negacyclic_mul,
    zeta_4n,
)
from medha.ringsplit import (
    SplitPair,
    _split_consts,
    forward_pair,
    inverse_pair,
    join,
    split,
)


def _rand_parent(rng, q, n):
    c = rng.integers(0, q.value, size=n, dtype=np.uint64)
    return ResiduePoly(q, c, "coeff", STANDARD)


def test_split_constant_squares_to_minus_one(set1, set2):
    for q in set1.base.all_moduli + set2.base.all_moduli:
        for h in (8, 64, 1 << 14):
            zh, inv2, zinv2 = _split_consts(q, h)
            assert zh * zh % q.value == q.value - 1
            assert inv2 * 2 % q.value == 1
            assert zinv2 * 2 % q.value * zh % q.value == 1


def test_join_split_roundtrip(set1):
    rng = np.random.default_rng(31)
    for q in (set1.base.primes[0], set1.base.special):
        for n in (16, 64, 512):
            for _ in range(20):
                p = _rand_parent(rng, q, n)
                pair = split(p)
                assert pair.plus.twist == PLUS and pair.minus.twist == MINUS
                assert pair.half_degree == n // 2
                back = join(pair)
                assert np.array_equal(back.coeffs, p.coeffs)
    # the opposite composition is also the identity
    pair = split(_rand_parent(rng, set1.base.primes[1], 128))
    again = split(join(pair))
    assert np.array_equal(again.plus.coeffs, pair.plus.coeffs)
    assert np.array_equal(again.minus.coeffs, pair.minus.coeffs)


def test_split_add_sub_commute(set1):
    rng = np.random.default_rng(32)
    q = set1.base.primes[2]
    n = 64
    for kind in ("add", "sub"):
        a = _rand_parent(rng, q, n)
        b = _rand_parent(rng, q, n)
        direct = dyadic(kind, a, b)  # coeff-domain add/sub is elementwise
        pa, pb = split(a), split(b)
        via = join(
            SplitPair(dyadic(kind, pa.plus, pb.plus), dyadic(kind, pa.minus, pb.minus))
        )
        assert np.array_equal(via.coeffs, direct.coeffs)


def test_split_mul_commutes_with_parent_ring(set1):
    rng = np.random.default_rng(33)
    q = set1.base.primes[0]
    for n in (16, 128):
        for _ in range(10):
            a = _rand_parent(rng, q, n)
            b = _rand_parent(rng, q, n)
            direct = negacyclic_mul(a, b)
            pa, pb = split(a), split(b)
            via = join(
                SplitPair(
                    negacyclic_mul(pa.plus, pb.plus),
                    negacyclic_mul(pa.minus, pb.minus),
                )
            )
            assert np.array_equal(via.coeffs, direct.coeffs)


def test_split_mul_in_evaluation_domain(set1):
    rng = np.random.default_rng(34)
    q = set1.base.primes[4]
    n = 64
    a = _rand_parent(rng, q, n)
    b = _rand_parent(rng, q, n)
    fa = forward_pair(split(a))
    fb = forward_pair(split(b))
    prod = SplitPair(
        dyadic("mul", fa.plus, fb.plus), dyadic("mul", fa.minus, fb.minus)
    )
    via = join(inverse_pair(prod))
    assert np.array_equal(via.coeffs, negacyclic_mul(a, b).coeffs)


def test_split_rejects_bad_inputs(set1):
    rng = np.random.default_rng(35)
    q = set1.base.primes[0]
    p = _rand_parent(rng, q, 32)
    from medha.polyring import ntt_forward

    with pytest.raises(ValueError):
        split(ntt_forward(p))
    with pytest.raises(ValueError):
        split(ResiduePoly(q, p.coeffs[:16], "coeff", PLUS))
    pair = split(p)
    with pytest.raises(ValueError):
        join(SplitPair(pair.minus, pair.plus))
    with pytest.raises(ValueError):
        join(forward_pair(pair))


def test_split_pair_copy_is_deep(set1):
    rng = np.random.default_rng(36)
    pair = split(_rand_parent(rng, set1.base.primes[0], 32))
    dup = pair.copy()
    dup.plus.coeffs[0] += np.uint64(1)
    assert dup.plus.coeffs[0] != pair.plus.coeffs[0]
    assert pair.q.value == set1.base.primes[0].value


def test_zeta_consistency_between_split_and_twists(set1):
    # the constant multiplying the high half is the same root the plus and
    # minus transform seeds are built from
    q = set1.base.primes[3]
    h = 32
    zh, _, _ = _split_consts(q, h)
    assert zh == pow(zeta_4n(q, h), h, q.value)
