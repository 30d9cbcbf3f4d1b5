from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dtcsim.hashspace import (HALF, SCALE, Box, ContractViolation, Rng, box_contains, boxes_overlap, derive_seed,
                              in_arc, interval_overlap, point, ring_distance, to_fixed, torus_displacement)

coord = st.integers(0, SCALE - 1)


def test_displacement_examples():
    assert torus_displacement(point(0.2, 0.2), point(0.2, 0.2)) == (0, 0)
    dx, dy = torus_displacement(point(0.9, 0.5), point(0.1, 0.5))
    assert abs(dx - to_fixed(0.2)) < 1 << 12 and dy == 0
    assert torus_displacement(point(0, 0), point(0.5, 0.25)) == (HALF, SCALE // 4)


def test_displacement_exact_fractions():
    a, b = point("9/10", "1/2"), point("1/10", "1/2")
    assert torus_displacement(a, b)[0] == (b[0] - a[0]) % SCALE
    assert Fraction(torus_displacement(a, b)[0], SCALE) == Fraction(b[0] - a[0] + SCALE, SCALE)


def test_dimension_mismatch():
    with pytest.raises(ContractViolation):
        torus_displacement((0, 0), (0,))
    with pytest.raises(ContractViolation):
        box_contains(Box.whole(2), (0,))


@given(st.lists(coord, min_size=1, max_size=6).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(coord, min_size=len(a), max_size=len(a)))))
def test_displacement_reconstructs(pair):
    a, b = pair
    delta = torus_displacement(a, b)
    assert all(-HALF < x <= HALF for x in delta)
    assert tuple((x + y) % SCALE for x, y in zip(a, delta)) == tuple(b)


def test_box_contains_examples():
    assert box_contains(Box.of((0, 0), (1, 1)), point(0.7, 0.3))
    assert box_contains(Box.of(("0.9", "0.9"), ("0.2", "0.2")), point(0.05, 0.05))
    assert not box_contains(Box.of((0, 0), ("0.5", "0.5")), point(0.5, 0.1))


def test_box_validation():
    with pytest.raises(ContractViolation):
        Box((0,), (0,))
    with pytest.raises(ContractViolation):
        Box((0,), (SCALE + 1,))
    assert Box.whole(3).volume() == 1
    assert Box((5,), (SCALE,)).normalized().origin == (0,)


@given(coord, st.integers(1, SCALE), coord)
def test_box_contains_matches_interval_rule(o, e, x):
    assert box_contains(Box((o,), (e,)), (x,)) == ((x - o) % SCALE < e)


@given(coord, st.integers(1, SCALE), coord, st.integers(1, SCALE))
def test_interval_overlap_brute(lo_a, len_a, lo_b, len_b):
    # scale down so we can enumerate
    m = 64
    la, lb = lo_a % m, lo_b % m
    na, nb = 1 + len_a % m, 1 + len_b % m
    sa = {(la + i) % m for i in range(na)}
    sb = {(lb + i) % m for i in range(nb)}
    f = SCALE // m
    assert interval_overlap(la * f, na * f, lb * f, nb * f) == len(sa & sb) * f


def test_boxes_overlap():
    a = Box.of(("0.9", 0), ("0.2", 1))
    assert boxes_overlap(a, Box.of(("0.05", 0), ("0.1", 1)))
    assert not boxes_overlap(a, Box.of(("0.2", 0), ("0.5", 1)))


def test_in_arc_examples():
    m = 64
    assert in_arc(0, 1 << m, 12345)
    assert in_arc((1 << m) - 1, 2, 0)
    assert not in_arc(10, 5, 15)
    assert in_arc(10, 5, 14)
    assert ring_distance(10, 5) == (5 - 10) % (1 << m)


def test_rng_deterministic_and_seed_derivation():
    a, b = Rng(42), Rng(42)
    assert [a.bits(64) for _ in range(5)] == [b.bits(64) for _ in range(5)]
    assert derive_seed(1, "x", 2) == derive_seed(1, "x", 2) != derive_seed(1, "x", 3)
    r = Rng(7)
    draws = [r.below(10) for _ in range(2000)]
    assert set(draws) == set(range(10))
    s = Rng(3).sample(list(range(100)), 10)
    assert len(set(s)) == 10


def test_rng_stream_frozen():
    r = Rng(2024)
    assert [r.below(1000) for _ in range(5)] == [481, 186, 745, 592, 311]
    assert Rng(2024).bits(64) == 3351884761484746118
    assert derive_seed(0, "rep", 0) == 7511581772203876820
