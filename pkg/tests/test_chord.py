from bisect import bisect_left

import pytest
from hypothesis import given, settings, strategies as st

from dtcsim.chord import build_chord, responsible_node
from dtcsim.hashspace import ContractViolation, Rng


def brute_successor(ids, key, size):
    cands = [i for i in ids if i >= key % size]
    return min(cands) if cands else min(ids)


def test_single_node_ring():
    net = build_chord(1, Rng(0))
    (nid,) = net.ids
    node = net.nodes[nid]
    assert node.successor == node.predecessor == nid
    assert set(node.fingers) == {nid}
    assert net.neighbors(nid) == []


def test_empty_ring_rejected():
    with pytest.raises(ContractViolation):
        build_chord(0, Rng(0))


def test_fingers_match_brute_force_and_cycle():
    net = build_chord(2000, Rng(11))
    ids = net.ids
    assert len(ids) == 2000
    sample = ids[::37]
    for u in sample:
        node = net.nodes[u]
        assert node.fingers[0] == node.successor
        for k in (0, 1, 7, 20, 40, 50, 55, 60, 63):
            assert node.fingers[k] == brute_successor(ids, u + (1 << k), net.size)
    # successor cycle covers every node once
    seen, u = set(), ids[0]
    while u not in seen:
        seen.add(u)
        u = net.nodes[u].successor
    assert seen == set(ids)
    assert all(net.nodes[net.nodes[u].successor].predecessor == u for u in ids)


def test_finger_minimality_small_ring():
    net = build_chord(300, Rng(5), ring_bits=16)
    ids = net.ids
    for u in ids:
        for k, f in enumerate(net.nodes[u].fingers):
            start = (u + (1 << k)) % net.size
            gap = (f - start) % net.size
            assert not any((x - start) % net.size < gap for x in ids)


def test_mean_distinct_fingers_near_log2n():
    counts = []
    for s in range(30):
        net = build_chord(2000, Rng(100 + s))
        counts.extend(len(net.nodes[u].distinct_fingers()) for u in net.ids[::50])
    mean = sum(counts) / len(counts)
    assert abs(mean - 11) <= 2


def test_responsible_node_examples():
    net = build_chord(50, Rng(3))
    ids = net.ids
    assert responsible_node(net, ids[7]) == ids[7]
    assert responsible_node(net, ids[-1] + 1) == ids[0]
    rng = Rng(9)
    for _ in range(500):
        key = rng.bits(64)
        assert responsible_node(net, key) == brute_successor(ids, key, net.size)


@settings(max_examples=40)
@given(st.integers(1, 200), st.integers(0, 2**32))
def test_arc_membership_matches_scan(n, seed):
    net = build_chord(n, Rng(seed), ring_bits=12)
    rng = Rng(seed + 1)
    start, length = rng.below(net.size), 1 + rng.below(net.size)
    got = net.nodes_in_arc(start, length)
    assert sorted(got) == sorted(i for i in net.ids if (i - start) % net.size < length)
