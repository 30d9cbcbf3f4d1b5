import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dtcsim.can import build_can
from dtcsim.chord import build_chord
from dtcsim.dtc import (NO_FAULTS, Arc, CanBox, CanGeometry, FaultModel, TreeMessage, chord_children, chord_scope,
                        collect_responses, span_multi_tree, span_tree, tie_break_path)
from dtcsim.hashspace import HALF, SCALE, Box, ContractViolation, Rng, box_contains

from dtcsim.harness import split_area

from conftest import cell_owner, grid_can, unit


def assert_tree(stats, neighbors):
    """Exactly-once delivery, a single rooted tree, and only legal overlay hops."""
    assert not stats.unreached
    assert stats.duplicates == 0
    assert all(stats.receive_count[v] == 1 for v in stats.in_area)
    assert stats.total_messages == len(stats.in_area)
    assert set(stats.parent) == stats.in_area - {stats.root}
    for v in stats.in_area:
        seen = set()
        while v != stats.root:
            assert v not in seen
            seen.add(v)
            p = stats.parent[v]
            assert v in neighbors(p)
            v = p


def random_box(rng, d):
    origin = tuple(rng.fraction() for _ in range(d))
    extent = tuple(SCALE if rng.below(3) == 0 else 1 + rng.below(SCALE) for _ in range(d))
    return Box(origin, extent)


# --- CAN ------------------------------------------------------------------------


def test_parent_follows_face_not_passage():
    # B = [2,3]x[0,2], C = [3,4]x[0,2], A = [2,4]x[2,4] (eighths), root zone [6,8]x[4,6]
    net = grid_can(2, 2, extra=[(unit(3), 0)])
    root, b, c, a = (cell_owner(net, *p) for p in ((6, 4), (2, 0), (3, 0), (2, 2)))
    # the root-to-B segment also runs through A ...
    t = Fraction(3, 10)
    on_seg = (Fraction(5, 2) + t * Fraction(9, 2), 1 + t * 4)
    assert net.zone(a).contains(tuple(int(x * SCALE / 8) for x in on_seg))
    # ... but enters B across the face shared with C
    for local in (False, True):
        assert span_tree(net, root, local=local).parent[b] == c


def test_tie_breaker_two_dims():
    net = grid_can(2, 2)
    root, k, m = cell_owner(net, 0, 0), cell_owner(net, 4, 4), cell_owner(net, 4, 2)
    diag, left = cell_owner(net, 2, 2), cell_owner(net, 2, 4)
    stats = span_tree(net, root)
    assert stats.parent[k] == m
    assert (m, k) in stats.tie_edges
    geo = CanGeometry.for_root(Box.whole(2), net.zone(root))
    duty = tie_break_path(geo, net.zone(k), net.node(m))
    assert duty.length == 2 and duty.position == 1 and duty.forward_to == k
    first = tie_break_path(geo, net.zone(k), net.node(diag))
    assert first.position == 0 and first.forward_to is None
    assert tie_break_path(geo, net.zone(k), net.node(left)).position is None
    # a segment through a face interior needs no tie breaker
    assert tie_break_path(geo, net.zone(cell_owner(net, 4, 0)), net.node(diag)) is None


def test_tie_breaker_three_dims():
    net = grid_can(3, 2)
    root, k = cell_owner(net, 0, 0, 0), cell_owner(net, 4, 4, 4)
    path = [cell_owner(net, *c) for c in ((2, 2, 2), (4, 2, 2), (4, 4, 2))]
    assert span_tree(net, root).parent[k] == path[-1]
    assert span_tree(net, root, local=True).parent[k] == path[-1]
    geo = CanGeometry.for_root(Box.whole(3), net.zone(root))
    for i, v in enumerate(path):
        duty = tie_break_path(geo, net.zone(k), net.node(v))
        assert duty.length == 3 and duty.position == i
        assert duty.forward_to == (k if i == 2 else None)
    assert tie_break_path(geo, net.zone(k), net.node(cell_owner(net, 2, 4, 2))).position is None


def test_axis_aligned_neighbor_is_root_child():
    net = grid_can(2, 2)
    root = cell_owner(net, 2, 2)
    assert span_tree(net, root).parent[cell_owner(net, 4, 2)] == root


def test_single_node_network():
    stats = span_tree(build_can(1, 4, Rng(0)), 0)
    assert stats.total_messages == 1 and stats.depth == {0: 0}


def test_full_space_n2000_d10():
    net = build_can(2000, 10, Rng(2))
    stats = span_tree(net, 17)
    assert stats.total_messages == 2000
    assert_tree(stats, lambda v: net.nbrs[v])


@settings(max_examples=60)
@given(st.sampled_from([2, 3, 5, 10]), st.integers(16, 600), st.integers(0, 2**40))
def test_exactly_once_random_areas(d, n, seed):
    rng = Rng(seed)
    net = build_can(n, d, rng)
    box = random_box(rng, d)
    members = net.zones_in(box)
    root = members[rng.below(len(members))]
    stats = span_tree(net, root, CanBox(box))
    assert stats.in_area == set(members)
    assert_tree(stats, lambda v: net.nbrs[v])


@settings(max_examples=20)
@given(st.sampled_from([2, 3, 4]), st.integers(2, 300), st.integers(0, 2**40))
def test_local_rule_matches_plan(d, n, seed):
    rng = Rng(seed)
    net = build_can(n, d, rng)
    box = random_box(rng, d)
    members = net.zones_in(box)
    root = members[rng.below(len(members))]
    a = span_tree(net, root, CanBox(box), local=True)
    b = span_tree(net, root, CanBox(box))
    assert a.parent == b.parent and a.receive_count == b.receive_count


def test_exhaustive_claims_small_networks():
    # every zone is claimed by exactly one neighbor, for every possible root
    for seed in range(6):
        rng = Rng(seed)
        d = 2 + seed % 2
        net = build_can(60, d, rng)
        for root in range(len(net)):
            assert_tree(span_tree(net, root), lambda v: net.nbrs[v])


def test_root_outside_area_rejected():
    net = grid_can(2, 1)
    area = CanBox(Box((0, 0), (HALF, HALF)))
    outsider = cell_owner(net, 3, 3, parts=4)
    with pytest.raises(ContractViolation):
        span_tree(net, outsider, area)


def test_can_depth_bound():
    for d, n in ((2, 1000), (5, 3000), (10, 3000)):
        net = build_can(n, d, Rng(d * n))
        stats = span_tree(net, 0)
        assert max(stats.depth.values()) <= 2 * d * n ** (1 / d)


def test_determinism():
    net = build_can(800, 5, Rng(3))
    a, b = span_tree(net, 9), span_tree(net, 9)
    assert (a.parent, a.depth, a.receive_count) == (b.parent, b.depth, b.receive_count)


# --- multi-tree and responses ------------------------------------------------


def quadrants():
    return [CanBox(Box((x, y), (HALF, HALF))) for x in (0, HALF) for y in (0, HALF)]


@settings(max_examples=25)
@given(st.integers(2, 400), st.integers(0, 2**40))
def test_quadrant_trees(n, seed):
    rng = Rng(seed)
    net = build_can(n, 2, rng)
    plan = []
    for q in quadrants():
        members = net.zones_in(q.box)
        plan.append((members[rng.below(len(members))], q))
    stats = span_multi_tree(net, plan)
    for v in range(n):
        meets = sum(1 for _, q in plan if v in net.zones_in(q.box))
        assert stats.receive_count[v] == meets
    assert collect_responses(stats, net).complete


def test_multi_tree_single_area_and_overlap():
    net = build_can(300, 3, Rng(1))
    one = span_multi_tree(net, [(5, CanBox(Box.whole(3)))])
    assert one.parent == span_tree(net, 5).parent
    with pytest.raises(ContractViolation):
        span_multi_tree(net, [(5, CanBox(Box.whole(3))), (6, CanBox(Box((0,) * 3, (HALF,) * 3)))])


def test_ten_subtrees_share_a_region():
    net = build_can(16000, 10, Rng(6))
    region = CanBox(Box((0,) * 10, (HALF, HALF) + (SCALE,) * 8))
    rng = Rng(1)
    plan = []
    for sub in split_area(region, 10):
        members = net.zones_in(sub.box)
        plan.append((members[rng.below(len(members))], sub))
    stats = span_multi_tree(net, plan)
    sizes = [len(p.in_area) for p in stats.parts]
    assert 3500 <= len(stats.in_area) <= 4500
    assert sum(sizes) == len(stats.in_area)  # dyadic pieces: no zone straddles two
    assert 350 <= sum(sizes) / 10 <= 450
    assert all(receive == 1 for receive in stats.receive_count.values())


def test_no_faults_no_gap():
    net = build_can(500, 4, Rng(2))
    rep = collect_responses(span_tree(net, 0), net)
    assert rep.complete and rep.gap == set() and rep.gap_fraction == 0


def test_one_malicious_node_gap_is_its_subtree():
    net = build_can(800, 3, Rng(12))
    clean = span_tree(net, 0)
    children = clean.children()
    m = next(v for v in sorted(children) if v != 0 and len(clean.subtree(v)) > 3)
    hit = span_tree(net, 0, faults=FaultModel(frozenset({m})))
    rep = collect_responses(hit, net)
    assert rep.gap == clean.subtree(m)
    lost = sum((net.zone(v).volume() for v in clean.subtree(m)), Fraction(0))
    assert rep.covered == 1 - lost
    assert hit.unreached == clean.subtree(m) - {m}


def test_malicious_root_rejected():
    net = build_can(50, 2, Rng(1))
    with pytest.raises(ContractViolation):
        span_tree(net, 3, faults=FaultModel(frozenset({3})))


# --- Chord --------------------------------------------------------------------


def test_chord_full_ring_n2000():
    net = build_chord(2000, Rng(4))
    root = net.ids[123]
    stats = span_tree(net, root)
    assert stats.total_messages == 2000
    assert_tree(stats, lambda v: set(net.neighbors(v)) | {net.nodes[v].successor})


def test_chord_sub_arcs_tile_the_ring():
    net = build_chord(2000, Rng(8))
    root = net.ids[0]
    msg = TreeMessage(root, root, Arc(root, net.size))
    owned = {root: (root, root)}  # node -> delegated [start, limit)
    frontier = [(root, msg)]
    child_count = {}
    while frontier:
        nxt = []
        for v, m in frontier:
            kids = chord_children(net.nodes[v], m)
            lim = owned[v][1]
            # children tile (v, lim) contiguously, starting at v's successor
            if kids:
                assert kids[0][0] == net.nodes[v].successor
                for (c1, e1), (c2, _) in zip(kids, kids[1:]):
                    assert e1 == c2
                assert kids[-1][1] == lim
            else:
                assert net.nodes[v].successor == lim or lim == root and net.nodes[v].successor == root
            for c, end in kids:
                child_count[c] = child_count.get(c, 0) + 1
                owned[c] = (c, end)
                nxt.append((c, m.forwarded(end)))
        frontier = nxt
    assert set(child_count) == set(net.ids) - {root}
    assert set(child_count.values()) == {1}


def test_chord_depth_bound():
    for s in range(30):
        net = build_chord(2000, Rng(500 + s))
        stats = span_tree(net, net.ids[s])
        assert max(stats.depth.values()) <= math.ceil(math.log2(2000))


@settings(max_examples=60)
@given(st.integers(1, 600), st.integers(0, 2**40))
def test_chord_exactly_once_random_arcs(n, seed):
    rng = Rng(seed)
    net = build_chord(n, rng, ring_bits=20)
    arc = Arc(rng.below(net.size), 1 + rng.below(net.size))
    root, members, extra = chord_scope(net, arc)
    stats = span_tree(net, root, arc)
    assert stats.in_area == members
    assert_tree(stats, lambda v: set(net.neighbors(v)) | {net.nodes[v].successor})
    if extra is not None:
        assert extra in stats.boundary


def test_chord_arc_of_root_only():
    net = build_chord(100, Rng(2), ring_bits=16)
    u, nxt = net.ids[10], net.ids[11]
    stats = span_tree(net, u, Arc(u, 1))
    assert stats.in_area == {u} and stats.total_messages == 1
    # arc ends just before the next node: that node is the arc-end successor
    stats = span_tree(net, u, Arc(u, nxt - u))
    assert stats.in_area == {u, nxt} and stats.boundary == {nxt}
    assert stats.total_messages == 2 and stats.parent[nxt] == u


def test_chord_root_must_start_arc():
    net = build_chord(100, Rng(2), ring_bits=16)
    with pytest.raises(ContractViolation):
        span_tree(net, net.ids[12], Arc(net.ids[10], 1000))
    with pytest.raises(ContractViolation):
        chord_children(net.nodes[net.ids[50]], TreeMessage(net.ids[0], net.ids[0], Arc(net.ids[0], 3)), 16)
