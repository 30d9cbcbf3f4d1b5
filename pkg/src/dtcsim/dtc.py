"""Distributed tree construction over Chord arcs and CAN boxes.

Every forwarding decision here is made from what a single node knows: its
own zone or finger table, its neighbors' zones, and the contents of the
message (root, root reference point, area).  The span simulator only
schedules those local decisions in synchronous cycles.

CAN geometry is exact.  Coordinates are taken in the area's own frame (the
area box unrolled from its origin), doubled so that centers are integers.
The parent of a zone Z is the zone holding the point just before the
root-to-Z segment enters Z.  When that entry happens through a lower
dimensional corner of Z the tie breaker picks, among the zones around the
corner, the one reached by resolving the differing dimensions in ascending
order; that zone is always a face neighbor of Z.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .can import CanNetwork, CanNode, CanZone, abut_dimension
from .chord import ChordNetwork, ChordNode
from .hashspace import SCALE, Box, ContractViolation, boxes_overlap, interval_overlap

SCALE2 = 2 * SCALE


# ---------------------------------------------------------------------------
# areas, messages, results


@dataclass(frozen=True)
class Arc:
    start: int
    length: int

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ContractViolation("arc length must be positive")


@dataclass(frozen=True)
class CanBox:
    box: Box


AreaSpec = Union[Arc, CanBox]


@dataclass(frozen=True)
class FaultModel:
    malicious: FrozenSet[int] = frozenset()
    root_may_be_malicious: bool = False

    @classmethod
    def none(cls) -> "FaultModel":
        return cls()


NO_FAULTS = FaultModel()


@dataclass(frozen=True)
class TreeMessage:
    root: int
    root_center: object  # ring id, or doubled frame coordinates for CAN
    area: AreaSpec
    sub_limit: Optional[int] = None
    hops: int = 0
    payload_tag: object = None

    def forwarded(self, sub_limit: Optional[int] = None) -> "TreeMessage":
        return TreeMessage(self.root, self.root_center, self.area, sub_limit, self.hops + 1, self.payload_tag)


@dataclass
class TreeStats:
    root: int
    in_area: Set[int]
    receive_count: Dict[int, int] = field(default_factory=dict)
    depth: Dict[int, int] = field(default_factory=dict)
    parent: Dict[int, int] = field(default_factory=dict)
    malicious: FrozenSet[int] = frozenset()
    boundary: Set[int] = field(default_factory=set)
    tie_edges: Set[Tuple[int, int]] = field(default_factory=set)
    parts: List["TreeStats"] = field(default_factory=list)
    areas: List[AreaSpec] = field(default_factory=list)

    @property
    def total_messages(self) -> int:
        return sum(self.receive_count.values())

    @property
    def unreached(self) -> Set[int]:
        return {v for v in self.in_area if self.receive_count.get(v, 0) == 0}

    @property
    def duplicates(self) -> int:
        return sum(c - 1 for c in self.receive_count.values() if c > 1)

    def children(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = defaultdict(list)
        for child, par in self.parent.items():
            out[par].append(child)
        return out

    def subtree(self, v: int) -> Set[int]:
        kids = self.children()
        out, stack = set(), [v]
        while stack:
            u = stack.pop()
            out.add(u)
            stack.extend(kids.get(u, ()))
        return out


# ---------------------------------------------------------------------------
# CAN geometry


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class ProbePoint:
    """Exact point ``num[i] / den`` (doubled torus coords) nudged by ``side[i]``.

    ``side`` is -1 for "just below", +1 for "just above", 0 for exact.
    """

    num: Tuple[int, ...]
    den: int
    side: Tuple[int, ...]

    def in_zone(self, lo: Sequence[int], hi: Sequence[int]) -> bool:
        den = self.den
        for x, s, a, b in zip(self.num, self.side, lo, hi):
            a2 = 2 * a * den
            b2 = 2 * b * den
            if x < a2 or (x == a2 and s < 0):
                return False
            if x > b2 or (x == b2 and s >= 0):
                return False
        return True

    def go_left(self, dim: int, mid: int) -> bool:
        m2 = 2 * mid * self.den
        x = self.num[dim]
        return x < m2 or (x == m2 and self.side[dim] < 0)


@dataclass(frozen=True)
class Entry:
    """Where the root-to-center segment first touches a zone's closure.

    The entry parameter is ``t = t_num / t_den``; ``dims`` are the
    dimensions whose faces the segment crosses at that instant.
    """

    t_num: int
    t_den: int
    dims: Tuple[int, ...]
    delta: Tuple[int, ...]

    @property
    def is_corner(self) -> bool:
        return len(self.dims) >= 2


class CanGeometry:
    """Pure functions of (area, root reference point); any node can evaluate them."""

    def __init__(self, area: Box, root_center2: Tuple[int, ...]):
        self.area = area.normalized()
        self.root_center2 = tuple(root_center2)
        self._origin = self.area.origin
        self._end = tuple(o + e for o, e in zip(self.area.origin, self.area.extent))

    @classmethod
    def for_root(cls, area: Box, root_zone: CanZone) -> "CanGeometry":
        geo = cls(area, (0,) * area.dims)
        pieces = geo.pieces(root_zone.lo, root_zone.hi)
        if pieces is None:
            raise ContractViolation("root zone does not intersect the area")
        return cls(area, tuple(a + b for a, b in pieces))

    def pieces(self, lo: Sequence[int], hi: Sequence[int]) -> Optional[List[Tuple[int, int]]]:
        """The zone clipped to the area, in frame coordinates; None if disjoint.

        When a wrapped area meets a zone twice in one dimension, the piece on
        the root's side of the frame seam is used.  That piece is the first
        one met when sweeping the frame outward from the root, which keeps
        the parent relation acyclic.
        """
        out = []
        for a, b, o, end, r in zip(lo, hi, self._origin, self._end, self.root_center2):
            if end - o >= SCALE:
                out.append((a, b))
                continue
            p1 = (max(a, o), min(b, end))
            p2 = (max(a + SCALE, o), min(b + SCALE, end))
            ok1, ok2 = p1[0] < p1[1], p2[0] < p2[1]
            if ok1 and ok2:
                if p1[1] == p2[0]:
                    out.append((p1[0], p2[1]))
                else:
                    out.append(p1 if r < SCALE2 else p2)
            elif ok1:
                out.append(p1)
            elif ok2:
                out.append(p2)
            else:
                return None
        return out

    def meets(self, zone: CanZone) -> bool:
        return self.pieces(zone.lo, zone.hi) is not None

    def entry(self, zone: CanZone) -> Optional[Entry]:
        """Entry of the segment root -> center(zone ∩ area); None for the root's zone."""
        pieces = self.pieces(zone.lo, zone.hi)
        if pieces is None:
            raise ContractViolation("zone does not intersect the area")
        best_n, best_d = 0, 1
        dims: List[int] = []
        delta = []
        for i, ((plo, phi), r) in enumerate(zip(pieces, self.root_center2)):
            dl = plo + phi - r
            delta.append(dl)
            if dl > 0 and r < 2 * plo:
                num, den = 2 * plo - r, dl
            elif dl < 0 and r > 2 * phi:
                num, den = r - 2 * phi, -dl
            else:
                continue
            lhs, rhs = num * best_d, best_n * den
            if lhs > rhs:
                best_n, best_d, dims = num, den, [i]
            elif lhs == rhs:
                dims.append(i)
        if best_n == 0:
            return None
        return Entry(best_n, best_d, tuple(dims), tuple(delta))

    def probe(self, entry: Entry, resolved: int) -> ProbePoint:
        """Point next to the entry point with the first ``resolved`` crossing dims already inside.

        ``resolved = len(dims) - 1`` gives the claimant: the zone that adds
        the target as its child.  ``resolved = 0`` is the zone the segment
        occupies right before the entry point.
        """
        inside = set(entry.dims[:resolved])
        den = entry.t_den
        num, side = [], []
        for i, (r, dl) in enumerate(zip(self.root_center2, entry.delta)):
            x = r * den + entry.t_num * dl
            s = _sign(dl) if i in inside else -_sign(dl)
            lim = SCALE2 * den
            if x > lim or (x == lim and s >= 0):
                x -= lim
            elif x < 0 or (x == 0 and s < 0):
                x += lim
            num.append(x)
            side.append(s)
        return ProbePoint(tuple(num), den, tuple(side))

    def claim_probe(self, zone: CanZone) -> Optional[ProbePoint]:
        e = self.entry(zone)
        if e is None:
            return None
        return self.probe(e, len(e.dims) - 1)


@dataclass(frozen=True)
class TieBreakDuty:
    """Tie-breaker path toward ``target`` and this node's place on it.

    ``waypoints`` has one probe point per hop; the k-th waypoint lies in the
    k-th zone on the path.  Only the last path member actually transmits,
    since every zone on the path already receives the query from its own
    parent; ``forward_to`` is set for that member.
    """

    target: int
    waypoints: Tuple[ProbePoint, ...]
    position: Optional[int]
    forward_to: Optional[int]

    @property
    def length(self) -> int:
        return len(self.waypoints)


def tie_break_path(geometry: CanGeometry, target_zone: CanZone, local: CanNode) -> Optional[TieBreakDuty]:
    """Resolve a corner entry into ``target_zone``; None when the segment crosses a face."""
    if not geometry.meets(target_zone):
        return None
    e = geometry.entry(target_zone)
    if e is None or not e.is_corner:
        return None
    waypoints = tuple(geometry.probe(e, k) for k in range(len(e.dims)))
    position = None
    for k, wp in enumerate(waypoints):
        if wp.in_zone(local.zone.lo, local.zone.hi):
            position = k
    forward_to = target_zone.owner if position == len(waypoints) - 1 else None
    return TieBreakDuty(target_zone.owner, waypoints, position, forward_to)


def can_children(node: CanNode, neighbor_zones: Mapping[int, CanZone], msg: TreeMessage) -> List[int]:
    """Neighbors this node must forward ``msg`` to, from local knowledge only."""
    geo = CanGeometry(msg.area.box, msg.root_center)
    if not geo.meets(node.zone):
        raise ContractViolation(f"node {node.id} is outside the area")
    out = []
    for w in sorted(node.neighbors):
        z = neighbor_zones[w]
        if not geo.meets(z):
            continue
        probe = geo.claim_probe(z)
        if probe is not None and probe.in_zone(node.zone.lo, node.zone.hi):
            out.append(w)
    return out


def can_tree_plan(net: CanNetwork, geo: CanGeometry, in_area: Iterable[int]) -> Tuple[Dict[int, List[int]], Set[Tuple[int, int]]]:
    """Every node's children, by locating each zone's claim probe in the split trie.

    Gives the same answer as calling :func:`can_children` at every node
    (the test suite checks this) in O(n log n) instead of O(n * degree).
    """
    plan: Dict[int, List[int]] = defaultdict(list)
    tie_edges = set()
    for z in sorted(in_area):
        zone = net.zone(z)
        e = geo.entry(zone)
        if e is None:
            continue
        probe = geo.probe(e, len(e.dims) - 1)
        parent = net.trie_descend(probe.go_left)
        plan[parent].append(z)
        if e.is_corner:
            tie_edges.add((parent, z))
    return plan, tie_edges


# ---------------------------------------------------------------------------
# Chord


def _arc_end(area: Arc, ring_size: int) -> int:
    return (area.start + area.length) % ring_size


def chord_children(node: ChordNode, msg: TreeMessage, ring_bits: int = 64) -> List[Tuple[int, int]]:
    """Children of ``node`` and the exclusive end of each child's sub-arc."""
    size = 1 << ring_bits
    area: Arc = msg.area
    full = area.length >= size
    u = node.id
    arc_end = _arc_end(area, size)
    in_arc = (u - area.start) % size < area.length
    limit = arc_end if msg.sub_limit is None else msg.sub_limit
    region = size if (msg.sub_limit is None and full) else (limit - u) % size
    if not in_arc and not (msg.sub_limit is not None and region == 1):
        raise ContractViolation(f"node {u} lies outside the arc")

    fingers = [f for f in node.distinct_fingers() if 0 < (f - u) % size < region]
    fingers.sort(key=lambda f: (f - u) % size)
    out = []
    for k, f in enumerate(fingers):
        end = fingers[k + 1] if k + 1 < len(fingers) else limit
        out.append((f, end))

    # successor of the arc's last point joins the tree as a boundary member
    succ = node.successor
    if (
        not full
        and limit == arc_end
        and not fingers
        and u != (arc_end - 1) % size
        and succ != msg.root
        and succ != u
    ):
        out.append((succ, (succ + 1) % size))
    return out


def chord_scope(net: ChordNetwork, area: Arc) -> Tuple[int, Set[int], Optional[int]]:
    """(root, nodes the tree must reach, boundary member if it lies outside the arc)."""
    root = net.responsible_node(area.start)
    members = set(net.nodes_in_arc(area.start, area.length))
    last_point = (area.start + area.length - 1) % net.size
    boundary = net.responsible_node(last_point)
    extra = None
    if boundary not in members:
        members.add(boundary)
        extra = boundary
    return root, members, extra


# ---------------------------------------------------------------------------
# spanning


ChildrenFn = Callable[[int, TreeMessage], List[Tuple[int, TreeMessage]]]


def _propagate(root: int, msg: TreeMessage, children: ChildrenFn, faults: FaultModel, stats: TreeStats) -> TreeStats:
    """Synchronous cycles: everything sent in cycle t is delivered in t + 1."""
    if root in faults.malicious and not faults.root_may_be_malicious:
        raise ContractViolation("root is marked malicious but the fault model excludes it")
    stats.receive_count[root] = 1
    stats.depth[root] = 0
    frontier = [(root, msg)]
    cycle = 0
    while frontier:
        cycle += 1
        nxt = []
        for v, m in frontier:
            if v in faults.malicious:
                continue
            for child, cm in children(v, m):
                seen = stats.receive_count.get(child, 0)
                stats.receive_count[child] = seen + 1
                if seen:
                    continue
                stats.parent[child] = v
                stats.depth[child] = cycle
                nxt.append((child, cm))
        frontier = nxt
    return stats


def span_tree(net, root: int, area: Optional[AreaSpec] = None, faults: FaultModel = NO_FAULTS, local: bool = False) -> TreeStats:
    """Build the DTC tree from ``root`` over ``area`` (default: the whole space).

    ``local=True`` makes every CAN node evaluate :func:`can_children`
    itself; the default uses the equivalent precomputed plan.
    """
    if isinstance(net, ChordNetwork):
        return _span_chord(net, root, area, faults)
    if isinstance(net, CanNetwork):
        return _span_can(net, root, area, faults, local)
    raise TypeError(f"unsupported network {type(net).__name__}")


def _span_chord(net: ChordNetwork, root: int, area: Optional[Arc], faults: FaultModel) -> TreeStats:
    if area is None:
        area = Arc(root, net.size)
    if not isinstance(area, Arc):
        raise ContractViolation("Chord spans need an Arc area")
    if area.length > net.size:
        raise ContractViolation("arc longer than the ring")
    first, members, extra = chord_scope(net, area)
    if root != first:
        raise ContractViolation(f"root {root} is not the first node of the arc (expected {first})")
    stats = TreeStats(root=root, in_area=members, malicious=faults.malicious, areas=[area])
    if extra is not None:
        stats.boundary.add(extra)
    msg = TreeMessage(root, root, area)
    if extra == root:
        # nothing of the arc is stored anywhere but on the root
        stats.receive_count[root] = 1
        stats.depth[root] = 0
        return stats

    def children(v: int, m: TreeMessage):
        return [(c, m.forwarded(lim)) for c, lim in chord_children(net.nodes[v], m, net.ring_bits)]

    return _propagate(root, msg, children, faults, stats)


def _span_can(net: CanNetwork, root: int, area: Optional[AreaSpec], faults: FaultModel, local: bool) -> TreeStats:
    box = Box.whole(net.dims) if area is None else (area.box if isinstance(area, CanBox) else None)
    if box is None:
        raise ContractViolation("CAN spans need a CanBox area")
    if box.dims != net.dims:
        raise ContractViolation("area dimension does not match the network")
    box = box.normalized()
    root_zone = net.zone(root)
    geo = CanGeometry.for_root(box, root_zone)
    in_area = {v for v in net if geo.meets(net.zone(v))}
    stats = TreeStats(root=root, in_area=in_area, malicious=faults.malicious, areas=[CanBox(box)])
    msg = TreeMessage(root, geo.root_center2, CanBox(box))

    if local:
        def children(v: int, m: TreeMessage):
            node = net.node(v)
            zones = {w: net.zone(w) for w in node.neighbors}
            return [(c, m.forwarded()) for c in can_children(node, zones, m)]
    else:
        plan, stats.tie_edges = can_tree_plan(net, geo, in_area)

        def children(v: int, m: TreeMessage):
            return [(c, m.forwarded()) for c in plan.get(v, ())]

    return _propagate(root, msg, children, faults, stats)


def _areas_overlap(a: AreaSpec, b: AreaSpec, ring_size: int) -> bool:
    if isinstance(a, Arc) and isinstance(b, Arc):
        if a.length >= ring_size or b.length >= ring_size:
            return True
        return (b.start - a.start) % ring_size < a.length or (a.start - b.start) % ring_size < b.length
    if isinstance(a, CanBox) and isinstance(b, CanBox):
        return boxes_overlap(a.box.normalized(), b.box.normalized())
    raise ContractViolation("mixed area kinds")


def span_multi_tree(net, roots_and_areas: Sequence[Tuple[int, AreaSpec]], faults: FaultModel = NO_FAULTS) -> TreeStats:
    """One tree per disjoint sub-area, merged.

    Receive counts add up across trees: a zone straddling two sub-areas is
    served once by each of them.
    """
    if not roots_and_areas:
        raise ContractViolation("need at least one sub-area")
    ring_size = getattr(net, "size", SCALE)
    for i in range(len(roots_and_areas)):
        for j in range(i + 1, len(roots_and_areas)):
            if _areas_overlap(roots_and_areas[i][1], roots_and_areas[j][1], ring_size):
                raise ContractViolation(f"sub-areas {i} and {j} overlap")
    parts = [span_tree(net, r, a, faults) for r, a in roots_and_areas]
    if len(parts) == 1:
        return parts[0]
    merged = TreeStats(root=parts[0].root, in_area=set(), malicious=faults.malicious)
    for p in parts:
        merged.in_area |= p.in_area
        merged.boundary |= p.boundary
        merged.tie_edges |= p.tie_edges
        merged.areas.extend(p.areas)
        for v, c in p.receive_count.items():
            merged.receive_count[v] = merged.receive_count.get(v, 0) + c
        for v, dpt in p.depth.items():
            if v not in merged.depth or dpt < merged.depth[v]:
                merged.depth[v] = dpt
        for v, par in p.parent.items():
            merged.parent.setdefault(v, par)
    merged.parts = parts
    return merged


# ---------------------------------------------------------------------------
# responses


@dataclass
class CoverageReport:
    responded: Set[int]
    gap: Set[int]
    covered: Fraction
    area_size: Fraction

    @property
    def complete(self) -> bool:
        return not self.gap and self.covered == self.area_size

    @property
    def gap_fraction(self) -> Fraction:
        if self.area_size == 0:
            return Fraction(0)
        return (self.area_size - self.covered) / self.area_size


def _clipped_volume(net: CanNetwork, v: int, box: Box) -> Fraction:
    vol = Fraction(1)
    for a, b, o, e in zip(net.lo[v], net.hi[v], box.origin, box.extent):
        vol *= Fraction(interval_overlap(a, b - a, o, e), SCALE)
    return vol


def collect_responses(stats: TreeStats, net, area: Optional[AreaSpec] = None) -> CoverageReport:
    """Send one acknowledgement per tree member back along parent links.

    Malicious members drop both their own response and everything relayed
    through them.  The root compares what came back against the area.
    """
    if stats.parts:
        reports = [collect_responses(p, net) for p in stats.parts]
        return CoverageReport(
            responded=set().union(*(r.responded for r in reports)),
            gap=set().union(*(r.gap for r in reports)),
            covered=sum((r.covered for r in reports), Fraction(0)),
            area_size=sum((r.area_size for r in reports), Fraction(0)),
        )
    area = area if area is not None else (stats.areas[0] if stats.areas else None)
    bad = stats.malicious
    responded: Set[int] = set()
    for v in stats.receive_count:
        u, ok = v, True
        while True:
            if u in bad:
                ok = False
                break
            if u == stats.root:
                break
            u = stats.parent[u]
        if ok:
            responded.add(v)
    responded &= stats.in_area
    gap = stats.in_area - responded
    if isinstance(net, CanNetwork):
        box = area.box.normalized() if isinstance(area, CanBox) else Box.whole(net.dims)
        covered = sum((_clipped_volume(net, v, box) for v in responded), Fraction(0))
        size = box.volume()
    else:
        covered = Fraction(len(responded))
        size = Fraction(len(stats.in_area))
    return CoverageReport(responded, gap, covered, size)
