"""Comparison dissemination schemes: CAN application-level multicast and flooding."""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Set, Tuple

from .can import CanNetwork, _abuts_hi
from .chord import ChordNetwork
from .dtc import NO_FAULTS, FaultModel, TreeStats
from .hashspace import HALF, SCALE, ContractViolation


class SeenCache:
    """Per-node record of message ids already handled."""

    def __init__(self):
        self._seen: Dict[int, Set[object]] = {}

    def add(self, node: int, msg_id: object) -> bool:
        """Record ``msg_id`` at ``node``; False if it was already there."""
        bucket = self._seen.setdefault(node, set())
        if msg_id in bucket:
            return False
        bucket.add(msg_id)
        return True

    def __contains__(self, item: Tuple[int, object]) -> bool:
        node, msg_id = item
        return msg_id in self._seen.get(node, ())


Forward = Callable[[int, int, object], List[Tuple[int, object]]]


def _cycle_flood(root: int, in_area: Set[int], forward: Forward, faults: FaultModel, msg_id: object = 0) -> TreeStats:
    """Cycle-synchronous dissemination with duplicate suppression by SeenCache.

    Every delivery is counted; only the first delivery at a node is acted
    upon.  Deliveries within a cycle are handled in the order they were sent.
    """
    if root in faults.malicious and not faults.root_may_be_malicious:
        raise ContractViolation("root is marked malicious but the fault model excludes it")
    stats = TreeStats(root=root, in_area=set(in_area), malicious=faults.malicious)
    cache = SeenCache()
    cache.add(root, msg_id)
    stats.receive_count[root] = 1
    stats.depth[root] = 0
    pending = [] if root in faults.malicious else forward(root, -1, None)
    pending = [(root, w, tag) for w, tag in pending]
    cycle = 0
    while pending:
        cycle += 1
        nxt = []
        for src, dst, tag in pending:
            stats.receive_count[dst] = stats.receive_count.get(dst, 0) + 1
            if not cache.add(dst, msg_id):
                continue
            stats.parent[dst] = src
            stats.depth[dst] = cycle
            if dst in faults.malicious:
                continue
            nxt.extend((dst, w, t) for w, t in forward(dst, src, tag))
        pending = nxt
    return stats


def _center_offset(net: CanNetwork, w: int, k: int, src_coord: int) -> int:
    """Signed shortest displacement, in dimension k, from the source to w's center."""
    c = (net.lo[w][k] + net.hi[w][k]) // 2
    delta = (c - src_coord) % SCALE
    return delta - SCALE if delta > HALF else delta


def alm_broadcast(net: CanNetwork, root: int, faults: FaultModel = NO_FAULTS) -> TreeStats:
    """Directed flooding over CAN.

    The source sends to all neighbors.  A copy that arrives along dimension
    ``i`` lets the receiver forward along lower dimensions (either side) and
    along ``i`` in the same direction of travel.  A hop along dimension
    ``k`` only goes out if the neighbor's center still lies in the same half
    of the torus, seen from the source, as the direction of travel; an
    exact half-turn counts as positive.

    The SeenCache holds the (dimension, direction) pairs a node has already
    acted on.  A repeat copy is counted and forwarded only for the pairs it
    adds.  On uneven zones the first copy may arrive along a low dimension
    while a later one carries the higher dimensions the node needs to pass
    on, so dropping repeats outright would strand parts of the space.
    """
    if not isinstance(net, CanNetwork):
        raise ContractViolation("ALM runs on CAN only")
    d = net.dims
    src = tuple((a + b) // 2 for a, b in zip(net.lo[root], net.hi[root]))
    lo, hi = net.lo, net.hi
    everything = [(k, s) for k in range(d) for s in (1, -1)]

    def scope(tag) -> List[Tuple[int, int]]:
        if tag is None:
            return everything
        i, s = tag
        return [(k, t) for k in range(i) for t in (1, -1)] + [(i, s)]

    def hop(v: int, w: int) -> Optional[Tuple[int, int]]:
        """(dimension, direction) of the hop v -> w, or None if the half-way rule stops it."""
        for k in range(d):
            if lo[v][k] < hi[w][k] and lo[w][k] < hi[v][k]:
                continue
            direction = 1 if _center_offset(net, w, k, src[k]) > 0 else -1
            if direction > 0 and _abuts_hi(hi[v][k], lo[w][k]):
                return k, 1
            if direction < 0 and _abuts_hi(hi[w][k], lo[v][k]):
                return k, -1
            return None
        raise AssertionError("neighbors must abut in one dimension")

    if root in faults.malicious and not faults.root_may_be_malicious:
        raise ContractViolation("root is marked malicious but the fault model excludes it")
    stats = TreeStats(root=root, in_area=set(net), malicious=faults.malicious)
    cache = SeenCache()
    stats.receive_count[root] = 1
    stats.depth[root] = 0

    def sends(v: int, sender: int, tag) -> List[Tuple[int, int, Tuple[int, int]]]:
        granted = {r for r in scope(tag) if cache.add(v, r)}
        if not granted or v in faults.malicious:
            return []
        out = []
        for w in sorted(net.nbrs[v]):
            if w == sender:
                continue
            h = hop(v, w)
            if h is not None and h in granted:
                out.append((v, w, h))
        return out

    pending = sends(root, -1, None)
    cycle = 0
    while pending:
        cycle += 1
        nxt = []
        for v, w, tag in pending:
            stats.receive_count[w] = stats.receive_count.get(w, 0) + 1
            if w not in stats.depth:
                stats.parent[w] = v
                stats.depth[w] = cycle
            nxt.extend(sends(w, v, tag))
        pending = nxt
    return stats


def simple_flood(net, root: int, faults: FaultModel = NO_FAULTS) -> TreeStats:
    """Forward to every neighbor but the sender, once per node."""
    if isinstance(net, CanNetwork):
        nbrs = lambda v: sorted(net.nbrs[v])
    elif isinstance(net, ChordNetwork):
        nbrs = net.neighbors
    else:
        raise TypeError(f"unsupported network {type(net).__name__}")

    def forward(v: int, sender: int, tag) -> List[Tuple[int, object]]:
        return [(w, None) for w in nbrs(v) if w != sender]

    return _cycle_flood(root, set(net), forward, faults)
