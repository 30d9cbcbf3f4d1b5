"""Static Chord ring with globally consistent successors and finger tables."""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .hashspace import DEFAULT_RING_BITS, ContractViolation, Rng


@dataclass(frozen=True)
class ChordNode:
    id: int
    successor: int
    predecessor: int
    fingers: Tuple[int, ...]  # fingers[k] = first node >= id + 2**k

    def distinct_fingers(self) -> List[int]:
        seen = []
        for f in self.fingers:
            if f != self.id and (not seen or seen[-1] != f):
                seen.append(f)
        return seen


class ChordNetwork:
    def __init__(self, ids, ring_bits: int = DEFAULT_RING_BITS):
        ids = sorted(set(ids))
        if not ids:
            raise ContractViolation("a Chord ring needs at least one node")
        self.ring_bits = ring_bits
        self.size = 1 << ring_bits
        self.ids: List[int] = ids
        self.nodes: Dict[int, ChordNode] = {}
        n = len(ids)
        for idx, nid in enumerate(ids):
            fingers = tuple(self.responsible_node((nid + (1 << k)) % self.size) for k in range(ring_bits))
            self.nodes[nid] = ChordNode(
                id=nid,
                successor=ids[(idx + 1) % n],
                predecessor=ids[idx - 1],
                fingers=fingers,
            )

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def responsible_node(self, key: int) -> int:
        """First node id clockwise from ``key`` (inclusive)."""
        i = bisect_left(self.ids, key % self.size)
        return self.ids[i] if i < len(self.ids) else self.ids[0]

    def nodes_in_arc(self, start: int, length: int) -> List[int]:
        """Node ids x with (x - start) mod 2^m < length, in ring order from start."""
        if length >= self.size:
            i = bisect_left(self.ids, start)
            return self.ids[i:] + self.ids[:i]
        end = start + length
        if end <= self.size:
            return self.ids[bisect_left(self.ids, start):bisect_left(self.ids, end)]
        return self.ids[bisect_left(self.ids, start):] + self.ids[:bisect_left(self.ids, end - self.size)]

    def neighbors(self, nid: int) -> List[int]:
        node = self.nodes[nid]
        return sorted({node.predecessor, *node.fingers} - {nid})


def build_chord(n: int, rng: Rng, ring_bits: int = DEFAULT_RING_BITS) -> ChordNetwork:
    """``n`` uniformly random distinct ids, tables built omnisciently."""
    if n < 1:
        raise ContractViolation("build_chord needs n >= 1")
    if n > (1 << ring_bits):
        raise ContractViolation("more nodes than ring positions")
    ids = set()
    while len(ids) < n:
        ids.add(rng.bits(ring_bits))
    return ChordNetwork(ids, ring_bits)


def responsible_node(net: ChordNetwork, key: int) -> int:
    return net.responsible_node(key)
