"""Content-addressable network over the unit d-torus.

Zones are dyadic boxes that never wrap internally; only adjacency is
torus-aware.  A binary split trie mirrors the join history and answers
point-ownership queries in O(depth).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .hashspace import SCALE, Box, ContractViolation, Rng, TorusPoint, torus_distance_sq


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CanZone:
    lo: Tuple[int, ...]
    hi: Tuple[int, ...]
    owner: int = -1

    @property
    def dims(self) -> int:
        return len(self.lo)

    def center2(self) -> Tuple[int, ...]:
        """Twice the center, so it stays an integer."""
        return tuple(a + b for a, b in zip(self.lo, self.hi))

    def center(self) -> TorusPoint:
        return tuple((a + b) // 2 for a, b in zip(self.lo, self.hi))

    def as_box(self) -> Box:
        return Box(self.lo, tuple(b - a for a, b in zip(self.lo, self.hi)))

    def volume(self) -> Fraction:
        v = Fraction(1)
        for a, b in zip(self.lo, self.hi):
            v *= Fraction(b - a, SCALE)
        return v

    def contains(self, p: Sequence[int]) -> bool:
        return all(a <= x < b for a, x, b in zip(self.lo, p, self.hi))


@dataclass(frozen=True)
class CanNode:
    id: int
    zone: CanZone
    neighbors: FrozenSet[int]


@dataclass(frozen=True)
class FaceDescriptor:
    """Common (d-1)-dimensional border of two zones."""

    dim: int
    coordinate: int
    overlap: Tuple[Tuple[int, int, int], ...]  # (free dim, lo, hi)


def _abuts_hi(a_hi: int, b_lo: int) -> bool:
    """b starts where a ends, across the 1 -> 0 seam too."""
    return a_hi == b_lo or (a_hi == SCALE and b_lo == 0)


def shared_faces(a: CanZone, b: CanZone) -> List[FaceDescriptor]:
    """All faces along which ``a`` and ``b`` abut (two when they wrap around)."""
    d = a.dims
    abut_dim = -1
    for k in range(d):
        if a.lo[k] < b.hi[k] and b.lo[k] < a.hi[k]:
            continue
        if abut_dim != -1:
            return []
        abut_dim = k
    if abut_dim == -1:
        return []
    k = abut_dim
    coords = []
    if _abuts_hi(a.hi[k], b.lo[k]):
        coords.append(a.hi[k] % SCALE)
    if _abuts_hi(b.hi[k], a.lo[k]):
        coords.append(a.lo[k])
    free = tuple(
        (i, max(a.lo[i], b.lo[i]), min(a.hi[i], b.hi[i])) for i in range(d) if i != k
    )
    # interior faces first, seam faces last
    coords.sort(key=lambda c: (c == 0, c))
    return [FaceDescriptor(k, c, free) for c in coords]


def shared_face(a: CanZone, b: CanZone) -> Optional[FaceDescriptor]:
    faces = shared_faces(a, b)
    return faces[0] if faces else None


def abut_dimension(lo_a, hi_a, lo_b, hi_b) -> int:
    """Dimension along which two zones are face-adjacent, or -1."""
    abut = -1
    for k in range(len(lo_a)):
        if lo_a[k] < hi_b[k] and lo_b[k] < hi_a[k]:
            continue
        if abut != -1:
            return -1
        if not (_abuts_hi(hi_a[k], lo_b[k]) or _abuts_hi(hi_b[k], lo_a[k])):
            return -1
        abut = k
    return abut


class CanNetwork:
    """Mutable during construction via :meth:`join`; treat as frozen afterwards."""

    def __init__(self, dims: int):
        if dims < 1:
            raise ContractViolation("CAN needs d >= 1")
        self.dims = dims
        self.lo: List[Tuple[int, ...]] = [(0,) * dims]
        self.hi: List[Tuple[int, ...]] = [(SCALE,) * dims]
        self.nbrs: List[set] = [set()]
        # split trie; a leaf stores the owning node id, internal nodes store -1
        self._t_dim: List[int] = [-1]
        self._t_mid: List[int] = [0]
        self._t_left: List[int] = [-1]
        self._t_right: List[int] = [-1]
        self._t_owner: List[int] = [0]
        self._leaf_of: List[int] = [0]

    def __len__(self) -> int:
        return len(self.lo)

    def __iter__(self):
        return iter(range(len(self.lo)))

    def zone(self, nid: int) -> CanZone:
        return CanZone(self.lo[nid], self.hi[nid], nid)

    def node(self, nid: int) -> CanNode:
        return CanNode(nid, self.zone(nid), frozenset(self.nbrs[nid]))

    def neighbors(self, nid: int) -> List[int]:
        return sorted(self.nbrs[nid])

    def owner(self, p: Sequence[int]) -> int:
        t = 0
        t_dim, t_mid, t_left, t_right = self._t_dim, self._t_mid, self._t_left, self._t_right
        while t_dim[t] >= 0:
            t = t_left[t] if p[t_dim[t]] < t_mid[t] else t_right[t]
        return self._t_owner[t]

    def trie_descend(self, go_left) -> int:
        """Walk the split trie with a caller-supplied ``go_left(dim, mid)``."""
        t = 0
        t_dim, t_mid, t_left, t_right = self._t_dim, self._t_mid, self._t_left, self._t_right
        while t_dim[t] >= 0:
            t = t_left[t] if go_left(t_dim[t], t_mid[t]) else t_right[t]
        return self._t_owner[t]

    def split_dim(self, nid: int) -> int:
        """Lowest-index dimension of maximal extent."""
        lo, hi = self.lo[nid], self.hi[nid]
        best, best_ext = 0, -1
        for k in range(self.dims):
            ext = hi[k] - lo[k]
            if ext > best_ext:
                best, best_ext = k, ext
        return best

    def join(self, p: Sequence[int]) -> int:
        """Split the zone owning ``p``; the newcomer takes the half containing ``p``."""
        z = self.owner(p)
        k = self.split_dim(z)
        lo, hi = self.lo[z], self.hi[z]
        if hi[k] - lo[k] < 2:
            raise ContractViolation("zone too small to split")
        mid = (lo[k] + hi[k]) // 2
        lower = (lo, hi[:k] + (mid,) + hi[k + 1:])
        upper = (lo[:k] + (mid,) + lo[k + 1:], hi)
        new = len(self.lo)
        new_upper = p[k] >= mid
        keep, give = (lower, upper) if new_upper else (upper, lower)

        old_nbrs = self.nbrs[z]
        z_nbrs, n_nbrs = {new}, {z}
        for w in old_nbrs:
            wlo, whi = self.lo[w], self.hi[w]
            self.nbrs[w].discard(z)
            if wlo[k] < hi[k] and lo[k] < whi[k]:
                # w touches z across another dimension; keep it where dim k still overlaps
                adj_lower = wlo[k] < mid
                adj_upper = whi[k] > mid
            else:
                adj_upper = _abuts_hi(hi[k], wlo[k])
                adj_lower = _abuts_hi(whi[k], lo[k])
            for flag, is_upper in ((adj_lower, False), (adj_upper, True)):
                if not flag:
                    continue
                target = new if is_upper == new_upper else z
                (n_nbrs if target == new else z_nbrs).add(w)
                self.nbrs[w].add(target)

        self.lo[z], self.hi[z] = keep
        self.lo.append(give[0])
        self.hi.append(give[1])
        self.nbrs[z] = z_nbrs
        self.nbrs.append(n_nbrs)

        leaf = self._leaf_of[z]
        left = len(self._t_dim)
        right = left + 1
        self._t_dim[leaf], self._t_mid[leaf] = k, mid
        self._t_left[leaf], self._t_right[leaf] = left, right
        self._t_owner[leaf] = -1
        low_owner, high_owner = (z, new) if new_upper else (new, z)
        for owner in (low_owner, high_owner):
            self._t_dim.append(-1)
            self._t_mid.append(0)
            self._t_left.append(-1)
            self._t_right.append(-1)
            self._t_owner.append(owner)
        self._leaf_of[z] = left if low_owner == z else right
        self._leaf_of.append(left if low_owner == new else right)
        return new

    def zones_in(self, box: Box) -> List[int]:
        """Ids of zones sharing positive volume with ``box``."""
        box = box.normalized()
        return [nid for nid in range(len(self.lo)) if zone_meets_box(self.lo[nid], self.hi[nid], box)]

    def total_volume(self) -> Fraction:
        return sum((self.zone(i).volume() for i in range(len(self))), Fraction(0))


def zone_meets_box(lo, hi, box: Box) -> bool:
    for a, b, o, e in zip(lo, hi, box.origin, box.extent):
        if e >= SCALE:
            continue
        end = o + e
        if not ((a < end and o < b) or (a + SCALE < end and o < b + SCALE)):
            return False
    return True


def build_can(n: int, d: int, rng: Optional[Rng] = None, points: Optional[Iterable[Sequence[int]]] = None) -> CanNetwork:
    """Bootstrap a CAN by ``n - 1`` joins at random points (or the given ``points``)."""
    if n < 1:
        raise ContractViolation("build_can needs n >= 1")
    net = CanNetwork(d)
    if points is not None:
        pts = [tuple(p) for p in points]
        if len(pts) != n - 1:
            raise ContractViolation("need exactly n - 1 join points")
        for p in pts:
            net.join(p)
        return net
    if rng is None:
        raise ContractViolation("build_can needs an rng or explicit points")
    for _ in range(n - 1):
        net.join(rng.point(d))
    return net


def _box_dist_sq(lo, hi, p) -> int:
    """Squared torus distance from point p to the closed box [lo, hi]."""
    total = 0
    for a, b, x in zip(lo, hi, p):
        if a <= x <= b:
            continue
        gap = min((a - x) % SCALE, (x - b) % SCALE)
        total += gap * gap
    return total


def greedy_route(net: CanNetwork, src: int, target: Sequence[int]) -> List[int]:
    """Greedy CAN routing toward ``target``.

    Each hop goes to the neighbor whose zone is closest to the target (torus
    metric), then whose center is closest, then the lower id.  Raises
    RoutingError on a revisit.
    """
    path = [src]
    seen = {src}
    cur = src
    while not net.zone(cur).contains(target):
        best = None
        for w in sorted(net.nbrs[cur]):
            key = (_box_dist_sq(net.lo[w], net.hi[w], target), torus_distance_sq(net.zone(w).center(), target), w)
            if best is None or key < best:
                best = key
        if best is None:
            raise RoutingError(f"node {cur} has no neighbors")
        cur = best[2]
        if cur in seen:
            raise RoutingError(f"routing loop at node {cur}: {path}")
        seen.add(cur)
        path.append(cur)
    return path
