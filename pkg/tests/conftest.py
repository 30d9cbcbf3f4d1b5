from typing import List, Tuple

import pytest
from hypothesis import HealthCheck, settings

from dtcsim.can import CanNetwork, build_can
from dtcsim.hashspace import SCALE

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def grid_points(d: int, levels: int) -> List[Tuple[int, ...]]:
    """Join points that carve the space into a uniform grid of 2**levels cells per side.

    Mirrors the split rule (lowest-index longest side); each point sits at the
    lower corner of the upper half so the newcomer takes that half.
    """
    zones = [((0,) * d, (SCALE,) * d)]
    pts = []
    for _ in range(levels * d):
        nxt = []
        for lo, hi in zones:
            ext = [b - a for a, b in zip(lo, hi)]
            k = ext.index(max(ext))
            mid = lo[k] + ext[k] // 2
            p = lo[:k] + (mid,) + lo[k + 1:]
            pts.append(p)
            nxt.append((lo, hi[:k] + (mid,) + hi[k + 1:]))
            nxt.append((p, hi))
        zones = nxt
    return pts


def grid_can(d: int, levels: int, extra=()) -> CanNetwork:
    pts = grid_points(d, levels) + list(extra)
    return build_can(len(pts) + 1, d, points=pts)


def unit(k: int, parts: int = 8) -> int:
    """k / parts of the coordinate range."""
    return SCALE * k // parts


def cell_owner(net: CanNetwork, *coords_in_units, parts: int = 8) -> int:
    return net.owner(tuple(unit(c, parts) for c in coords_in_units))
