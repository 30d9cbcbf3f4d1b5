"""Identifier arithmetic shared by the Chord and CAN overlays.

Coordinates are fixed-precision binary fractions: an ``int`` numerator over
``SCALE = 2**64``.  A :data:`TorusPoint` is a tuple of such numerators, one per
dimension, each in ``[0, SCALE)``.  Ring identifiers are plain ints modulo
``2**ring_bits``.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

COORD_BITS = 64
SCALE = 1 << COORD_BITS
HALF = SCALE >> 1
DEFAULT_RING_BITS = 64

TorusPoint = Tuple[int, ...]


class ContractViolation(ValueError):
    """A precondition of a public operation was not met."""


def to_fixed(value: Union[int, float, Fraction, str]) -> int:
    """Convert a fraction in [0, 1] to a fixed-precision numerator.

    Floats are converted exactly and then truncated to 64 fractional bits.
    """
    frac = Fraction(value)
    if frac < 0 or frac > 1:
        raise ContractViolation(f"fraction {value!r} outside [0, 1]")
    return (frac.numerator * SCALE) // frac.denominator


def to_fraction(numerator: int) -> Fraction:
    return Fraction(numerator, SCALE)


def point(*coords: Union[int, float, Fraction, str]) -> TorusPoint:
    """Build a TorusPoint from fractions; ``point(0.5, 0.25)``."""
    out = tuple(to_fixed(c) for c in coords)
    if any(c >= SCALE for c in out):
        raise ContractViolation("torus coordinates must lie in [0, 1)")
    return out


def _check_dims(a: Sequence[int], b: Sequence[int]) -> None:
    if len(a) != len(b):
        raise ContractViolation(f"dimension mismatch: {len(a)} != {len(b)}")


def torus_displacement(src: Sequence[int], dst: Sequence[int]) -> Tuple[int, ...]:
    """Shortest wraparound displacement from ``src`` to ``dst``.

    Each component lies in ``(-HALF, HALF]``; an exact half-turn is positive.
    """
    _check_dims(src, dst)
    out = []
    for s, t in zip(src, dst):
        delta = (t - s) % SCALE
        if delta > HALF:
            delta -= SCALE
        out.append(delta)
    return tuple(out)


def torus_distance_sq(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(x * x for x in torus_displacement(a, b))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box on the unit torus: ``[origin_i, origin_i + extent_i) mod 1``."""

    origin: TorusPoint
    extent: Tuple[int, ...]

    def __post_init__(self) -> None:
        _check_dims(self.origin, self.extent)
        for o, e in zip(self.origin, self.extent):
            if not 0 <= o < SCALE:
                raise ContractViolation(f"box origin {o} outside [0, 1)")
            if not 0 < e <= SCALE:
                raise ContractViolation(f"box extent {e} outside (0, 1]")

    @classmethod
    def whole(cls, dims: int) -> "Box":
        return cls((0,) * dims, (SCALE,) * dims)

    @classmethod
    def of(cls, origin: Sequence, extent: Sequence) -> "Box":
        """Build a box from fractions, e.g. ``Box.of((0.9, 0.9), (0.2, 0.2))``."""
        return cls(tuple(to_fixed(o) % SCALE for o in origin), tuple(to_fixed(e) for e in extent))

    @property
    def dims(self) -> int:
        return len(self.origin)

    def volume(self) -> Fraction:
        vol = Fraction(1)
        for e in self.extent:
            vol *= Fraction(e, SCALE)
        return vol

    def normalized(self) -> "Box":
        """Full-extent dimensions get origin 0, so no zone is ever cut by a seam."""
        origin = tuple(0 if e == SCALE else o for o, e in zip(self.origin, self.extent))
        return Box(origin, self.extent)


def box_contains(box: Box, p: Sequence[int]) -> bool:
    _check_dims(box.origin, p)
    for o, e, x in zip(box.origin, box.extent, p):
        if (x - o) % SCALE >= e:
            return False
    return True


def interval_overlap(lo_a: int, len_a: int, lo_b: int, len_b: int) -> int:
    """Length of the overlap of two wraparound intervals on the unit circle."""
    if len_a >= SCALE:
        return len_b
    if len_b >= SCALE:
        return len_a
    total = 0
    # unroll b against the two images of a that can reach it
    for shift in (-SCALE, 0, SCALE):
        a0 = lo_a + shift
        lo = max(a0, lo_b)
        hi = min(a0 + len_a, lo_b + len_b)
        if hi > lo:
            total += hi - lo
    return total


def boxes_overlap(a: Box, b: Box) -> bool:
    """True iff the two boxes share positive volume."""
    _check_dims(a.origin, b.origin)
    return all(
        interval_overlap(oa, ea, ob, eb) > 0
        for oa, ea, ob, eb in zip(a.origin, a.extent, b.origin, b.extent)
    )


def in_arc(start: int, length: int, x: int, ring_bits: int = DEFAULT_RING_BITS) -> bool:
    size = 1 << ring_bits
    if length > size:
        raise ContractViolation("arc longer than the ring")
    return (x - start) % size < length


def ring_distance(a: int, b: int, ring_bits: int = DEFAULT_RING_BITS) -> int:
    """Clockwise distance from ``a`` to ``b``."""
    return (b - a) % (1 << ring_bits)


class Rng:
    """Seeded random stream built only on ``getrandbits``.

    MT19937 seeded from an int produces the same bit stream on every platform,
    and everything below is derived from raw bits, so results do not depend on
    the Python version's sampling helpers.
    """

    def __init__(self, seed: int):
        self.seed = seed & ((1 << 64) - 1)
        self._mt = random.Random(self.seed)

    def bits(self, k: int) -> int:
        return self._mt.getrandbits(k) if k > 0 else 0

    def below(self, n: int) -> int:
        """Uniform int in ``[0, n)`` by rejection sampling."""
        if n <= 0:
            raise ContractViolation("below() needs a positive bound")
        k = n.bit_length()
        while True:
            r = self._mt.getrandbits(k)
            if r < n:
                return r

    def choice(self, seq: Sequence):
        return seq[self.below(len(seq))]

    def sample(self, seq: Sequence, k: int) -> list:
        """``k`` distinct items by a partial Fisher-Yates shuffle."""
        pool = list(seq)
        if k > len(pool):
            raise ContractViolation("sample larger than population")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def fraction(self) -> int:
        """Uniform fixed-precision coordinate in [0, 1)."""
        return self._mt.getrandbits(COORD_BITS)

    def point(self, dims: int) -> TorusPoint:
        return tuple(self._mt.getrandbits(COORD_BITS) for _ in range(dims))

    def spawn(self, label: str) -> "Rng":
        return Rng(derive_seed(self.seed, label))


def derive_seed(master: int, *labels: object) -> int:
    """Stable 64-bit child seed for ``(master, labels...)``."""
    text = "/".join([str(master & ((1 << 64) - 1))] + [str(x) for x in labels])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")
