"""Order-preserving region-quadtree coding of object names.

A name is read as a sequence of splits.  Each split picks one of
``2**coded_dims`` children of the current cell, halving every coded
dimension.  Keys sharing a prefix therefore land in one predictable cell,
and a search over that prefix becomes a tree span over that cell.

Three split factors are supported:

* ``1``: one character per split; the charset is cut into
  ``2**coded_dims`` contiguous groups.
* ``3``: each character is written as ``3 * coded_dims`` bits (its index
  in the charset, big-endian) and every split consumes ``coded_dims`` bits.
* ``0.5``: two characters per split.  With the characters laid out along
  the x and y axes, a pair picks the quadrant of that grid it falls in.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple

from .dtc import Arc
from .hashspace import COORD_BITS, SCALE, Box, ContractViolation, TorusPoint

DEFAULT_CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
SPLIT_FACTORS = (Fraction(1, 2), Fraction(1), Fraction(3))


class EncodingError(ValueError):
    """A key or prefix contains a symbol outside the codec's charset."""


def parse_split_factor(value) -> Fraction:
    f = Fraction(str(value)) if not isinstance(value, Fraction) else value
    if f not in SPLIT_FACTORS:
        raise ContractViolation(f"split factor must be one of 0.5, 1, 3; got {value}")
    return f


@dataclass(frozen=True)
class PrefixCodec:
    charset: str = DEFAULT_CHARSET
    split_factor: Fraction = Fraction(1)
    coded_dims: int = 2
    max_depth: int = 32

    def __post_init__(self) -> None:
        object.__setattr__(self, "split_factor", parse_split_factor(self.split_factor))
        if len(self.charset) < 4 or len(set(self.charset)) != len(self.charset):
            raise ContractViolation("charset needs at least 4 distinct symbols")
        if self.charset != self.charset.upper():
            raise ContractViolation("charset symbols are case-folded to upper case")
        if self.coded_dims < 1:
            raise ContractViolation("coded_dims must be at least 1")
        if self.max_depth < 0 or self.max_depth * self.coded_dims > COORD_BITS:
            raise ContractViolation("max_depth * coded_dims exceeds coordinate precision")
        if self.split_factor == 3 and len(self.charset) > 1 << (3 * self.coded_dims):
            raise ContractViolation("charset too large for split factor 3")
        if self.split_factor == Fraction(1, 2) and self.coded_dims != 2:
            raise ContractViolation("split factor 0.5 is defined on a 2-D character grid")

    @property
    def fanout(self) -> int:
        return 1 << self.coded_dims

    def indices(self, text: str) -> List[int]:
        """Charset positions of the case-folded symbols of ``text``."""
        out = []
        for ch in text.upper():
            i = self.charset.find(ch)
            if i < 0:
                raise EncodingError(f"symbol {ch!r} is not in the charset")
            out.append(i)
        return out

    def splits(self, text: str) -> List[int]:
        """Child index chosen at each split, uncapped."""
        idx = self.indices(text)
        m, g = len(self.charset), self.fanout
        if self.split_factor == 1:
            return [i * g // m for i in idx]
        if self.split_factor == 3:
            cd = self.coded_dims
            out = []
            for i in idx:
                for shift in (2 * cd, cd, 0):
                    out.append((i >> shift) & (g - 1))
            return out
        # 0.5: first character of the pair picks the x half, second the y half
        return [(idx[j] * 2 // m) << 1 | (idx[j + 1] * 2 // m) for j in range(0, len(idx) - 1, 2)]

    def capped_splits(self, text: str, warn: bool = False) -> List[int]:
        s = self.splits(text)
        if len(s) > self.max_depth:
            if warn:
                warnings.warn(f"prefix needs {len(s)} splits; capped at {self.max_depth}", stacklevel=3)
            s = s[: self.max_depth]
        return s


@dataclass(frozen=True)
class PrefixArea:
    box: Box
    depth: int

    @property
    def coded_dims(self) -> int:
        return self.box.dims

    @property
    def share(self) -> Fraction:
        return Fraction(1, 1 << (self.coded_dims * self.depth))

    def in_dims(self, dims: int) -> Box:
        """The same cell in a space of ``dims`` dimensions (extra dims unconstrained)."""
        if dims < self.coded_dims:
            raise ContractViolation("space has fewer dimensions than the codec codes")
        extra = dims - self.coded_dims
        return Box(self.box.origin + (0,) * extra, self.box.extent + (SCALE,) * extra)


def _cell(codec: PrefixCodec, path: Sequence[int]) -> PrefixArea:
    cd = codec.coded_dims
    origin = [0] * cd
    for level, child in enumerate(path):
        step = SCALE >> (level + 1)
        for j in range(cd):
            if (child >> (cd - 1 - j)) & 1:
                origin[j] += step
    extent = SCALE >> len(path)
    return PrefixArea(Box(tuple(origin), (extent,) * cd), len(path))


def suffix_hash(key: str, words: int) -> List[int]:
    """``words`` uniform 64-bit values from BLAKE2b of the case-folded key."""
    digest = hashlib.blake2b(key.upper().encode("utf-8"), digest_size=8 * words if words <= 8 else 64,
                             person=b"dtcsim-suffix").digest()
    while len(digest) < 8 * words:
        digest += hashlib.blake2b(digest, digest_size=64).digest()
    return [int.from_bytes(digest[8 * i: 8 * i + 8], "big") for i in range(words)]


def key_to_point(codec: PrefixCodec, key: str, dims: int = None) -> TorusPoint:
    """Place ``key``: the quadtree fixes the top bits, the suffix hash fills the rest."""
    if not key:
        raise ContractViolation("key must be non-empty")
    dims = codec.coded_dims if dims is None else dims
    if dims < codec.coded_dims:
        raise ContractViolation("space has fewer dimensions than the codec codes")
    cell = _cell(codec, codec.capped_splits(key))
    noise = suffix_hash(key, dims)
    width = cell.box.extent[0]
    coded = tuple(o + noise[j] % width for j, o in enumerate(cell.box.origin))
    return coded + tuple(noise[codec.coded_dims:])


def prefix_to_area(codec: PrefixCodec, prefix: str) -> PrefixArea:
    return _cell(codec, codec.capped_splits(prefix, warn=True))


def expected_nodes_in_area(n: int, area: PrefixArea) -> int:
    """Expected node count in ``area`` for ``n`` uniform nodes.

    The count is carried down the tree one split at a time, rounding half to
    even at each level: a cell is expected to hold a quarter of what its
    parent holds, as a whole number of nodes.
    """
    count = n
    for _ in range(area.depth):
        count = round(Fraction(count, 1 << area.coded_dims))
    return count


def _range_cover(low: str, high: str, charset: str) -> List[str]:
    """Prefixes whose extensions (and themselves) cover every string in [low, high]."""
    c = 0
    while c < min(len(low), len(high)) and low[c] == high[c]:
        c += 1
    if c == len(low):
        return [low]
    common = low[:c]
    a, b = charset.index(low[c]), charset.index(high[c])
    out = [common + x for x in charset[a + 1: b]]
    out.append(high[: c + 1])
    # strings >= low sharing low's next symbol: low's own tail, then larger siblings per level
    for i in range(c + 1, len(low)):
        out.extend(low[:i] + x for x in charset[charset.index(low[i]) + 1:])
    out.append(low)
    return out


def range_to_area(codec: PrefixCodec, low: str, high: str) -> PrefixArea:
    """Smallest quadtree cell holding every key ``k`` with ``low <= k <= high``.

    Order is lexicographic by charset position.  The cell may hold keys
    outside the range; callers filter matches.
    """
    lo_idx, hi_idx = codec.indices(low), codec.indices(high)
    if lo_idx > hi_idx:
        raise ContractViolation("range is inverted")
    # work in charset positions so ordering is by the codec's symbol order
    alphabet = "".join(chr(0x100 + i) for i in range(len(codec.charset)))
    enc = lambda idx: "".join(chr(0x100 + i) for i in idx)
    dec = lambda s: "".join(codec.charset[ord(ch) - 0x100] for ch in s)
    paths = [codec.capped_splits(dec(p)) for p in _range_cover(enc(lo_idx), enc(hi_idx), alphabet)]
    common: List[int] = paths[0]
    for p in paths[1:]:
        k = 0
        while k < min(len(common), len(p)) and common[k] == p[k]:
            k += 1
        common = common[:k]
    return _cell(codec, common)


def zorder_ring_id(codec: PrefixCodec, p: Sequence[int], ring_bits: int = 64) -> int:
    """Interleave the coded coordinates of ``p`` (dim 0 most significant) into a ring id."""
    cd = codec.coded_dims
    bits = 0
    produced = 0
    for level in range(COORD_BITS):
        for j in range(cd):
            bits = bits << 1 | (p[j] >> (COORD_BITS - 1 - level)) & 1
            produced += 1
            if produced == ring_bits:
                return bits
    return bits << (ring_bits - produced)


def key_to_ring_id(codec: PrefixCodec, key: str, ring_bits: int = 64) -> int:
    return zorder_ring_id(codec, key_to_point(codec, key), ring_bits)


def area_to_arc(area: PrefixArea, ring_bits: int = 64) -> Arc:
    """The contiguous Z-order arc covering a quadtree cell on a Chord ring."""
    used = area.coded_dims * area.depth
    if used > ring_bits:
        raise ContractViolation("cell is finer than the ring resolution")
    prefix = 0
    for level in range(area.depth):
        for j in range(area.coded_dims):
            prefix = prefix << 1 | (area.box.origin[j] >> (COORD_BITS - 1 - level)) & 1
    length = 1 << (ring_bits - used)
    return Arc(prefix * length, length)


def matches(codec: PrefixCodec, keys: Iterable[str], prefix: str) -> List[str]:
    """Linear-scan reference: keys starting with ``prefix`` (case-folded)."""
    p = prefix.upper()
    return [k for k in keys if k.upper().startswith(p)]
