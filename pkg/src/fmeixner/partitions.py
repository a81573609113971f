"""Non-crossing partitions into singletons and pairs, and the moment formula.

The moment of order m of a law with Jacobi sequences (alpha, beta) is a sum
over non-crossing partitions of {1..m} into singletons and pairs.  A block
nested under d - 1 pairs has depth d and contributes alpha_d (singleton) or
beta_d (pair).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .jacobi import JacobiParams, MomentTable

__all__ = [
    "NCPartition",
    "MAX_NC12",
    "MAX_NC2",
    "enumerate_nc12",
    "enumerate_nc2",
    "depth_census",
    "depth_profile_counts",
    "moment_combinatorial",
    "moments_combinatorial",
]

MAX_NC12 = 16
MAX_NC2 = 20

Block = tuple[int, ...]


@dataclass(frozen=True)
class NCPartition:
    """A non-crossing partition of {1..m} into singletons and pairs.

    ``blocks`` are sorted by smallest element.  ``depth[i]`` and
    ``nearest_outer[i]`` describe ``blocks[i]``; ``nearest_outer`` holds the
    index of the innermost pair enclosing the block, or None at depth 1.
    """

    m: int
    blocks: tuple[Block, ...]
    depth: tuple[int, ...]
    nearest_outer: tuple[int | None, ...]

    @classmethod
    def from_blocks(cls, m: int, blocks) -> "NCPartition":
        blocks = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))
        seen = sorted(x for b in blocks for x in b)
        if seen != list(range(1, m + 1)):
            raise ValueError(f"blocks do not partition [1..{m}]")
        if any(len(b) not in (1, 2) for b in blocks):
            raise ValueError("blocks must be singletons or pairs")
        pairs = [b for b in blocks if len(b) == 2]
        for p, q in pairs:
            for r, s in pairs:
                if p < r < q < s:
                    raise ValueError(f"pairs {{{p},{q}}} and {{{r},{s}}} cross")
        depth, nearest = _nesting_scan(blocks)
        return cls(m, blocks, depth, nearest)

    @property
    def singletons(self) -> list[Block]:
        return [b for b in self.blocks if len(b) == 1]

    @property
    def pairs(self) -> list[Block]:
        return [b for b in self.blocks if len(b) == 2]

    def __str__(self) -> str:
        body = "".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) or "{}"
        return f"{body} | d={','.join(map(str, self.depth))}"


def _nesting_scan(blocks: tuple[Block, ...]) -> tuple[tuple[int, ...], tuple[int | None, ...]]:
    # depth = 1 + number of pairs strictly enclosing the block; quadratic on purpose
    depth = []
    nearest = []
    for b in blocks:
        lo, hi = b[0], b[-1]
        best = None
        count = 0
        for k, o in enumerate(blocks):
            if len(o) == 2 and o[0] < lo and hi < o[1]:
                count += 1
                if best is None or o[0] > blocks[best][0]:
                    best = k
        depth.append(count + 1)
        nearest.append(best)
    return tuple(depth), tuple(nearest)


def _raw_nc12(lo: int, hi: int) -> Iterator[list[Block]]:
    # smallest element is a singleton, or pairs with j and splits inside/after
    if lo > hi:
        yield []
        return
    for rest in _raw_nc12(lo + 1, hi):
        yield [(lo,)] + rest
    for j in range(lo + 1, hi + 1):
        for inner in _raw_nc12(lo + 1, j - 1):
            for after in _raw_nc12(j + 1, hi):
                yield [(lo, j)] + inner + after


def _raw_nc2(lo: int, hi: int) -> Iterator[list[Block]]:
    if lo > hi:
        yield []
        return
    for j in range(lo + 1, hi + 1, 2):
        for inner in _raw_nc2(lo + 1, j - 1):
            for after in _raw_nc2(j + 1, hi):
                yield [(lo, j)] + inner + after


def _finish(m: int, raw: list[Block]) -> NCPartition:
    blocks = tuple(sorted(raw, key=lambda b: b[0]))
    depth, nearest = _nesting_scan(blocks)
    return NCPartition(m, blocks, depth, nearest)


def enumerate_nc12(m: int) -> Iterator[NCPartition]:
    """Stream every non-crossing singleton/pair partition of {1..m} once."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if m > MAX_NC12:
        raise ValueError(f"m = {m} exceeds the enumeration budget m <= {MAX_NC12}")
    for raw in _raw_nc12(1, m):
        yield _finish(m, raw)


def enumerate_nc2(m: int) -> Iterator[NCPartition]:
    """Stream the non-crossing pair partitions of {1..m}; empty for odd m."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if m > MAX_NC2:
        raise ValueError(f"m = {m} exceeds the enumeration budget m <= {MAX_NC2}")
    if m % 2:
        return
    for raw in _raw_nc2(1, m):
        yield _finish(m, raw)


def depth_census(p: NCPartition) -> tuple[int, int, int, int]:
    """Counts (|S1|, |S2|, |B1|, |B2|): singletons and pairs at depth 1 and deeper."""
    s1 = s2 = b1 = b2 = 0
    for b, d in zip(p.blocks, p.depth):
        if len(b) == 1:
            if d == 1:
                s1 += 1
            else:
                s2 += 1
        elif d == 1:
            b1 += 1
        else:
            b2 += 1
    return s1, s2, b1, b2


@lru_cache(maxsize=None)
def depth_profile_counts(m: int) -> tuple[tuple[tuple[tuple[str, int, int], ...], int], ...]:
    """Multiplicities of depth profiles over all partitions of {1..m}.

    A profile lists ``(kind, depth, count)`` with kind ``"s"`` or ``"p"``.
    Entries keep first-seen enumeration order, which fixes the summation
    order used by :func:`moment_combinatorial`.
    """
    tally: Counter = Counter()
    for part in enumerate_nc12(m):
        prof = Counter()
        for b, d in zip(part.blocks, part.depth):
            prof["s" if len(b) == 1 else "p", d] += 1
        tally[tuple(sorted((k, d, c) for (k, d), c in prof.items()))] += 1
    return tuple(tally.items())


def moment_combinatorial(j: JacobiParams, m: int) -> float:
    """Sum over partitions of prod alpha_{depth} (singletons) * prod beta_{depth} (pairs)."""
    total = 0.0
    for profile, mult in depth_profile_counts(m):
        w = float(mult)
        for kind, d, c in profile:
            a, b = j.jacobi(d)
            w *= (a if kind == "s" else b) ** c
        total += w
    return total


def moments_combinatorial(j: JacobiParams, m_max: int) -> MomentTable:
    return MomentTable([moment_combinatorial(j, m) for m in range(m_max + 1)], "combinatorial")
