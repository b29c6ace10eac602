"""Non-flat partitions of the n x r index grid, and Stirling/Bell numbers.

A grid cell ``(row, col)`` has ``1 <= row <= n`` (moment power) and
``1 <= col <= r`` (hop position). A partition is *non-flat* when no block
contains two cells of the same row.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from . import _backend, _fallback

DEFAULT_LIMIT = 16


class LimitExceededError(ValueError):
    """Raised when ``n * r`` exceeds the configured enumeration limit."""


@dataclass(frozen=True)
class Partition:
    """Set partition of the ``n x r`` grid as a 1-based restricted-growth labeling.

    ``labels[(row - 1) * r + (col - 1)]`` is the block id of cell ``(row, col)``.
    """

    n: int
    r: int
    labels: tuple[int, ...]

    @property
    def num_blocks(self) -> int:
        return max(self.labels)

    def rows(self) -> list[tuple[int, ...]]:
        r = self.r
        return [self.labels[i * r:(i + 1) * r] for i in range(self.n)]

    def blocks(self) -> list[list[tuple[int, int]]]:
        """Blocks as lists of ``(row, col)`` cells, ordered by block id."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.num_blocks)]
        for idx, b in enumerate(self.labels):
            out[b - 1].append((idx // self.r + 1, idx % self.r + 1))
        return out


def is_nonflat(n: int, r: int, labels) -> bool:
    """True when no two cells in the same row share a label."""
    return all(len(set(labels[i * r:(i + 1) * r])) == r for i in range(n))


def validate_partition(p: Partition) -> None:
    """Raise ``ValueError`` unless ``p`` satisfies every Partition invariant."""
    if p.n < 1 or p.r < 1 or len(p.labels) != p.n * p.r:
        raise ValueError(f"bad shape for {p!r}")
    seen = 0
    for b in p.labels:
        if b < 1 or b > seen + 1:
            raise ValueError(f"labels are not a restricted-growth string: {p.labels}")
        seen = max(seen, b)
    if set(p.labels) != set(range(1, seen + 1)):
        raise ValueError(f"missing block ids in {p.labels}")
    if not is_nonflat(p.n, p.r, p.labels):
        raise ValueError(f"partition is flat: {p.labels}")


def _check_limit(n: int, r: int, limit: int) -> None:
    if n < 1 or r < 1:
        raise ValueError(f"need n >= 1 and r >= 1, got n={n}, r={r}")
    if n * r > limit:
        raise LimitExceededError(
            f"n*r = {n * r} exceeds the partition limit {limit}; "
            "raise the limit explicitly to proceed"
        )


def iter_nonflat_labels(n: int, r: int, limit: int = DEFAULT_LIMIT,
                        prefix: tuple[int, ...] = ()) -> Iterator[tuple[int, ...]]:
    """0-based label tuples of the non-flat partitions, lexicographic order.

    ``prefix`` (0-based labels of the first cells) restricts the stream to one
    disjoint slice, for splitting work across workers.
    """
    _check_limit(n, r, limit)
    if prefix:
        return _fallback.nonflat_labels(n, r, tuple(prefix))
    return _backend.ACTIVE.iter_nonflat_labels(n, r)


def enumerate_nonflat(n: int, r: int, limit: int = DEFAULT_LIMIT,
                      prefix: tuple[int, ...] = ()) -> Iterator[Partition]:
    """Lazily yield every non-flat partition of the ``n x r`` grid exactly once."""
    for labels in iter_nonflat_labels(n, r, limit, prefix):
        yield Partition(n, r, tuple(b + 1 for b in labels))


def split_prefixes(n: int, r: int, cells: int) -> list[tuple[int, ...]]:
    """Valid 0-based label prefixes of length ``cells``, in stream order.

    Completing each prefix (``enumerate_nonflat(..., prefix=p)``) and
    concatenating reproduces the full stream.
    """
    if not 0 <= cells <= n * r:
        raise ValueError("cells out of range")
    # A prefix is a non-flat labeling of a truncated grid whose last row may be
    # partial; enumerate the padded grid and deduplicate.
    rows = -(-cells // r) if cells else 0
    if rows == 0:
        return [()]
    seen: dict[tuple[int, ...], None] = {}
    for labels in _fallback.nonflat_labels(rows, r):
        seen.setdefault(labels[:cells], None)
    return list(seen)


def nonflat_count(n: int, r: int, limit: int = DEFAULT_LIMIT) -> int:
    _check_limit(n, r, limit)
    return int(_backend.ACTIVE.nonflat_count(n, r))


def zeta(p: Partition, row: int, col: int) -> int:
    """Block id of grid cell ``(row, col)``."""
    if not (1 <= row <= p.n and 1 <= col <= p.r):
        raise IndexError(f"cell ({row}, {col}) outside the {p.n}x{p.r} grid")
    return p.labels[(row - 1) * p.r + (col - 1)]


def singletons(n: int, r: int) -> Partition:
    return Partition(n, r, tuple(range(1, n * r + 1)))


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k)."""
    if k < 0 or k > n:
        return 0
    if n == k:
        return 1
    if k == 0:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def stirling2_table(nmax: int) -> list[list[int]]:
    """Rows ``0..nmax`` of S(n, k), each padded to length ``nmax + 1``."""
    table = [[0] * (nmax + 1) for _ in range(nmax + 1)]
    table[0][0] = 1
    for n in range(1, nmax + 1):
        for k in range(1, n + 1):
            table[n][k] = k * table[n - 1][k] + table[n - 1][k - 1]
    return table


def bell(n: int) -> int:
    return sum(stirling2(n, k) for k in range(n + 1))

