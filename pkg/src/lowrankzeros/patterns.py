"""Zero-pattern combinatorics.

A zero pattern is a set of matrix positions forced to vanish.  This module
enumerates the minimal rectangular covers of a pattern (the row/column sets
whose union of full lines contains it), evaluates the closed-form count of
rank-one critical points attached to the covers, and canonicalizes patterns
under row/column permutations (plus transposition for square shapes).

Indices are 0-based everywhere inside the library.  The text and JSON
serialization formats are 1-based.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb

import numpy as np


class PatternError(ValueError):
    """Malformed zero pattern or out-of-contract argument."""


class OracleTooLargeError(PatternError):
    """Exhaustive oracle requested on a shape it cannot enumerate."""


@dataclass(frozen=True)
class ZeroPattern:
    """A set of forced-zero positions inside an m x n matrix.

    Parameters
    ----------
    m, n : int
        Matrix shape, both positive.
    entries : tuple of (int, int)
        0-based (row, col) pairs, duplicate-free.  Stored sorted.
    """

    m: int
    n: int
    entries: tuple

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise PatternError(f"invalid shape ({self.m}, {self.n})")
        seen = set()
        for ij in self.entries:
            i, j = ij
            if not (0 <= i < self.m and 0 <= j < self.n):
                raise PatternError(f"entry {ij} out of bounds for {self.m}x{self.n}")
            if ij in seen:
                raise PatternError(f"duplicate entry {ij}")
            seen.add(ij)
        object.__setattr__(self, "entries", tuple(sorted(seen)))

    @classmethod
    def make(cls, m, n, pairs):
        return cls(m, n, tuple((int(i), int(j)) for i, j in pairs))

    @classmethod
    def empty(cls, m, n):
        return cls(m, n, ())

    @property
    def size(self):
        return len(self.entries)

    def entry_set(self):
        return frozenset(self.entries)

    def transpose(self):
        return ZeroPattern.make(self.n, self.m, [(j, i) for i, j in self.entries])

    def complement(self):
        """All positions not in the pattern."""
        inside = set(self.entries)
        return [(i, j) for i in range(self.m) for j in range(self.n)
                if (i, j) not in inside]

    # -- serialization (1-based external formats) --

    @classmethod
    def from_text(cls, text):
        """Parse the text format ``m n; i1 j1; i2 j2; ...`` (1-based)."""
        chunks = [c.strip() for c in text.strip().split(";")]
        if not chunks or not chunks[0]:
            raise PatternError("empty pattern text, expected at least 'm n'")
        try:
            m, n = (int(t) for t in chunks[0].split())
        except ValueError as exc:
            raise PatternError(f"bad shape field {chunks[0]!r}") from exc
        pairs = []
        for c in chunks[1:]:
            if not c:
                continue
            parts = c.split()
            if len(parts) != 2:
                raise PatternError(f"bad index pair {c!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise PatternError(f"bad index pair {c!r}") from exc
            pairs.append((i - 1, j - 1))
        return cls.make(m, n, pairs)

    def to_text(self):
        head = f"{self.m} {self.n}"
        tail = "; ".join(f"{i + 1} {j + 1}" for i, j in self.entries)
        return head if not tail else f"{head}; {tail}"

    @classmethod
    def from_json_dict(cls, obj):
        """Parse ``{"m": 3, "n": 3, "zeros": [[1, 1], [1, 2]]}`` (1-based)."""
        try:
            m, n = int(obj["m"]), int(obj["n"])
            pairs = [(int(i) - 1, int(j) - 1) for i, j in obj["zeros"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise PatternError(f"bad pattern JSON: {exc}") from exc
        return cls.make(m, n, pairs)

    def to_json_dict(self):
        return {"m": self.m, "n": self.n,
                "zeros": [[i + 1, j + 1] for i, j in self.entries]}

    def to_json(self):
        return json.dumps(self.to_json_dict())


@dataclass(frozen=True)
class MinimalCover:
    """A rectangular cover: full rows ``rows`` and full columns ``cols``.

    Interpreted as the pattern (rows x [n]) union ([m] x cols).
    """

    rows: frozenset
    cols: frozenset

    @classmethod
    def make(cls, rows, cols):
        return cls(frozenset(int(i) for i in rows), frozenset(int(j) for j in cols))

    def pattern_entries(self, m, n):
        """The rectangular pattern this cover carves out, as a frozenset."""
        ents = set()
        for i in self.rows:
            ents.update((i, j) for j in range(n))
        for j in self.cols:
            ents.update((i, j) for i in range(m))
        return frozenset(ents)

    def to_json_dict(self):
        return {"rows": sorted(i + 1 for i in self.rows),
                "cols": sorted(j + 1 for j in self.cols)}


class BipartiteGraph:
    """Bipartite graph of a zero pattern: left = rows, right = columns,
    one edge per forced-zero entry."""

    def __init__(self, pattern: ZeroPattern):
        self.left_size = pattern.m
        self.right_size = pattern.n
        adjacency = {i: set() for i in range(pattern.m)}
        for i, j in pattern.entries:
            adjacency[i].add(j)
        self.adjacency = {i: frozenset(js) for i, js in adjacency.items()}

    def neighbors(self, i):
        return self.adjacency[i]


def mask_matrix(pattern: ZeroPattern) -> np.ndarray:
    """0/1 indicator matrix of the pattern, shape (m, n), dtype uint8."""
    bits = np.zeros((pattern.m, pattern.n), dtype=np.uint8)
    for i, j in pattern.entries:
        bits[i, j] = 1
    return bits


# ---------------------------------------------------------------------------
# minimal covers
# ---------------------------------------------------------------------------

def _cover_leq(eA, covA, eB, covB):
    """Partial order used for minimality: compare carved-out patterns by
    inclusion; break ties between equal patterns by componentwise inclusion
    of the (rows, cols) representation."""
    if eA < eB:
        return True
    if eA == eB:
        return covA.rows <= covB.rows and covA.cols <= covB.cols
    return False


def _filter_minimal(covers, m, n):
    items = [(c.pattern_entries(m, n), c) for c in set(covers)]
    keep = []
    for ea, ca in items:
        dominated = False
        for eb, cb in items:
            if cb is ca:
                continue
            if _cover_leq(eb, cb, ea, ca) and not _cover_leq(ea, ca, eb, cb):
                dominated = True
                break
        if not dominated:
            keep.append(ca)
    return set(keep)


def minimal_covers(pattern: ZeroPattern) -> set:
    """All minimal covers of a zero pattern.

    Recursive branch-and-reduce on the bipartite graph of the pattern: the
    first row with remaining zeros is either put into the cover, or all its
    neighbor columns are.  Subproblems are memoized on the canonical
    serialized subgraph.  The recursion can emit covers that are only
    locally minimal, so the output is post-filtered by pairwise inclusion.

    Returns a set of :class:`MinimalCover`.  The empty pattern yields the
    single empty cover.
    """
    graph = BipartiteGraph(pattern)
    memo = {}

    def recurse(adj):
        # adj: tuple of (row, frozenset-of-cols) with nonempty neighbor sets
        if not adj:
            return frozenset([(frozenset(), frozenset())])
        key = adj
        hit = memo.get(key)
        if hit is not None:
            return hit
        u, nbrs = adj[0]
        rest = adj[1:]
        out = set()
        # branch 1: u joins the cover
        for rows, cols in recurse(rest):
            out.add((rows | {u}, cols))
        # branch 2: all neighbors of u join the cover
        reduced = tuple((v, vn - nbrs) for v, vn in rest if vn - nbrs)
        for rows, cols in recurse(reduced):
            out.add((rows, cols | nbrs))
        out = frozenset(out)
        memo[key] = out
        return out

    adj0 = tuple((i, graph.neighbors(i)) for i in range(pattern.m)
                 if graph.neighbors(i))
    raw = recurse(adj0)
    covers = {MinimalCover(rows, cols) for rows, cols in raw}
    return _filter_minimal(covers, pattern.m, pattern.n)


def covers_bruteforce(pattern: ZeroPattern) -> set:
    """Exhaustive oracle for :func:`minimal_covers`.

    Enumerates every (row-subset, column-subset) pair and filters covers,
    then minimal covers.  Only valid on small shapes.
    """
    m, n = pattern.m, pattern.n
    if m * n > 30 or m + n > 20:
        raise OracleTooLargeError(f"brute force oracle too large for {m}x{n}")
    target = pattern.entry_set()
    all_rows = [frozenset(c) for k in range(m + 1)
                for c in itertools.combinations(range(m), k)]
    all_cols = [frozenset(c) for k in range(n + 1)
                for c in itertools.combinations(range(n), k)]
    covers = []
    for rows in all_rows:
        for cols in all_cols:
            cov = MinimalCover(rows, cols)
            if target <= cov.pattern_entries(m, n):
                covers.append(cov)
    return _filter_minimal(covers, m, n)


# ---------------------------------------------------------------------------
# rank-one Euclidean distance degrees
# ---------------------------------------------------------------------------

def rank1_ed_degree(pattern: ZeroPattern) -> int:
    """Number of complex rank-one critical points for a generic data matrix:
    the sum of min(m - |rows|, n - |cols|) over all minimal covers."""
    total = 0
    for cov in minimal_covers(pattern):
        total += min(pattern.m - len(cov.rows), pattern.n - len(cov.cols))
    return total


def rank1_ed_degree_closed_form(kind, s, m, n):
    """Closed-form rank-one count for row, column, or diagonal patterns.

    ``kind`` is one of ``"row"``, ``"column"``, ``"diagonal"``; ``s`` is the
    number of zeros.  Row patterns put the s zeros into one row, column
    patterns into one column, diagonal patterns at positions (1,1)..(s,s).
    """
    s, m, n = int(s), int(m), int(n)
    if s < 0:
        raise PatternError("s must be nonnegative")
    if kind in ("row", "column") and s == 0:
        raise PatternError("row/column closed forms need s >= 1; "
                           "use the diagonal form for the empty pattern")
    if kind == "row":
        if s > n:
            raise PatternError(f"row pattern needs s <= n, got s={s}, n={n}")
        return min(m, n - s) + min(m - 1, n)
    if kind == "column":
        if s > m:
            raise PatternError(f"column pattern needs s <= m, got s={s}, m={m}")
        return min(m, n - 1) + min(m - s, n)
    if kind == "diagonal":
        if s > m or s > n:
            raise PatternError(f"diagonal pattern needs s <= min(m, n), got s={s}")
        return sum(comb(s, j) * min(m - j, n - s + j) for j in range(s + 1))
    raise PatternError(f"unknown closed form kind {kind!r}")


def diagonal_pattern(s, m, n):
    """The pattern (1,1), ..., (s,s) inside an m x n shape."""
    if s > min(m, n):
        raise PatternError(f"diagonal size {s} exceeds min({m}, {n})")
    return ZeroPattern.make(m, n, [(i, i) for i in range(s)])


# ---------------------------------------------------------------------------
# permutation orbits and canonical forms
# ---------------------------------------------------------------------------

def _pattern_bits(pattern: ZeroPattern) -> int:
    bits = 0
    for i, j in pattern.entries:
        bits |= 1 << (i * pattern.n + j)
    return bits


def _bits_to_pattern(bits, m, n):
    pairs = [(p // n, p % n) for p in range(m * n) if bits >> p & 1]
    return ZeroPattern.make(m, n, pairs)


def _swap_rows_bits(bits, m, n, a, b):
    rmask = (1 << n) - 1
    ra = bits >> (a * n) & rmask
    rb = bits >> (b * n) & rmask
    bits &= ~((rmask << (a * n)) | (rmask << (b * n)))
    return bits | (rb << (a * n)) | (ra << (b * n))


def _swap_cols_bits(bits, m, n, a, b):
    out = 0
    for i in range(m):
        row = bits >> (i * n) & ((1 << n) - 1)
        ba = row >> a & 1
        bb = row >> b & 1
        row = row & ~(1 << a) & ~(1 << b) | (bb << a) | (ba << b)
        out |= row << (i * n)
    return out


def _transpose_bits(bits, m, n):
    out = 0
    for i in range(m):
        for j in range(n):
            if bits >> (i * n + j) & 1:
                out |= 1 << (j * m + i)
    return out


def _orbit_bits(pattern: ZeroPattern):
    """BFS orbit of the pattern under row and column permutations, plus
    transposition when the shape is square.  Elements encoded as bit ints."""
    m, n = pattern.m, pattern.n
    if m * n > 16:
        raise PatternError(f"orbit expansion limited to m*n <= 16, got {m}x{n}")
    start = _pattern_bits(pattern)
    seen = {start}
    queue = [start]
    while queue:
        cur = queue.pop()
        images = []
        for a in range(m - 1):
            images.append(_swap_rows_bits(cur, m, n, a, a + 1))
        for a in range(n - 1):
            images.append(_swap_cols_bits(cur, m, n, a, a + 1))
        if m == n:
            images.append(_transpose_bits(cur, m, n))
        for img in images:
            if img not in seen:
                seen.add(img)
                queue.append(img)
    return seen


def canonical_form(pattern: ZeroPattern) -> ZeroPattern:
    """Lexicographically smallest mask over the orbit under row and column
    permutations (and transposition when m = n).  Two patterns are
    permutationally equivalent iff their canonical forms coincide."""
    best = min(_orbit_bits(pattern))
    return _bits_to_pattern(best, pattern.m, pattern.n)


def orbit_size(pattern: ZeroPattern) -> int:
    """Number of distinct patterns in the orbit of the pattern."""
    return len(_orbit_bits(pattern))


def complement_blocks(pattern: ZeroPattern):
    """Decompose the complement of the pattern into disjoint full blocks.

    Returns a list of (rows, cols) tuples such that the non-forced entries
    are exactly the union of the blocks rows x cols, or None when no such
    block-diagonal decomposition exists.  Rows and columns untouched by the
    complement do not appear in any block.  An all-zero pattern complement
    yields the empty list.
    """
    comp = pattern.complement()
    row_adj = {}
    for i, j in comp:
        row_adj.setdefault(i, set()).add(j)
    unseen = set(row_adj)
    blocks = []
    while unseen:
        rows = {unseen.pop()}
        cols = set(row_adj[next(iter(rows))])
        changed = True
        while changed:
            changed = False
            for i in list(unseen):
                if row_adj[i] & cols:
                    rows.add(i)
                    cols |= row_adj[i]
                    unseen.discard(i)
                    changed = True
        blocks.append((tuple(sorted(rows)), tuple(sorted(cols))))
    covered = set()
    for rows, cols in blocks:
        for i in rows:
            if row_adj[i] != set(cols):
                return None
        covered.update((i, j) for i in rows for j in cols)
    if covered != set(comp):
        return None
    return sorted(blocks)


def is_diagonal_type(pattern: ZeroPattern) -> bool:
    """True when the pattern is permutationally equivalent to a diagonal
    pattern (1,1), ..., (s,s); this includes the empty pattern."""
    s = pattern.size
    if s == 0:
        return True
    if s > min(pattern.m, pattern.n):
        return False
    return canonical_form(pattern) == canonical_form(
        diagonal_pattern(s, pattern.m, pattern.n))
