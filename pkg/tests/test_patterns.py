"""Tests for zero-pattern combinatorics: covers, rank-one counts, orbits."""

import itertools

import numpy as np
import pytest

from lowrankzeros.patterns import (
    BipartiteGraph,
    MinimalCover,
    OracleTooLargeError,
    PatternError,
    ZeroPattern,
    canonical_form,
    covers_bruteforce,
    diagonal_pattern,
    is_diagonal_type,
    mask_matrix,
    minimal_covers,
    orbit_size,
    rank1_ed_degree,
    rank1_ed_degree_closed_form,
)


def cover_set(pairs):
    return {MinimalCover.make(rows, cols) for rows, cols in pairs}


def pattern_from_bits(bits, m, n):
    pairs = [(p // n, p % n) for p in range(m * n) if bits >> p & 1]
    return ZeroPattern.make(m, n, pairs)


# -- ZeroPattern basics --

def test_pattern_validation():
    with pytest.raises(PatternError):
        ZeroPattern.make(3, 3, [(3, 0)])
    with pytest.raises(PatternError):
        ZeroPattern.make(3, 3, [(0, 0), (0, 0)])
    with pytest.raises(PatternError):
        ZeroPattern(0, 3, ())
    assert ZeroPattern.empty(2, 5).size == 0


def test_pattern_text_roundtrip():
    p = ZeroPattern.from_text("3 3; 1 1; 1 2; 2 2")
    assert p.entries == ((0, 0), (0, 1), (1, 1))
    assert ZeroPattern.from_text(p.to_text()) == p
    assert ZeroPattern.from_text("4 5").size == 0
    with pytest.raises(PatternError):
        ZeroPattern.from_text("3 3; 1")
    with pytest.raises(PatternError):
        ZeroPattern.from_text("3 3; a b")


def test_pattern_json_roundtrip():
    p = ZeroPattern.from_json_dict({"m": 3, "n": 3, "zeros": [[1, 1], [1, 2]]})
    assert p.entries == ((0, 0), (0, 1))
    assert ZeroPattern.from_json_dict(p.to_json_dict()) == p


def test_mask_matrix_bits():
    p = ZeroPattern.from_text("2 3; 1 1; 2 3")
    bits = mask_matrix(p)
    expect = np.array([[1, 0, 0], [0, 0, 1]], dtype=np.uint8)
    assert np.array_equal(bits, expect)


def test_bipartite_graph_edges():
    p = ZeroPattern.from_text("3 3; 1 1; 1 2; 2 2")
    g = BipartiteGraph(p)
    assert g.neighbors(0) == frozenset({0, 1})
    assert g.neighbors(1) == frozenset({1})
    assert g.neighbors(2) == frozenset()


# -- minimal covers: paper examples and oracle agreement --

def test_minimal_covers_paper_3x3():
    # S = {(1,1),(1,2),(2,2)}: MC = {([2], {}), ({}, [2]), ({1}, {2})}
    p = ZeroPattern.from_text("3 3; 1 1; 1 2; 2 2")
    expect = cover_set([({0, 1}, set()), (set(), {0, 1}), ({0}, {1})])
    assert minimal_covers(p) == expect
    assert covers_bruteforce(p) == expect


def test_minimal_covers_paper_3x4():
    # S = {(1,1),(1,2)} in 3x4: MC = {({1}, {}), ({}, [2])}
    p = ZeroPattern.from_text("3 4; 1 1; 1 2")
    expect = cover_set([({0}, set()), (set(), {0, 1})])
    assert minimal_covers(p) == expect


def test_minimal_covers_empty():
    p = ZeroPattern.empty(3, 4)
    assert minimal_covers(p) == cover_set([(set(), set())])
    assert covers_bruteforce(p) == cover_set([(set(), set())])


def test_bruteforce_full_2x2():
    p = ZeroPattern.make(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)])
    expect = cover_set([({0, 1}, set()), (set(), {0, 1})])
    assert covers_bruteforce(p) == expect
    assert minimal_covers(p) == expect


def test_bruteforce_single_zero_2x2():
    p = ZeroPattern.make(2, 2, [(0, 0)])
    expect = cover_set([({0}, set()), (set(), {0})])
    assert covers_bruteforce(p) == expect
    assert minimal_covers(p) == expect


def test_bruteforce_size_guard():
    with pytest.raises(OracleTooLargeError):
        covers_bruteforce(ZeroPattern.empty(6, 6))


def test_minimal_covers_match_bruteforce_all_3x3():
    for bits in range(512):
        p = pattern_from_bits(bits, 3, 3)
        assert minimal_covers(p) == covers_bruteforce(p), p.to_text()


def test_minimal_covers_match_bruteforce_random_4x4():
    rng = np.random.default_rng(7)
    for _ in range(120):
        bits = int(rng.integers(0, 1 << 16))
        p = pattern_from_bits(bits, 4, 4)
        assert minimal_covers(p) == covers_bruteforce(p), p.to_text()


def test_cover_properties():
    rng = np.random.default_rng(11)
    for _ in range(40):
        bits = int(rng.integers(0, 1 << 12))
        p = pattern_from_bits(bits, 3, 4)
        target = p.entry_set()
        covers = minimal_covers(p)
        for cov in covers:
            ents = cov.pattern_entries(3, 4)
            assert target <= ents
            # dropping a single row or column index must break the cover
            # or (for equal-pattern twins) still be dominated by another
            for i in cov.rows:
                smaller = MinimalCover(cov.rows - {i}, cov.cols)
                assert not target <= smaller.pattern_entries(3, 4)
            for j in cov.cols:
                smaller = MinimalCover(cov.rows, cov.cols - {j})
                assert not target <= smaller.pattern_entries(3, 4)


def test_minimal_covers_permutation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        bits = int(rng.integers(0, 1 << 9))
        p = pattern_from_bits(bits, 3, 3)
        prow = rng.permutation(3)
        pcol = rng.permutation(3)
        q = ZeroPattern.make(3, 3, [(prow[i], pcol[j]) for i, j in p.entries])
        relabeled = {
            MinimalCover(frozenset(int(prow[i]) for i in c.rows),
                         frozenset(int(pcol[j]) for j in c.cols))
            for c in minimal_covers(p)
        }
        assert relabeled == minimal_covers(q)


# -- rank-one ED degrees --

def test_rank1_ed_degree_paper_values():
    assert rank1_ed_degree(ZeroPattern.from_text("3 3; 1 1")) == 4
    assert rank1_ed_degree(ZeroPattern.empty(3, 4)) == 3
    assert rank1_ed_degree(ZeroPattern.from_text("3 3; 1 1; 2 2")) == 6


def test_closed_forms():
    assert rank1_ed_degree_closed_form("row", 2, 3, 4) == min(3, 2) + min(2, 4)
    assert rank1_ed_degree_closed_form("diagonal", 1, 3, 3) == 4
    assert rank1_ed_degree_closed_form("column", 1, 3, 4) == min(3, 3) + min(2, 4)
    with pytest.raises(PatternError):
        rank1_ed_degree_closed_form("row", 9, 3, 4)
    with pytest.raises(PatternError):
        rank1_ed_degree_closed_form("spiral", 1, 3, 3)


def test_closed_forms_match_cover_sum():
    # every pattern equivalent to a row, column, or diagonal pattern
    for m, n in [(3, 3), (3, 4), (4, 4), (2, 5)]:
        for s in range(1, n + 1):
            row = ZeroPattern.make(m, n, [(0, j) for j in range(s)])
            assert rank1_ed_degree(row) == \
                rank1_ed_degree_closed_form("row", s, m, n)
        for s in range(1, m + 1):
            col = ZeroPattern.make(m, n, [(i, 0) for i in range(s)])
            assert rank1_ed_degree(col) == \
                rank1_ed_degree_closed_form("column", s, m, n)
        for s in range(0, min(m, n) + 1):
            diag = diagonal_pattern(s, m, n)
            assert rank1_ed_degree(diag) == \
                rank1_ed_degree_closed_form("diagonal", s, m, n)


def test_rank1_degree_invariant_under_orbit():
    rng = np.random.default_rng(5)
    for _ in range(10):
        bits = int(rng.integers(0, 1 << 9))
        p = pattern_from_bits(bits, 3, 3)
        d = rank1_ed_degree(p)
        assert rank1_ed_degree(p.transpose()) == d
        assert rank1_ed_degree(canonical_form(p)) == d


# -- canonical forms and orbits --

def test_canonical_form_simple():
    p = ZeroPattern.from_text("3 3; 2 2")
    assert canonical_form(p) == canonical_form(ZeroPattern.from_text("3 3; 1 1"))
    a = ZeroPattern.from_text("3 3; 1 1; 1 2")
    b = ZeroPattern.from_text("3 3; 3 2; 3 3")
    assert canonical_form(a) == canonical_form(b)


def test_canonical_form_idempotent_and_orbit_constant():
    rng = np.random.default_rng(13)
    for _ in range(25):
        bits = int(rng.integers(0, 1 << 9))
        p = pattern_from_bits(bits, 3, 3)
        c = canonical_form(p)
        assert canonical_form(c) == c
        assert canonical_form(p.transpose()) == c


def test_orbit_census_3x3_is_26():
    reps = {canonical_form(pattern_from_bits(b, 3, 3)) for b in range(512)}
    assert len(reps) == 26


def test_orbit_sizes_paper_table():
    assert orbit_size(ZeroPattern.from_text("3 3; 1 1")) == 9
    assert orbit_size(ZeroPattern.from_text("3 3; 1 1; 2 2; 3 3")) == 6
    assert orbit_size(ZeroPattern.empty(3, 3)) == 1
    assert orbit_size(ZeroPattern.from_text("3 3; 1 1; 1 2")) == 18
    assert orbit_size(ZeroPattern.from_text("3 3; 1 1; 2 2")) == 18
    assert orbit_size(ZeroPattern.from_text("3 3; 1 1; 1 2; 2 1; 2 2")) == 9


def test_orbit_sizes_partition_2x2():
    # orbit sizes over all 2x2 patterns partition the 16 patterns
    reps = {}
    for bits in range(16):
        p = pattern_from_bits(bits, 2, 2)
        reps.setdefault(canonical_form(p), set()).add(bits)
    assert sum(orbit_size(next(iter(pattern_from_bits(b, 2, 2)
                                    for b in members))) for members in reps.values()) == 16
    for rep, members in reps.items():
        assert orbit_size(rep) == len(members)


def test_is_diagonal_type():
    assert is_diagonal_type(ZeroPattern.from_text("3 3; 2 2"))
    assert is_diagonal_type(ZeroPattern.from_text("3 3; 1 2; 2 3"))
    assert not is_diagonal_type(ZeroPattern.from_text("3 3; 1 1; 1 2"))
    assert is_diagonal_type(ZeroPattern.empty(3, 4))
