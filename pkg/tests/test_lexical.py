import logging

import pytest
from hypothesis import given, strategies as st

from relforge.errors import DataError
from relforge.lexical import HybridWeights, containment, hybrid_score, jaccard, tokenize

tokens = st.frozensets(st.sampled_from("abcdefgh"), max_size=6)
unit = st.floats(min_value=0.0, max_value=1.0)


class TestTokenize:
    def test_split(self):
        assert tokenize("wireless earbuds") == {"wireless", "earbuds"}

    def test_dedup(self):
        assert tokenize("new new") == {"new"}

    def test_empty(self):
        assert tokenize("") == frozenset()


class TestJaccard:
    def test_identical(self):
        assert jaccard(frozenset("ab"), frozenset("ab")) == 1.0

    def test_disjoint(self):
        assert jaccard(frozenset("a"), frozenset("b")) == 0.0

    def test_half(self):
        q = tokenize("wireless earbuds")
        t = tokenize("wireless noise canceling earbuds")
        assert jaccard(q, t) == 0.5

    def test_both_empty(self):
        assert jaccard(frozenset(), frozenset()) == 0.0


class TestContainment:
    def test_subset(self):
        assert containment(frozenset("ab"), frozenset("abc")) == 1.0

    def test_disjoint(self):
        assert containment(frozenset("a"), frozenset("bc")) == 0.0

    def test_two_thirds(self):
        q = tokenize("wireless earbuds pro")
        t = tokenize("wireless earbuds case")
        assert containment(q, t) == pytest.approx(2 / 3)

    def test_empty_query_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert containment(frozenset(), frozenset("a")) == 0.0
        assert any("empty query" in r.message for r in caplog.records)


class TestHybridWeights:
    def test_normalized(self):
        w = HybridWeights(2.0, 1.0, 1.0)
        assert w.w_p + w.w_j + w.w_c == pytest.approx(1.0)
        assert w.w_p == pytest.approx(0.5)

    def test_negative_rejected(self):
        with pytest.raises(DataError):
            HybridWeights(-0.1, 0.6, 0.5)

    def test_all_zero_rejected(self):
        with pytest.raises(DataError):
            HybridWeights(0.0, 0.0, 0.0)


class TestHybridScore:
    def test_selects_model(self):
        assert hybrid_score(0.7, 0.1, 0.9, HybridWeights(1, 0, 0)) == 0.7

    def test_selects_jaccard(self):
        assert hybrid_score(0.9, 0.4, 0.1, HybridWeights(0, 1, 0)) == 0.4

    def test_selects_containment(self):
        assert hybrid_score(0.9, 0.4, 0.1, HybridWeights(0, 0, 1)) == 0.1

    def test_blend(self):
        assert hybrid_score(0.8, 0.5, 1.0, HybridWeights(0.5, 0.3, 0.2)) == pytest.approx(0.75)

    def test_range_validation(self):
        with pytest.raises(DataError):
            hybrid_score(1.5, 0.5, 0.5, HybridWeights(1, 0, 0))
        with pytest.raises(DataError):
            hybrid_score(0.5, -0.1, 0.5, HybridWeights(1, 0, 0))


@given(tokens, tokens)
def test_jaccard_symmetry(q, t):
    assert jaccard(q, t) == jaccard(t, q)


@given(tokens, tokens)
def test_overlap_bounds(q, t):
    assert 0.0 <= jaccard(q, t) <= 1.0
    assert 0.0 <= containment(q, t) <= 1.0


@given(tokens, tokens)
def test_jaccard_le_containment(q, t):
    if q:
        assert jaccard(q, t) <= containment(q, t) + 1e-12


@given(tokens, tokens)
def test_containment_one_iff_subset(q, t):
    if q:
        assert (containment(q, t) == 1.0) == (q <= t)


@given(unit, unit, unit, st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1))
def test_hybrid_bounds_and_monotonicity(p, j, c, a, b, d):
    w = HybridWeights(a, b, d)
    s = hybrid_score(p, j, c, w)
    assert -1e-12 <= s <= 1.0 + 1e-12
    bump = 0.01
    if p <= 1 - bump:
        assert hybrid_score(p + bump, j, c, w) > s
    if j <= 1 - bump:
        assert hybrid_score(p, j + bump, c, w) > s
    if c <= 1 - bump:
        assert hybrid_score(p, j, c + bump, w) > s
