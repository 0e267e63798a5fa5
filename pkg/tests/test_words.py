import pytest
from hypothesis import given, settings, strategies as st

from endotorus.words import (
    CyclicWord,
    Endomorphism,
    concat,
    conjugate,
    cyclic_canonical,
    cyclic_reduce,
    find_conjugator,
    invert,
    is_conjugate,
    parse_word,
    periodic_conjugacy_search,
    reduce_word,
    show_word,
)

PHI = Endomorphism(2, (parse_word("ab"), parse_word("ba")))      # irreducible, atoroidal
GOLDEN = Endomorphism(2, (parse_word("ab"), parse_word("a")))    # geometric, stretch = golden ratio
SWAP = Endomorphism(2, (parse_word("b"), parse_word("a")))


def letters(rank):
    return st.integers(-rank, rank).filter(lambda x: x != 0)


def words(rank, max_size=10):
    return st.lists(letters(rank), max_size=max_size).map(tuple)


class TestReduce:
    def test_full_cancellation(self):
        assert reduce_word(parse_word("a") + parse_word("A")) == ()

    def test_inner_cancellation(self):
        assert reduce_word((1, 2, -2, 1)) == (1, 1)

    def test_already_reduced(self):
        assert reduce_word((1, 2, -1)) == (1, 2, -1)

    @given(words(3, 12))
    def test_idempotent(self, w):
        assert reduce_word(reduce_word(w)) == reduce_word(w)

    @given(words(3, 12))
    def test_length_nonincreasing(self, w):
        assert len(reduce_word(w)) <= len(w)

    @given(words(3, 10))
    def test_inverse_cancels(self, w):
        assert concat(w, invert(w)) == ()


class TestParse:
    def test_roundtrip(self):
        assert parse_word("abA") == (1, 2, -1)
        assert show_word((1, 2, -1)) == "abA"
        assert parse_word("") == ()
        assert show_word(()) == "1"

    def test_parse_reduces(self):
        assert parse_word("aA") == ()


class TestApply:
    def test_paper_remark_map(self):
        assert PHI.apply(parse_word("ab")) == parse_word("abba")

    def test_empty_word(self):
        assert PHI.apply(()) == ()

    def test_substitution_with_cancellation(self):
        # (a->ab, b->a) on aba^-1b^-1: ab.a.(b^-1 a^-1).a^-1
        assert GOLDEN.apply(parse_word("abAB")) == parse_word("abaBAA")

    @given(words(2, 8), words(2, 8))
    @settings(max_examples=60)
    def test_homomorphism(self, u, v):
        assert PHI.apply(concat(u, v)) == concat(PHI.apply(u), PHI.apply(v))


class TestCompose:
    def test_identity_neutral(self):
        assert PHI.compose(Endomorphism.identity(2)) == PHI
        assert Endomorphism.identity(2).compose(PHI) == PHI

    def test_involution(self):
        assert SWAP.compose(SWAP) == Endomorphism.identity(2)

    def test_square_of_remark_map(self):
        sq = PHI.compose(PHI)
        assert sq.images == (parse_word("abba"), parse_word("baab"))

    def test_rank_mismatch(self):
        with pytest.raises(ValueError):
            PHI.compose(Endomorphism.identity(3))

    @given(words(2, 10))
    @settings(max_examples=60)
    def test_apply_respects_composition(self, w):
        psi = GOLDEN
        assert PHI.compose(psi).apply(w) == PHI.apply(psi.apply(w))

    def test_power(self):
        assert PHI.power(2) == PHI.compose(PHI)
        assert PHI.power(0).is_identity()


class TestConjugacy:
    def test_explicit_conjugator(self):
        assert is_conjugate(parse_word("abA"), parse_word("b"))

    def test_distinct_generators(self):
        assert not is_conjugate(parse_word("a"), parse_word("b"))

    def test_rotation_pair(self):
        assert is_conjugate(parse_word("abaBAA"), parse_word("BAba"))

    def test_orientation_matters(self):
        u = parse_word("ab")
        assert not is_conjugate(u, invert(u))
        assert is_conjugate(u, invert(u), unoriented=True)

    def test_find_conjugator(self):
        u, v = parse_word("abA"), parse_word("b")
        x = find_conjugator(u, v)
        assert x is not None and conjugate(u, x) == v
        assert find_conjugator(parse_word("a"), parse_word("b")) is None

    @given(words(2, 8))
    def test_reflexive(self, w):
        assert is_conjugate(w, w)

    @given(words(2, 6), words(2, 4))
    @settings(max_examples=60)
    def test_conjugates_are_conjugate(self, w, x):
        assert is_conjugate(w, conjugate(w, x))

    @given(words(2, 6), words(2, 6), words(2, 6))
    @settings(max_examples=40)
    def test_transitive_on_samples(self, u, v, w):
        if is_conjugate(u, v) and is_conjugate(v, w):
            assert is_conjugate(u, w)


class TestCyclicWord:
    def test_canonical_of_rotations(self):
        w = parse_word("abAB")
        for k in range(len(w)):
            rotated = w[k:] + w[:k]
            assert cyclic_canonical(rotated) == cyclic_canonical(w)

    def test_unoriented_identifies_inverse(self):
        w = parse_word("aabAB")
        assert CyclicWord.of(w) == CyclicWord.of(invert(w))

    def test_cyclic_reduce(self):
        assert cyclic_reduce(parse_word("Babb")) == parse_word("ab")

    @given(words(3, 10))
    def test_canonical_is_cyclically_reduced(self, w):
        c = cyclic_canonical(w)
        if len(c) >= 2:
            assert c[0] != -c[-1]


class TestPeriodicSearch:
    def test_identity_finds_generator(self):
        assert periodic_conjugacy_search(Endomorphism.identity(2), 6, 12) == ((1,), 1, +1)

    def test_golden_commutator_period_two(self):
        witness, n, orient = periodic_conjugacy_search(GOLDEN, 6, 12)
        assert n == 2 and orient == +1
        assert cyclic_canonical(witness, unoriented=True) == \
            cyclic_canonical(parse_word("abAB"), unoriented=True)

    def test_remark_map_has_no_witness(self):
        assert periodic_conjugacy_search(PHI, 6, 12) is None

    def test_swap_least_period(self):
        # ab maps to ba, a rotation, so the class is fixed already at n=1;
        # that beats the period-2 witness a.
        witness, n, orient = periodic_conjugacy_search(SWAP, 6, 12)
        assert (n, orient) == (1, +1) and witness == (1, 2)

    def test_inner_automorphism_is_periodic(self):
        inner = Endomorphism.inner(2, parse_word("ab"))
        assert periodic_conjugacy_search(inner, 6, 12) == ((1,), 1, +1)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            periodic_conjugacy_search(PHI, 0, 12)
