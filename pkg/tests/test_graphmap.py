import math

import pytest

from endotorus.words import Endomorphism, is_conjugate, parse_word
from endotorus.graphmap import (
    GraphMap,
    certify_growth_rate,
    tighten_path,
    transition_matrix,
    with_eigenmetric,
)

PHI = Endomorphism(2, (parse_word("ab"), parse_word("ba")))
GOLDEN = Endomorphism(2, (parse_word("ab"), parse_word("a")))
GOLDEN_RATIO = (1 + math.sqrt(5)) / 2


def rose(endo):
    return GraphMap.rose(endo)


class TestRose:
    def test_remark_map(self):
        gm = rose(PHI)
        assert gm.eimg == {1: (1, 2), 2: (2, 1)}
        gm.check_consistency()

    def test_identity(self):
        gm = rose(Endomorphism.identity(2))
        assert gm.eimg == {1: (1,), 2: (2,)}

    def test_marking_words(self):
        gm = rose(GOLDEN)
        for g in (1, 2):
            assert gm.path_to_word(gm.marking[g - 1]) == (g,)

    def test_induced_images(self):
        gm = rose(GOLDEN)
        for g in (1, 2):
            assert gm.induced_generator_image(g) == GOLDEN.images[g - 1]


class TestTighten:
    def test_cancelling_image(self):
        gm = rose(Endomorphism(2, (parse_word("abBa"), parse_word("b"))))
        # parse_word already reduces; build an unreduced image by hand
        gm.eimg[1] = (1, 2, -2, 1)
        tight = gm.tighten()
        assert tight.eimg[1] == (1, 1)

    def test_already_tight(self):
        gm = rose(PHI)
        assert gm.tighten().eimg == gm.eimg

    def test_tighten_path(self):
        assert tighten_path((1, 2, -2, 1)) == (1, 1)


class TestTransition:
    def test_remark_matrix_and_lambda(self):
        data = transition_matrix(rose(PHI))
        assert data.as_lists() == [[1, 1], [1, 1]]
        assert data.lam == 2.0
        assert data.irreducible and data.expanding

    def test_identity_not_expanding(self):
        data = transition_matrix(rose(Endomorphism.identity(2)))
        assert data.as_lists() == [[1, 0], [0, 1]]
        assert data.lam == 1.0
        assert not data.expanding

    def test_golden_ratio(self):
        data = transition_matrix(rose(GOLDEN))
        assert data.as_lists() == [[1, 1], [1, 0]]
        assert abs(data.lam - GOLDEN_RATIO) < 1e-12
        assert certify_growth_rate(data.matrix, data.lam)

    def test_eigenmetric_equation(self):
        data = transition_matrix(rose(GOLDEN))
        assert data.residual < 1e-9
        v = data.eigenmetric
        assert all(x > 0 for x in v)
        assert abs(sum(v) - 1.0) < 1e-12

    def test_row_sums_are_image_lengths(self):
        gm = rose(GOLDEN)
        data = transition_matrix(gm)
        for i, e in enumerate(data.edge_order):
            assert sum(data.matrix[i]) == len(gm.eimg[e])

    def test_volume_after_eigenmetric(self):
        gm, data = with_eigenmetric(rose(GOLDEN))
        assert abs(gm.graph.volume() - 1.0) < 1e-12


class TestMoves:
    def test_collapse_empty_is_identity(self):
        gm = rose(PHI)
        assert gm.collapse_forest(()) is gm

    def test_subdivide_then_collapse_trivial_half(self):
        gm = rose(GOLDEN)
        split = gm.subdivide(1, 0)       # first half has trivial image
        split.check_consistency()
        e1 = [e for e in split.graph.edge_ids() if split.eimg[e] == ()][0]
        back = split.collapse_forest({e1})
        back.check_consistency()
        for g in (1, 2):
            assert is_conjugate(back.induced_generator_image(g), GOLDEN.images[g - 1])

    def test_subdivide_then_remove_valence_two(self):
        gm = rose(GOLDEN)
        split = gm.subdivide(1, 1)
        split.check_consistency()
        new_vertex = split.graph.nv - 1
        merged = split.remove_valence_two(new_vertex)
        merged.check_consistency()
        for g in (1, 2):
            assert is_conjugate(merged.induced_generator_image(g), GOLDEN.images[g - 1])

    def test_fold_merges_edges_with_equal_images(self):
        # map with f(a) = ab, f(b) = ab: not injective, but the fold itself
        # is a legal move on the one-vertex graph with two edges to fold?
        # use a subdivided golden map instead: fold the two halves created by
        # matching initial segments
        gm = rose(GOLDEN)   # f(a) = ab, f(b) = a
        split = gm.subdivide(1, 1)  # a = a1 a2 with f(a1) = a-ish prefix
        split.check_consistency()
        e1 = max(gm.graph.edges) + 1   # first half of old edge 1
        assert split.eimg[e1] == split.eimg[2]
        folded = split.fold(e1, 2)
        folded.check_consistency()
        assert folded.graph.nv == split.graph.nv - 1
        for g in (1, 2):
            assert is_conjugate(folded.induced_generator_image(g), GOLDEN.images[g - 1])

    def test_fold_preserves_rank(self):
        gm = rose(GOLDEN).subdivide(1, 1)
        e1 = max(rose(GOLDEN).graph.edges) + 1
        folded = gm.fold(e1, 2)
        g = folded.graph
        assert len(g.edges) - g.nv + 1 == 2

    def test_fold_rejects_mismatched_images(self):
        gm = rose(PHI)
        with pytest.raises(ValueError):
            gm.fold(1, 2)

    def test_fold_bookkeeping_volumes(self):
        gm, data = with_eigenmetric(rose(GOLDEN))
        vol0 = gm.graph.volume()
        split = gm.subdivide(1, 1)
        assert abs(split.graph.volume() - vol0) < 1e-9
        e1 = max(gm.graph.edges) + 1
        folded = split.fold(e1, 2)
        x = split.graph.lengths[e1]
        assert abs(folded.graph.volume() - (vol0 - x)) < 1e-9


class TestPullback:
    def test_loop_words_after_moves(self):
        gm = rose(GOLDEN).subdivide(1, 1)
        e1 = max(rose(GOLDEN).graph.edges) + 1
        folded = gm.fold(e1, 2)
        # the marking loops still read the generators
        for g in (1, 2):
            assert folded.path_to_word(folded.marking[g - 1]) == (g,)


class TestMoveDispatcher:
    def test_moves_roundtrip_outer_class(self):
        from endotorus.graphmap import CollapseForest, Fold, Subdivide, bh_move
        gm = rose(GOLDEN)
        split = bh_move(gm, Subdivide(1, 1))
        e1 = max(gm.graph.edges) + 1
        folded = bh_move(split, Fold(e1, 2))
        for g in (1, 2):
            assert is_conjugate(folded.induced_generator_image(g), GOLDEN.images[g - 1])

    def test_invalid_descriptors_rejected(self):
        from endotorus.graphmap import CollapseForest, Fold, bh_move
        gm = rose(PHI)
        with pytest.raises(ValueError):
            bh_move(gm, Fold(1, 2))       # images differ
        with pytest.raises(ValueError):
            bh_move(gm, CollapseForest.of({1}))  # a loop is not a forest
        with pytest.raises(ValueError):
            bh_move(gm, "not a move")
