import random

import pytest

from collabcausal.graphs import Mag, Mark, Pag, dag_to_mag, markov_equivalent, node_distance
from collabcausal.pag import (
    PagTooLarge,
    equivalence_class_pag,
    markov_class,
    orientation_rule_pag,
    skeleton_pag,
)
from factories import random_dag

T, A, C = Mark.TAIL, Mark.ARROW, Mark.CIRCLE


def small_mags(seed, count, max_edges=7, n_max=7):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        g = dag_to_mag(random_dag(rng, n_max=n_max, l_max=3))
        if g.num_edges() <= max_edges:
            out.append(g)
    return out


def test_skeleton_pag_examples():
    assert skeleton_pag(Mag(3, [])) == Pag(3, [])
    g = Mag(4, [(0, 1, T, A), (1, 2, T, A), (0, 2, T, A), (2, 3, T, A)])
    p = skeleton_pag(g)
    assert p.skeleton() == g.skeleton()
    assert all(mu is C and mv is C for _, _, mu, mv in p.edges())


def test_single_edge_class_is_all_three_orientations():
    g = Mag(2, [(0, 1, T, A)])
    assert len(markov_class(g)) == 3
    assert equivalence_class_pag(g) == Pag(2, [(0, 1, C, C)])


def test_unshielded_collider_keeps_arrowheads():
    g = Mag(3, [(0, 2, T, A), (1, 2, T, A)])
    expected = Pag(3, [(0, 2, C, A), (1, 2, C, A)])
    assert equivalence_class_pag(g) == expected
    assert orientation_rule_pag(g) == expected


def test_far_apart_mags_share_a_pag():
    # two disjoint edges, one flipped: distance n/2, identical PAGs
    g1 = Mag(4, [(0, 1, T, A), (2, 3, T, A)])
    g2 = Mag(4, [(0, 1, A, T), (2, 3, T, A)])
    assert node_distance(g1, g2) == 2
    assert equivalence_class_pag(g1) == equivalence_class_pag(g2)


def test_enumeration_cap():
    g = Mag(10, [(i, i + 1, T, A) for i in range(9)] + [(0, 9, T, A)])
    with pytest.raises(PagTooLarge):
        equivalence_class_pag(g)


def test_true_mag_in_class_and_members_equivalent():
    for g in small_mags(1, 40):
        members = markov_class(g)
        assert g in members
        assert all(markov_equivalent(g, m) for m in members)


def _sound(pag, g):
    for u, v, mu, mv in pag.edges():
        tu, tv = g.marks(u, v)
        if (mu is not C and mu is not tu) or (mv is not C and mv is not tv):
            return False
    return pag.skeleton() == g.skeleton()


def test_pag_oracles_are_sound():
    for g in small_mags(2, 60):
        assert _sound(skeleton_pag(g), g)
        assert _sound(equivalence_class_pag(g), g)
        assert _sound(orientation_rule_pag(g), g)


def test_orientation_rules_match_class_enumeration():
    for g in small_mags(3, 120, max_edges=8, n_max=8):
        assert orientation_rule_pag(g) == equivalence_class_pag(g), g


def test_orientation_rules_sound_on_larger_graphs():
    rng = random.Random(4)
    for _ in range(40):
        g = dag_to_mag(random_dag(rng, n=10, l_max=2, p=0.3))
        assert _sound(orientation_rule_pag(g), g)
