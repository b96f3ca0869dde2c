import random
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from collabcausal.graphs import (
    CycleError,
    Dag,
    GraphError,
    Incidence,
    Mag,
    Mark,
    d_separated,
    dag_to_mag,
    incidence_set,
    m_separated,
    mag_from_incidence,
    markov_equivalent,
    node_diff,
    node_distance,
    validate_mag,
)
from factories import random_dag
from oracles import brute_d_separated, brute_inducing_path, brute_m_separated

T, A = Mark.TAIL, Mark.ARROW
t, x, y, z = 0, 1, 2, 3


def fig_d1():
    # latents: 4 = l_xy, 5 = l_ty
    return Dag(4, [(t, x), (x, y), (y, z), (4, x), (4, y), (5, t), (5, y)], n_latent=2)


def fig_d2():
    return Dag(4, [(t, x), (t, y), (x, y), (y, z), (4, x), (4, y)], n_latent=1)


def fig_mag():
    return Mag(4, [(t, x, T, A), (x, y, T, A), (t, y, T, A), (y, z, T, A)])


# -- Dag ------------------------------------------------------------------------

def test_dag_rejects_cycle():
    with pytest.raises(CycleError):
        Dag(3, [(0, 1), (1, 2), (2, 0)])


def test_dag_rejects_undeclared_endpoint():
    with pytest.raises(GraphError):
        Dag(2, [(0, 5)])


def test_ancestor_includes_self():
    d = Dag(3, [(0, 1)])
    assert d.ancestors([2]) == {2}
    assert d.is_ancestor(0, 1) and not d.is_ancestor(1, 0)


# -- validate_mag ----------------------------------------------------------------

def test_validate_mag_cycle():
    g = Mag(3, [(0, 1, T, A), (1, 2, T, A), (0, 2, A, T)])
    ok, report = validate_mag(g)
    assert not ok and "cycle" in report


def test_validate_mag_single_bidirected():
    assert validate_mag(Mag(2, [(0, 1, A, A)])) == (True, "")


def test_validate_mag_bidirected_ancestor_conflict():
    a, b, c = 0, 1, 2
    g = Mag(3, [(a, b, A, A), (a, c, T, A), (c, b, T, A)])
    ok, report = validate_mag(g)
    assert not ok and "bidirected" in report


def test_validate_mag_non_maximal():
    # a <-> c <-> d <-> b with c -> b and d -> a is an inducing path for (a, b)
    g = Mag(4, [(0, 2, A, A), (2, 3, A, A), (3, 1, A, A), (2, 1, T, A), (3, 0, T, A)])
    ok, report = validate_mag(g)
    assert not ok and "no m-separating set" in report


# -- dag_to_mag ------------------------------------------------------------------

def test_dag_to_mag_figure_pair():
    assert dag_to_mag(fig_d1()) == fig_mag()
    assert dag_to_mag(fig_d2()) == fig_mag()


def test_dag_to_mag_no_latents_identity():
    d = Dag(4, [(0, 1), (1, 2), (0, 3)])
    g = dag_to_mag(d)
    assert g == Mag(4, [(0, 1, T, A), (1, 2, T, A), (0, 3, T, A)])


def test_dag_to_mag_single_latent_bidirected():
    assert dag_to_mag(Dag(2, [(2, 0), (2, 1)], 1)) == Mag(2, [(0, 1, A, A)])


def test_dag_to_mag_latent_over_existing_edge_stays_directed():
    assert dag_to_mag(Dag(2, [(0, 1), (2, 0), (2, 1)], 1)) == Mag(2, [(0, 1, T, A)])


def test_dag_to_mag_adjacency_matches_inducing_path_oracle():
    rng = random.Random(11)
    for _ in range(60):
        d = random_dag(rng, n_max=6, l_max=3)
        g = dag_to_mag(d)
        for u, v in combinations(range(d.n), 2):
            assert g.adjacent(u, v) == brute_inducing_path(d, u, v)


def test_dag_to_mag_output_valid():
    rng = random.Random(5)
    for _ in range(80):
        d = random_dag(rng, n_max=10, l_max=4, p=rng.uniform(0.1, 0.4))
        ok, report = validate_mag(dag_to_mag(d))
        assert ok, report


# -- separation -----------------------------------------------------------------

def test_d_separation_figure_d2():
    assert d_separated(fig_d2(), t, z, {y})
    assert brute_d_separated(fig_d2(), t, z, {y})


def test_d_separation_disconnected():
    d = Dag(3, [(0, 2)])
    for zs in [(), (2,)]:
        assert d_separated(d, 0, 1, zs)


def test_d_separation_collider():
    d = Dag(3, [(0, 2), (1, 2)])
    assert d_separated(d, 0, 1, ())
    assert not d_separated(d, 0, 1, {2})


def test_separation_rejects_endpoint_in_z():
    with pytest.raises(GraphError):
        d_separated(Dag(2, [(0, 1)]), 0, 1, {0})
    with pytest.raises(GraphError):
        m_separated(Mag(2, []), 0, 1, {1})


def test_m_separation_examples():
    assert not m_separated(Mag(2, [(0, 1, A, A)]), 0, 1, ())
    g = Mag(3, [(0, 2, A, A), (2, 1, A, A)])
    assert m_separated(g, 0, 1, ())
    assert not m_separated(g, 0, 1, {2})


def test_separation_matches_path_oracle():
    rng = random.Random(3)
    for _ in range(40):
        d = random_dag(rng, n_max=6, l_max=2)
        g = dag_to_mag(d)
        for u, v in combinations(range(d.n), 2):
            rest = [w for w in range(d.n) if w not in (u, v)]
            for k in range(len(rest) + 1):
                for zs in combinations(rest, k):
                    assert d_separated(d, u, v, zs) == brute_d_separated(d, u, v, zs)
                    assert m_separated(g, u, v, zs) == brute_m_separated(g, u, v, zs)


# -- incidence sets and node distance -------------------------------------------

def test_incidence_set_examples():
    assert incidence_set(Mag(3, [(1, 2, T, A)]), 0) == frozenset()
    assert incidence_set(fig_mag(), y) == {(x, Incidence.HEAD), (t, Incidence.HEAD), (z, Incidence.TAIL)}
    assert incidence_set(Mag(2, [(0, 1, A, A)]), 0) == {(1, Incidence.BIDIRECTED)}
    with pytest.raises(GraphError):
        incidence_set(Mag(2, []), 2)


def test_node_diff_examples():
    g1 = Mag(4, [(0, 1, T, A), (2, 3, T, A)])
    g2 = Mag(4, [(0, 1, A, T), (2, 3, T, A)])
    assert node_diff(g1, g1) == set()
    assert node_diff(g1, g2) == {0, 1}
    g3 = Mag(4, [(0, 1, A, A), (2, 3, T, A)])
    assert node_diff(g1, g3) == {0, 1}
    with pytest.raises(GraphError):
        node_diff(g1, Mag(5, []))


@st.composite
def mags(draw, n=6):
    rng = random.Random(draw(st.integers(0, 2**31)))
    return dag_to_mag(random_dag(rng, n=n, l_max=2))


@settings(max_examples=60, deadline=None)
@given(mags(), mags(), mags())
def test_node_distance_is_metric(g1, g2, g3):
    assert node_distance(g1, g1) == 0
    assert node_distance(g1, g2) == node_distance(g2, g1)
    assert (node_distance(g1, g2) == 0) == (g1 == g2)
    assert node_distance(g1, g3) <= node_distance(g1, g2) + node_distance(g2, g3)


@settings(max_examples=60, deadline=None)
@given(mags())
def test_mag_determined_by_incidence_sets(g):
    rebuilt = mag_from_incidence(g.n, {u: incidence_set(g, u) for u in g.nodes})
    assert rebuilt == g


def test_markov_equivalence_of_single_edge_orientations():
    a = Mag(2, [(0, 1, T, A)])
    assert markov_equivalent(a, Mag(2, [(0, 1, A, T)]))
    assert markov_equivalent(a, Mag(2, [(0, 1, A, A)]))
    assert not markov_equivalent(a, Mag(2, []))
