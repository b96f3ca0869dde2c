import random
from itertools import combinations

import pytest

from collabcausal.graphio import ParseError, dag_from_text, dag_to_text, mixed_from_text, mixed_to_text
from collabcausal.graphs import Dag, GraphError, Mag, Mark, Pag
from collabcausal.oracle import BudgetViolation, CiQuery, EntityOracle
from factories import random_dag
from oracles import brute_d_separated

# -- text format ---------------------------------------------------------------


def test_dag_text_round_trip():
    d = Dag(4, [(0, 1), (4, 2), (4, 3), (1, 3)], n_latent=1)
    assert dag_from_text(dag_to_text(d)) == d


def test_mixed_text_round_trip_with_all_marks():
    g = Pag(5, [(0, 1, "-", ">"), (2, 3, ">", ">"), (1, 4, "o", ">"), (0, 4, "o", "o"), (3, 4, ">", "o")])
    text = mixed_to_text(g)
    assert "0 -> 1" in text and "2 <> 3" in text and "1 o> 4" in text and "3 <o 4" in text
    assert mixed_from_text(text) == g


def test_comments_and_blank_lines_ignored():
    d = dag_from_text("# toy\nnodes 2 latents 0\n\n0 -> 1\n")
    assert d.edges == {(0, 1)}


@pytest.mark.parametrize("bad, line", [
    ("nodes 2 latents 0\n0 => 1\n", 2),
    ("nodes 2 latents 0\n0 -> 9\n", 2),
    ("nodes x latents 0\n", 1),
    ("nodes 3 latents 0\n0 -> 1\n1 -> \n", 3),
])
def test_parse_errors_name_the_line(bad, line):
    with pytest.raises(ParseError) as err:
        dag_from_text(bad)
    assert err.value.lineno == line
    assert f"line {line}" in str(err.value)


def test_dag_file_rejects_bidirected():
    with pytest.raises(GraphError):
        dag_from_text("nodes 2 latents 0\n0 <> 1\n")


# -- oracle --------------------------------------------------------------------


def test_register_is_idempotent_and_counts_distinct():
    o = EntityOracle(0, Dag(4, [(0, 1)]))
    assert o.intervention_count() == 0
    o.register_intervention(2)
    o.register_intervention(2)
    assert o.intervention_count() == 1
    for w in range(4):
        o.register_intervention(w)
    assert o.intervention_count() == 4


def test_latents_cannot_be_intervened():
    o = EntityOracle(0, Dag(2, [(2, 0), (2, 1)], 1))
    with pytest.raises(GraphError):
        o.register_intervention(2)
    with pytest.raises(GraphError):
        o.register_intervention(-1)


def test_intervention_requires_registration():
    o = EntityOracle(0, Dag(2, [(0, 1)]))
    with pytest.raises(BudgetViolation):
        o.independent(0, 1, target=0)
    o.register_intervention(0)
    assert o.independent(0, 1, target=0) is False


def test_intervention_semantics():
    # u -> v: dependent under do(u)
    o = EntityOracle(0, Dag(2, [(0, 1)]))
    o.register_intervention(0)
    o.register_intervention(1)
    assert not o.independent(0, 1, target=0)
    assert o.independent(0, 1, target=1)
    # latent confounder: both mutilations cut the path
    o = EntityOracle(1, Dag(2, [(2, 0), (2, 1)], 1))
    o.register_intervention(0)
    o.register_intervention(1)
    assert not o.independent(0, 1)
    assert o.independent(0, 1, target=0) and o.independent(0, 1, target=1)


def test_ancestor_iff_dependent_under_own_intervention():
    rng = random.Random(8)
    for _ in range(30):
        d = random_dag(rng, n_max=7, l_max=3)
        o = EntityOracle(0, d)
        for u in d.observed:
            o.register_intervention(u)
            for v in d.observed:
                if u != v:
                    assert (not o.independent(u, v, target=u)) == d.is_ancestor(u, v)


def test_oracle_matches_path_enumeration():
    rng = random.Random(21)
    for _ in range(15):
        d = random_dag(rng, n_max=6, l_max=2)
        o = EntityOracle(0, d)
        for w in d.observed:
            o.register_intervention(w)
        for target in [None] + list(d.observed):
            g = d if target is None else d.mutilate(target)
            for u, v in combinations(d.observed, 2):
                rest = [w for w in d.observed if w not in (u, v)]
                for k in range(min(len(rest), 2) + 1):
                    for z in combinations(rest, k):
                        assert o.independent(u, v, z, target) == brute_d_separated(g, u, v, z)


def test_query_validation():
    with pytest.raises(GraphError):
        CiQuery(1, 1)
    with pytest.raises(GraphError):
        CiQuery(0, 1, frozenset({0}))


def test_query_log_lines():
    o = EntityOracle(3, Dag(3, [(0, 1)]), log=True)
    o.register_intervention(2)
    o.independent(0, 1, {2})
    o.independent(0, 2, (), target=2)
    assert o.log_lines() == ["3 0 1 [2] target=obs -> dep", "3 0 2 [] target=2 -> indep"]


def test_noise_flips_answers_reproducibly():
    d = Dag(2, [(0, 1)])
    a = EntityOracle(0, d, noise=1.0)
    assert a.independent(0, 1) is True
    b1 = EntityOracle(0, d, noise=0.3, seed=4)
    b2 = EntityOracle(0, d, noise=0.3, seed=4)
    assert [b1.independent(0, 1) for _ in range(20)] == [b2.independent(0, 1) for _ in range(20)]
