"""Cluster and MAG recovery algorithms driven by per-entity CI oracles.

Every routine here talks to entities only through
:class:`~collabcausal.oracle.EntityOracle`, so every intervention an
algorithm relies on shows up in that entity's ledger.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.utils import UnionFind

from .graphs import Incidence, IncidenceSet, Mag, Mark, MixedGraph, Pag, incidence_set, mag_from_incidence
from .oracle import EntityOracle


class ParameterError(ValueError):
    pass


class PreconditionError(ValueError):
    """Input violates an algorithm precondition (for example mixed PAGs in one cluster)."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterResult:
    """Partition of the entity ids ``0 .. M-1`` into non-empty blocks.

    Blocks are stored sorted, and ordered by their smallest member, so two
    results describing the same partition compare equal.
    """

    blocks: Tuple[Tuple[int, ...], ...]
    low_confidence: bool = False

    def __init__(self, blocks: Iterable[Iterable[int]], low_confidence: bool = False):
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[:1]))
        seen: Set[int] = set()
        for b in canon:
            if not b:
                raise ValueError("cluster blocks must be non-empty")
            if seen.intersection(b):
                raise ValueError("cluster blocks must be disjoint")
            seen.update(b)
        if seen != set(range(len(seen))):
            raise ValueError("cluster blocks must cover 0 .. M-1 exactly")
        object.__setattr__(self, "blocks", canon)
        object.__setattr__(self, "low_confidence", low_confidence)

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    def labels(self) -> List[int]:
        out = [0] * self.size
        for idx, b in enumerate(self.blocks):
            for e in b:
                out[e] = idx
        return out

    def as_lists(self) -> List[List[int]]:
        return [list(b) for b in self.blocks]

    def __eq__(self, other):
        return isinstance(other, ClusterResult) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)


@dataclass(frozen=True)
class AlgoParams:
    """Algorithm parameters.

    ``sample_size_override`` replaces the theory-sized sample size;
    ``sample`` replaces the random sample altogether (used by the greedy
    baseline and by targeted tests).
    """

    alpha: float
    beta: float = 0.0
    delta: float = 0.05
    sample_size_override: Optional[int] = None
    rng_seed: int = 0
    sample: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError("alpha must lie in (0, 1]")
        if not 0.0 <= self.beta < self.alpha:
            raise ParameterError("beta must satisfy 0 <= beta < alpha")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        if self.sample_size_override is not None and self.sample_size_override < 0:
            raise ParameterError("sample size must be non-negative")

    def rng(self, salt: str) -> random.Random:
        return random.Random(f"{self.rng_seed}:{salt}")


@dataclass
class RecoveryReport:
    """Audit record of one algorithm run (JSON-serialisable via :meth:`to_dict`)."""

    algorithm: str
    interventions: Dict[int, int] = field(default_factory=dict)
    sample: List[int] = field(default_factory=list)
    pair_counts: Dict[Tuple[int, int], int] = field(default_factory=dict)
    partition: Optional[List[List[int]]] = None
    recovered: Dict[int, Mag] = field(default_factory=dict)
    extra: Dict[str, object] = field(default_factory=dict)

    def snapshot(self, oracles: Sequence[EntityOracle]) -> None:
        self.interventions = {o.entity: o.intervention_count() for o in oracles}

    @property
    def max_interventions(self) -> int:
        return max(self.interventions.values(), default=0)

    def to_dict(self) -> dict:
        from .graphio import mixed_to_text

        return {
            "algorithm": self.algorithm,
            "interventions": {str(k): v for k, v in sorted(self.interventions.items())},
            "sample": list(self.sample),
            "pair_counts": {f"{i},{j}": c for (i, j), c in sorted(self.pair_counts.items())},
            "partition": self.partition,
            "recovered": {str(k): mixed_to_text(g) for k, g in sorted(self.recovered.items())},
            "extra": self.extra,
        }


# ---------------------------------------------------------------------------
# sample sizes
# ---------------------------------------------------------------------------

def sample_size_alpha_beta(m: int, alpha: float, beta: float, delta: float) -> int:
    return math.ceil(4.0 * math.log(m / delta) / (alpha - beta) ** 2)


def sample_size_alpha(m: int, alpha: float, delta: float) -> int:
    return math.ceil(2.0 * math.log(m / delta) / alpha)


def sample_size_general(m: int, alpha: float, delta: float) -> int:
    return math.ceil(2.0 * math.log(2 * m / delta) / alpha)


def draw_sample(n: int, size: int, rng: random.Random) -> List[int]:
    """Uniform multiset of ``size`` nodes drawn with replacement.

    Draws are sequential, so a longer sample with the same seed extends a
    shorter one.
    """
    return [rng.randrange(n) for _ in range(size)]


def _resolve_sample(params: AlgoParams, n: int, m: int, theory_size: int, salt: str) -> List[int]:
    if params.sample is not None:
        for u in params.sample:
            if not 0 <= u < n:
                raise ParameterError(f"sample node {u} outside 0..{n - 1}")
        return list(params.sample)
    size = theory_size if params.sample_size_override is None else params.sample_size_override
    return draw_sample(n, size, params.rng(salt))


def _check_inputs(oracles: Sequence[EntityOracle], pags: Sequence[Pag]) -> int:
    if len(oracles) != len(pags) or not oracles:
        raise ParameterError("need one PAG per oracle and at least one entity")
    n = oracles[0].n
    for idx, (o, p) in enumerate(zip(oracles, pags)):
        if o.entity != idx:
            raise ParameterError("oracle entity ids must be 0 .. M-1 in order")
        if o.n != n or p.n != n:
            raise ParameterError("all entities must share the observed node set")
    return n


def max_pag_degree(pags: Sequence[MixedGraph]) -> int:
    return max((p.max_degree() for p in pags), default=0)


# ---------------------------------------------------------------------------
# per-node neighbourhood identification
# ---------------------------------------------------------------------------

def _circle_at_u(mu: Mark, mv: Mark) -> bool:
    # u o-o v  or  u o-> v
    return mu is Mark.CIRCLE and mv in (Mark.CIRCLE, Mark.ARROW)


def _bidirected_candidate(mu: Mark, mv: Mark) -> bool:
    # u o-o v,  u <-o v,  u o-> v
    return (mu, mv) in {(Mark.CIRCLE, Mark.CIRCLE), (Mark.ARROW, Mark.CIRCLE), (Mark.CIRCLE, Mark.ARROW)}


def identify_out_nbr(oracle: EntityOracle, pag: Pag, u: int) -> FrozenSet[int]:
    """Out-neighbours of ``u`` in the entity's MAG, using at most ``do(u)``."""
    out = set()
    for v, mu, mv in pag.neighbor_marks(u):
        if mu is Mark.TAIL and mv is Mark.ARROW:
            out.add(v)
        elif _circle_at_u(mu, mv):
            oracle.register_intervention(u)
            if not oracle.independent(u, v, target=u):
                out.add(v)
    return frozenset(out)


def is_bidirected(oracle: EntityOracle, pag: Pag, u: int, v: int) -> bool:
    """Single-edge test behind :func:`identify_bidirected`; registers ``do(u)`` and ``do(v)``."""
    marks = pag.marks(u, v)
    if marks is None:
        return False
    mu, mv = marks
    if mu is Mark.ARROW and mv is Mark.ARROW:
        return True
    if not _bidirected_candidate(mu, mv):
        return False
    oracle.register_intervention(u)
    oracle.register_intervention(v)
    return oracle.independent(u, v, target=u) and oracle.independent(u, v, target=v)


def identify_bidirected(oracle: EntityOracle, pag: Pag, u: int) -> FrozenSet[int]:
    """Bidirected neighbours of ``u``; registers ``do(u)`` and ``do(v)`` per candidate ``v``."""
    return frozenset(v for v in sorted(pag.neighbors(u)) if is_bidirected(oracle, pag, u, v))


def neighborhood(oracle: EntityOracle, pag: Pag, u: int) -> IncidenceSet:
    """Typed incidence set of ``u`` in the entity's MAG."""
    out = identify_out_nbr(oracle, pag, u)
    bi = identify_bidirected(oracle, pag, u)
    entries = []
    for v in pag.neighbors(u):
        if v in out:
            entries.append((v, Incidence.TAIL))
        elif v in bi:
            entries.append((v, Incidence.BIDIRECTED))
        else:
            entries.append((v, Incidence.HEAD))
    return frozenset(entries)


def recover_full_mag(oracle: EntityOracle, pag: Pag) -> Mag:
    """Recover the entity's MAG exactly with one intervention per node."""
    for u in range(pag.n):
        oracle.register_intervention(u)
    return mag_from_incidence(pag.n, {u: neighborhood(oracle, pag, u) for u in range(pag.n)})


# ---------------------------------------------------------------------------
# entity-graph helpers
# ---------------------------------------------------------------------------

def _components(m: int, edges: Iterable[Tuple[int, int]]) -> ClusterResult:
    uf = UnionFind(range(m))
    for i, j in edges:
        uf.union(i, j)
    return ClusterResult([sorted(s) for s in uf.to_sets()])


def _skeleton_key(p: MixedGraph) -> FrozenSet[Tuple[int, int]]:
    return p.skeleton()


# ---------------------------------------------------------------------------
# (alpha, beta)-clustering
# ---------------------------------------------------------------------------

def cluster_alpha_beta(oracles: Sequence[EntityOracle], pags: Sequence[Pag],
                       params: AlgoParams) -> Tuple[ClusterResult, RecoveryReport]:
    """Threshold clustering on neighbourhood agreement over a sampled node multiset.

    Entities ``i, j`` are linked when their neighbourhoods agree on at least
    ``(1 - (alpha + beta) / 2) * |S|`` sampled nodes (with multiplicity);
    clusters are the connected components.
    """
    m = len(oracles)
    n = _check_inputs(oracles, pags)
    sample = _resolve_sample(params, n, m, sample_size_alpha_beta(m, params.alpha, params.beta, params.delta),
                             "alpha-beta")
    distinct = sorted(set(sample))
    nbhd = [{u: neighborhood(o, p, u) for u in distinct} for o, p in zip(oracles, pags)]
    threshold = (1.0 - (params.alpha + params.beta) / 2.0) * len(sample)
    report = RecoveryReport("alpha-beta-bounded-degree", sample=list(sample))
    edges = []
    for i in range(m):
        for j in range(i + 1, m):
            count = sum(1 for u in sample if nbhd[i][u] == nbhd[j][u])
            report.pair_counts[(i, j)] = count
            if count >= threshold - 1e-9:
                edges.append((i, j))
    result = _components(m, edges)
    report.partition = result.as_lists()
    report.extra["threshold"] = threshold
    report.snapshot(oracles)
    return result, report


def recover_dominant_mags(oracles: Sequence[EntityOracle], pags: Sequence[Pag], clusters: ClusterResult,
                          params: AlgoParams) -> Tuple[Dict[int, Mag], RecoveryReport]:
    """Assemble one dominant graph per cluster by majority vote over sampled neighbourhoods.

    Each entity in a cluster draws one node ``u`` and reports ``N_i(u)``;
    for every node the neighbourhood agreeing with the most other reports
    wins (ties to the lowest entity id).  Nodes nobody drew are filled in by
    the cluster member that needs the fewest new interventions for them
    (ties to the fewest interventions so far, then the lowest id) and are
    listed under ``extra["fallback_nodes"]``.
    """
    n = _check_inputs(oracles, pags)
    rng = params.rng("recovery")
    report = RecoveryReport("alpha-beta-recovery")
    recovered: Dict[int, Mag] = {}
    fallbacks: List[Tuple[int, int]] = []
    winners: Dict[str, Dict[int, int]] = {}
    for idx, block in enumerate(clusters.blocks):
        draws = {i: rng.randrange(n) for i in block}
        t: Dict[int, List[int]] = defaultdict(list)
        for i in block:
            t[draws[i]].append(i)
        chosen: Dict[int, IncidenceSet] = {}
        win: Dict[int, int] = {}
        for u in range(n):
            members = t.get(u, [])
            if not members:
                i = _cheapest_entity(oracles, pags, block, u)
                fallbacks.append((u, i))
                members = [i]
            reports = {i: neighborhood(oracles[i], pags[i], u) for i in members}
            ncount = {i: sum(1 for j in members if j != i and reports[j] == reports[i]) for i in members}
            best = min(members, key=lambda i: (-ncount[i], i))
            chosen[u] = reports[best]
            win[u] = best
        dom = mag_from_incidence(n, chosen)
        for i in block:
            recovered[i] = dom
        winners[str(idx)] = win
    report.recovered = recovered
    report.partition = clusters.as_lists()
    report.extra["fallback_nodes"] = [list(p) for p in fallbacks]
    report.extra["winners"] = winners
    report.snapshot(oracles)
    return recovered, report


def _needed_interventions(pag: Pag, u: int) -> Set[int]:
    need: Set[int] = set()
    for v, mu, mv in pag.neighbor_marks(u):
        if _circle_at_u(mu, mv):
            need.add(u)
        if _bidirected_candidate(mu, mv):
            need.update((u, v))
    return need


def _cheapest_entity(oracles, pags, block, u) -> int:
    def cost(i):
        new = _needed_interventions(pags[i], u) - oracles[i].ledger.targets
        return (len(new), oracles[i].intervention_count(), i)

    return min(block, key=cost)


# ---------------------------------------------------------------------------
# alpha-clustering
# ---------------------------------------------------------------------------

def _same_skeleton_pairs(pags: Sequence[Pag]) -> List[Tuple[int, int]]:
    keys = [_skeleton_key(p) for p in pags]
    m = len(pags)
    return [(i, j) for i in range(m) for j in range(i + 1, m) if keys[i] == keys[j]]


def cluster_no_latents(oracles: Sequence[EntityOracle], pags: Sequence[Pag],
                       params: AlgoParams) -> Tuple[ClusterResult, RecoveryReport]:
    """Link entities whose PAG skeletons agree and whose out-neighbours agree on every sampled node."""
    m = len(oracles)
    n = _check_inputs(oracles, pags)
    sample = _resolve_sample(params, n, m, sample_size_alpha(m, params.alpha, params.delta), "no-latents")
    distinct = sorted(set(sample))
    out = [{u: identify_out_nbr(o, p, u) for u in distinct} for o, p in zip(oracles, pags)]
    adj = [{u: p.neighbors(u) for u in distinct} for p in pags]
    edges = [(i, j) for i, j in _same_skeleton_pairs(pags)
             if all(out[i][u] == out[j][u] and adj[i][u] == adj[j][u] for u in distinct)]
    result = _components(m, edges)
    report = RecoveryReport("no-latents", sample=list(sample), partition=result.as_lists())
    report.snapshot(oracles)
    return result, report


def cluster_alpha_bounded(oracles: Sequence[EntityOracle], pags: Sequence[Pag],
                          params: AlgoParams) -> Tuple[ClusterResult, RecoveryReport]:
    """Link entities whose PAG skeletons agree and whose neighbourhoods match on every sampled node."""
    m = len(oracles)
    n = _check_inputs(oracles, pags)
    sample = _resolve_sample(params, n, m, sample_size_alpha(m, params.alpha, params.delta), "alpha-bounded")
    distinct = sorted(set(sample))
    nbhd = [{u: neighborhood(o, p, u) for u in distinct} for o, p in zip(oracles, pags)]
    edges = [(i, j) for i, j in _same_skeleton_pairs(pags)
             if all(nbhd[i][u] == nbhd[j][u] for u in distinct)]
    result = _components(m, edges)
    report = RecoveryReport("alpha-bounded-degree", sample=list(sample), partition=result.as_lists())
    report.snapshot(oracles)
    return result, report


def cluster_alpha_general(oracles: Sequence[EntityOracle], pags: Sequence[Pag],
                          params: AlgoParams) -> Tuple[ClusterResult, RecoveryReport]:
    """Out-neighbour clustering followed by randomized bidirected-edge refinement.

    Each refinement round every entity intervenes on one uniformly drawn
    node.  Inside a component, two linked entities that drew the same node
    ``v`` and disagree on whether ``v`` is a bidirected neighbour of some
    sampled ``u`` expose a mixed component: everyone in it then intervenes
    on ``v`` and all links contradicting on ``v`` are cut.  The loop stops
    when a round removes nothing, or after ``k**2 + 1`` rounds where ``k`` is
    the current component count.
    """
    m = len(oracles)
    n = _check_inputs(oracles, pags)
    sample = _resolve_sample(params, n, m, sample_size_general(m, params.alpha, params.delta), "alpha-general")
    distinct = sorted(set(sample))
    report = RecoveryReport("alpha-general", sample=list(sample))
    out = [{u: identify_out_nbr(o, p, u) for u in distinct} for o, p in zip(oracles, pags)]
    adj = [{u: p.neighbors(u) for u in distinct} for p in pags]
    edges: Set[Tuple[int, int]] = {
        (i, j) for i, j in _same_skeleton_pairs(pags)
        if all(out[i][u] == out[j][u] and adj[i][u] == adj[j][u] for u in distinct)
    }
    rng = params.rng("alpha-general-refine")
    bi_cache: Dict[Tuple[int, int, int], bool] = {}

    def bi(i: int, u: int, v: int) -> bool:
        # v in Bi_i(u); the test itself registers do(u) and do(v) when needed
        key = (i, u, v)
        if key not in bi_cache:
            bi_cache[key] = is_bidirected(oracles[i], pags[i], u, v)
        return bi_cache[key]

    def disagree(i: int, j: int, v: int) -> bool:
        return any(bi(i, u, v) != bi(j, u, v) for u in distinct if u != v)

    itr = 0
    history = []
    while True:
        itr += 1
        current = _components(m, edges)
        pi = [rng.randrange(n) for _ in range(m)]
        for i in range(m):
            oracles[i].register_intervention(pi[i])
        removed: Set[Tuple[int, int]] = set()
        detections = []
        for block in current.blocks:
            members = set(block)
            block_edges = sorted((i, j) for i, j in edges if i in members)
            trigger = None
            for i, j in block_edges:
                if pi[i] == pi[j] and disagree(i, j, pi[i]):
                    if trigger is None or pi[i] < trigger:
                        trigger = pi[i]
            if trigger is None:
                continue
            v = trigger
            detections.append(v)
            for i in block:
                oracles[i].register_intervention(v)
            for i, j in block_edges:
                if disagree(i, j, v):
                    removed.add((i, j))
        edges -= removed
        history.append({"components": current.k, "detections": detections, "removed": len(removed)})
        cap = max(current.k, 1) ** 2 + 1
        if not removed or itr >= cap:
            break
    result = _components(m, edges)
    report.partition = result.as_lists()
    report.extra["iterations"] = itr
    report.extra["history"] = history
    report.snapshot(oracles)
    return result, report


# ---------------------------------------------------------------------------
# clusters to graphs
# ---------------------------------------------------------------------------

def meta_recover(oracles: Sequence[EntityOracle], pags: Sequence[Pag],
                 clusters: ClusterResult) -> Tuple[Dict[int, Mag], RecoveryReport]:
    """Recover one MAG per cluster by spreading single-node interventions round-robin.

    Node ``u`` is handled by the cluster member at position ``u mod |C|``.
    Every PAG edge ``(u, v)`` becomes ``u -> v`` if ``v`` is an out-neighbour
    of ``u`` for ``u``'s handler, ``u <- v`` if the converse holds for
    ``v``'s handler, and ``u <-> v`` otherwise.
    """
    n = _check_inputs(oracles, pags)
    recovered: Dict[int, Mag] = {}
    assignment: Dict[str, Dict[int, int]] = {}
    for idx, block in enumerate(clusters.blocks):
        pag = pags[block[0]]
        for i in block[1:]:
            if pags[i] != pag:
                raise PreconditionError(f"entities {block[0]} and {i} share a cluster but not a PAG")
        phi = {u: block[u % len(block)] for u in range(n)}
        out = {}
        for u in range(n):
            oracles[phi[u]].register_intervention(u)
            out[u] = identify_out_nbr(oracles[phi[u]], pag, u)
        edges = []
        for u, v, _, _ in pag.edges():
            if v in out[u]:
                edges.append((u, v, Mark.TAIL, Mark.ARROW))
            elif u in out[v]:
                edges.append((u, v, Mark.ARROW, Mark.TAIL))
            else:
                edges.append((u, v, Mark.ARROW, Mark.ARROW))
        g = Mag(n, edges)
        for i in block:
            recovered[i] = g
        assignment[str(idx)] = phi
    report = RecoveryReport("meta", recovered=recovered, partition=clusters.as_lists())
    report.extra["assignment"] = assignment
    report.snapshot(oracles)
    return recovered, report


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def pag_incidence(p: MixedGraph, u: int) -> FrozenSet[Tuple[int, str, str]]:
    return frozenset((v, mu.value, mv.value) for v, mu, mv in p.neighbor_marks(u))


def pag_similarity(pags: Sequence[MixedGraph]) -> Dict[Tuple[int, int], int]:
    """Number of nodes with identical marked PAG neighbourhoods, per entity pair."""
    sigs = [[pag_incidence(p, u) for u in p.nodes] for p in pags]
    m = len(pags)
    return {(i, j): sum(a == b for a, b in zip(sigs[i], sigs[j]))
            for i in range(m) for j in range(i + 1, m)}


def baseline_pag_cluster(pags: Sequence[MixedGraph], k: int) -> ClusterResult:
    """Split entities into ``k`` groups using PAG similarity alone (no interventions).

    ``k = 2`` uses an exact global minimum cut; larger ``k`` cuts the
    ``k - 1`` weakest links of a maximum spanning tree.  The result is
    flagged ``low_confidence`` when all similarities are equal, in which case
    any split is as good as another.
    """
    m = len(pags)
    if k < 1 or k > m:
        raise ParameterError(f"k must lie in 1..{m}")
    w = pag_similarity(pags)
    flat = len(set(w.values())) <= 1
    if k == 1:
        return ClusterResult([list(range(m))], low_confidence=flat)
    if k == 2:
        g = nx.Graph()
        g.add_nodes_from(range(m))
        for (i, j), c in w.items():
            g.add_edge(i, j, weight=c)
        _, (a, b) = nx.stoer_wagner(g)
        return ClusterResult([a, b], low_confidence=flat)
    uf = UnionFind(range(m))
    groups = m
    for (i, j), _ in sorted(w.items(), key=lambda kv: (-kv[1], kv[0])):
        if groups == k:
            break
        if uf[i] != uf[j]:
            uf.union(i, j)
            groups -= 1
    return ClusterResult([sorted(s) for s in uf.to_sets()], low_confidence=flat)


def greedy_sample_selection(pags: Sequence[MixedGraph], budget: int) -> List[int]:
    """Nodes by ascending total PAG degree (ties by id), cycled to ``budget`` entries."""
    if budget < 1:
        raise ParameterError("budget must be at least 1")
    n = pags[0].n
    order = sorted(range(n), key=lambda u: (sum(p.degree(u) for p in pags), u))
    return [order[i % n] for i in range(budget)]
