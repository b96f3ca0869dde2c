"""Causal graph data model: DAGs with latents, MAGs, PAGs and separation queries.

Observed nodes are the integers ``0 .. n-1``.  Latent nodes of a :class:`Dag`
live in their own id range ``n .. n+l-1`` and never appear in a mixed graph.
All graph objects are immutable after construction.
"""

from __future__ import annotations

from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set, Tuple


class GraphError(ValueError):
    """Raised for malformed graphs or invalid queries."""


class CycleError(GraphError):
    def __init__(self, cycle_hint):
        self.cycle_hint = cycle_hint
        super().__init__(f"directed cycle through {cycle_hint}")


class Mark(str, Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


class Incidence(str, Enum):
    """Edge type seen from the owner of an incidence set."""

    TAIL = "tail"  # owner -> v
    HEAD = "head"  # owner <- v
    BIDIRECTED = "bidirected"  # owner <-> v


IncidenceSet = FrozenSet[Tuple[int, Incidence]]

# (neighbor, mark at self, mark at neighbor)
_MarkedNbr = Tuple[int, Mark, Mark]


def _as_mark(m) -> Mark:
    return m if isinstance(m, Mark) else Mark(m)


# ---------------------------------------------------------------------------
# separation core
# ---------------------------------------------------------------------------

def _ancestor_closure(parents: Mapping[int, Iterable[int]], seeds: Iterable[int]) -> Set[int]:
    out: Set[int] = set()
    stack = list(seeds)
    while stack:
        w = stack.pop()
        if w in out:
            continue
        out.add(w)
        stack.extend(parents[w])
    return out


def _connected_set(adj, parents, source: int, z: FrozenSet[int]) -> Set[int]:
    """Nodes reachable from ``source`` by a walk that is open given ``z``.

    A walk is open when every non-collider is outside ``z`` and every collider
    is an ancestor of ``z``; for d-/m-separation this is equivalent to the
    existence of an open simple path.
    """
    anc_z = _ancestor_closure(parents, z)
    reached: Set[int] = set()
    seen: Set[Tuple[int, bool]] = set()
    stack: List[Tuple[int, bool]] = []
    for y, _, my in adj[source]:
        stack.append((y, my is Mark.ARROW))
    while stack:
        state = stack.pop()
        if state in seen:
            continue
        seen.add(state)
        w, into = state
        if w == source:
            continue
        reached.add(w)
        in_z = w in z
        for y, mw, my in adj[w]:
            if into and mw is Mark.ARROW:
                if w not in anc_z:
                    continue
            elif in_z:
                continue
            nxt = (y, my is Mark.ARROW)
            if nxt not in seen:
                stack.append(nxt)
    return reached - z


def _check_query(n: int, u: int, v: int, z: Iterable[int]) -> FrozenSet[int]:
    z = frozenset(z)
    if u == v:
        raise GraphError("separation query needs two distinct nodes")
    for w in (u, v):
        if not 0 <= w < n:
            raise GraphError(f"node {w} is not an observed node")
    if u in z or v in z:
        raise GraphError("conditioning set contains a query endpoint")
    for w in z:
        if not 0 <= w < n:
            raise GraphError(f"conditioning node {w} is not observed")
    return z


# ---------------------------------------------------------------------------
# DAG over observed + latent nodes
# ---------------------------------------------------------------------------

class Dag:
    """Causal DAG over ``n`` observed and ``n_latent`` latent nodes."""

    __slots__ = ("n", "n_latent", "edges", "_parents", "_children", "__dict__")

    def __init__(self, n: int, edges: Iterable[Tuple[int, int]] = (), n_latent: int = 0):
        if n < 1:
            raise GraphError("a DAG needs at least one observed node")
        if n_latent < 0:
            raise GraphError("latent count must be non-negative")
        self.n = n
        self.n_latent = n_latent
        total = n + n_latent
        parents: Dict[int, Set[int]] = {w: set() for w in range(total)}
        children: Dict[int, Set[int]] = {w: set() for w in range(total)}
        edge_set = set()
        for a, b in edges:
            if not (0 <= a < total and 0 <= b < total):
                raise GraphError(f"edge ({a}, {b}) has an undeclared endpoint")
            if a == b:
                raise CycleError(a)
            if b >= n:
                raise GraphError(f"latent node {b} cannot have parents")
            edge_set.add((a, b))
            parents[b].add(a)
            children[a].add(b)
        self.edges: FrozenSet[Tuple[int, int]] = frozenset(edge_set)
        self._parents = {w: frozenset(p) for w, p in parents.items()}
        self._children = {w: frozenset(c) for w, c in children.items()}
        self.topological_order()  # raises on cycles

    @property
    def observed(self) -> range:
        return range(self.n)

    @property
    def latents(self) -> range:
        return range(self.n, self.n + self.n_latent)

    @property
    def nodes(self) -> range:
        return range(self.n + self.n_latent)

    def is_latent(self, w: int) -> bool:
        return w >= self.n

    def parents(self, w: int) -> FrozenSet[int]:
        return self._parents[w]

    def children(self, w: int) -> FrozenSet[int]:
        return self._children[w]

    def observed_edges(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((a, b) for a, b in self.edges if a < self.n)

    def topological_order(self) -> List[int]:
        indeg = {w: len(p) for w, p in self._parents.items()}
        ready = sorted(w for w, d in indeg.items() if d == 0)
        order = []
        while ready:
            w = ready.pop()
            order.append(w)
            for c in sorted(self._children[w]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(indeg):
            raise CycleError(sorted(w for w, d in indeg.items() if d > 0)[:5])
        return order

    def ancestors(self, seeds: Iterable[int]) -> Set[int]:
        """Ancestors of ``seeds`` (each node is its own ancestor)."""
        return _ancestor_closure(self._parents, seeds)

    def is_ancestor(self, a: int, b: int) -> bool:
        return a in self.ancestors([b])

    def mutilate(self, target: int) -> "Dag":
        """Graph of ``do(target)``: every edge into ``target`` removed."""
        return Dag(self.n, [(a, b) for a, b in self.edges if b != target], self.n_latent)

    @cached_property
    def _marked_adjacency(self) -> Dict[int, List[_MarkedNbr]]:
        adj: Dict[int, List[_MarkedNbr]] = {w: [] for w in self.nodes}
        for a, b in sorted(self.edges):
            adj[a].append((b, Mark.TAIL, Mark.ARROW))
            adj[b].append((a, Mark.ARROW, Mark.TAIL))
        return adj

    def connected_set(self, u: int, z: Iterable[int] = ()) -> Set[int]:
        """Observed nodes d-connected to ``u`` given ``z``."""
        got = _connected_set(self._marked_adjacency, self._parents, u, frozenset(z))
        return {w for w in got if w < self.n}

    def with_edges(self, edges: Iterable[Tuple[int, int]]) -> "Dag":
        return Dag(self.n, edges, self.n_latent)

    def __eq__(self, other):
        return (
            isinstance(other, Dag)
            and self.n == other.n
            and self.n_latent == other.n_latent
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n, self.n_latent, self.edges))

    def __repr__(self):
        es = ", ".join(f"{a}->{b}" for a, b in sorted(self.edges))
        return f"Dag(n={self.n}, latents={self.n_latent}, [{es}])"


# ---------------------------------------------------------------------------
# Mixed graphs
# ---------------------------------------------------------------------------

class MixedGraph:
    """Graph over observed nodes whose edges carry a mark at each endpoint.

    Edges are stored canonically as ``(u, v) -> (mark at u, mark at v)``
    with ``u < v``.
    """

    allowed_marks: FrozenSet[Mark] = frozenset(Mark)

    __slots__ = ("n", "_marks", "__dict__")

    def __init__(self, n: int, edges: Iterable[Tuple[int, int, object, object]] = ()):
        if n < 1:
            raise GraphError("a graph needs at least one node")
        self.n = n
        marks: Dict[Tuple[int, int], Tuple[Mark, Mark]] = {}
        for u, v, mu, mv in edges:
            mu, mv = _as_mark(mu), _as_mark(mv)
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise GraphError(f"bad edge ({u}, {v}) for {n} nodes")
            if mu not in self.allowed_marks or mv not in self.allowed_marks:
                raise GraphError(f"mark not allowed in {type(self).__name__}: {mu.value}{mv.value}")
            if mu is Mark.TAIL and mv is Mark.TAIL:
                raise GraphError("undirected edges are not supported")
            key, val = ((u, v), (mu, mv)) if u < v else ((v, u), (mv, mu))
            if key in marks and marks[key] != val:
                raise GraphError(f"conflicting marks for edge {key}")
            marks[key] = val
        self._marks = marks

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_marks(cls, n: int, marks: Mapping[Tuple[int, int], Tuple[Mark, Mark]]):
        return cls(n, [(u, v, mu, mv) for (u, v), (mu, mv) in marks.items()])

    def marks_dict(self) -> Dict[Tuple[int, int], Tuple[Mark, Mark]]:
        return dict(self._marks)

    # -- queries ---------------------------------------------------------------

    @property
    def nodes(self) -> range:
        return range(self.n)

    def edges(self) -> Iterator[Tuple[int, int, Mark, Mark]]:
        for (u, v), (mu, mv) in sorted(self._marks.items()):
            yield u, v, mu, mv

    def num_edges(self) -> int:
        return len(self._marks)

    def marks(self, u: int, v: int) -> Optional[Tuple[Mark, Mark]]:
        """``(mark at u, mark at v)`` or ``None`` when non-adjacent."""
        if u < v:
            return self._marks.get((u, v))
        got = self._marks.get((v, u))
        return None if got is None else (got[1], got[0])

    def adjacent(self, u: int, v: int) -> bool:
        return self.marks(u, v) is not None

    @cached_property
    def _marked_adjacency(self) -> Dict[int, List[_MarkedNbr]]:
        adj: Dict[int, List[_MarkedNbr]] = {w: [] for w in self.nodes}
        for (u, v), (mu, mv) in sorted(self._marks.items()):
            adj[u].append((v, mu, mv))
            adj[v].append((u, mv, mu))
        return adj

    def neighbors(self, u: int) -> FrozenSet[int]:
        return frozenset(v for v, _, _ in self._marked_adjacency[u])

    def neighbor_marks(self, u: int) -> List[_MarkedNbr]:
        return list(self._marked_adjacency[u])

    def degree(self, u: int) -> int:
        return len(self._marked_adjacency[u])

    def max_degree(self) -> int:
        return max(self.degree(u) for u in self.nodes)

    def skeleton(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(self._marks)

    @cached_property
    def _parents(self) -> Dict[int, FrozenSet[int]]:
        par: Dict[int, Set[int]] = {w: set() for w in self.nodes}
        for (u, v), (mu, mv) in self._marks.items():
            if mu is Mark.TAIL and mv is Mark.ARROW:
                par[v].add(u)
            elif mv is Mark.TAIL and mu is Mark.ARROW:
                par[u].add(v)
        return {w: frozenset(p) for w, p in par.items()}

    def parents(self, u: int) -> FrozenSet[int]:
        return self._parents[u]

    def ancestors(self, seeds: Iterable[int]) -> Set[int]:
        return _ancestor_closure(self._parents, seeds)

    def connected_set(self, u: int, z: Iterable[int] = ()) -> Set[int]:
        """Nodes m-connected to ``u`` given ``z`` (circle marks act as non-arrows)."""
        return _connected_set(self._marked_adjacency, self._parents, u, frozenset(z))

    def __eq__(self, other):
        return type(self) is type(other) and self.n == other.n and self._marks == other._marks

    def __hash__(self):
        return hash((type(self).__name__, self.n, frozenset(self._marks.items())))

    def __repr__(self):
        es = ", ".join(f"{u} {mu.value if mu is not Mark.ARROW else '<'}{mv.value} {v}"
                       for u, v, mu, mv in self.edges())
        return f"{type(self).__name__}(n={self.n}, [{es}])"


class Mag(MixedGraph):
    """Mixed graph with directed and bidirected edges only."""

    allowed_marks = frozenset({Mark.TAIL, Mark.ARROW})

    def out_neighbors(self, u: int) -> FrozenSet[int]:
        return frozenset(v for v, mu, mv in self._marked_adjacency[u]
                         if mu is Mark.TAIL and mv is Mark.ARROW)

    def in_neighbors(self, u: int) -> FrozenSet[int]:
        return frozenset(v for v, mu, mv in self._marked_adjacency[u]
                         if mu is Mark.ARROW and mv is Mark.TAIL)

    def bi_neighbors(self, u: int) -> FrozenSet[int]:
        return frozenset(v for v, mu, mv in self._marked_adjacency[u]
                         if mu is Mark.ARROW and mv is Mark.ARROW)


class Pag(MixedGraph):
    """Equivalence-class graph; circle marks allowed."""


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def d_separated(d: Dag, u: int, v: int, z: Iterable[int] = ()) -> bool:
    z = _check_query(d.n, u, v, z)
    return v not in d.connected_set(u, z)


def m_separated(g: MixedGraph, u: int, v: int, z: Iterable[int] = ()) -> bool:
    z = _check_query(g.n, u, v, z)
    return v not in g.connected_set(u, z)


def incidence_set(g: Mag, u: int) -> IncidenceSet:
    if not 0 <= u < g.n:
        raise GraphError(f"unknown node {u}")
    entries = []
    for v, mu, mv in g.neighbor_marks(u):
        if mu is Mark.TAIL:
            entries.append((v, Incidence.TAIL))
        elif mv is Mark.TAIL:
            entries.append((v, Incidence.HEAD))
        else:
            entries.append((v, Incidence.BIDIRECTED))
    return frozenset(entries)


def mag_from_incidence(n: int, incidences: Mapping[int, Iterable[Tuple[int, Incidence]]]) -> Mag:
    """Assemble a MAG from per-node incidence sets; later nodes win on conflict."""
    marks: Dict[Tuple[int, int], Tuple[Mark, Mark]] = {}
    for u in sorted(incidences):
        for key in [k for k in marks if u in k]:
            del marks[key]
        for v, kind in incidences[u]:
            mu, mv = {
                Incidence.TAIL: (Mark.TAIL, Mark.ARROW),
                Incidence.HEAD: (Mark.ARROW, Mark.TAIL),
                Incidence.BIDIRECTED: (Mark.ARROW, Mark.ARROW),
            }[Incidence(kind)]
            if u < v:
                marks[(u, v)] = (mu, mv)
            else:
                marks[(v, u)] = (mv, mu)
    return Mag.from_marks(n, marks)


def node_diff(g1: Mag, g2: Mag) -> Set[int]:
    """Nodes whose incidence sets differ; its size is the node distance."""
    if g1.n != g2.n:
        raise GraphError("node distance needs graphs over the same nodes")
    return {u for u in range(g1.n) if incidence_set(g1, u) != incidence_set(g2, u)}


def node_distance(g1: Mag, g2: Mag) -> int:
    return len(node_diff(g1, g2))


def dag_to_mag(d: Dag) -> Mag:
    """Marginalize the latents of ``d`` into its MAG.

    Observed ``u, v`` are adjacent iff an inducing path relative to the
    latents exists, which holds iff they are d-connected given their
    observed ancestors.
    """
    anc = {w: d.ancestors([w]) for w in d.observed}
    edges = []
    for u, v in combinations(d.observed, 2):
        z = {w for w in (anc[u] | anc[v]) if w < d.n} - {u, v}
        if v in d.connected_set(u, z):
            if u in anc[v]:
                edges.append((u, v, Mark.TAIL, Mark.ARROW))
            elif v in anc[u]:
                edges.append((u, v, Mark.ARROW, Mark.TAIL))
            else:
                edges.append((u, v, Mark.ARROW, Mark.ARROW))
    return Mag(d.n, edges)


def _has_directed_cycle(g: MixedGraph) -> Optional[int]:
    for (u, v), (mu, mv) in g.marks_dict().items():
        if mu is Mark.TAIL and mv is Mark.ARROW and v in g.ancestors([u]):
            return u
        if mv is Mark.TAIL and mu is Mark.ARROW and u in g.ancestors([v]):
            return v
    return None


def is_ancestral(g: MixedGraph) -> Tuple[bool, str]:
    node = _has_directed_cycle(g)
    if node is not None:
        return False, f"directed cycle through node {node}"
    for (u, v), (mu, mv) in g.marks_dict().items():
        if mu is Mark.ARROW and mv is Mark.ARROW:
            if u in g.ancestors([v]) or v in g.ancestors([u]):
                return False, f"bidirected edge {u}<->{v} joins ancestrally related nodes"
    return True, ""


def find_separator(g: MixedGraph, u: int, v: int) -> Optional[FrozenSet[int]]:
    """Some ``Z`` m-separating non-adjacent ``u, v``, or ``None``.

    Tries the observed-ancestor set first, then every subset (exponential).
    """
    first = frozenset(g.ancestors([u, v]) - {u, v})
    if v not in g.connected_set(u, first):
        return first
    rest = [w for w in g.nodes if w not in (u, v)]
    for size in range(len(rest) + 1):
        for z in combinations(rest, size):
            if v not in g.connected_set(u, z):
                return frozenset(z)
    return None


def validate_mag(g: MixedGraph) -> Tuple[bool, str]:
    """Check ancestrality and maximality; returns ``(ok, first violation)``."""
    for _, _, mu, mv in g.edges():
        if Mark.CIRCLE in (mu, mv):
            return False, "circle mark in a MAG"
    ok, why = is_ancestral(g)
    if not ok:
        return False, why
    for u, v in combinations(g.nodes, 2):
        if not g.adjacent(u, v) and find_separator(g, u, v) is None:
            return False, f"non-adjacent pair ({u}, {v}) has no m-separating set"
    return True, ""


def separation_table(g, nodes: Optional[Iterable[int]] = None) -> Iterator[Tuple[int, FrozenSet[int], FrozenSet[int]]]:
    """Yield ``(u, Z, connected)`` for every ``u`` and every ``Z`` over the observed nodes.

    ``connected`` holds the observed ``v > u`` outside ``Z`` that are
    connected to ``u`` given ``Z``.  Works on a Dag or a MixedGraph.
    """
    n = g.n
    nodes = list(range(n)) if nodes is None else list(nodes)
    for u in nodes:
        rest = [w for w in range(n) if w != u]
        for size in range(len(rest) + 1):
            for z in combinations(rest, size):
                zs = frozenset(z)
                got = g.connected_set(u, zs)
                yield u, zs, frozenset(w for w in got if u < w < n and w not in zs)


def unshielded_colliders(g: MixedGraph) -> Set[Tuple[int, int, int]]:
    out = set()
    for c in g.nodes:
        into = sorted(v for v, mc, _ in g.neighbor_marks(c) if mc is Mark.ARROW)
        for a, b in combinations(into, 2):
            if not g.adjacent(a, b):
                out.add((a, c, b))
    return out


def skeleton_components(g: MixedGraph) -> List[List[int]]:
    seen: Set[int] = set()
    comps = []
    for s0 in g.nodes:
        if s0 in seen:
            continue
        comp, stack = [], [s0]
        seen.add(s0)
        while stack:
            w = stack.pop()
            comp.append(w)
            for y in g.neighbors(w):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def markov_equivalent(g1: MixedGraph, g2: MixedGraph) -> bool:
    """Same m-separation relation over all ``(u, v, Z)``.

    Exhaustive, but only conditioning sets inside the connected component of
    ``u`` matter, which keeps the sweep affordable at desk scale.
    """
    if g1.n != g2.n or g1.skeleton() != g2.skeleton():
        return False
    if unshielded_colliders(g1) != unshielded_colliders(g2):
        return False
    for comp in skeleton_components(g1):
        for u in comp[:-1]:
            rest = [w for w in comp if w != u]
            for size in range(len(rest)):
                for z in combinations(rest, size):
                    zs = frozenset(z)
                    a = {w for w in g1.connected_set(u, zs) if w > u}
                    b = {w for w in g2.connected_set(u, zs) if w > u}
                    if a != b:
                        return False
    return True
