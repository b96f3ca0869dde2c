"""Sound PAG oracles built from a known MAG.

Three constructions are offered:

* :func:`skeleton_pag` keeps the adjacencies and puts a circle on every
  endpoint.  Trivially sound.
* :func:`equivalence_class_pag` enumerates every mark assignment over the
  skeleton, keeps the Markov-equivalent MAGs and marks an endpoint with the
  mark shared by all of them (circle otherwise).  Exact, exponential in the
  edge count and therefore capped.
* :func:`orientation_rule_pag` runs the standard FCI orientation rules with
  the MAG answering every collider question.  Gives the same output as the
  enumerator on any MAG without selection variables and scales to
  benchmark sizes; it is what the FCI-style baseline uses.
"""

from __future__ import annotations

from itertools import combinations, product
from typing import Dict, Iterator, List, Optional, Set, Tuple

from .graphs import GraphError, Mag, Mark, MixedGraph, Pag, is_ancestral, markov_equivalent

MAX_ENUMERATION_EDGES = 9

_ORIENTATIONS = ((Mark.TAIL, Mark.ARROW), (Mark.ARROW, Mark.TAIL), (Mark.ARROW, Mark.ARROW))


class PagTooLarge(GraphError):
    """The skeleton is too large for brute-force enumeration."""


def skeleton_pag(g: MixedGraph) -> Pag:
    return Pag(g.n, [(u, v, Mark.CIRCLE, Mark.CIRCLE) for u, v, _, _ in g.edges()])


def _unshielded_triples(g: MixedGraph) -> List[Tuple[int, int, int]]:
    out = []
    for c in g.nodes:
        for a, b in combinations(sorted(g.neighbors(c)), 2):
            if not g.adjacent(a, b):
                out.append((a, c, b))
    return out


def markov_class(g: Mag, max_edges: int = MAX_ENUMERATION_EDGES) -> List[Mag]:
    """All MAGs over ``g``'s skeleton that are Markov equivalent to ``g``."""
    keys = sorted(g.skeleton())
    if len(keys) > max_edges:
        raise PagTooLarge(f"{len(keys)} edges exceed the enumeration cap of {max_edges}")
    index = {k: i for i, k in enumerate(keys)}

    def mark_at(assign, a, c):
        k = (a, c) if a < c else (c, a)
        pair = _ORIENTATIONS[assign[index[k]]]
        return pair[1] if a < c else pair[0]

    triples = [(a, c, b, g.marks(a, c)[1] is Mark.ARROW and g.marks(b, c)[1] is Mark.ARROW)
               for a, c, b in _unshielded_triples(g)]
    members = []
    for assign in product(range(3), repeat=len(keys)):
        if any((mark_at(assign, a, c) is Mark.ARROW and mark_at(assign, b, c) is Mark.ARROW) != coll
               for a, c, b, coll in triples):
            continue
        cand = Mag(g.n, [(u, v) + _ORIENTATIONS[o] for (u, v), o in zip(keys, assign)])
        if not is_ancestral(cand)[0]:
            continue
        # equivalence to a maximal graph over the same skeleton implies maximality
        if cand == g or markov_equivalent(g, cand):
            members.append(cand)
    return members


def equivalence_class_pag(g: Mag, max_edges: int = MAX_ENUMERATION_EDGES) -> Pag:
    """Invariant-mark PAG of ``g`` by brute-force class enumeration.

    Raises
    ------
    PagTooLarge
        When ``g`` has more than ``max_edges`` edges; callers fall back to
        :func:`skeleton_pag` or :func:`orientation_rule_pag`.
    """
    members = markov_class(g, max_edges)
    edges = []
    for u, v, _, _ in g.edges():
        seen_u = {m.marks(u, v)[0] for m in members}
        seen_v = {m.marks(u, v)[1] for m in members}
        mu = seen_u.pop() if len(seen_u) == 1 else Mark.CIRCLE
        mv = seen_v.pop() if len(seen_v) == 1 else Mark.CIRCLE
        edges.append((u, v, mu, mv))
    return Pag(g.n, edges)


# ---------------------------------------------------------------------------
# orientation rules
# ---------------------------------------------------------------------------

class _Marks:
    """Mutable endpoint marks: ``at[(a, b)]`` is the mark at ``b`` on edge a-b."""

    def __init__(self, g: MixedGraph):
        self.n = g.n
        self.adj: Dict[int, Set[int]] = {w: set(g.neighbors(w)) for w in g.nodes}
        self.at: Dict[Tuple[int, int], Mark] = {}
        for u, v, _, _ in g.edges():
            self.at[(u, v)] = Mark.CIRCLE
            self.at[(v, u)] = Mark.CIRCLE
        self.changed = False

    def set(self, a: int, b: int, mark: Mark) -> None:
        """Put ``mark`` at ``b`` on edge a-b."""
        if self.at[(a, b)] is not mark:
            self.at[(a, b)] = mark
            self.changed = True

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.adj[a]

    def into(self, a: int, b: int) -> bool:
        """``a *-> b``."""
        return self.at.get((a, b)) is Mark.ARROW

    def directed(self, a: int, b: int) -> bool:
        """``a -> b``."""
        return self.at.get((b, a)) is Mark.TAIL and self.at.get((a, b)) is Mark.ARROW

    def pot_directed(self, a: int, b: int) -> bool:
        """Edge a-b could be oriented ``a -> b``."""
        return self.at[(b, a)] is not Mark.ARROW and self.at[(a, b)] is not Mark.TAIL

    def to_pag(self) -> Pag:
        edges = [(a, b, self.at[(b, a)], self.at[(a, b)]) for (a, b) in self.at if a < b]
        return Pag(self.n, edges)


def _uncovered_pd_paths(m: _Marks, start: int, first: int, end: int) -> Iterator[List[int]]:
    """Uncovered potentially directed paths ``start, first, ..., end``."""
    if not m.pot_directed(start, first):
        return

    def rec(path):
        x = path[-1]
        if x == end:
            yield list(path)
            return
        for y in sorted(m.adj[x]):
            if y in path or not m.pot_directed(x, y):
                continue
            if m.adjacent(path[-2], y):
                continue
            path.append(y)
            yield from rec(path)
            path.pop()

    yield from rec([start, first])


def _discriminating_paths(m: _Marks, a: int, b: int, c: int) -> Iterator[int]:
    """Endpoints ``d`` of discriminating paths ``<d, ..., a, b, c>`` for ``b``.

    Every node strictly between ``d`` and ``b`` must be a collider on the path
    and a parent of ``c``; ``d`` must not be adjacent to ``c``.
    """
    def rec(x, nxt, path):
        if not (m.directed(x, c) and m.into(nxt, x)):
            return
        for w in sorted(m.adj[x]):
            if w in path or w == c or not m.into(w, x):
                continue
            if not m.adjacent(w, c):
                yield w
            else:
                yield from rec(w, x, path | {w})

    yield from rec(a, b, {a, b, c})


def orientation_rule_pag(g: Mag) -> Pag:
    """Complete PAG of ``g`` via collider orientation plus rules 1-4 and 8-10."""
    m = _Marks(g)
    nodes = list(g.nodes)

    def collider_in_truth(a, c, b):
        return g.marks(a, c)[1] is Mark.ARROW and g.marks(b, c)[1] is Mark.ARROW

    for a, c, b in _unshielded_triples(g):
        if collider_in_truth(a, c, b):
            m.set(a, c, Mark.ARROW)
            m.set(b, c, Mark.ARROW)

    while True:
        m.changed = False
        for b in nodes:
            nbrs = sorted(m.adj[b])
            for a in nbrs:
                for c in nbrs:
                    if a == c:
                        continue
                    # R1: a *-> b o-* c, a, c non-adjacent  =>  b -> c
                    if (m.into(a, b) and m.at[(c, b)] is Mark.CIRCLE
                            and not m.adjacent(a, c)):
                        m.set(c, b, Mark.TAIL)
                        m.set(b, c, Mark.ARROW)
                    # R2: (a -> b *-> c or a *-> b -> c) and a *-o c  =>  a *-> c
                    if m.adjacent(a, c) and m.at[(a, c)] is Mark.CIRCLE:
                        if (m.directed(a, b) and m.into(b, c)) or (m.into(a, b) and m.directed(b, c)):
                            m.set(a, c, Mark.ARROW)
            # R3: a *-> b <-* c, a *-o t o-* c, a, c non-adjacent, t *-o b  =>  t *-> b
            for a, c in combinations(nbrs, 2):
                if not (m.into(a, b) and m.into(c, b)) or m.adjacent(a, c):
                    continue
                for t in nbrs:
                    if t in (a, c) or m.at[(t, b)] is not Mark.CIRCLE:
                        continue
                    if (m.adjacent(a, t) and m.adjacent(c, t)
                            and m.at[(a, t)] is Mark.CIRCLE and m.at[(c, t)] is Mark.CIRCLE):
                        m.set(t, b, Mark.ARROW)
            # R4: discriminating path <d, ..., a, b, c> with b o-* c
            for c in nbrs:
                if m.at[(c, b)] is not Mark.CIRCLE:
                    continue
                for a in nbrs:
                    if a == c or not m.adjacent(a, c):
                        continue
                    if next(_discriminating_paths(m, a, b, c), None) is None:
                        continue
                    if collider_in_truth(a, b, c):
                        m.set(a, b, Mark.ARROW)
                        m.set(b, a, Mark.ARROW)
                        m.set(c, b, Mark.ARROW)
                        m.set(b, c, Mark.ARROW)
                    else:
                        m.set(c, b, Mark.TAIL)
                        m.set(b, c, Mark.ARROW)
        # R8 - R10 act on a o-> c edges
        for a in nodes:
            for c in sorted(m.adj[a]):
                if not (m.at[(c, a)] is Mark.CIRCLE and m.at[(a, c)] is Mark.ARROW):
                    continue
                if _r8(m, a, c) or _r9(m, a, c) or _r10(m, a, c):
                    m.set(c, a, Mark.TAIL)
        if not m.changed:
            break
    return m.to_pag()


def _r8(m: _Marks, a: int, c: int) -> bool:
    for b in m.adj[a]:
        if b == c or not m.directed(b, c):
            continue
        if m.directed(a, b):
            return True
        if m.at[(b, a)] is Mark.TAIL and m.at[(a, b)] is Mark.CIRCLE:
            return True
    return False


def _r9(m: _Marks, a: int, c: int) -> bool:
    for b in sorted(m.adj[a]):
        if b == c or m.adjacent(b, c):
            continue
        if next(_uncovered_pd_paths(m, a, b, c), None) is not None:
            return True
    return False


def _r10(m: _Marks, a: int, c: int) -> bool:
    parents_c = [w for w in sorted(m.adj[c]) if w != a and m.directed(w, c)]
    if len(parents_c) < 2:
        return False
    # first hops of uncovered p.d. paths from a to each parent of c
    hops: Dict[int, Set[int]] = {}
    for p in parents_c:
        firsts = set()
        for mu in sorted(m.adj[a]):
            if mu == c:
                continue
            if mu == p:
                if m.pot_directed(a, p):
                    firsts.add(p)
                continue
            if next(_uncovered_pd_paths(m, a, mu, p), None) is not None:
                firsts.add(mu)
        hops[p] = firsts
    for b, t in combinations(parents_c, 2):
        for mu in hops[b]:
            for om in hops[t]:
                if mu != om and not m.adjacent(mu, om):
                    return True
    return False


def pag_for(g: Mag, kind: str = "rules") -> Pag:
    """Dispatch by name: ``skeleton``, ``class`` (enumeration) or ``rules``."""
    if kind == "skeleton":
        return skeleton_pag(g)
    if kind == "class":
        return equivalence_class_pag(g)
    if kind == "rules":
        return orientation_rule_pag(g)
    raise ValueError(f"unknown PAG kind {kind!r}")
