"""Synthetic multi-entity benchmark instances.

An instance is a set of entities, each with its own ground-truth DAG over a
shared observed node set, grouped into clusters whose MAGs satisfy the
node-distance clustering property.  Each cluster holds copies of a dominant
DAG plus a few nearby variants.

Construction per instance:

1. take a base structure (Erdős–Rényi or a vendored network);
2. give each dominant its own copy of the base plus injected latent
   confounders, then edit observed edges until it is far from the other
   dominants;
3. derive variants from their cluster's dominant by small observed-edge
   edits, keeping them close to their own cluster and far from the others;
4. verify every pairwise distance before returning.

Randomness is drawn from ``random.Random(f"{seed}:{salt}")`` streams, so
a given seed always produces the same instance.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .discovery import ClusterResult
from .graphio import dag_to_text, read_dag, dag_from_text
from .graphs import (Dag, GraphError, Mag, Mark, MixedGraph, Pag, dag_to_mag, is_ancestral, markov_equivalent,
                     node_distance, validate_mag)
from .oracle import EntityOracle
from .pag import pag_for

PathLike = Union[str, Path]

#: Vendored network structures with their (node, edge) counts.
NETWORKS: Dict[str, Tuple[int, int]] = {
    "asia": (8, 8),
    "earthquake": (5, 4),
    "sachs": (11, 17),
    "survey": (6, 6),
}


class GenerationError(RuntimeError):
    """Instance generation gave up; ``diagnostics`` says why."""

    def __init__(self, message: str, seed=None, diagnostics: Optional[dict] = None):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed
        self.diagnostics = diagnostics or {}


class NetworkError(GraphError):
    pass


def _rng(seed, salt: str) -> random.Random:
    return random.Random(f"{seed}:{salt}")


# ---------------------------------------------------------------------------
# base structures
# ---------------------------------------------------------------------------

def gen_erdos_renyi(n: int, p: float, seed) -> Dag:
    """Random DAG: a uniform node order plus each forward pair with probability ``p``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = _rng(seed, "erdos-renyi")
    order = list(range(n))
    rng.shuffle(order)
    edges = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Dag(n, edges)


def load_network(path: PathLike) -> Dag:
    """Read a network structure.

    ``path`` is either a file in the text graph format or the name of a
    vendored network (``asia``, ``earthquake``, ``sachs``, ``survey``).  When
    the file stem names a vendored network, its node and edge counts are
    checked against :data:`NETWORKS`.
    """
    name = str(path)
    if name in NETWORKS:
        text = resources.files("collabcausal").joinpath("networks", f"{name}.txt").read_text()
        d = dag_from_text(text)
    else:
        d = read_dag(path)
        name = Path(path).stem
    if name in NETWORKS:
        want = NETWORKS[name]
        got = (d.n, len(d.edges))
        if got != want:
            raise NetworkError(f"{name}: expected {want[0]} nodes/{want[1]} edges, found {got[0]}/{got[1]}")
    return d


def inject_latents(d: Dag, count: int, seed) -> Dag:
    """Add ``count`` latent confounders, each a parent of a distinct random observed pair."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if d.n < 2 and count:
        raise ValueError("need at least two observed nodes")
    pairs = list(combinations(d.observed, 2))
    if count > len(pairs):
        raise ValueError(f"cannot place {count} latents on {len(pairs)} observed pairs")
    if count == 0:
        return d
    chosen = _rng(seed, "latents").sample(pairs, count)
    base = d.n + d.n_latent
    edges = set(d.edges)
    for idx, (a, b) in enumerate(chosen):
        edges.add((base + idx, a))
        edges.add((base + idx, b))
    return Dag(d.n, edges, d.n_latent + count)


# ---------------------------------------------------------------------------
# distance-controlled edits
# ---------------------------------------------------------------------------

def _reaches(children: Dict[int, set], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        for c in children[x]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def legal_moves(d: Dag) -> List[Tuple[str, int, int]]:
    """All acyclicity-preserving insertions, deletions and reversals of observed edges."""
    obs = d.observed_edges()
    children: Dict[int, set] = {w: set() for w in d.nodes}
    for a, b in d.edges:
        children[a].add(b)
    moves = []
    for a, b in sorted(obs):
        moves.append(("delete", a, b))
        children[a].discard(b)
        if not _reaches(children, a, b):
            moves.append(("reverse", a, b))
        children[a].add(b)
    for a in d.observed:
        for b in d.observed:
            if a != b and (a, b) not in obs and (b, a) not in obs and not _reaches(children, b, a):
                moves.append(("insert", a, b))
    return moves


def apply_move(d: Dag, move: Tuple[str, int, int]) -> Dag:
    kind, a, b = move
    edges = set(d.edges)
    if kind == "insert":
        edges.add((a, b))
    elif kind == "delete":
        edges.discard((a, b))
    elif kind == "reverse":
        edges.discard((a, b))
        edges.add((b, a))
    else:
        raise ValueError(f"unknown move {kind!r}")
    return Dag(d.n, edges, d.n_latent)


@dataclass
class _Goal:
    """Distance requirements for one edit search.

    ``far``: (mag, t) pairs needing distance >= t.  ``near``: pairs needing
    distance <= t (hard).  ``aim``: (mag, t) with distance <= t that should
    end exactly at t.  ``equiv``: MAG the result must stay Markov
    equivalent to.
    """

    far: List[Tuple[Mag, int]] = field(default_factory=list)
    near: List[Tuple[Mag, int]] = field(default_factory=list)
    aim: Optional[Tuple[Mag, int]] = None
    equiv: Optional[Mag] = None

    def __post_init__(self):
        self._equiv_pag: Optional[Pag] = None if self.equiv is None else pag_for(self.equiv, "rules")

    def feasible(self, g: Mag) -> bool:
        if any(node_distance(g, ref) > t for ref, t in self.near):
            return False
        if self.aim is not None and node_distance(g, self.aim[0]) > self.aim[1]:
            return False
        if self.equiv is not None:
            # same skeleton first, then the (cheap) PAG; identical complete PAGs
            # means identical equivalence classes
            if g.skeleton() != self.equiv.skeleton() or pag_for(g, "rules") != self._equiv_pag:
                return False
        return True

    def score(self, g: Mag) -> int:
        s = sum(min(node_distance(g, ref), t) for ref, t in self.far)
        if self.aim is not None:
            s += node_distance(g, self.aim[0])
        return s

    def far_ok(self, g: Mag) -> bool:
        return all(node_distance(g, ref) >= t for ref, t in self.far)

    def done(self, g: Mag) -> bool:
        if not self.far_ok(g):
            return False
        return self.aim is None or node_distance(g, self.aim[0]) == self.aim[1]

    def acceptable(self, g: Mag) -> bool:
        """Fallback acceptance at the step cap: aim reached only partially but positively."""
        return self.far_ok(g) and (self.aim is None or node_distance(g, self.aim[0]) > 0)


def variable_nodes(pag: MixedGraph) -> Set[int]:
    """Nodes touching a circle mark: the only ones whose incidence can vary inside the class."""
    out: Set[int] = set()
    for u, v, mu, mv in pag.edges():
        if Mark.CIRCLE in (mu, mv):
            out.update((u, v))
    return out


def _climb(d: Dag, goal: _Goal, rng: random.Random, cap: int, seed) -> Dag:
    """Tabu hill climbing over all feasible neighbours (used when most edits are infeasible)."""
    g = dag_to_mag(d)
    seen = {d.edges}
    for _ in range(cap):
        scored = []
        moves = legal_moves(d)
        rng.shuffle(moves)
        for mv in moves:
            cand = apply_move(d, mv)
            if cand.edges in seen:
                continue
            cg = dag_to_mag(cand)
            if goal.feasible(cg):
                scored.append((goal.score(cg), cand, cg))
        if not scored:
            break
        top = max(s for s, _, _ in scored)
        _, d, g = next(x for x in scored if x[0] == top)
        seen.add(d.edges)
        if goal.done(g):
            if goal.equiv is not None and not markov_equivalent(g, goal.equiv):
                raise GenerationError("PAG match without Markov equivalence", seed)
            return d
    raise GenerationError("equivalence-preserving search exhausted", seed,
                          {"cap": cap, "score": goal.score(g), "far": [t for _, t in goal.far]})


def canonical_dag(g: Mag) -> Dag:
    """DAG whose MAG is ``g``: directed edges kept, one latent parent per bidirected edge."""
    edges, lat = [], 0
    for u, v, mu, mv in g.edges():
        if mu is Mark.TAIL:
            edges.append((u, v))
        elif mv is Mark.TAIL:
            edges.append((v, u))
        else:
            edges += [(g.n + lat, u), (g.n + lat, v)]
            lat += 1
    return Dag(g.n, edges, lat)


def sample_equivalent_mag(reference: Mag, far: Sequence[Tuple[Mag, int]], rng: random.Random,
                          tries: int = 3000) -> Optional[Mag]:
    """Random member of ``reference``'s equivalence class meeting every ``(mag, t)`` distance floor.

    Circle marks of the class PAG are filled in uniformly at random; a
    candidate counts when it is a valid MAG with the same PAG.  Returns
    ``None`` if no qualifying member turns up within ``tries`` draws.
    """
    pag = pag_for(reference, "rules")
    edges = list(pag.edges())
    if not any(Mark.CIRCLE in (mu, mv) for _, _, mu, mv in edges):
        return None
    for _ in range(tries):
        out = []
        for u, v, mu, mv in edges:
            a = mu if mu is not Mark.CIRCLE else rng.choice((Mark.TAIL, Mark.ARROW))
            b = mv if mv is not Mark.CIRCLE else rng.choice((Mark.TAIL, Mark.ARROW))
            if a is Mark.TAIL and b is Mark.TAIL:
                a, b = rng.choice(((Mark.TAIL, Mark.ARROW), (Mark.ARROW, Mark.TAIL), (Mark.ARROW, Mark.ARROW)))
            out.append((u, v, a, b))
        try:
            g = Mag(reference.n, out)
        except GraphError:
            continue
        if any(node_distance(g, ref) < t for ref, t in far):
            continue
        if not is_ancestral(g)[0] or pag_for(g, "rules") != pag:
            continue
        if validate_mag(g)[0] and markov_equivalent(g, reference):
            return g
    return None


def _search(d: Dag, goal: _Goal, rng: random.Random, cap: int, seed) -> Dag:
    g = dag_to_mag(d)
    if goal.done(g):
        return d
    if goal.equiv is not None:
        return _climb(d, goal, rng, max(1, cap // 10), seed)
    score = goal.score(g)
    best: Optional[Tuple[int, Dag]] = None
    for _ in range(cap):
        moves = legal_moves(d)
        if not moves:
            break
        cand = apply_move(d, rng.choice(moves))
        cg = dag_to_mag(cand)
        if not goal.feasible(cg):
            continue
        cs = goal.score(cg)
        if cs >= score or rng.random() < 0.2:
            d, g, score = cand, cg, cs
            if goal.done(g):
                if goal.equiv is not None and not markov_equivalent(g, goal.equiv):
                    raise GenerationError("PAG match without Markov equivalence", seed)
                return d
            if goal.acceptable(g) and (best is None or cs > best[0]):
                best = (cs, d)
    if best is not None:
        return best[1]
    raise GenerationError("edit search hit its step cap", seed,
                          {"cap": cap, "score": score, "far": [t for _, t in goal.far]})


def perturb_to_target_distance(d: Dag, reference: Mag, target: int, mode: str = "at_least", seed=0,
                               markov_equiv: bool = False, step_cap: Optional[int] = None) -> Dag:
    """Randomly edit observed edges of ``d`` until its MAG sits at a target distance from ``reference``.

    Parameters
    ----------
    mode : {"at_least", "exactly_at_most"}
        ``at_least`` stops once the distance reaches ``target``;
        ``exactly_at_most`` never exceeds ``target`` and stops on hitting it,
        settling for any positive distance below it when the step cap runs out.
    markov_equiv : bool
        Only accept edits keeping the MAG Markov equivalent to ``reference``.
    step_cap : int, optional
        Maximum number of proposed edits, ``10 * n**2`` by default.

    Raises
    ------
    GenerationError
        When no acceptable graph is found within the step cap.
    """
    if not 0 <= target <= d.n:
        raise ValueError(f"target must lie in 0..{d.n}")
    if mode not in ("at_least", "exactly_at_most"):
        raise ValueError(f"unknown mode {mode!r}")
    if target == 0:
        return d
    cap = 10 * d.n ** 2 if step_cap is None else step_cap
    if mode == "at_least":
        goal = _Goal(far=[(reference, target)], equiv=reference if markov_equiv else None)
    else:
        goal = _Goal(aim=(reference, target), equiv=reference if markov_equiv else None)
    return _search(d, goal, _rng(seed, "perturb"), cap, seed)


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceParams:
    """Knobs of the instance generator.

    ``separation`` is the fraction of nodes at which dominants of different
    clusters must differ; it defaults to ``alpha`` and may be raised up to 1.
    ``markov_equiv`` defaults to ``beta == 0`` (the alpha-clustering setup,
    where dominants of different clusters are Markov equivalent).
    """

    network: str = "er"
    n: int = 10
    edge_prob: float = 0.3
    entities: int = 40
    clusters: int = 2
    alpha: float = 0.6
    beta: float = 0.2
    gamma: float = 0.9
    latents_per_dag: int = 2
    separation: Optional[float] = None
    markov_equiv: Optional[bool] = None
    max_retries: int = 60
    step_cap: Optional[int] = None

    def __post_init__(self):
        if self.clusters < 1 or self.entities % self.clusters:
            raise ValueError("entities must be a positive multiple of clusters")
        if not 0.0 <= self.beta < self.alpha <= 1.0:
            raise ValueError("need 0 <= beta < alpha <= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.separation is not None and not self.alpha <= self.separation <= 1.0:
            raise ValueError("separation must lie in [alpha, 1]")
        if self.network != "er" and self.network not in NETWORKS:
            raise ValueError(f"unknown network {self.network!r}")

    @property
    def equiv_mode(self) -> bool:
        return self.beta == 0.0 if self.markov_equiv is None else self.markov_equiv

    @property
    def cluster_size(self) -> int:
        return self.entities // self.clusters

    @property
    def dominant_copies(self) -> int:
        if self.beta == 0.0:
            return self.cluster_size
        return min(self.cluster_size, math.ceil(self.gamma * self.cluster_size - 1e-9))


@dataclass(frozen=True)
class EntityTruth:
    entity: int
    dag: Dag
    mag: Mag
    cluster: int
    role: str  # "dominant" or "variant"


@dataclass
class ClusterInstance:
    params: InstanceParams
    seed: int
    entities: List[EntityTruth]
    truth_partition: ClusterResult
    attempts: int = 1

    @property
    def n(self) -> int:
        return self.entities[0].dag.n

    @property
    def m(self) -> int:
        return len(self.entities)

    @property
    def mags(self) -> List[Mag]:
        return [e.mag for e in self.entities]

    def oracles(self, **kwargs) -> List[EntityOracle]:
        """Fresh oracles (empty ledgers) for every entity."""
        return [EntityOracle(e.entity, e.dag, **kwargs) for e in self.entities]

    def pags(self, kind: str = "rules") -> List[Pag]:
        return [pag_for(e.mag, kind) for e in self.entities]

    def dominant_mags(self) -> Dict[int, Mag]:
        return {e.cluster: e.mag for e in self.entities if e.role == "dominant"}

    def violations(self) -> List[str]:
        bad = check_clustering(self.mags, self.truth_partition, self.params.alpha, self.params.beta)
        if self.params.equiv_mode:
            doms = list(self.dominant_mags().values())
            bad += [f"dominant of cluster {a} is not Markov equivalent to cluster 0"
                    for a, g in enumerate(doms[1:], 1) if not markov_equivalent(g, doms[0])]
        return bad


def check_clustering(mags: Sequence[Mag], partition: ClusterResult, alpha: float, beta: float) -> List[str]:
    """Every pair violating the (alpha, beta) distance bounds, as readable strings."""
    n = mags[0].n
    labels = partition.labels()
    out = []
    for i, j in combinations(range(len(mags)), 2):
        dist = node_distance(mags[i], mags[j])
        if labels[i] == labels[j] and dist > beta * n + 1e-9:
            out.append(f"entities {i},{j} share a cluster at distance {dist} > {beta * n:g}")
        elif labels[i] != labels[j] and dist < alpha * n - 1e-9:
            out.append(f"entities {i},{j} in different clusters at distance {dist} < {alpha * n:g}")
    return out


def _base_dag(params: InstanceParams, seed, attempt: int) -> Dag:
    if params.network == "er":
        return gen_erdos_renyi(params.n, params.edge_prob, f"{seed}:{attempt}")
    return load_network(params.network)


def _attempt(params: InstanceParams, seed, attempt: int) -> List[List[Tuple[Dag, Mag, str]]]:
    base = _base_dag(params, seed, attempt)
    n = base.n
    far_t = math.ceil(params.alpha * n - 1e-9)
    sep_t = math.ceil((params.separation or params.alpha) * n - 1e-9)
    near_t = math.floor(params.beta * n + 1e-9)
    cap = params.step_cap or 10 * n ** 2
    tag = f"{seed}:{attempt}"

    first = inject_latents(base, params.latents_per_dag, f"{tag}:dom0")
    dominants: List[Tuple[Dag, Mag]] = [(first, dag_to_mag(first))]
    if params.equiv_mode and params.clusters > 1:
        reach = len(variable_nodes(pag_for(dominants[0][1], "rules")))
        if reach < sep_t:
            raise GenerationError(f"only {reach} nodes can change within the equivalence class", seed)
    for a in range(1, params.clusters):
        if params.equiv_mode:
            g = sample_equivalent_mag(dominants[0][1], [(x, sep_t) for _, x in dominants], _rng(tag, f"dom{a}"))
            if g is None:
                raise GenerationError("no equivalent MAG far enough from the other dominants", seed)
            d = canonical_dag(g)
            dominants.append((d, dag_to_mag(d)))
            continue
        else:
            start = inject_latents(base, params.latents_per_dag, f"{tag}:dom{a}")
            goal = _Goal(far=[(g, sep_t) for _, g in dominants])
        d = _search(start, goal, _rng(tag, f"dom{a}"), cap, seed)
        dominants.append((d, dag_to_mag(d)))

    clusters: List[List[Tuple[Dag, Mag, str]]] = [
        [(d, g, "dominant")] * params.dominant_copies for d, g in dominants
    ]
    variants = params.cluster_size - params.dominant_copies
    for a in range(params.clusters):
        d_dom, g_dom = dominants[a]
        for v in range(variants):
            if near_t < 2:
                # an edge change always alters two incidence sets, so no MAG lies
                # at distance exactly 1; the slot keeps a dominant copy
                clusters[a].append((d_dom, g_dom, "dominant"))
                continue
            members = {id(x[1]): x[1] for x in clusters[a]}.values()
            others = [x[1] for b in range(params.clusters) if b != a for x in clusters[b]]
            others = list({id(g): g for g in others}.values())
            goal = _Goal(far=[(g, far_t) for g in others], near=[(g, near_t) for g in members],
                         aim=(g_dom, near_t))
            d = _search(d_dom, goal, _rng(tag, f"var{a}:{v}"), cap, seed)
            clusters[a].append((d, dag_to_mag(d), "variant"))
    return clusters


def build_instance(params: InstanceParams, seed) -> ClusterInstance:
    """Generate a verified clustered instance.

    Entities are numbered cluster by cluster, dominant copies first.  Failed
    attempts (edit search exhausted, or a pairwise check failing) are
    retried with fresh randomness up to ``params.max_retries`` times; Erdős–
    Rényi instances also redraw their base graph.

    Raises
    ------
    GenerationError
        After ``max_retries`` failed attempts; ``diagnostics`` lists the
        failure of each attempt.
    """
    failures = []
    for attempt in range(params.max_retries):
        try:
            clusters = _attempt(params, seed, attempt)
        except GenerationError as err:
            failures.append(str(err))
            continue
        entities, blocks = [], []
        for a, members in enumerate(clusters):
            block = []
            for d, g, role in members:
                block.append(len(entities))
                entities.append(EntityTruth(len(entities), d, g, a, role))
            blocks.append(block)
        inst = ClusterInstance(params, seed, entities, ClusterResult(blocks), attempts=attempt + 1)
        bad = inst.violations()
        if not bad:
            return inst
        failures.append(bad[0])
    raise GenerationError(f"no valid instance after {params.max_retries} attempts", seed,
                          {"failures": failures})


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------

BUNDLE_VERSION = 1


def write_bundle(inst: ClusterInstance, directory: PathLike) -> Path:
    """Write ``instance.json`` plus one DAG file per entity into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for e in inst.entities:
        fname = f"entity_{e.entity:04d}.txt"
        (out / fname).write_text(dag_to_text(e.dag))
        records.append({"id": e.entity, "file": fname, "cluster": e.cluster, "role": e.role})
    manifest = {
        "version": BUNDLE_VERSION,
        "params": asdict(inst.params),
        "seed": inst.seed,
        "attempts": inst.attempts,
        "partition": inst.truth_partition.as_lists(),
        "entities": records,
    }
    (out / "instance.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def read_bundle(directory: PathLike) -> ClusterInstance:
    src = Path(directory)
    manifest = json.loads((src / "instance.json").read_text())
    if manifest.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {manifest.get('version')!r}")
    params = InstanceParams(**manifest["params"])
    entities = []
    for rec in sorted(manifest["entities"], key=lambda r: r["id"]):
        d = read_dag(src / rec["file"])
        entities.append(EntityTruth(rec["id"], d, dag_to_mag(d), rec["cluster"], rec["role"]))
    return ClusterInstance(params, manifest["seed"], entities, ClusterResult(manifest["partition"]),
                           attempts=manifest.get("attempts", 1))
