"""Per-entity conditional-independence oracle with intervention accounting."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .graphs import Dag, GraphError, d_separated


class BudgetViolation(RuntimeError):
    """An interventional query was made on a target that was never registered."""


@dataclass(frozen=True)
class CiQuery:
    u: int
    v: int
    z: FrozenSet[int] = frozenset()
    target: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "z", frozenset(self.z))
        if self.u == self.v:
            raise GraphError("CI query needs two distinct nodes")
        if self.u in self.z or self.v in self.z:
            raise GraphError("conditioning set contains a query endpoint")


@dataclass
class InterventionLedger:
    targets: Set[int] = field(default_factory=set)

    @property
    def count(self) -> int:
        return len(self.targets)


class EntityOracle:
    """Answers CI queries against one entity's ground-truth DAG.

    Parameters
    ----------
    entity : int
        Entity id.
    truth : Dag
        Ground-truth causal DAG, possibly with latents.
    enforce : bool
        When true, an interventional query on an unregistered target raises
        :class:`BudgetViolation`.
    noise : float
        Probability of flipping each answer; ``0`` gives exact answers.
    seed : int
        Seed for the noise stream.
    log : bool
        Keep a textual query log (see :meth:`log_lines`).
    """

    def __init__(self, entity: int, truth: Dag, enforce: bool = True,
                 noise: float = 0.0, seed: int = 0, log: bool = False):
        if not 0.0 <= noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        self.entity = entity
        self.truth = truth
        self.enforce = enforce
        self.noise = noise
        self.ledger = InterventionLedger()
        self.queries = 0
        self._rng = random.Random(seed)
        self._mutilated: Dict[int, Dag] = {}
        self._cache: Dict[Tuple[int, int, FrozenSet[int], Optional[int]], bool] = {}
        self._log: Optional[List[str]] = [] if log else None

    @property
    def n(self) -> int:
        return self.truth.n

    def register_intervention(self, w: int) -> int:
        if not 0 <= w < self.truth.n:
            raise GraphError(f"node {w} is latent or unknown and cannot be intervened on")
        self.ledger.targets.add(w)
        return self.ledger.count

    def intervention_count(self) -> int:
        return self.ledger.count

    def _graph_for(self, target: Optional[int]) -> Dag:
        if target is None:
            return self.truth
        g = self._mutilated.get(target)
        if g is None:
            g = self._mutilated[target] = self.truth.mutilate(target)
        return g

    def ci_test(self, q: CiQuery) -> bool:
        """True when ``q.u`` and ``q.v`` are independent given ``q.z`` (under ``do(q.target)``)."""
        if q.target is not None:
            if not 0 <= q.target < self.truth.n:
                raise GraphError(f"target {q.target} is not an observed node")
            if self.enforce and q.target not in self.ledger.targets:
                raise BudgetViolation(
                    f"entity {self.entity}: do({q.target}) queried before registration")
        self.queries += 1
        key = (min(q.u, q.v), max(q.u, q.v), q.z, q.target)
        ans = self._cache.get(key)
        if ans is None:
            ans = self._cache[key] = d_separated(self._graph_for(q.target), q.u, q.v, q.z)
        if self.noise and self._rng.random() < self.noise:
            ans = not ans
        if self._log is not None:
            zs = " ".join(str(w) for w in sorted(q.z))
            tgt = "obs" if q.target is None else str(q.target)
            self._log.append(f"{self.entity} {q.u} {q.v} [{zs}] target={tgt} -> "
                             f"{'indep' if ans else 'dep'}")
        return ans

    def independent(self, u: int, v: int, z: Iterable[int] = (), target: Optional[int] = None) -> bool:
        return self.ci_test(CiQuery(u, v, frozenset(z), target))

    def log_lines(self) -> List[str]:
        return list(self._log or [])
