"""Metrics, experiment runs and result files."""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .discovery import (
    AlgoParams,
    ClusterResult,
    RecoveryReport,
    baseline_pag_cluster,
    cluster_alpha_beta,
    cluster_alpha_bounded,
    cluster_alpha_general,
    cluster_no_latents,
    greedy_sample_selection,
    meta_recover,
    recover_dominant_mags,
    sample_size_alpha_beta,
)
from .generate import ClusterInstance, InstanceParams, build_instance
from .graphs import Mag, node_distance

PathLike = Union[str, Path]

ALGORITHMS = ("ab-bounded", "a-bounded", "no-latents", "a-general", "fci-baseline", "greedy")

CSV_COLUMNS = [
    "network", "algo", "alpha", "beta", "gamma", "sample_size",
    "precision_mean", "precision_std", "recall_mean", "recall_std",
    "accuracy_mean", "accuracy_std", "max_interventions", "runs", "seed",
]
_STD_COLUMNS = ("precision_std", "recall_std", "accuracy_std")


# ---------------------------------------------------------------------------
# pair metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairMetrics:
    """Pairwise agreement between a predicted and a true partition.

    Attributes
    ----------
    precision : float
        Fraction of predicted-together pairs that are truly together
        (1 when nothing is predicted together).
    recall : float
        Fraction of truly-together pairs predicted together (1 when no pair
        is truly together).
    accuracy : float
        Fraction of all pairs whose together/apart status is right.
    """

    precision: float
    recall: float
    accuracy: float
    correct_together: int
    predicted_together: int
    true_together: int
    correct: int
    total: int


def pair_metrics(predicted: ClusterResult, truth: ClusterResult) -> PairMetrics:
    if predicted.size != truth.size:
        raise ValueError(f"partitions cover {predicted.size} and {truth.size} entities")
    p, t = predicted.labels(), truth.labels()
    both = pred = true = agree = total = 0
    for i, j in combinations(range(truth.size), 2):
        a, b = p[i] == p[j], t[i] == t[j]
        both += a and b
        pred += a
        true += b
        agree += a == b
        total += 1
    return PairMetrics(
        precision=both / pred if pred else 1.0,
        recall=both / true if true else 1.0,
        accuracy=agree / total if total else 1.0,
        correct_together=both, predicted_together=pred, true_together=true, correct=agree, total=total,
    )


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------

def algo_params(inst_params: InstanceParams, algo: str, sample_size: Optional[int], delta: float,
                seed: int) -> AlgoParams:
    beta = inst_params.beta if algo in ("ab-bounded", "greedy") else 0.0
    return AlgoParams(inst_params.alpha, beta, delta, sample_size_override=sample_size, rng_seed=seed)


def run_clustering(inst: ClusterInstance, algo: str, sample_size: Optional[int] = None, delta: float = 0.05,
                   seed: int = 0, pag_kind: str = "rules") -> Tuple[ClusterResult, RecoveryReport]:
    """Run one clustering algorithm on fresh oracles for ``inst``."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    oracles = inst.oracles()
    pags = inst.pags(pag_kind)
    params = algo_params(inst.params, algo, sample_size, delta, seed)
    if algo == "ab-bounded":
        return cluster_alpha_beta(oracles, pags, params)
    if algo == "a-bounded":
        return cluster_alpha_bounded(oracles, pags, params)
    if algo == "no-latents":
        return cluster_no_latents(oracles, pags, params)
    if algo == "a-general":
        return cluster_alpha_general(oracles, pags, params)
    if algo == "greedy":
        budget = sample_size or sample_size_alpha_beta(inst.m, params.alpha, params.beta, delta)
        chosen = AlgoParams(params.alpha, params.beta, delta, rng_seed=seed,
                            sample=tuple(greedy_sample_selection(pags, budget)))
        res, rep = cluster_alpha_beta(oracles, pags, chosen)
        rep.algorithm = "greedy"
        return res, rep
    res = baseline_pag_cluster(pags, inst.params.clusters)
    rep = RecoveryReport("fci-baseline", partition=res.as_lists())
    rep.snapshot(oracles)
    return res, rep


def run_recovery(inst: ClusterInstance, clusters: ClusterResult, method: str = "ab-recovery",
                 delta: float = 0.05, seed: int = 0, pag_kind: str = "rules",
                 oracles=None) -> Tuple[Dict[int, Mag], RecoveryReport]:
    """Recover one MAG per entity given a partition.

    ``oracles`` may be passed to continue on the ledgers of a preceding
    clustering run; by default fresh oracles are used.
    """
    oracles = inst.oracles() if oracles is None else oracles
    pags = inst.pags(pag_kind)
    if method == "ab-recovery":
        params = AlgoParams(inst.params.alpha, inst.params.beta, delta, rng_seed=seed)
        return recover_dominant_mags(oracles, pags, clusters, params)
    if method == "meta":
        return meta_recover(oracles, pags, clusters)
    raise ValueError(f"unknown recovery method {method!r}")


def recovery_distances(inst: ClusterInstance, recovered: Dict[int, Mag]) -> List[int]:
    return [node_distance(e.mag, recovered[e.entity]) for e in inst.entities]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceParams = field(default_factory=InstanceParams)
    algos: Tuple[str, ...] = ("ab-bounded", "fci-baseline")
    sample_size: Optional[int] = None
    runs: int = 10
    seed: int = 0
    delta: float = 0.05
    pag_kind: str = "rules"
    workers: int = 1

    def __post_init__(self):
        for a in self.algos:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")

    def run_seeds(self) -> List[int]:
        return [self.seed + r for r in range(self.runs)]


@dataclass(frozen=True)
class AlgoSummary:
    precision_mean: float
    recall_mean: float
    accuracy_mean: float
    max_interventions: int
    precision_std: Optional[float] = None
    recall_std: Optional[float] = None
    accuracy_std: Optional[float] = None


@dataclass
class ExperimentRecord:
    """Aggregated outcome of one experiment configuration.

    ``summaries`` holds what the CSV holds; ``per_run`` and ``wall_time``
    are kept for the JSON record only and are ignored by equality.
    """

    network: str
    alpha: float
    beta: float
    gamma: float
    sample_size: Optional[int]
    runs: int
    seed: int
    summaries: Dict[str, AlgoSummary]
    per_run: Dict[str, List[dict]] = field(default_factory=dict, compare=False)
    wall_time: float = field(default=0.0, compare=False)

    def to_rows(self) -> List[Dict[str, object]]:
        rows = []
        for algo, s in self.summaries.items():
            row = {
                "network": self.network, "algo": algo, "alpha": self.alpha, "beta": self.beta,
                "gamma": self.gamma, "sample_size": "" if self.sample_size is None else self.sample_size,
                "runs": self.runs, "seed": self.seed,
            }
            row.update({k: ("" if v is None else v) for k, v in asdict(s).items()})
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "network": self.network, "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
            "sample_size": self.sample_size, "runs": self.runs, "seed": self.seed,
            "summaries": {a: asdict(s) for a, s in self.summaries.items()},
            "per_run": self.per_run, "wall_time": self.wall_time,
        }


def _one_run(cfg: ExperimentConfig, run_seed: int) -> Dict[str, dict]:
    inst = build_instance(cfg.instance, run_seed)
    out = {}
    for algo in cfg.algos:
        t0 = time.perf_counter()
        res, rep = run_clustering(inst, algo, cfg.sample_size, cfg.delta, run_seed, cfg.pag_kind)
        m = pair_metrics(res, inst.truth_partition)
        out[algo] = {
            "seed": run_seed, "precision": m.precision, "recall": m.recall, "accuracy": m.accuracy,
            "max_interventions": rep.max_interventions, "k": res.k, "seconds": time.perf_counter() - t0,
        }
    return out


def _summarise(runs: List[dict]) -> AlgoSummary:
    def col(key):
        return [r[key] for r in runs]

    def std(key):
        return statistics.stdev(col(key)) if len(runs) >= 2 else None

    return AlgoSummary(
        precision_mean=statistics.fmean(col("precision")),
        recall_mean=statistics.fmean(col("recall")),
        accuracy_mean=statistics.fmean(col("accuracy")),
        max_interventions=max(col("max_interventions")),
        precision_std=std("precision"), recall_std=std("recall"), accuracy_std=std("accuracy"),
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentRecord:
    """Generate one instance per run seed, run every selected algorithm, aggregate.

    ``max_interventions`` is the largest per-entity ledger size seen in any
    run.  Standard deviations are only reported for two or more runs.
    """
    t0 = time.perf_counter()
    seeds = cfg.run_seeds()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_one_run, [cfg] * len(seeds), seeds))
    else:
        results = [_one_run(cfg, s) for s in seeds]
    per_run = {a: [r[a] for r in results] for a in cfg.algos}
    p = cfg.instance
    return ExperimentRecord(
        network=p.network, alpha=p.alpha, beta=p.beta, gamma=p.gamma, sample_size=cfg.sample_size,
        runs=cfg.runs, seed=cfg.seed, summaries={a: _summarise(per_run[a]) for a in cfg.algos},
        per_run=per_run, wall_time=time.perf_counter() - t0,
    )


def write_csv(records: Sequence[ExperimentRecord], path: PathLike) -> None:
    """Write records as CSV; the ``*_std`` columns are dropped when every record has a single run."""
    columns = [c for c in CSV_COLUMNS if c not in _STD_COLUMNS or any(r.runs >= 2 for r in records)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in records:
            for row in r.to_rows():
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_csv(path: PathLike) -> List[ExperimentRecord]:
    """Parse a file written by :func:`write_csv` back into records."""

    def opt_float(row, key):
        v = row.get(key, "")
        return float(v) if v not in ("", None) else None

    records: Dict[tuple, ExperimentRecord] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["network"], row["alpha"], row["beta"], row["gamma"], row["sample_size"], row["runs"],
                   row["seed"])
            if key not in records:
                records[key] = ExperimentRecord(
                    network=row["network"], alpha=float(row["alpha"]), beta=float(row["beta"]),
                    gamma=float(row["gamma"]),
                    sample_size=int(row["sample_size"]) if row["sample_size"] else None,
                    runs=int(row["runs"]), seed=int(row["seed"]), summaries={},
                )
            records[key].summaries[row["algo"]] = AlgoSummary(
                precision_mean=float(row["precision_mean"]), recall_mean=float(row["recall_mean"]),
                accuracy_mean=float(row["accuracy_mean"]), max_interventions=int(row["max_interventions"]),
                precision_std=opt_float(row, "precision_std"), recall_std=opt_float(row, "recall_std"),
                accuracy_std=opt_float(row, "accuracy_std"),
            )
    return list(records.values())


def write_json(records: Sequence[ExperimentRecord], path: PathLike) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in records], indent=2) + "\n")


# ---------------------------------------------------------------------------
# sample-size sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    sample_size: int
    mean_max_interventions: float
    per_run: Tuple[int, ...]
    bound: Tuple[int, ...]  # (max PAG degree + 1) * |S| per run


def sample_size_sweep(cfg: ExperimentConfig, sizes: Sequence[int] = (1, 2, 3)) -> List[SweepPoint]:
    """Mean (over runs) of the largest ledger after threshold clustering, per sample size.

    The same instance and random stream are used for every size, so samples
    nest and the curve cannot decrease; a decrease raises ``RuntimeError``.
    """
    insts = [build_instance(cfg.instance, s) for s in cfg.run_seeds()]
    points = []
    for size in sizes:
        maxes, bounds = [], []
        for inst, s in zip(insts, cfg.run_seeds()):
            _, rep = run_clustering(inst, "ab-bounded", size, cfg.delta, s, cfg.pag_kind)
            maxes.append(rep.max_interventions)
            bounds.append((max(p.max_degree() for p in inst.pags(cfg.pag_kind)) + 1) * size)
        points.append(SweepPoint(size, statistics.fmean(maxes), tuple(maxes), tuple(bounds)))
    for a, b in zip(points, points[1:]):
        if b.sample_size >= a.sample_size and b.mean_max_interventions < a.mean_max_interventions:
            raise RuntimeError(f"interventions decreased from |S|={a.sample_size} to |S|={b.sample_size}")
    return points


def write_sweep_csv(points: Sequence[SweepPoint], path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_size", "mean_max_interventions", "per_run", "bound"])
        for p in points:
            w.writerow([p.sample_size, repr(p.mean_max_interventions), " ".join(map(str, p.per_run)),
                        " ".join(map(str, p.bound))])
