"""Command-line entry point: ``collabcausal {generate,cluster,recover,evaluate,sweep}``.

Exit codes: 0 success, 2 usage error, 3 instance generation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .discovery import ClusterResult, ParameterError, PreconditionError
from .generate import NETWORKS, GenerationError, InstanceParams, build_instance, read_bundle, write_bundle
from .graphio import mixed_to_text
from .harness import (
    ALGORITHMS,
    ExperimentConfig,
    pair_metrics,
    recovery_distances,
    run_clustering,
    run_experiment,
    run_recovery,
    sample_size_sweep,
    write_csv,
    write_json,
    write_sweep_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_GENERATION = 0, 2, 3


def _instance_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--network", choices=sorted(NETWORKS) + ["er"], default="er")
    g.add_argument("--nodes", type=int, default=10, help="node count for --network er")
    g.add_argument("--edge-prob", type=float, default=0.3, help="edge probability for --network er")
    g.add_argument("--entities", type=int, default=40)
    g.add_argument("--clusters", type=int, default=2)
    g.add_argument("--alpha", type=float, default=0.6)
    g.add_argument("--beta", type=float, default=0.2)
    g.add_argument("--gamma", type=float, default=0.9)
    g.add_argument("--latents", type=int, default=2, help="latent confounders per DAG")
    g.add_argument("--separation", type=float, default=None,
                   help="fraction of nodes at which dominants differ (default: alpha)")


def _instance_params(args) -> InstanceParams:
    return InstanceParams(
        network=args.network, n=args.nodes, edge_prob=args.edge_prob, entities=args.entities,
        clusters=args.clusters, alpha=args.alpha, beta=args.beta, gamma=args.gamma,
        latents_per_dag=args.latents, separation=args.separation,
    )


def _write_json(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    inst = build_instance(_instance_params(args), args.seed)
    write_bundle(inst, args.out)
    print(f"wrote {inst.m} entities in {inst.truth_partition.k} clusters to {args.out}")
    return EXIT_OK


def _bundle_params(args, inst):
    # command-line alpha/beta override the bundle's generation parameters
    p = inst.params
    changes = {k: getattr(args, k) for k in ("alpha", "beta") if getattr(args, k) is not None}
    return replace(p, **changes) if changes else p


def cmd_cluster(args) -> int:
    inst = read_bundle(args.bundle)
    inst.params = _bundle_params(args, inst)
    res, rep = run_clustering(inst, args.algo, args.sample_size, args.delta, args.seed, args.pag)
    m = pair_metrics(res, inst.truth_partition)
    out = rep.to_dict()
    out.update({
        "algo": args.algo, "partition": res.as_lists(), "low_confidence": res.low_confidence,
        "max_interventions": rep.max_interventions,
        "metrics": {"precision": m.precision, "recall": m.recall, "accuracy": m.accuracy},
    })
    _write_json(out, args.out)
    if args.out:
        print(f"{args.algo}: {res.k} clusters, accuracy {m.accuracy:.3f}, "
              f"max interventions {rep.max_interventions}")
    return EXIT_OK


def cmd_recover(args) -> int:
    inst = read_bundle(args.bundle)
    inst.params = _bundle_params(args, inst)
    if args.partition:
        clusters = ClusterResult(json.loads(Path(args.partition).read_text())["partition"])
    else:
        clusters = inst.truth_partition
    recovered, rep = run_recovery(inst, clusters, args.method, args.delta, args.seed, args.pag)
    dist = recovery_distances(inst, recovered)
    out = rep.to_dict()
    out.update({"method": args.method, "distances": dist, "max_interventions": rep.max_interventions,
                "recovered": {str(i): mixed_to_text(g) for i, g in sorted(recovered.items())}})
    _write_json(out, args.out)
    if args.out:
        print(f"{args.method}: max distance {max(dist)}, max interventions {rep.max_interventions}")
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        instance=_instance_params(args), algos=tuple(args.algo or ("ab-bounded", "fci-baseline")),
        sample_size=args.sample_size, runs=args.runs, seed=args.seed, delta=args.delta, pag_kind=args.pag,
        workers=args.workers,
    )


def cmd_evaluate(args) -> int:
    rec = run_experiment(_experiment_config(args))
    out = Path(args.out)
    write_csv([rec], out)
    write_json([rec], out.with_suffix(".json"))
    for algo, s in rec.summaries.items():
        print(f"{algo}: precision {s.precision_mean:.3f} recall {s.recall_mean:.3f} "
              f"accuracy {s.accuracy_mean:.3f} max interventions {s.max_interventions}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    points = sample_size_sweep(_experiment_config(args), args.sizes)
    write_sweep_csv(points, args.out)
    for p in points:
        print(f"|S|={p.sample_size}: mean max interventions {p.mean_max_interventions:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collabcausal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write an instance bundle")
    _instance_flags(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="bundle directory")
    gen.set_defaults(func=cmd_generate)

    def run_flags(p):
        p.add_argument("--bundle", required=True, help="instance bundle directory")
        p.add_argument("--alpha", type=float, default=None, help="override the bundle's alpha")
        p.add_argument("--beta", type=float, default=None, help="override the bundle's beta")
        p.add_argument("--delta", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pag", choices=("rules", "skeleton"), default="rules")
        p.add_argument("--out", default=None, help="JSON output file (default: stdout)")

    clu = sub.add_parser("cluster", help="cluster the entities of a bundle")
    run_flags(clu)
    clu.add_argument("--algo", choices=ALGORITHMS, default="ab-bounded")
    clu.add_argument("--sample-size", type=int, default=None)
    clu.set_defaults(func=cmd_cluster)

    rec = sub.add_parser("recover", help="recover per-entity MAGs from a partition")
    run_flags(rec)
    rec.add_argument("--method", choices=("ab-recovery", "meta"), default="ab-recovery")
    rec.add_argument("--partition", default=None, help="JSON from `cluster` (default: true partition)")
    rec.set_defaults(func=cmd_recover)

    for name, func, helptext in (("evaluate", cmd_evaluate, "metrics CSV over several runs"),
                                 ("sweep", cmd_sweep, "interventions versus sample size")):
        p = sub.add_parser(name, help=helptext)
        _instance_flags(p)
        p.add_argument("--algo", choices=ALGORITHMS, action="append", default=None,
                       help="repeatable (default: ab-bounded and fci-baseline)")
        p.add_argument("--sample-size", type=int, default=None)
        p.add_argument("--delta", type=float, default=0.05)
        p.add_argument("--runs", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pag", choices=("rules", "skeleton"), default="rules")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", required=True, help="CSV output file")
        if name == "sweep":
            p.add_argument("--sizes", type=int, nargs="+", default=[1, 2, 3])
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GenerationError as err:
        print(f"generation failed: {err}", file=sys.stderr)
        return EXIT_GENERATION
    except (ParameterError, PreconditionError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
