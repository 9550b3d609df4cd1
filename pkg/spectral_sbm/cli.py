"""
Command-line driver.

    python -m spectral_sbm generate --n 1000 --k 4 --p 0.5 --q 0.1 --seed 7 --out runs/g
    python -m spectral_sbm cluster runs/g.edges --labels runs/g.labels --algorithm csvd
    python -m spectral_sbm sweep sweep.json --threads 4 --out sweep.csv
    python -m spectral_sbm verify --audit partition --n 6 --t 3

Exit codes: 0 success, 1 a failed exact-identity audit (verify only),
2 usage, parse, spec or resource errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np

from spectral_sbm import __version__
from spectral_sbm.clustering import ALGORITHMS, DeltaMode
from spectral_sbm.config import (
    EDGE_SUFFIX,
    EXACT_AUDITS,
    LABELS_SUFFIX,
    META_SUFFIX,
    THREADS_ENV_VAR,
    default_threads,
)
from spectral_sbm.errors import ParameterError, SpectralSBMError
from spectral_sbm.evaluation import compare
from spectral_sbm.formats import (
    read_edge_list,
    read_labels,
    read_metadata,
    write_edge_list,
    write_labels,
    write_metadata,
)
from spectral_sbm.harness import (
    VERIFY_AUDITS,
    load_spec,
    recovery_rates,
    run_algorithm,
    run_sweep,
    run_verify_audit,
    write_sweep_csv,
)
from spectral_sbm.model import BlockParams, center, plant, sample_ssbm
from spectral_sbm.verification import write_records

logger = logging.getLogger("spectral_sbm.cli")

EXIT_OK = 0
EXIT_AUDIT_FAILED = 1
EXIT_USAGE = 2


def _summary(title: str, lines: Sequence[str]) -> None:
    """End-of-run block on stderr; stdout stays machine-readable."""
    print(f"\n===== {title} =====", file=sys.stderr)
    for line in lines:
        print(line, file=sys.stderr)


def _open_output(path: str, newline: Optional[str] = None) -> TextIO:
    try:
        return open(path, "w", newline=newline, encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot write {path}: {exc}") from exc


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _sizes(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got '{value}'")


def _delta(value: str) -> DeltaMode:
    try:
        return DeltaMode.parse(value)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))


###############################################################################
#                                  GENERATE                                   #
###############################################################################
def cmd_generate(args) -> int:
    params = BlockParams(n=args.n, p=args.p, q=args.q,
                         sizes=tuple(args.sizes) if args.sizes else None,
                         k=None if args.sizes else args.k)
    model = plant(params, args.seed, args.self_loops)
    a = sample_ssbm(model)

    prefix = Path(args.out)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True, exist_ok=True)
    edges_path = Path(str(prefix) + EDGE_SUFFIX)
    labels_path = Path(str(prefix) + LABELS_SUFFIX)
    meta_path = Path(str(prefix) + META_SUFFIX)
    try:
        write_edge_list(edges_path, a)
        write_labels(labels_path, model.labels)
        write_metadata(meta_path, {
            "n": params.n, "k": params.k, "p": params.p, "q": params.q,
            "sizes": list(params.sizes) if params.sizes else None,
            "cluster_sizes": model.cluster_sizes.tolist(), "s_star": model.s_star,
            "seed": args.seed, "self_loops": args.self_loops,
        })
    except OSError as exc:
        raise ParameterError(f"cannot write under {prefix}: {exc}") from exc

    _summary("GENERATED", [
        f"Vertices: {params.n}   Clusters: {params.k}   p={params.p}   q={params.q}",
        f"Cluster sizes: {model.cluster_sizes.tolist()}",
        f"Edges: {int(np.triu(a).sum())}   Self-loops: {'on' if args.self_loops else 'off'}",
        f"Files: {edges_path}, {labels_path}, {meta_path}",
    ])
    return EXIT_OK


###############################################################################
#                                   CLUSTER                                   #
###############################################################################
def _graph_metadata(graph: Path) -> Dict[str, Any]:
    name = str(graph)
    if not name.endswith(EDGE_SUFFIX):
        return {}
    meta = Path(name[: -len(EDGE_SUFFIX)] + META_SUFFIX)
    return read_metadata(meta) if meta.exists() else {}


def cmd_cluster(args) -> int:
    graph = Path(args.graph)
    meta = _graph_metadata(graph)
    p = args.p if args.p is not None else meta.get("p")
    q = args.q if args.q is not None else meta.get("q")
    k = args.k if args.k is not None else meta.get("k")
    s_star = args.s_star if args.s_star is not None else meta.get("s_star")
    if p is None or q is None:
        raise ParameterError("p and q are required (flags or a .meta.json next to the graph)")
    if k is None and args.algorithm != "power":
        raise ParameterError(f"--k is required for algorithm '{args.algorithm}'")

    a = read_edge_list(graph, n=meta.get("n"))
    labels = read_labels(args.labels) if args.labels else None
    if labels is not None and labels.size != a.shape[0]:
        raise ParameterError(f"labels cover {labels.size} vertices, graph has {a.shape[0]}")

    clustering = run_algorithm(args.algorithm, a, center(a, q), p, q, k or 1, r=args.r,
                               delta=args.delta, seed=args.seed, s_star_hint=s_star,
                               peel=args.peel)
    result = clustering.to_dict()
    report = compare(clustering, labels) if labels is not None else None
    result["report"] = {
        "exact_all": report.exact_all if report else None,
        "exact_largest": report.exact_largest if report else None,
        "accuracy": report.accuracy if report else None,
        "per_cluster_jaccard": report.per_cluster_jaccard if report else None,
    }
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ParameterError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)

    lines = [
        f"Algorithm: {clustering.algorithm}   Vertices: {clustering.n}",
        f"Groups: {len(clustering.groups)}   Largest: {len(clustering.largest_group)} vertices",
    ]
    if report:
        lines.append(f"Accuracy: {report.accuracy:.4f}   Exact (all): {report.exact_all}"
                     f"   Exact (largest): {report.exact_largest}")
    _summary("CLUSTERING", lines)
    return EXIT_OK


###############################################################################
#                                    SWEEP                                    #
###############################################################################
def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    out = args.out or spec.out
    result = run_sweep(spec, threads=args.threads)

    if out:
        with _open_output(out, newline="") as handle:
            write_sweep_csv(result.rows, handle, timing=spec.timing)
        if result.records:
            with _open_output(out + ".audits.jsonl") as handle:
                write_records(result.records, handle)
    else:
        write_sweep_csv(result.rows, sys.stdout, timing=spec.timing)
        if result.records:
            logger.warning("audit records are only written when an output path is given")

    rates = recovery_rates(result.rows)
    _summary("SWEEP RESULTS", [f"Rows: {len(result.rows)}   Audit records: {len(result.records)}"]
             + [f"point {point:>3}  {algorithm:<5}  exact recovery {rate:.2f}"
                for (point, algorithm), rate in sorted(rates.items())])
    return EXIT_OK


###############################################################################
#                                   VERIFY                                    #
###############################################################################
def cmd_verify(args) -> int:
    overrides = {"n": args.n, "k": args.k, "p": args.p, "q": args.q, "t": args.t, "r": args.r,
                 "x": args.x}
    names = args.audit or list(VERIFY_AUDITS)
    records = [run_verify_audit(name, overrides, seed=args.seed, self_loops=args.self_loops)
               for name in names]

    if args.out:
        with _open_output(args.out) as handle:
            write_records(records, handle)
    else:
        write_records(records, sys.stdout)

    failed_exact = [r.audit for r in records if r.audit in EXACT_AUDITS and not r.passed]
    _summary("VERIFY RESULTS", [
        f"{r.audit:<20} {'PASS' if r.passed else 'FAIL'}   measured={r.measured}"
        for r in records
    ] + ([f"Failed identities: {', '.join(failed_exact)}"] if failed_exact else []))
    return EXIT_AUDIT_FAILED if failed_exact else EXIT_OK


###############################################################################
#                                   PARSER                                    #
###############################################################################
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral_sbm",
        description="Spectral community detection on planted-partition graphs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a planted-partition graph")
    gen.add_argument("--n", type=int, required=True, help="vertex count")
    group = gen.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int, help="clusters with uniform label assignment")
    group.add_argument("--sizes", type=_sizes, help="explicit cluster sizes, e.g. 800,10,10")
    gen.add_argument("--p", type=float, required=True, help="intra-cluster edge probability")
    gen.add_argument("--q", type=float, required=True, help="inter-cluster edge probability")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--self-loops", type=_on_off, default=True, metavar="{on,off}")
    gen.add_argument("--out", required=True, help="output prefix for .edges/.labels/.meta.json")
    gen.set_defaults(func=cmd_generate)

    clu = sub.add_parser("cluster", help="run one algorithm on an edge list")
    clu.add_argument("graph", help="edge-list file")
    clu.add_argument("--labels", help="planted labels file for scoring")
    clu.add_argument("--algorithm", choices=ALGORITHMS, default="power")
    clu.add_argument("--p", type=float)
    clu.add_argument("--q", type=float)
    clu.add_argument("--k", type=int)
    clu.add_argument("--r", type=int, help="power exponent (default ceil(ln n))")
    clu.add_argument("--delta", type=_delta, default=DeltaMode(),
                     help="'theory', 'estimate' or an explicit positive threshold")
    clu.add_argument("--s-star", type=int, help="largest cluster size for the theory threshold")
    clu.add_argument("--seed", type=int, default=0, help="halving seed for svd2")
    clu.add_argument("--peel", action="store_true", help="experimental iterative peeling (power)")
    clu.add_argument("--out", help="result JSON path (default stdout)")
    clu.set_defaults(func=cmd_cluster)

    swp = sub.add_parser("sweep", help="run a JSON experiment spec")
    swp.add_argument("spec", help="experiment spec JSON")
    swp.add_argument("--threads", type=int, default=default_threads(),
                     help=f"worker processes (default ${THREADS_ENV_VAR} or 1)")
    swp.add_argument("--out", help="CSV path (default: spec 'out', else stdout)")
    swp.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="run numerical audits")
    ver.add_argument("--audit", action="append", choices=VERIFY_AUDITS,
                     help="audit to run (repeatable; default all)")
    ver.add_argument("--n", type=int)
    ver.add_argument("--k", type=int)
    ver.add_argument("--p", type=float)
    ver.add_argument("--q", type=float)
    ver.add_argument("--t", type=int)
    ver.add_argument("--r", type=int)
    ver.add_argument("--x", type=_sizes, help="encoding for class-partition, e.g. 1,2,1")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--self-loops", type=_on_off, default=True, metavar="{on,off}")
    ver.add_argument("--out", help="JSON-lines path (default stdout)")
    ver.set_defaults(func=cmd_verify)
    return parser


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except SpectralSBMError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
