"""Command-line interface: ``gne {test,estimate,classify,synth,stats}``.

Exit codes: 0 on success, 2 on usage errors (argparse), 1 on runtime errors
such as unreadable or malformed input files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import estimate as est
from . import gnetest, metrics, synth
from .emphasis import WalkConfig, emphasis_pipeline
from .graph import Graph, LabelSet, from_edges, initial_beliefs, load_edge_list, load_labels, sample_priors
from .graph import write_edge_list, write_labels
from .propagate import PropagationConfig, classify

logger = logging.getLogger("gne")

MODE_FLAGS = {"neteffect": "neteffect", "hom": "neteffect_hom", "ec": "neteffect_ec", "a": "neteffect_a"}


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < value <= 1.0):
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _open_unit(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _default_seed() -> int:
    raw = os.environ.get("NETEFFECT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"NETEFFECT_SEED must be an integer, got {raw!r}") from None


def _add_common(p: argparse.ArgumentParser, inputs: bool = True) -> None:
    if inputs:
        p.add_argument("--edges", required=True, help="edge list, one 'u v' pair per line")
        p.add_argument("--labels", required=True, help="labels, one 'node<TAB>label' per line")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $NETEFFECT_SEED or 0)")
    p.add_argument("--outdir", default=".", help="directory for output files")
    p.add_argument("--threads", type=_positive_int, default=None, help="cap on BLAS worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_priors(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prior-frac", type=_fraction, default=0.05, help="share of labeled nodes observed")
    p.add_argument("--stratified", action="store_true", help="sample the prior fraction per class")


def _add_walks(p: argparse.ArgumentParser) -> None:
    p.add_argument("--walk-len", type=_positive_int, default=4)
    p.add_argument("--walk-trials", type=_positive_int, default=10)
    p.add_argument("--rank", type=_positive_int, default=256)
    p.add_argument("--no-emphasis", action="store_true", help="use the plain adjacency instead of A*")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gne", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="sampled chi-squared test for network effects")
    _add_common(p)
    _add_priors(p)
    p.add_argument("--rounds", type=_positive_int, default=1000)
    p.add_argument("--cap", type=_positive_int, default=500)
    p.add_argument("--alpha", type=_open_unit, default=0.05)

    p = sub.add_parser("estimate", help="estimate the compatibility matrix")
    _add_common(p)
    _add_priors(p)
    _add_walks(p)
    p.add_argument("--estimator", choices=("nef", "edge-count"), default="nef")

    p = sub.add_parser("classify", help="propagate beliefs and predict every node")
    _add_common(p)
    _add_priors(p)
    _add_walks(p)
    p.add_argument("--mode", choices=tuple(MODE_FLAGS), default="neteffect")
    p.add_argument("--f-safety", type=_open_unit, default=0.9)
    p.add_argument("--l1-threshold", type=_positive_float, default=1.0)
    p.add_argument("--max-iter", type=_positive_int, default=200)

    p = sub.add_parser("synth", help="generate a synthetic graph")
    _add_common(p, inputs=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=synth.PRESETS)
    src.add_argument("--spec", help="GeneratorSpec as a JSON file")

    p = sub.add_parser("stats", help="size and homophily statistics as JSON")
    _add_common(p)
    return parser


def _read_inputs(args) -> tuple[Graph, LabelSet]:
    try:
        with open(args.edges) as fh:
            graph = load_edge_list(fh)
        with open(args.labels) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}") from exc
    ids = [int(line.split()[0]) for line in text.splitlines()
           if line.strip() and not line.lstrip().startswith("#") and line.split()[0].lstrip("-").isdigit()]
    n = max(graph.n, max(ids, default=-1) + 1)
    if n > graph.n:
        graph = from_edges(graph.edges(), n=n)
    labels = load_labels(text, n)
    return graph, labels


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _report(args, argv, seed, timings, **extra) -> dict:
    out = {"command": ["gne", *argv], "subcommand": args.command, "seed": seed, "timings": timings}
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def _walk_config(args, seed) -> WalkConfig:
    return WalkConfig(length=args.walk_len, trials=args.walk_trials, rank=args.rank, seed=seed)


def cmd_test(args, seed, outdir, argv) -> int:
    t0 = time.perf_counter()
    graph, labels = _read_inputs(args)
    priors = sample_priors(labels, args.prior_frac, seed, stratified=args.stratified)
    config = gnetest.TestConfig(rounds=args.rounds, cap=args.cap, alpha=args.alpha, seed=seed)
    load_t = time.perf_counter() - t0
    t0 = time.perf_counter()
    pvals = gnetest.run_test(graph, priors, labels, config)
    result = gnetest.verdict(pvals, args.alpha)
    test_t = time.perf_counter() - t0

    header = ",".join(["class", *labels.classes])
    rows = [",".join([name, *(repr(float(x)) for x in row)]) for name, row in zip(labels.classes, pvals)]
    (outdir / "pvalues.csv").write_text("\n".join([header, *rows]) + "\n")
    _write_json(outdir / "verdict.json", result.to_dict(labels.classes))
    _write_json(outdir / "report.json", _report(args, argv, seed, {"load": load_t, "test": test_t},
                                                verdict=result.graph_level, n_priors=len(priors)))
    print(result.graph_level)
    return 0


def cmd_estimate(args, seed, outdir, argv) -> int:
    t0 = time.perf_counter()
    graph, labels = _read_inputs(args)
    priors = sample_priors(labels, args.prior_frac, seed, stratified=args.stratified)
    timings = {"load": time.perf_counter() - t0}
    meta = {"estimator": args.estimator, "emphasis": not args.no_emphasis}
    if args.estimator == "edge-count":
        t0 = time.perf_counter()
        display = est.edge_counting_baseline(graph, priors, labels)
        timings["estimate"] = time.perf_counter() - t0
        counts = np.bincount(labels.labels[priors.nodes], minlength=labels.c)
        meta.update(alpha_selected=[], clamped=False,
                    classes_without_priors=[labels.classes[k] for k in np.flatnonzero(counts == 0)])
    else:
        if args.no_emphasis:
            mat = graph.adjacency
        else:
            t0 = time.perf_counter()
            mat = emphasis_pipeline(graph, _walk_config(args, seed))
            timings["emphasis"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        fit = est.estimate_compatibility(mat, initial_beliefs(priors, labels), priors)
        timings["estimate"] = time.perf_counter() - t0
        display = est.to_display(fit.h)
        meta.update(alpha_selected=fit.alphas, clamped=bool(np.any(fit.h + 1.0 / labels.c < 0)),
                    classes_without_priors=[labels.classes[k] for k in fit.classes_without_priors])
    meta["form"] = "display"
    meta["classes"] = list(labels.classes)

    header = ",".join(["class", *labels.classes])
    rows = [",".join([name, *(repr(float(x)) for x in row)]) for name, row in zip(labels.classes, display)]
    (outdir / "compatibility.csv").write_text("\n".join([header, *rows]) + "\n")
    _write_json(outdir / "estimate.json", meta)
    _write_json(outdir / "report.json", _report(args, argv, seed, timings, ridge_alphas=meta["alpha_selected"]))
    return 0


def cmd_classify(args, seed, outdir, argv) -> int:
    t0 = time.perf_counter()
    graph, labels = _read_inputs(args)
    priors = sample_priors(labels, args.prior_frac, seed, stratified=args.stratified)
    load_t = time.perf_counter() - t0
    prop = PropagationConfig(f_safety=args.f_safety, l1_threshold=args.l1_threshold, max_iter=args.max_iter)
    result = classify(graph, labels, priors, walk_config=_walk_config(args, seed), prop_config=prop,
                      mode=MODE_FLAGS[args.mode], use_emphasis=not args.no_emphasis)
    held_out = np.setdiff1d(labels.labeled, priors.nodes)
    acc = metrics.accuracy(result.predictions, labels, held_out) if held_out.size else None

    names = labels.classes
    lines = [f"{i}\t{names[k]}" for i, k in enumerate(result.predictions)]
    (outdir / "predictions.tsv").write_text("\n".join(lines) + "\n")
    rep = result.report
    timings = {"load": load_t, **rep["timings"]}
    report = _report(args, argv, seed, timings, mode=rep["mode"], iterations=rep["iterations"],
                     converged=rep["converged"], rho=rep["rho"], f=rep["f"], ridge_alphas=rep["ridge_alphas"],
                     h_scale=rep["h_scale"], accuracy=acc, n_priors=len(priors), n_eval=int(held_out.size))
    _write_json(outdir / "report.json", report)
    if acc is not None:
        print(f"accuracy {acc:.4f}")
    return 0


def cmd_synth(args, seed, outdir, argv) -> int:
    t0 = time.perf_counter()
    if args.preset:
        spec = synth.preset(args.preset, seed)
    else:
        try:
            with open(args.spec) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read generator spec: {exc}") from exc
        if args.seed is not None:
            raw["seed"] = seed
        try:
            spec = synth.GeneratorSpec.from_dict(raw)
        except (KeyError, TypeError) as exc:
            raise CliError(f"malformed generator spec: {exc}") from exc
    graph, labels = synth.generate(spec)
    with open(outdir / "edges.txt", "w") as fh:
        write_edge_list(graph, fh)
    with open(outdir / "labels.tsv", "w") as fh:
        write_labels(labels, fh)
    (outdir / "spec.json").write_text(spec.to_json() + "\n")
    _write_json(outdir / "report.json", _report(args, argv, spec.seed, {"generate": time.perf_counter() - t0},
                                                n=graph.n, m=graph.m))
    return 0


def cmd_stats(args, seed, outdir, argv) -> int:
    graph, labels = _read_inputs(args)
    counts = labels.class_counts()
    out = {
        "n": graph.n,
        "m": graph.m,
        "c": labels.c,
        "class_counts": {name: int(k) for name, k in zip(labels.classes, counts)},
        "edge_homophily": metrics.edge_homophily(graph, labels),
        "h_hat": metrics.class_insensitive_homophily(graph, labels),
        "skipped_edges": metrics.skipped_edges(graph, labels),
    }
    print(json.dumps(out, allow_nan=False))
    return 0


COMMANDS = {"test": cmd_test, "estimate": cmd_estimate, "classify": cmd_classify,
            "synth": cmd_synth, "stats": cmd_stats}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        seed = args.seed if args.seed is not None else _default_seed()
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return COMMANDS[args.command](args, seed, outdir, argv)
        return COMMANDS[args.command](args, seed, outdir, argv)
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(f"gne {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
