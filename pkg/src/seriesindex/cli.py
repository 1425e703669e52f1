"""Benchmark and verification command line.

Examples::

    seriesindex-bench --generate 100000 --gen-queries 100 --sigma 0.05 \\
        --threads 8 --verify --out results/
    seriesindex-bench --dataset walks.bin --queries q.bin --fault t3:query:0.5:crash
    seriesindex-bench --generate 100000 --baseline fi-based --threads 4
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import KINDS, run_baseline
from .datasets import (brute_force_nn, generate_queries, random_walks,
                       read_series, write_series)
from .engine import MetricsReport, RunConfig, run_session
from .faults import FaultPlan


def build_parser():
    p = argparse.ArgumentParser(
        prog="seriesindex-bench",
        description="Build a lock-free iSAX index, answer exact 1-NN queries, report timings.",
    )
    src = p.add_argument_group("data")
    src.add_argument("--dataset", type=Path, help="series file (written when --generate is given)")
    src.add_argument("--raw", action="store_true", help="dataset/query files have no header")
    src.add_argument("--generate", type=int, metavar="COUNT", help="generate COUNT random walks")
    src.add_argument("--seed", type=int, default=0)
    src.add_argument("--n", type=int, default=256, help="series length")
    q = p.add_argument_group("queries")
    qx = q.add_mutually_exclusive_group()
    qx.add_argument("--queries", type=Path, help="query file")
    qx.add_argument("--gen-queries", type=int, metavar="COUNT", default=None)
    q.add_argument("--sigma", type=float, default=0.05, help="noise of generated queries")
    q.add_argument("--query-kind", choices=("noisy", "walk"), default="noisy",
                   help="noisy copies of dataset series, or fresh random walks")
    idx = p.add_argument_group("index")
    idx.add_argument("--segments", type=int, default=8)
    idx.add_argument("--leaf-size", type=int, default=2000)
    idx.add_argument("--max-bits", type=int, default=8)
    idx.add_argument("--threads", type=int, default=1)
    idx.add_argument("--beta", type=float, default=1.0, help="backoff multiplier")
    idx.add_argument("--max-backoff", type=float, default=0.1, help="seconds")
    run = p.add_argument_group("run")
    run.add_argument("--verify", action="store_true", help="check answers by linear scan")
    run.add_argument("--fault", action="append", default=[],
                     help="e.g. t3:query:0.5:crash or t1:tree:0.2:delay=100 (repeatable)")
    run.add_argument("--baseline", choices=KINDS, help="run only a baseline summariser")
    run.add_argument("--out", type=Path, default=Path("."), help="output directory")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def load_data(args):
    if args.generate is not None:
        if args.generate <= 0:
            raise ValueError("--generate needs a positive count")
        data = random_walks(args.generate, args.n, args.seed)
        if args.dataset is not None:
            write_series(args.dataset, data)
        return data
    if args.dataset is None:
        raise ValueError("give --dataset or --generate")
    data = read_series(args.dataset, raw=args.raw, n=args.n if args.raw else None)
    return data


def load_queries(args, data):
    if args.queries is not None:
        return np.asarray(read_series(args.queries, raw=args.raw,
                                      n=data.shape[1] if args.raw else None))
    if args.gen_queries is None:
        return np.empty((0, data.shape[1]), dtype=np.float32)
    return generate_queries(data, args.gen_queries, args.sigma, args.seed + 1,
                            kind=args.query_kind)


def write_metrics(out, report):
    out.mkdir(parents=True, exist_ok=True)
    path = out / "metrics.csv"
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(MetricsReport.COLUMNS)
        w.writerow(report.row())
    return path


def write_answers(out, answers):
    out.mkdir(parents=True, exist_ok=True)
    path = out / "answers.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("query_id", "series_id", "distance"))
        for q, ref, dist in answers:
            w.writerow((q, ref, f"{dist:.9g}"))
    return path


def verify(data, queries, answers, rtol=1e-4):
    bad = []
    for (q, ref, dist), query in zip(answers, queries):
        want_ref, want = brute_force_nn(data, query)
        if abs(dist - want) > rtol * max(want, 1e-12):
            bad.append((q, ref, dist, want_ref, want))
    return bad


def _run_baseline(args, data, faults):
    buffers, seconds, crashed = run_baseline(
        data, args.baseline, args.threads, segments=args.segments,
        max_bits=args.max_bits, faults=faults)
    report = MetricsReport(threads=args.threads, series=len(data),
                           summarization_time=seconds, total_time=seconds,
                           crashed=crashed, baseline=args.baseline,
                           faults=str(faults))
    distinct = len(buffers.distinct_ids())
    report.multiplicity = buffers.total_pairs() / distinct if distinct else 1.0
    status = 0
    if args.verify and distinct != len(data):
        print(f"baseline covered {distinct} of {len(data)} series", file=sys.stderr)
        status = 1
    return report, status


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        faults = FaultPlan.parse(args.fault)
        data = load_data(args)
        if args.baseline:
            report, status = _run_baseline(args, data, faults)
            path = write_metrics(args.out, report)
            print(f"{args.baseline}: {report.summarization_time:.3f}s -> {path}")
            return status
        queries = load_queries(args, data)
        config = RunConfig(segments=args.segments, leaf_size=args.leaf_size,
                           max_bits=args.max_bits, threads=args.threads,
                           beta=args.beta, max_backoff=args.max_backoff)
        report, _ = run_session(data, queries, config, faults)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report.query_kind = args.query_kind if args.gen_queries is not None else (
        "file" if args.queries is not None else "")
    write_metrics(args.out, report)
    write_answers(args.out, report.answers)
    print(f"summarization {report.summarization_time:.3f}s  tree {report.tree_time:.3f}s  "
          f"query {report.query_time:.3f}s  total {report.total_time:.3f}s  "
          f"multiplicity {report.multiplicity:.4f}")
    if args.verify and len(queries):
        bad = verify(data, queries, report.answers)
        if bad:
            print("answers differ from linear scan:", file=sys.stderr)
            for q, ref, dist, want_ref, want in bad:
                print(f"  query {q}: got series {ref} at {dist:.6g}, "
                      f"scan says {want_ref} at {want:.6g}", file=sys.stderr)
            return 1
        print(f"verified {len(queries)} answers against a linear scan")
    return 0


if __name__ == "__main__":
    sys.exit(main())
