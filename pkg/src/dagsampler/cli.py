"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 size-guard refusal, 4 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from .dataset import DataError, load_csv
from .estimators import build_collection, edge_frequencies, estimate_dds, estimate_dos_edges, estimate_iwdds
from .features import FeatureSyntaxError, parse_feature
from .harness import run_hoeffding_experiment, sampling_distribution_test
from .oracle import (MAX_ENUM_N, MAX_ORDER_ENUM_N, DagSpace, evidence_structure_modular)
from .sampler import DEFAULT_CAPACITY, Dag, IntervalCache, dds, make_rng
from .scores import FamilyScoreTable, ScoreConfig, build_beta_tables
from .subset_dp import MAX_N, GuardError, exact_edge_posteriors_order_modular, run_dp
from .estimator import AUTO_EVIDENCE_MAX_N

EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_DATA = 4

FEATURE_HELP = """\
feature grammar:
  edge(A,B)          A -> B
  path(A,B)          directed path A ~> B (one or more edges)
  pathlen(A,B,L)     directed path with at most L edges
  parents(A,{B,C})   parent set of A is exactly {B, C}
  & | ! ( )          and, or, not, grouping
examples:
  'path(X,Y) & path(Y,Z)'     X ~> Y ~> Z
  'path(X,Y) & !path(X,Z)'    X influences Y but not Z
"""


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _common(p: argparse.ArgumentParser, sampling=False):
    p.add_argument("--data", required=True, help="discrete CSV file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true", help="the CSV has no header row")
    p.add_argument("--score", choices=["k2", "bdeu"], default="k2")
    p.add_argument("--ess", type=_positive_float, default=1.0, help="BDeu equivalent sample size")
    p.add_argument("--max-indegree", type=_nonneg_int, default=3)
    p.add_argument("--rho", choices=["uniform", "invbinom"], default=None,
                   help="parent-set prior (default: invbinom for k2, uniform for bdeu)")
    p.add_argument("--score-cache", metavar="DIR", help="reuse log-beta tables keyed by content hash")
    p.add_argument("--allow-large-n", action="store_true",
                   help=f"lift the n <= {MAX_N} subset-DP limit (memory grows as n 2^n)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", help="output path (default: stdout)")
    if sampling:
        p.add_argument("--samples", type=_positive_int, default=1000, help="number of DAG samples N_o")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cache-capacity", type=_nonneg_int, default=DEFAULT_CAPACITY,
                       help="interval-cache capacity in stored intervals (0 disables the cache)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagsampler", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog=FEATURE_HELP)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score-dump", help="write the log-beta table as JSON")
    _common(p)

    p = sub.add_parser("exact-edges", help="exact order-modular edge posteriors")
    _common(p)

    p = sub.add_parser("dds", help="Direct DAG Sampling; JSON-lines sample dump",
                       epilog=FEATURE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p, sampling=True)
    p.add_argument("--summary", help="write edge/feature estimates here")
    p.add_argument("--timings", help="write per-stage timings here")
    p.add_argument("--feature", action="append", default=[])

    p = sub.add_parser("iwdds", help="importance-weighted DDS estimates with sound intervals",
                       epilog=FEATURE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p, sampling=True)
    p.add_argument("--feature", action="append", default=[])
    p.add_argument("--log-evidence", type=float, help="externally computed log p(D)")
    p.add_argument("--edges", action="store_true", help="also estimate every edge")

    p = sub.add_parser("estimate", help="estimate features from an existing sample dump",
                       epilog=FEATURE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--sample-file", required=True, help="JSON-lines dump written by 'dds'")
    p.add_argument("--feature", action="append", default=[])
    p.add_argument("--log-evidence", type=float)

    p = sub.add_parser("oracle", help="exact values by enumeration (small n)",
                       epilog=FEATURE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--feature", action="append", default=[])

    p = sub.add_parser("validate", help="Hoeffding or sampling-distribution validation")
    _common(p, sampling=True)
    p.add_argument("--kind", choices=["hoeffding", "sampling"], default="hoeffding")
    p.add_argument("--epsilon", type=_positive_float, default=0.02)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--repetitions", type=_positive_int, default=400)
    p.add_argument("--threshold", type=_positive_float, default=0.01)
    p.add_argument("--csv", help="also write per-run values as CSV")
    return parser


def _config(args) -> ScoreConfig:
    rho = {"invbinom": "inv_binomial", "uniform": "uniform", None: None}[args.rho]
    return ScoreConfig(args.score, args.ess, args.max_indegree, rho)


def _load(args):
    ds = load_csv(args.data, delimiter=args.delimiter, header=not args.no_header)
    cfg = _config(args)
    if args.score_cache:
        h = hashlib.sha256()
        h.update(Path(args.data).read_bytes())
        h.update(json.dumps([cfg.as_dict(), args.delimiter, args.no_header], sort_keys=True).encode())
        path = Path(args.score_cache) / f"{h.hexdigest()}.json"
        if path.exists():
            return ds, cfg, FamilyScoreTable.load(path)
        beta = build_beta_tables(ds, cfg)
        path.parent.mkdir(parents=True, exist_ok=True)
        beta.save(path)
        return ds, cfg, beta
    return ds, cfg, build_beta_tables(ds, cfg)


def _dp(args, beta):
    return run_dp(beta, max_n=10 ** 9 if args.allow_large_n else MAX_N)


def _features(args, names):
    return [(text, parse_feature(text, names)) for text in args.feature]


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cache(args):
    return IntervalCache(args.cache_capacity) if args.cache_capacity > 0 else None


def cmd_score_dump(args):
    _, _, beta = _load(args)
    _emit(args, json.dumps(beta.to_json(), sort_keys=True) + "\n")


def cmd_exact_edges(args):
    ds, cfg, beta = _load(args)
    tables = _dp(args, beta)
    P = exact_edge_posteriors_order_modular(tables, beta)
    _emit(args, _dumps({
        "names": list(ds.names), "config": cfg.as_dict(),
        "log_evidence_order": tables.log_evidence_order,
        "edge_posteriors": P.tolist(),
        "convention": "edge_posteriors[i][j] = p(j -> i | D); row = child, column = parent",
    }))


def _sample_lines(res) -> str:
    lines = []
    for idx, s in enumerate(res.samples):
        lines.append(json.dumps({"index": idx, "order_index": s.order_index,
                                 "parents": list(s.dag.parents), "log_joint": s.log_joint}))
    return "\n".join(lines) + "\n"


def cmd_dds(args):
    ds, cfg, beta = _load(args)
    feats = _features(args, ds.names)
    t0 = time.perf_counter()
    tables = _dp(args, beta)
    t_dp = time.perf_counter() - t0
    cache = _cache(args)
    res = dds(tables, beta, args.samples, make_rng(args.seed), cache)
    _emit(args, _sample_lines(res))
    if args.summary:
        coll = build_collection(res)
        summary = {
            "names": list(ds.names), "config": cfg.as_dict(), "seed": args.seed, "stream": 0,
            "n_samples": args.samples, "unique_dags": len(coll),
            "log_evidence_order": tables.log_evidence_order,
            "edge_estimates_dds": edge_frequencies(coll).tolist(),
            "edge_estimates_dos": estimate_dos_edges(res.orders, tables).tolist(),
            "features": {text: estimate_dds(coll, f).value for text, f in feats},
        }
        Path(args.summary).write_text(_dumps(summary))
    if args.timings:
        Path(args.timings).write_text(_dumps({"T_DP": t_dp, **res.timings,
                                              "cache": res.cache_stats}))


def _evidence(args, beta, n):
    if args.log_evidence is not None:
        return args.log_evidence
    if n <= AUTO_EVIDENCE_MAX_N:
        return evidence_structure_modular(beta)
    return None


def _estimates(coll, feats, log_ev, seed):
    out = []
    for text, f in feats:
        est = estimate_iwdds(coll, f, log_ev)
        est.feature = text
        rec = est.to_json(seed=seed)
        rec["dds_value"] = estimate_dds(coll, f).value
        out.append(rec)
    return out


def cmd_iwdds(args):
    ds, cfg, beta = _load(args)
    feats = _features(args, ds.names)
    if args.edges:
        feats += [(f"edge({a},{b})", parse_feature(f"edge({a},{b})", ds.names))
                  for a in ds.names for b in ds.names if a != b]
    tables = _dp(args, beta)
    res = dds(tables, beta, args.samples, make_rng(args.seed), _cache(args))
    coll = build_collection(res)
    log_ev = _evidence(args, beta, ds.n)
    _emit(args, _dumps({"log_evidence": log_ev, "estimates": _estimates(coll, feats, log_ev, args.seed)}))


def cmd_estimate(args):
    ds, cfg, beta = _load(args)
    feats = _features(args, ds.names)
    pairs = []
    with open(args.sample_file) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if len(rec["parents"]) != ds.n:
                raise DataError(f"{args.sample_file}: line {lineno} has {len(rec['parents'])} nodes, "
                                f"the data has {ds.n}")
            pairs.append((Dag(tuple(rec["parents"])), float(rec["log_joint"])))
    if not pairs:
        raise DataError(f"{args.sample_file}: no samples")
    coll = build_collection(pairs)
    log_ev = _evidence(args, beta, ds.n)
    _emit(args, _dumps({"log_evidence": log_ev, "estimates": _estimates(coll, feats, log_ev, None)}))


def cmd_oracle(args):
    ds, cfg, beta = _load(args)
    if ds.n > MAX_ENUM_N:
        raise GuardError(f"exact enumeration is limited to n <= {MAX_ENUM_N}, got n={ds.n}")
    feats = _features(args, ds.names)
    tables = _dp(args, beta)
    space = DagSpace(beta)
    order_ok = ds.n <= MAX_ORDER_ENUM_N
    out = {
        "names": list(ds.names), "config": cfg.as_dict(), "n_dags": len(space),
        "evidence": {
            "structure_modular": {"enumeration": space.log_evidence,
                                  "inclusion_exclusion": evidence_structure_modular(beta)},
            "order_modular": {"subset_dp": tables.log_evidence_order,
                              "enumeration": space.log_evidence_order},
        },
        "features": [
            {"feature": text, "structure_modular": space.structure_modular(f),
             "order_modular": space.order_modular(f) if order_ok else None}
            for text, f in feats
        ],
    }
    _emit(args, _dumps(out))


def cmd_validate(args):
    ds, cfg, _ = _load(args)
    if args.kind == "hoeffding":
        if not 0 < args.delta < 1:
            raise UsageError("--delta must lie in (0, 1)")
        rep = run_hoeffding_experiment(ds, cfg, args.epsilon, args.delta, args.repetitions,
                                       args.seed, workers=args.workers)
    else:
        rep = sampling_distribution_test(ds, cfg, args.samples, args.seed, args.threshold)
    _emit(args, rep.dumps() + "\n")
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())


COMMANDS = {
    "score-dump": cmd_score_dump, "exact-edges": cmd_exact_edges, "dds": cmd_dds,
    "iwdds": cmd_iwdds, "estimate": cmd_estimate, "oracle": cmd_oracle, "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (UsageError, FeatureSyntaxError) as exc:
        parser.error(str(exc))
    except GuardError as exc:
        print(f"dagsampler: refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"dagsampler: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
