"""Acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line; the lines are printed together
in the terminal summary (see ``conftest.py``). Run on its own with
``pytest tests/test_acceptance.py -v``.
"""
import json
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from dagsampler._bits import logsumexp
from dagsampler.dataset import from_array, synthetic_dataset
from dagsampler.estimators import DagCollection, build_collection, estimate_iwdds
from dagsampler.features import Edge, f1, f2, f3, f4, f5
from dagsampler.harness import hoeffding_sample_size, run_hoeffding_experiment, sampling_distribution_test
from dagsampler.oracle import (DagSpace, count_linear_extensions, count_linear_extensions_bruteforce,
                               evidence_by_enumeration, evidence_from_order_modular,
                               evidence_structure_modular, order_modular_edge_posteriors_by_enumeration)
from dagsampler.sampler import Dag, IntervalCache, dds, make_rng
from dagsampler.scores import ScoreConfig, build_beta_tables
from dagsampler.subset_dp import exact_edge_posteriors_order_modular, run_dp

RESULTS: list[str] = []


@contextmanager
def criterion(num, title):
    info = {}
    try:
        yield info
    except BaseException as exc:
        RESULTS.append(f"[{num:>2}] FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    RESULTS.append(f"[{num:>2}] PASS  {title}" + (f" ({info['detail']})" if "detail" in info else ""))


def test_01_exact_dp_vs_oracle():
    with criterion(1, "order-modular edge DP matches order x DAG enumeration") as info:
        combos = [(m, fam, rho) for m in (10, 50) for fam in ("k2", "bdeu") for rho in ("uniform", "inv_binomial")]
        worst_err, worst_time = 0.0, 0.0
        for d in range(20):
            m, fam, rho = combos[d % len(combos)]
            X = np.random.default_rng(1000 + d).integers(0, 2, size=(m, 4))
            ds = from_array(X, arity=[2] * 4)
            t0 = time.perf_counter()
            beta = build_beta_tables(ds, ScoreConfig(fam, max_indegree=3, rho=rho))
            P = exact_edge_posteriors_order_modular(run_dp(beta), beta)
            elapsed = time.perf_counter() - t0
            err = np.abs(P - order_modular_edge_posteriors_by_enumeration(beta)).max()
            worst_err, worst_time = max(worst_err, err), max(worst_time, elapsed)
            assert err < 1e-9, f"dataset {d}: max abs error {err:.3g}"
            assert elapsed < 1.0, f"dataset {d}: {elapsed:.2f}s"
        info["detail"] = f"20 datasets, max err {worst_err:.2e}, max time {worst_time:.3f}s"


def test_02_evidence_triple_agreement():
    with criterion(2, "evidence by enumeration, inclusion-exclusion and order-modular reconstruction") as info:
        worst = 0.0
        for seed, fam in [(0, "k2"), (1, "bdeu"), (2, "k2"), (3, "bdeu")]:
            ds, _ = synthetic_dataset(5, 80, seed=seed)
            beta = build_beta_tables(ds, ScoreConfig(fam))
            vals = [evidence_by_enumeration(beta), evidence_structure_modular(beta),
                    evidence_from_order_modular(beta, run_dp(beta).log_evidence_order)]
            for a in vals:
                for b in vals:
                    rel = abs(np.expm1(a - b))
                    worst = max(worst, rel)
                    assert rel < 1e-9
        info["detail"] = f"n=5, 4 datasets, max relative gap {worst:.2e}"


def test_03_sampler_exactness():
    with criterion(3, "DDS DAG frequencies vs exact p_<(G|D), n=3, N=2e5") as info:
        ds, _ = synthetic_dataset(3, 40, seed=0)
        t0 = time.perf_counter()
        rep = sampling_distribution_test(ds, ScoreConfig(), 200_000, seed=0, threshold=0.01)
        elapsed = time.perf_counter() - t0
        tv = rep.values[0]
        assert tv < 0.01, f"TV {tv:.4f}"
        assert elapsed < 30, f"{elapsed:.1f}s"
        info["detail"] = f"TV {tv:.4f}, {elapsed:.1f}s"


def test_04_hoeffding_guarantee():
    with criterion(4, "Hoeffding violation rate, eps=0.02, delta=0.05, R=400, n=4") as info:
        # few rows keep several edge posteriors near 1/2, where violations are likeliest
        ds, _ = synthetic_dataset(4, 20, seed=3)
        t0 = time.perf_counter()
        rep = run_hoeffding_experiment(ds, ScoreConfig(), 0.02, 0.05, repetitions=400, seed=0)
        elapsed = time.perf_counter() - t0
        assert rep.details["n_samples"] == 4612
        assert rep.passed, f"min one-sided p-value {rep.details['min_p_exceed']:.2e}"
        assert elapsed < 600
        info["detail"] = (f"max p_vio {rep.details['max_p_vio']:.4f}, "
                          f"min p-value {rep.details['min_p_exceed']:.3f}, {elapsed:.0f}s")


def test_05_sound_interval():
    with criterion(5, "exact structure-modular posterior inside [D p, D p + 1 - D], 50 trials at n=5") as info:
        rng = np.random.default_rng(2024)
        makers = [lambda x, y, z: Edge(x, y), lambda x, y, z: f1(x, y), lambda x, y, z: f2(x, y),
                  f3, f4, f5]
        min_delta = 1.0
        for trial in range(50):
            ds, _ = synthetic_dataset(5, int(rng.integers(20, 200)), seed=int(rng.integers(1 << 30)))
            beta = build_beta_tables(ds, ScoreConfig(("k2", "bdeu")[trial % 2]))
            tables = run_dp(beta)
            space = DagSpace(beta)
            N = int(rng.integers(10, 10_001))
            x, y, z = (int(v) for v in rng.permutation(5)[:3])
            f = makers[int(rng.integers(len(makers)))](x, y, z)
            coll = build_collection(dds(tables, beta, N, make_rng(trial)))
            est = estimate_iwdds(coll, f, space.log_evidence)
            lo, hi = est.interval
            exact = space.structure_modular(f)
            assert lo - 1e-9 <= exact <= hi + 1e-9, f"trial {trial}: {exact} not in [{lo}, {hi}]"
            min_delta = min(min_delta, est.delta)
        info["detail"] = f"50/50 inside, smallest delta {min_delta:.3f}"


def test_06_iwdds_consistency():
    with criterion(6, "delta nondecreasing over N in {1e2,1e3,1e4}; edge error < 1e-3 once delta > 0.999") as info:
        ds, _ = synthetic_dataset(4, 200, seed=0, concentration=0.1)
        beta = build_beta_tables(ds, ScoreConfig("bdeu"))
        space = DagSpace(beta)
        draws = list(dds(run_dp(beta), beta, 10_000, make_rng(0)))
        deltas, checked = [], None
        for N in (100, 1000, 10_000):
            coll = build_collection(draws[:N])
            d = coll.delta(space.log_evidence)
            deltas.append(d)
            if checked is None and d > 0.999:
                err = max(abs(estimate_iwdds(coll, Edge(j, i)).value - space.structure_modular(Edge(j, i)))
                          for i in range(4) for j in range(4) if i != j)
                checked = (N, err)
        assert all(b >= a for a, b in zip(deltas, deltas[1:])), deltas
        assert checked is not None, f"delta never exceeded 0.999: {deltas}"
        assert checked[1] < 1e-3, f"max edge error {checked[1]:.2e} at N={checked[0]}"
        info["detail"] = f"deltas {[round(d, 5) for d in deltas]}, err {checked[1]:.1e} at N={checked[0]}"


def _dump(res):
    return "\n".join(json.dumps({"index": k, "order_index": s.order_index, "parents": list(s.dag.parents),
                                 "log_joint": s.log_joint}) for k, s in enumerate(res.samples)).encode()


def test_07_cache_transparency():
    with criterion(7, "cache on vs off gives byte-identical dumps with >= 1 recycle") as info:
        ds, _ = synthetic_dataset(8, 150, seed=1)
        beta = build_beta_tables(ds, ScoreConfig())
        tables = run_dp(beta)
        off = _dump(dds(tables, beta, 5000, make_rng(11), None))
        cache = IntervalCache(capacity=200)
        on = _dump(dds(tables, beta, 5000, make_rng(11), cache))
        assert cache.recycles >= 1
        assert on == off
        info["detail"] = f"{cache.recycles} recycles, {cache.evicted} entries evicted"


def test_08_linear_extensions():
    with criterion(8, "linear-extension counts") as info:
        assert count_linear_extensions(Dag((0,) * 7)) == 5040
        assert count_linear_extensions(Dag((0, 1, 2, 4, 8, 16, 32))) == 1
        rng = np.random.default_rng(8)
        for _ in range(60):
            n = int(rng.integers(1, 8))
            perm = rng.permutation(n)
            parents = [0] * n
            for pos, v in enumerate(perm):
                for u in perm[:pos]:
                    if rng.random() < 0.3:
                        parents[v] |= 1 << int(u)
            d = Dag(tuple(parents))
            assert count_linear_extensions(d) == count_linear_extensions_bruteforce(d)
        info["detail"] = "empty n=7 -> 5040, chain -> 1, 60 random DAGs match"


def test_09_hoeffding_sample_sizes():
    with criterion(9, "Hoeffding sample sizes") as info:
        a, b = hoeffding_sample_size(0.02, 0.05), hoeffding_sample_size(0.01, 0.02)
        assert (a, b) == (4612, 23026)
        info["detail"] = f"{a}, {b}"


SCALE_SCRIPT = """
import json, resource, time
from dagsampler import *
t0 = time.perf_counter()
ds, _ = synthetic_dataset(17, 500, seed=17)
beta = build_beta_tables(ds, ScoreConfig(max_indegree=3))
t1 = time.perf_counter()
tables = run_dp(beta)
t2 = time.perf_counter()
res = dds(tables, beta, 20000, make_rng(0), IntervalCache())
coll = build_collection(res)
t3 = time.perf_counter()
print(json.dumps({"total": t3 - t0, "beta": t1 - t0, "dp": t2 - t1, **res.timings,
                  "unique": len(coll), "rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss}))
"""


def test_10_scale_smoke():
    with criterion(10, "n=17, m=500, k=3, N=20000 pipeline under 5 min and 4 GB") as info:
        out = subprocess.run([sys.executable, "-c", SCALE_SCRIPT], capture_output=True, text=True, timeout=600)
        assert out.returncode == 0, out.stderr[-500:]
        r = json.loads(out.stdout)
        gb = r["rss_kb"] / 2 ** 20
        assert r["total"] < 300, f"{r['total']:.0f}s"
        assert gb < 4, f"{gb:.2f} GB"
        info["detail"] = (f"{r['total']:.1f}s (scores {r['beta']:.1f}, DP {r['dp']:.1f}, "
                          f"orders {r['T_ord']:.1f}, DAGs {r['T_DAG']:.1f}), peak {gb:.2f} GB")


def test_11_nonmodular_features():
    with criterion(11, "IW-DDS f1-f5 within 5e-3 of exact once delta > 0.995 (n=5)") as info:
        ds, _ = synthetic_dataset(5, 500, seed=7)
        beta = build_beta_tables(ds, ScoreConfig())
        tables = run_dp(beta)
        space = DagSpace(beta)
        coll = DagCollection()
        stream = 0
        while coll.delta(space.log_evidence) is None or coll.delta(space.log_evidence) <= 0.995:
            coll.extend(dds(tables, beta, 5000, make_rng(0, stream)))
            stream += 1
            assert stream <= 40, "delta stayed at or below 0.995 after 2e5 draws"
        delta = coll.delta(space.log_evidence)
        worst = {}
        for name, make, arity in [("f1", f1, 2), ("f2", f2, 2), ("f3", f3, 3), ("f4", f4, 3), ("f5", f5, 3)]:
            errs = []
            for x in range(5):
                for y in range(5):
                    for z in range(5):
                        if len({x, y, z}) < 3:
                            continue
                        f = make(x, y) if arity == 2 else make(x, y, z)
                        errs.append(abs(estimate_iwdds(coll, f).value - space.structure_modular(f)))
            worst[name] = max(errs)
            assert worst[name] < 5e-3, f"{name}: max error {worst[name]:.2e}"
        info["detail"] = (f"delta {delta:.4f} after {coll.n_samples} draws; max errors "
                          + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
