from itertools import permutations
from math import factorial, log

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dagsampler.dataset import from_array, synthetic_dataset
from dagsampler.features import FALSE, TRUE, Edge, Path
from dagsampler.oracle import (DagSpace, count_linear_extensions, count_linear_extensions_bruteforce,
                               enumerate_dags, evidence_by_enumeration, evidence_from_order_modular,
                               evidence_structure_modular, exact_posterior_order_modular,
                               exact_posterior_structure_modular, n_dags)
from dagsampler.sampler import Dag
from dagsampler.scores import ScoreConfig, build_beta_tables
from dagsampler.subset_dp import GuardError, exact_edge_posteriors_order_modular, run_dp

from conftest import random_beta, uniform_beta


def test_enumeration_small_counts():
    assert len(list(enumerate_dags(2, 1))) == 3
    assert len(list(enumerate_dags(3, 2))) == 25


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_enumeration_matches_known_counts(n):
    dags = list(enumerate_dags(n))
    assert len(dags) == n_dags(n)
    assert len({d.parents for d in dags}) == len(dags)
    assert all(d.is_acyclic() for d in dags)


def test_indegree_one_gives_rooted_forests():
    # labelled rooted forests on n nodes: (n + 1)^(n - 1)
    assert sum(1 for _ in enumerate_dags(6, 1)) == 7 ** 5


def test_enumeration_guard():
    with pytest.raises(GuardError, match="n <= 6"):
        next(enumerate_dags(7))


def test_constant_features():
    ds, _ = synthetic_dataset(3, 20, seed=0)
    cfg = ScoreConfig()
    assert exact_posterior_structure_modular(ds, cfg, TRUE) == pytest.approx(1.0)
    assert exact_posterior_structure_modular(ds, cfg, FALSE) == 0.0


def test_two_nodes_one_row_by_hand():
    ds = from_array(np.array([[0, 1]]), arity=[2, 2])
    cfg = ScoreConfig("k2", rho="uniform")
    # K2 single binary row: empty parent set gives 1/2; one parent gives 1/2 too
    # (the observed parent configuration has one row, the other none)
    g_empty = 0.5 * 0.5
    g_01 = 0.5 * 0.5
    g_10 = 0.5 * 0.5
    want = g_01 / (g_empty + g_01 + g_10)
    assert exact_posterior_structure_modular(ds, cfg, Edge(0, 1)) == pytest.approx(want)
    # order-modular: the empty DAG fits both orders, each single-edge DAG one
    want_order = g_01 / (2 * g_empty + g_01 + g_10)
    assert exact_posterior_order_modular(ds, cfg, Edge(0, 1)) == pytest.approx(want_order)


def test_single_node_order_modular():
    ds = from_array(np.array([[0], [1]]))
    assert exact_posterior_order_modular(ds, ScoreConfig(), TRUE) == 1.0


def test_uniform_scores_symmetric_edges():
    beta = uniform_beta(3)
    space = DagSpace(beta)
    vals = {round(space.order_modular(Edge(j, i)), 12) for i in range(3) for j in range(3) if i != j}
    assert len(vals) == 1


@pytest.mark.parametrize("seed", range(3))
def test_order_modular_matches_dp(seed):
    ds, _ = synthetic_dataset(4, 40, seed=seed)
    cfg = ScoreConfig()
    beta = build_beta_tables(ds, cfg)
    P = exact_edge_posteriors_order_modular(run_dp(beta), beta)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert exact_posterior_order_modular(ds, cfg, Edge(j, i), beta) == pytest.approx(P[i, j], abs=1e-9)


def test_extension_route_equals_double_enumeration():
    beta = random_beta(4, 3, seed=2)
    space = DagSpace(beta)
    lj = space.order_dag_log_joints()
    np.testing.assert_allclose(lj, space.log_joint + space.log_extensions, rtol=1e-12)


def test_order_modular_guard():
    ds, _ = synthetic_dataset(6, 10, seed=0)
    with pytest.raises(GuardError):
        exact_posterior_order_modular(ds, ScoreConfig(max_indegree=1), Path(0, 1))


@pytest.mark.parametrize("n", [1, 4, 7])
def test_linear_extensions_empty_and_chain(n):
    assert count_linear_extensions(Dag((0,) * n)) == factorial(n)
    chain = Dag(tuple(0 if i == 0 else 1 << (i - 1) for i in range(n)))
    assert count_linear_extensions(chain) == 1
    assert count_linear_extensions(chain, exact=False) == pytest.approx(0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 9999), st.floats(0, 1))
def test_linear_extensions_match_permutations(n, seed, density):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    parents = [0] * n
    for pos, v in enumerate(perm):
        for u in perm[:pos]:
            if rng.random() < density:
                parents[v] |= 1 << int(u)
    d = Dag(tuple(parents))
    c = count_linear_extensions(d)
    assert c == count_linear_extensions_bruteforce(d)
    assert c >= 1
    assert (c == factorial(n)) == (not any(parents))
    assert count_linear_extensions(d, exact=False) == pytest.approx(log(c), abs=1e-12)


def test_linear_extensions_large_n_modes():
    d = Dag((0,) * 22)
    with pytest.raises(GuardError):
        count_linear_extensions(d)
    assert count_linear_extensions(d, exact=False) == pytest.approx(log(factorial(22)), rel=1e-12)


def test_evidence_single_node_and_two_nodes():
    b1 = random_beta(1, 0, seed=1)
    assert evidence_structure_modular(b1) == pytest.approx(b1.lookup(0, 0))
    b2 = random_beta(2, 1, seed=2)
    joints = [b2.lookup(0, 0) + b2.lookup(1, 0), b2.lookup(0, 0) + b2.lookup(1, 1),
              b2.lookup(0, 2) + b2.lookup(1, 0)]
    assert evidence_structure_modular(b2) == pytest.approx(np.logaddexp.reduce(joints), abs=1e-12)


@pytest.mark.parametrize("family", ["k2", "bdeu"])
@pytest.mark.parametrize("seed", range(3))
def test_evidence_three_ways_n5(family, seed):
    ds, _ = synthetic_dataset(5, 60, seed=seed)
    beta = build_beta_tables(ds, ScoreConfig(family))
    a = evidence_by_enumeration(beta)
    b = evidence_structure_modular(beta)
    c = evidence_from_order_modular(beta, run_dp(beta).log_evidence_order)
    for x, y in ((a, b), (a, c), (b, c)):
        assert abs(np.expm1(x - y)) < 1e-9


def test_evidence_n6_forests():
    ds, _ = synthetic_dataset(6, 80, seed=5)
    beta = build_beta_tables(ds, ScoreConfig(max_indegree=1))
    assert abs(np.expm1(evidence_by_enumeration(beta) - evidence_structure_modular(beta))) < 1e-9


def test_bias_relation_per_dag():
    # p_<(G|D) = (p(D) / p_<(D)) |<_G| p(G|D) with q = 1 and rho = p_i
    ds, _ = synthetic_dataset(4, 50, seed=3)
    beta = build_beta_tables(ds, ScoreConfig())
    space = DagSpace(beta)
    log_po = run_dp(beta).log_evidence_order
    lhs = space.posterior_order_modular
    rhs = np.exp(space.log_evidence - log_po + space.log_extensions) * space.posterior_structure_modular
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)
    assert space.log_evidence_order == pytest.approx(log_po, abs=1e-9)
