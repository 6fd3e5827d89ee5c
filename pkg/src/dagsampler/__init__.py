"""Exact and sampled posteriors over Bayesian-network structures.

Direct DAG Sampling draws independent DAGs from the exact order-modular
posterior; importance weighting turns the sample into estimates for the
structure-modular posterior with guaranteed intervals.
"""
from .dataset import DataError, Dataset, from_array, load_csv, synthetic_dataset
from .estimator import IWDDS, DDSSampler, OrderModularEdges
from .estimators import (DagCollection, Estimate, build_collection, estimate_dds,
                         estimate_dos_edges, estimate_iwdds)
from .features import (Edge, Path, PathLen, ParentSetIs, evaluate, f1, f2, f3, f4, f5,
                       parse_feature)
from .harness import (hoeffding_sample_size, mad, run_hoeffding_experiment, sad,
                      sampling_distribution_test)
from .oracle import DagSpace, count_linear_extensions, enumerate_dags, evidence_structure_modular
from .sampler import Dag, IntervalCache, TotalOrder, dds, make_rng, sample_dag_given_order, sample_orders
from .scores import FamilyScoreTable, ScoreConfig, build_beta_tables, local_score
from .subset_dp import DpTables, GuardError, exact_edge_posteriors_order_modular, run_dp

__version__ = "0.1.0"
