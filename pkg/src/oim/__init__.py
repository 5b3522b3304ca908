"""Online influence maximization under edge-level semi-bandit feedback.

Library layout:

- :mod:`oim.graph`      graphs, dataset loading, probabilities, spectral features
- :mod:`oim.cascade`    independent-cascade simulation and spread evaluation
- :mod:`oim.oracle`     offline seed selection (lazy greedy, RR-set coverage)
- :mod:`oim.strategies` per-round probability estimators
- :mod:`oim.ensemble`   EXP3 meta-learner over base strategies
- :mod:`oim.harness`    experiment configuration and the online round loop
- :mod:`oim.reporting`  CSV/JSON/figure persistence
- :mod:`oim.cli`        command-line entry points
"""

__version__ = "0.1.0"

from .cascade import (CascadeOutcome, exact_spread, monte_carlo_spread,
                      simulate_cascade)
from .ensemble import EnsembleStrategy, Exp3State, exp3_init, exp3_sample, exp3_update
from .graph import (DirectedGraph, FeatureMap, GraphFormatError,
                    assign_weighted_cascade, laplacian_features, load_edge_list,
                    preferential_attachment_graph)
from .harness import (ExperimentConfig, RoundRecord, RunSummary,
                      compute_optimal_baseline, load_config, run_experiment)
from .oracle import (OracleConfig, SeedSelection, sample_rr_set, select_seeds,
                     select_seeds_greedy, select_seeds_ris)
from .strategies import (BetaPrior, EdgeStats, LinearModelState, beta_posterior,
                         beta_ts_sample, cucb_estimate, empirical_mean,
                         epsilon_greedy_estimate, linthompson_sample,
                         linthompson_ucb_estimate, linucb_estimate, random_explore)

__all__ = [
    "__version__",
    "CascadeOutcome", "exact_spread", "monte_carlo_spread", "simulate_cascade",
    "EnsembleStrategy", "Exp3State", "exp3_init", "exp3_sample", "exp3_update",
    "DirectedGraph", "FeatureMap", "GraphFormatError", "assign_weighted_cascade",
    "laplacian_features", "load_edge_list", "preferential_attachment_graph",
    "ExperimentConfig", "RoundRecord", "RunSummary", "compute_optimal_baseline",
    "load_config", "run_experiment",
    "OracleConfig", "SeedSelection", "sample_rr_set", "select_seeds",
    "select_seeds_greedy", "select_seeds_ris",
    "BetaPrior", "EdgeStats", "LinearModelState", "beta_posterior",
    "beta_ts_sample", "cucb_estimate", "empirical_mean",
    "epsilon_greedy_estimate", "linthompson_sample", "linthompson_ucb_estimate",
    "linucb_estimate", "random_explore",
]
