"""Experiment harness: configuration, the online round loop, and regret accounting.

One experiment = a graph, a ground-truth probability assignment, a strategy
(or ensemble), and an oracle. Each round the strategy estimates edge
probabilities, the oracle turns the estimates into a seed set, one true
cascade is simulated, and the edge-level feedback flows back into the
strategy. Regret compares the realized spread against the spread of the
seed set an oracle would pick if it knew the truth.
"""

from __future__ import annotations

import configparser
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .cascade import (EXACT_SPREAD_EDGE_LIMIT, exact_spread, monte_carlo_spread,
                      simulate_cascade)
from .ensemble import EnsembleStrategy
from .graph import (DirectedGraph, FeatureMap, assign_weighted_cascade,
                    laplacian_features, load_edge_list)
from .oracle import OracleConfig, select_seeds
from .strategies import (BetaThompson, Cucb, EpsilonGreedy, ExploitMean,
                         ExploreRand, ImLinUcb, LinThompson, LinThompsonUcb,
                         RandomSeeds, RandPlusMean, Strategy, TrueProbabilities)

LINEAR_STRATEGIES = {"imlinucb", "linthompson", "linthompson-ucb"}

KNOWN_STRATEGIES = sorted(LINEAR_STRATEGIES | {
    "random", "true-probs", "exploit-mean", "explore-rand", "rand-plus-mean",
    "cucb", "epsilon-greedy", "beta-ts", "ensemble",
})


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment run."""

    graph_path: str | None = None
    symmetrize: bool = False
    dimension: int = 10
    seed_budget: int = 10
    rounds: int = 100
    repetitions: int = 3
    eta: float = 1.0
    master_seed: int = 0
    baseline_samples: int = 10_000
    strategy: str = "exploit-mean"
    strategy_params: dict[str, float] = field(default_factory=dict)
    members: list[str] = field(default_factory=list)
    member_params: dict[str, dict[str, float]] = field(default_factory=dict)
    gamma: float = 0.1
    shared_updates: bool = True
    oracle_method: str = "auto"
    oracle_mc_samples: int = 200
    oracle_epsilon: float = 0.5
    oracle_ell: float = 1.0
    rr_set_cap: int = 100_000
    rr_set_floor: int = 100
    rr_work_cap: int = 10_000_000

    def __post_init__(self) -> None:
        if self.seed_budget < 1:
            raise ValueError("seed_budget must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.strategy not in KNOWN_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; "
                             f"known: {', '.join(KNOWN_STRATEGIES)}")
        if self.strategy == "ensemble" and not self.members:
            raise ValueError("ensemble strategy requires a member list")

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(k=self.seed_budget, method=self.oracle_method,
                            mc_samples=self.oracle_mc_samples,
                            epsilon=self.oracle_epsilon, ell=self.oracle_ell,
                            rr_set_cap=self.rr_set_cap,
                            rr_set_floor=self.rr_set_floor,
                            rr_work_cap=self.rr_work_cap)

    def echo(self) -> dict[str, Any]:
        """Flat dictionary of every setting, for the metadata sidecar."""
        return {
            "graph": self.graph_path, "symmetrize": self.symmetrize,
            "dimension": self.dimension, "seed_budget": self.seed_budget,
            "rounds": self.rounds, "repetitions": self.repetitions,
            "eta": self.eta, "master_seed": self.master_seed,
            "baseline_samples": self.baseline_samples,
            "strategy": self.strategy, "strategy_params": dict(self.strategy_params),
            "members": list(self.members),
            "member_params": {k: dict(v) for k, v in self.member_params.items()},
            "gamma": self.gamma, "shared_updates": self.shared_updates,
            "oracle_method": self.oracle_method,
            "oracle_mc_samples": self.oracle_mc_samples,
            "oracle_epsilon": self.oracle_epsilon, "oracle_ell": self.oracle_ell,
            "rr_set_cap": self.rr_set_cap, "rr_set_floor": self.rr_set_floor,
            "rr_work_cap": self.rr_work_cap,
        }


def _parse_scalar(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip()


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse the sectioned key=value config file.

    Sections: [experiment] run shape, [strategy] the estimator and its
    parameters (member parameters use ``<member>.<key>`` keys), [oracle]
    seed selection.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    kwargs: dict[str, Any] = {}
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    for key in ("graph", "symmetrize", "dimension", "seed_budget", "rounds",
                "repetitions", "eta", "master_seed", "baseline_samples"):
        if key in exp:
            value = _parse_scalar(exp[key])
            kwargs["graph_path" if key == "graph" else key] = value

    if parser.has_section("strategy"):
        strat = parser["strategy"]
        member_params: dict[str, dict[str, float]] = {}
        params: dict[str, float] = {}
        for key, raw in strat.items():
            value = _parse_scalar(raw)
            if key == "name":
                kwargs["strategy"] = value
            elif key == "members":
                kwargs["members"] = [m.strip() for m in str(raw).split(",") if m.strip()]
            elif key == "gamma":
                kwargs["gamma"] = value
            elif key == "shared_updates":
                kwargs["shared_updates"] = value
            elif "." in key:
                member, _, pkey = key.partition(".")
                member_params.setdefault(member, {})[pkey] = value
            else:
                params[key] = value
        if params:
            kwargs["strategy_params"] = params
        if member_params:
            kwargs["member_params"] = member_params

    if parser.has_section("oracle"):
        orac = parser["oracle"]
        mapping = {"method": "oracle_method", "mc_samples": "oracle_mc_samples",
                   "epsilon": "oracle_epsilon", "ell": "oracle_ell",
                   "rr_set_cap": "rr_set_cap", "rr_set_floor": "rr_set_floor",
                   "rr_work_cap": "rr_work_cap"}
        for key, dest in mapping.items():
            if key in orac:
                kwargs[dest] = _parse_scalar(orac[key])

    return ExperimentConfig(**kwargs)


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Return a config with the given fields replaced (CLI flag overrides)."""
    echo = {
        "graph_path": cfg.graph_path, "symmetrize": cfg.symmetrize,
        "dimension": cfg.dimension, "seed_budget": cfg.seed_budget,
        "rounds": cfg.rounds, "repetitions": cfg.repetitions, "eta": cfg.eta,
        "master_seed": cfg.master_seed, "baseline_samples": cfg.baseline_samples,
        "strategy": cfg.strategy, "strategy_params": dict(cfg.strategy_params),
        "members": list(cfg.members),
        "member_params": {k: dict(v) for k, v in cfg.member_params.items()},
        "gamma": cfg.gamma, "shared_updates": cfg.shared_updates,
        "oracle_method": cfg.oracle_method,
        "oracle_mc_samples": cfg.oracle_mc_samples,
        "oracle_epsilon": cfg.oracle_epsilon, "oracle_ell": cfg.oracle_ell,
        "rr_set_cap": cfg.rr_set_cap, "rr_set_floor": cfg.rr_set_floor,
        "rr_work_cap": cfg.rr_work_cap,
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in echo:
            raise KeyError(f"unknown config field {key!r}")
        echo[key] = value
    return ExperimentConfig(**echo)


def strategy_needs_features(cfg: ExperimentConfig) -> bool:
    if cfg.strategy in LINEAR_STRATEGIES:
        return True
    return cfg.strategy == "ensemble" and any(m in LINEAR_STRATEGIES for m in cfg.members)


def build_strategy(name: str, params: dict[str, float], graph: DirectedGraph,
                   features: FeatureMap | None, true_probs: np.ndarray,
                   cfg: ExperimentConfig) -> Strategy:
    """Instantiate a fresh strategy (one per repetition)."""
    m = graph.edge_count
    p = dict(params)
    if name == "random":
        return RandomSeeds()
    if name == "true-probs":
        return TrueProbabilities(true_probs)
    if name == "exploit-mean":
        return ExploitMean(m, default=p.pop("default", 0.5))
    if name == "explore-rand":
        return ExploreRand(m, lo=p.pop("lo", 0.0), hi=p.pop("hi", 0.01))
    if name == "rand-plus-mean":
        return RandPlusMean(m, default=p.pop("default", 0.0),
                            lo=p.pop("lo", 0.0), hi=p.pop("hi", 0.01))
    if name == "cucb":
        return Cucb(m, exploration_coeff=p.pop("exploration_coeff", 1.0))
    if name == "epsilon-greedy":
        return EpsilonGreedy(m, c=p.pop("c", 0.1), default=p.pop("default", 0.5))
    if name == "beta-ts":
        return BetaThompson(m, alpha=p.pop("alpha", 1.0), beta=p.pop("beta", 1.0))
    if name in LINEAR_STRATEGIES:
        if features is None:
            raise ValueError(f"strategy {name!r} needs edge features")
        if name == "imlinucb":
            return ImLinUcb(features, ridge_lambda=p.pop("ridge_lambda", 1.0),
                            delta=p.pop("delta", 0.05),
                            gram_all_edges=bool(p.pop("gram_all_edges", False)))
        if name == "linthompson":
            return LinThompson(features, ridge_lambda=p.pop("ridge_lambda", 1.0),
                               noise_scale=p.pop("noise_scale", 0.5),
                               delta=p.pop("delta", 0.05),
                               gram_all_edges=bool(p.pop("gram_all_edges", False)))
        return LinThompsonUcb(features, ridge_lambda=p.pop("ridge_lambda", 1.0),
                              noise_scale=p.pop("noise_scale", 0.5),
                              delta=p.pop("delta", 0.05),
                              alpha=p.pop("alpha", 1.0), beta=p.pop("beta", 1.0),
                              regress_on=str(p.pop("regress_on", "posterior-sample")),
                              gram_all_edges=bool(p.pop("gram_all_edges", False)))
    if name == "ensemble":
        members = [build_strategy(mname, cfg.member_params.get(mname, {}),
                                  graph, features, true_probs, cfg)
                   for mname in cfg.members]
        return EnsembleStrategy(members, gamma=cfg.gamma,
                                shared_updates=cfg.shared_updates)
    raise ValueError(f"unknown strategy {name!r}")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    seeds: tuple[int, ...]
    spread: int
    regret: float
    chosen_member: int | None
    member_probs: tuple[float, ...] | None
    elapsed_ms: float


@dataclass
class RunSummary:
    """Cross-repetition aggregates plus the per-round records behind them."""

    strategy_name: str
    rounds: int
    repetitions: int
    node_count: int
    edge_count: int
    eta: float
    f_opt: float
    optimal_seeds: tuple[int, ...]
    mean_spread: np.ndarray      # (rounds,)
    mean_regret: np.ndarray      # (rounds,)
    cum_regret: np.ndarray       # (rounds,) prefix sums of mean_regret
    member_names: list[str]
    member_probs_mean: np.ndarray | None  # (rounds, members) or None
    records: list[list[RoundRecord]]
    config_echo: dict[str, Any]
    runtime_s: float


def compute_optimal_baseline(graph: DirectedGraph, true_probs: np.ndarray,
                             oracle_cfg: OracleConfig, mc_samples: int,
                             rng: np.random.Generator,
                             ) -> tuple[frozenset[int], float]:
    """Seed set the oracle picks under the true probabilities, and its spread.

    The spread is exact on enumeration-sized graphs and Monte Carlo
    estimated (``mc_samples`` cascades) otherwise.
    """
    selection = select_seeds(graph, true_probs, oracle_cfg, rng)
    if graph.edge_count <= EXACT_SPREAD_EDGE_LIMIT:
        value = exact_spread(graph, true_probs, selection.seeds)
    else:
        value = monte_carlo_spread(graph, true_probs, selection.seeds, mc_samples, rng)
    return selection.seeds, value


def _run_repetition(cfg: ExperimentConfig, graph: DirectedGraph,
                    true_probs: np.ndarray, features: FeatureMap | None,
                    f_opt: float, seed_seq: np.random.SeedSequence,
                    ) -> list[RoundRecord]:
    rng = np.random.default_rng(seed_seq)
    strategy = build_strategy(cfg.strategy, cfg.strategy_params, graph,
                              features, true_probs, cfg)
    oracle_cfg = cfg.oracle_config()
    is_ensemble = isinstance(strategy, EnsembleStrategy)
    records: list[RoundRecord] = []
    for t in range(1, cfg.rounds + 1):
        started = time.perf_counter()
        if strategy.selects_seeds_directly:
            seeds = strategy.select_seeds(graph, cfg.seed_budget, rng)
        else:
            estimates = np.clip(strategy.estimate(t, rng), 0.0, 1.0)
            seeds = select_seeds(graph, estimates, oracle_cfg, rng).seeds
        outcome = simulate_cascade(graph, true_probs, seeds, rng)
        regret = cfg.eta * f_opt - outcome.spread
        strategy.observe(outcome.observed_edges, outcome.activation_bit, rng)
        probs_snapshot = None
        chosen = None
        if is_ensemble:
            chosen = strategy.chosen
            strategy.reward_update(outcome.spread, graph.node_count)
            probs_snapshot = tuple(float(x) for x in strategy.member_probs)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        records.append(RoundRecord(
            round_index=t, seeds=tuple(sorted(seeds)), spread=outcome.spread,
            regret=regret, chosen_member=chosen, member_probs=probs_snapshot,
            elapsed_ms=elapsed_ms))
    return records


def run_experiment(cfg: ExperimentConfig, graph: DirectedGraph | None = None,
                   true_probs: np.ndarray | None = None,
                   workers: int = 1) -> RunSummary:
    """Run the full online loop for every repetition and aggregate.

    Each repetition gets its own pre-assigned random stream, so the summary
    is identical whatever ``workers`` is set to. ``graph`` and
    ``true_probs`` may be injected directly (handy for synthetic graphs);
    otherwise the graph is loaded from ``cfg.graph_path`` and probabilities
    follow the weighted-cascade rule.
    """
    started = time.perf_counter()
    if graph is None:
        if cfg.graph_path is None:
            raise ValueError("config has no graph path and no graph was injected")
        graph = load_edge_list(cfg.graph_path, symmetrize=cfg.symmetrize)
    if true_probs is None:
        true_probs = assign_weighted_cascade(graph)
    features = (laplacian_features(graph, cfg.dimension)
                if strategy_needs_features(cfg) else None)

    seq = np.random.SeedSequence(cfg.master_seed)
    baseline_seq, *rep_seqs = seq.spawn(cfg.repetitions + 1)
    baseline_rng = np.random.default_rng(baseline_seq)
    optimal_seeds, f_opt = compute_optimal_baseline(
        graph, true_probs, cfg.oracle_config(), cfg.baseline_samples, baseline_rng)

    def job(seed_seq):
        return _run_repetition(cfg, graph, true_probs, features, f_opt, seed_seq)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_records = list(pool.map(job, rep_seqs))
    else:
        all_records = [job(s) for s in rep_seqs]

    spread = np.array([[r.spread for r in rec] for rec in all_records], dtype=np.float64)
    regret = np.array([[r.regret for r in rec] for rec in all_records], dtype=np.float64)
    mean_spread = spread.mean(axis=0)
    mean_regret = regret.mean(axis=0)
    cum_regret = np.cumsum(mean_regret)

    member_names: list[str] = []
    member_probs_mean = None
    if all_records and all_records[0][0].member_probs is not None:
        probs = np.array([[r.member_probs for r in rec] for rec in all_records],
                         dtype=np.float64)
        member_probs_mean = probs.mean(axis=0)
        member_names = list(cfg.members)

    return RunSummary(
        strategy_name=cfg.strategy, rounds=cfg.rounds, repetitions=cfg.repetitions,
        node_count=graph.node_count, edge_count=graph.edge_count, eta=cfg.eta,
        f_opt=float(f_opt), optimal_seeds=tuple(sorted(optimal_seeds)),
        mean_spread=mean_spread, mean_regret=mean_regret, cum_regret=cum_regret,
        member_names=member_names, member_probs_mean=member_probs_mean,
        records=all_records, config_echo=cfg.echo(),
        runtime_s=time.perf_counter() - started)
