"""Influence-probability estimators fed by edge-level semi-bandit feedback.

Two families live here. The count-based family keeps per-edge observation
and success counters (empirical mean, UCB bonus, epsilon-greedy, Beta
posterior sampling). The linear family assumes the probability of an edge
is an inner product of an unknown coefficient vector with the edge feature,
and maintains the ridge-regression state shared by the UCB and Thompson
variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .graph import FeatureMap


class EdgeStats:
    """Per-edge sufficient statistics: observation count and success count.

    ``t_count[e]`` is how many times edge e's activation status was
    observed, ``n_count[e]`` how many of those observations were
    activations; 0 <= n_count <= t_count always holds.
    """

    __slots__ = ("t_count", "n_count")

    def __init__(self, edge_count: int):
        self.t_count = np.zeros(edge_count, dtype=np.int64)
        self.n_count = np.zeros(edge_count, dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return int(self.t_count.shape[0])

    def update(self, edge_ids: np.ndarray, bits: np.ndarray) -> None:
        edge_ids = np.asarray(edge_ids, dtype=np.int64)
        bits = np.asarray(bits)
        if edge_ids.shape != bits.shape:
            raise ValueError("edge_ids and bits must have the same length")
        if bits.size and (bits.min() < 0 or bits.max() > 1):
            raise ValueError("activation bits must be 0 or 1")
        np.add.at(self.t_count, edge_ids, 1)
        np.add.at(self.n_count, edge_ids, bits.astype(np.int64))


@dataclass(frozen=True)
class BetaPrior:
    """Beta(alpha, beta) prior on every edge probability."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta prior parameters must be positive")


def empirical_mean(stats: EdgeStats, default_value: float = 0.5) -> np.ndarray:
    """n/t per edge; unobserved edges fall back to ``default_value``."""
    out = np.full(stats.edge_count, float(default_value))
    seen = stats.t_count > 0
    out[seen] = stats.n_count[seen] / stats.t_count[seen]
    return out


def random_explore(edge_count: int, lo: float, hi: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Independent uniform draw in [lo, hi) per edge."""
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"need 0 <= lo < hi <= 1, got lo={lo}, hi={hi}")
    return rng.uniform(lo, hi, edge_count)


def cucb_estimate(stats: EdgeStats, t: float, exploration_coeff: float = 1.0) -> np.ndarray:
    """Mean plus the combinatorial-UCB bonus sqrt(3 ln t / (2 T_e)), clamped.

    Edges never observed get the optimistic value 1.0.
    """
    if t < 1:
        raise ValueError("round index t must be >= 1")
    out = np.ones(stats.edge_count)
    seen = stats.t_count > 0
    if np.any(seen):
        mean = stats.n_count[seen] / stats.t_count[seen]
        bonus = exploration_coeff * np.sqrt(
            3.0 * math.log(t) / (2.0 * stats.t_count[seen]))
        out[seen] = np.clip(mean + bonus, 0.0, 1.0)
    return out


def epsilon_greedy_estimate(stats: EdgeStats, t: float, c: float,
                            rng: np.random.Generator,
                            default_value: float = 0.5) -> np.ndarray:
    """With probability min(1, c/t) explore uniformly in [0, 1); otherwise
    return the empirical mean."""
    if c <= 0:
        raise ValueError("c must be positive")
    if t < 1:
        raise ValueError("round index t must be >= 1")
    if rng.random() < min(1.0, c / t):
        return random_explore(stats.edge_count, 0.0, 1.0, rng)
    return empirical_mean(stats, default_value)


def beta_posterior(stats: EdgeStats, prior: BetaPrior) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge posterior parameters (alpha + N, beta + T - N)."""
    return (prior.alpha + stats.n_count.astype(np.float64),
            prior.beta + (stats.t_count - stats.n_count).astype(np.float64))


def beta_ts_sample(stats: EdgeStats, prior: BetaPrior,
                   rng: np.random.Generator) -> np.ndarray:
    """One independent draw per edge from its Beta posterior."""
    a, b = beta_posterior(stats, prior)
    return rng.beta(a, b)


class LinearModelState:
    """Ridge-regression state for linear probability models.

    Maintains the regularized Gram matrix V = lambda*I + sum(x x^T), the
    response vector Y = sum(x * reward), and the coefficient estimate
    theta_hat = V^-1 Y, refreshed through a Cholesky factorization after
    every update. ``noise_scale`` and ``delta`` feed the Thompson sampling
    scale v(t) = noise_scale * sqrt(9 d ln(t / delta)).
    """

    def __init__(self, dim: int, ridge_lambda: float = 1.0,
                 noise_scale: float = 0.5, delta: float = 0.05):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if ridge_lambda <= 0:
            raise ValueError("ridge_lambda must be positive")
        if not 0.0 < delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        self.dim = dim
        self.ridge_lambda = float(ridge_lambda)
        self.noise_scale = float(noise_scale)
        self.delta = float(delta)
        self.gram = np.eye(dim) * self.ridge_lambda
        self.response = np.zeros(dim)
        self.theta_hat = np.zeros(dim)
        self._chol = np.eye(dim) * math.sqrt(self.ridge_lambda)

    def _as_rows(self, features: np.ndarray) -> np.ndarray:
        arr = np.asarray(features, dtype=np.float64)
        if arr.size == 0:
            return arr.reshape(0, self.dim)
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.dim:
            raise ValueError(f"feature dimension {arr.shape[1]} != state dim {self.dim}")
        return arr

    def _refresh(self) -> None:
        try:
            self._chol = np.linalg.cholesky(self.gram)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("Gram matrix is not positive definite") from exc
        self.theta_hat = cho_solve((self._chol, True), self.response)

    def update(self, features: np.ndarray, rewards: np.ndarray,
               gram_features: np.ndarray | None = None) -> None:
        """Accumulate observations: V += sum(x x^T), Y += sum(x * reward).

        ``gram_features`` lets the Gram update run over a different feature
        set than the response update (the all-edges accumulation variant).
        """
        features = self._as_rows(features)
        rewards = np.atleast_1d(np.asarray(rewards, dtype=np.float64))
        if features.shape[0] != rewards.shape[0]:
            raise ValueError("one reward per feature row required")
        gf = features if gram_features is None else self._as_rows(gram_features)
        if features.shape[0] == 0 and gf.shape[0] == 0:
            return
        self.gram = self.gram + gf.T @ gf
        self.response = self.response + features.T @ rewards
        self._refresh()

    @property
    def log_det_gram(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self._chol))))

    def confidence_radius(self, delta: float | None = None) -> float:
        """sqrt(lambda) + sqrt(ln(det V / (lambda^d delta^2)))."""
        d = self.delta if delta is None else delta
        if not 0.0 < d <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        arg = self.log_det_gram - self.dim * math.log(self.ridge_lambda) - 2.0 * math.log(d)
        if not math.isfinite(arg):
            raise FloatingPointError("non-finite log-determinant in confidence radius")
        return math.sqrt(self.ridge_lambda) + math.sqrt(max(arg, 0.0))

    def widths(self, features: np.ndarray) -> np.ndarray:
        """Ellipsoid widths sqrt(x^T V^-1 x) per feature row."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        half = solve_triangular(self._chol, features.T, lower=True)
        return np.sqrt(np.sum(half * half, axis=0))

    def ts_scale(self, t: float) -> float:
        """Thompson scale v = noise_scale * sqrt(9 d ln(t / delta))."""
        if t < 1:
            raise ValueError("round index t must be >= 1")
        return self.noise_scale * math.sqrt(9.0 * self.dim * math.log(t / self.delta))

    def sample_coefficients(self, rng: np.random.Generator, scale: float) -> np.ndarray:
        """Draw theta ~ Normal(theta_hat, scale^2 V^-1) via the Cholesky factor."""
        if scale == 0.0:
            return self.theta_hat.copy()
        z = rng.standard_normal(self.dim)
        return self.theta_hat + scale * solve_triangular(self._chol.T, z, lower=False)

    def residual(self) -> float:
        return float(np.linalg.norm(self.gram @ self.theta_hat - self.response))


def linucb_estimate(state: LinearModelState, features: FeatureMap,
                    delta: float | None = None) -> np.ndarray:
    """Upper confidence bound per edge: theta_hat.x + beta * ||x||_{V^-1}, clamped."""
    X = features.edge_feature
    beta = state.confidence_radius(delta)
    return np.clip(X @ state.theta_hat + beta * state.widths(X), 0.0, 1.0)


def linthompson_sample(state: LinearModelState, features: FeatureMap, t: float,
                       rng: np.random.Generator, scale: float | None = None) -> np.ndarray:
    """Thompson draw per edge: theta_tilde.x with theta_tilde ~ N(theta_hat, v^2 V^-1)."""
    v = state.ts_scale(t) if scale is None else scale
    theta = state.sample_coefficients(rng, v)
    return np.clip(features.edge_feature @ theta, 0.0, 1.0)


def linthompson_ucb_estimate(state: LinearModelState, features: FeatureMap, t: float,
                             rng: np.random.Generator, delta: float | None = None,
                             scale: float | None = None) -> np.ndarray:
    """Thompson draw plus the UCB width: theta_tilde.x + beta * ||x||_{V^-1}, clamped."""
    X = features.edge_feature
    v = state.ts_scale(t) if scale is None else scale
    theta = state.sample_coefficients(rng, v)
    beta = state.confidence_radius(delta)
    return np.clip(X @ theta + beta * state.widths(X), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Round-loop strategy objects. Each owns its sufficient statistics, produces a
# per-edge estimate at the start of a round, and digests the round's feedback.
# ---------------------------------------------------------------------------


class Strategy:
    """Round-loop interface: estimate, then observe the feedback."""

    name = "base"
    selects_seeds_directly = False

    def estimate(self, t: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def observe(self, edge_ids: np.ndarray, bits: np.ndarray,
                rng: np.random.Generator) -> None:
        pass


class ExploitMean(Strategy):
    name = "exploit-mean"

    def __init__(self, edge_count: int, default: float = 0.5):
        self.stats = EdgeStats(edge_count)
        self.default = float(default)

    def estimate(self, t, rng):
        return empirical_mean(self.stats, self.default)

    def observe(self, edge_ids, bits, rng):
        self.stats.update(edge_ids, bits)


class ExploreRand(Strategy):
    name = "explore-rand"

    def __init__(self, edge_count: int, lo: float = 0.0, hi: float = 0.01):
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("need 0 <= lo < hi <= 1")
        self.edge_count = edge_count
        self.lo = float(lo)
        self.hi = float(hi)

    def estimate(self, t, rng):
        return random_explore(self.edge_count, self.lo, self.hi, rng)


class RandPlusMean(Strategy):
    """Empirical mean plus a fresh uniform draw, clamped to [0, 1].

    The uniform term doubles as the fallback signal, so the mean term
    defaults to 0 on unobserved edges.
    """

    name = "rand-plus-mean"

    def __init__(self, edge_count: int, default: float = 0.0,
                 lo: float = 0.0, hi: float = 0.01):
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("need 0 <= lo < hi <= 1")
        self.stats = EdgeStats(edge_count)
        self.default = float(default)
        self.lo = float(lo)
        self.hi = float(hi)

    def estimate(self, t, rng):
        mean = empirical_mean(self.stats, self.default)
        noise = random_explore(self.stats.edge_count, self.lo, self.hi, rng)
        return np.clip(mean + noise, 0.0, 1.0)

    def observe(self, edge_ids, bits, rng):
        self.stats.update(edge_ids, bits)


class Cucb(Strategy):
    name = "cucb"

    def __init__(self, edge_count: int, exploration_coeff: float = 1.0):
        self.stats = EdgeStats(edge_count)
        self.exploration_coeff = float(exploration_coeff)

    def estimate(self, t, rng):
        return cucb_estimate(self.stats, t, self.exploration_coeff)

    def observe(self, edge_ids, bits, rng):
        self.stats.update(edge_ids, bits)


class EpsilonGreedy(Strategy):
    name = "epsilon-greedy"

    def __init__(self, edge_count: int, c: float = 0.1, default: float = 0.5):
        self.stats = EdgeStats(edge_count)
        self.c = float(c)
        self.default = float(default)

    def estimate(self, t, rng):
        return epsilon_greedy_estimate(self.stats, t, self.c, rng, self.default)

    def observe(self, edge_ids, bits, rng):
        self.stats.update(edge_ids, bits)


class BetaThompson(Strategy):
    name = "beta-ts"

    def __init__(self, edge_count: int, alpha: float = 1.0, beta: float = 1.0):
        self.stats = EdgeStats(edge_count)
        self.prior = BetaPrior(alpha, beta)

    def estimate(self, t, rng):
        return beta_ts_sample(self.stats, self.prior, rng)

    def observe(self, edge_ids, bits, rng):
        self.stats.update(edge_ids, bits)


class TrueProbabilities(Strategy):
    """Cheating baseline: hand the oracle the true probabilities every round."""

    name = "true-probs"

    def __init__(self, probs: np.ndarray):
        self.probs = np.asarray(probs, dtype=np.float64)

    def estimate(self, t, rng):
        return self.probs.copy()


class RandomSeeds(Strategy):
    """Baseline that skips estimation and picks K seeds uniformly at random."""

    name = "random"
    selects_seeds_directly = True

    def estimate(self, t, rng):
        raise RuntimeError("random baseline does not produce estimates")

    def select_seeds(self, graph, k: int, rng: np.random.Generator) -> frozenset[int]:
        return frozenset(int(v) for v in rng.choice(graph.node_count, size=k, replace=False))


class ImLinUcb(Strategy):
    """LinUCB on edge features with observed-edge feedback."""

    name = "imlinucb"

    def __init__(self, features: FeatureMap, ridge_lambda: float = 1.0,
                 delta: float = 0.05, gram_all_edges: bool = False):
        self.features = features
        self.state = LinearModelState(features.dimension, ridge_lambda=ridge_lambda,
                                      delta=delta)
        self.gram_all_edges = bool(gram_all_edges)

    def estimate(self, t, rng):
        return linucb_estimate(self.state, self.features)

    def observe(self, edge_ids, bits, rng):
        X = self.features.edge_feature[np.asarray(edge_ids, dtype=np.int64)]
        rewards = np.asarray(bits, dtype=np.float64)
        gram_feats = self.features.edge_feature if self.gram_all_edges else None
        self.state.update(X, rewards, gram_features=gram_feats)


class LinThompson(Strategy):
    """Pure linear Thompson sampling (no UCB width)."""

    name = "linthompson"

    def __init__(self, features: FeatureMap, ridge_lambda: float = 1.0,
                 noise_scale: float = 0.5, delta: float = 0.05,
                 gram_all_edges: bool = False):
        self.features = features
        self.state = LinearModelState(features.dimension, ridge_lambda=ridge_lambda,
                                      noise_scale=noise_scale, delta=delta)
        self.gram_all_edges = bool(gram_all_edges)

    def estimate(self, t, rng):
        return linthompson_sample(self.state, self.features, t, rng)

    def observe(self, edge_ids, bits, rng):
        X = self.features.edge_feature[np.asarray(edge_ids, dtype=np.int64)]
        rewards = np.asarray(bits, dtype=np.float64)
        gram_feats = self.features.edge_feature if self.gram_all_edges else None
        self.state.update(X, rewards, gram_features=gram_feats)


class LinThompsonUcb(Strategy):
    """Thompson draw widened by the UCB radius, learning through Beta posteriors.

    Feedback processing keeps per-edge Beta posteriors; each observed edge
    contributes the sampled posterior probability (or, with
    ``regress_on="bit"``, the raw activation bit) as the regression target.
    """

    name = "linthompson-ucb"

    def __init__(self, features: FeatureMap, ridge_lambda: float = 1.0,
                 noise_scale: float = 0.5, delta: float = 0.05,
                 alpha: float = 1.0, beta: float = 1.0,
                 regress_on: str = "posterior-sample",
                 gram_all_edges: bool = False):
        if regress_on not in ("posterior-sample", "bit"):
            raise ValueError("regress_on must be 'posterior-sample' or 'bit'")
        self.features = features
        self.state = LinearModelState(features.dimension, ridge_lambda=ridge_lambda,
                                      noise_scale=noise_scale, delta=delta)
        self.stats = EdgeStats(features.edge_feature.shape[0])
        self.prior = BetaPrior(alpha, beta)
        self.regress_on = regress_on
        self.gram_all_edges = bool(gram_all_edges)

    def estimate(self, t, rng):
        return linthompson_ucb_estimate(self.state, self.features, t, rng)

    def observe(self, edge_ids, bits, rng):
        edge_ids = np.asarray(edge_ids, dtype=np.int64)
        bits = np.asarray(bits)
        self.stats.update(edge_ids, bits)
        X = self.features.edge_feature[edge_ids]
        if self.regress_on == "posterior-sample":
            a = self.prior.alpha + self.stats.n_count[edge_ids].astype(np.float64)
            b = self.prior.beta + (self.stats.t_count[edge_ids]
                                   - self.stats.n_count[edge_ids]).astype(np.float64)
            rewards = rng.beta(a, b) if edge_ids.size else np.empty(0)
        else:
            rewards = bits.astype(np.float64)
        gram_feats = self.features.edge_feature if self.gram_all_edges else None
        self.state.update(X, rewards, gram_features=gram_feats)
