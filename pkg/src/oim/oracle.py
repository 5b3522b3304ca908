"""Offline seed selection on estimated probabilities: lazy greedy and RR-set coverage."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cascade import monte_carlo_spread
from .graph import DirectedGraph, gather_ranges

# Below this default the RR-set schedule never drops, however small the
# derived count; above rr_set_cap it never rises, however large.
DEFAULT_RR_FLOOR = 100
DEFAULT_RR_CAP = 100_000

# Edge-count threshold for the "auto" method switch.
GREEDY_EDGE_LIMIT = 1000


DEFAULT_RR_WORK_CAP = 10_000_000


@dataclass
class OracleConfig:
    """Seed-selection settings.

    ``epsilon`` and ``ell`` drive the RR-set count schedule; ``mc_samples``
    is the per-evaluation budget of the greedy path. ``rr_work_cap`` bounds
    the total number of (set, node) memberships drawn, so large estimated
    probabilities (huge individual sets) stop after few sets while tiny
    estimates afford the full count, echoing how TIM scales its set count
    inversely with the estimated influence.
    """

    k: int
    method: str = "auto"  # auto | greedy_celf | ris
    mc_samples: int = 200
    epsilon: float = 0.5
    ell: float = 1.0
    rr_set_cap: int = DEFAULT_RR_CAP
    rr_set_floor: int = DEFAULT_RR_FLOOR
    rr_work_cap: int = DEFAULT_RR_WORK_CAP

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("seed budget k must be >= 1")
        if self.method not in ("auto", "greedy_celf", "ris"):
            raise ValueError(f"unknown oracle method {self.method!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.ell <= 0:
            raise ValueError("ell must be positive")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.rr_set_cap < 1 or self.rr_set_floor < 1:
            raise ValueError("RR-set cap and floor must be >= 1")
        if self.rr_work_cap < 1:
            raise ValueError("rr_work_cap must be >= 1")


@dataclass(frozen=True)
class SeedSelection:
    seeds: frozenset[int]
    estimated_spread: float


def _clamped(probs: np.ndarray, edge_count: int) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.shape != (edge_count,):
        raise ValueError(f"expected {edge_count} edge probabilities, got shape {arr.shape}")
    return np.clip(arr, 0.0, 1.0)


def select_seeds_greedy(graph: DirectedGraph, probs: np.ndarray, cfg: OracleConfig,
                        rng: np.random.Generator,
                        evaluator: Callable[[frozenset[int]], float] | None = None,
                        ) -> SeedSelection:
    """Lazy-forward greedy (CELF) on marginal spread.

    Spread of a candidate set is estimated with ``cfg.mc_samples`` Monte
    Carlo cascades unless an ``evaluator`` is supplied (tests substitute the
    exact evaluator here). Ties break toward the smallest node id, and the
    whole procedure is deterministic given the rng stream.
    """
    n = graph.node_count
    if cfg.k > n:
        raise ValueError(f"seed budget {cfg.k} exceeds node count {n}")
    probs = _clamped(probs, graph.edge_count)
    if evaluator is None:
        def evaluator(seed_set: frozenset[int]) -> float:
            return monte_carlo_spread(graph, probs, seed_set, cfg.mc_samples, rng)

    selected: set[int] = set()
    value = 0.0
    # Heap entries: (-gain, node, |selected| when the gain was computed).
    heap = [(-evaluator(frozenset((u,))), u, 0) for u in range(n)]
    heapq.heapify(heap)
    while len(selected) < cfg.k:
        neg_gain, u, at_size = heapq.heappop(heap)
        if at_size == len(selected):
            selected.add(u)
            value += -neg_gain
        else:
            gain = evaluator(frozenset(selected | {u})) - value
            heapq.heappush(heap, (-gain, u, len(selected)))
    return SeedSelection(seeds=frozenset(selected), estimated_spread=value)


def rr_set_target(cfg: OracleConfig, node_count: int) -> int:
    """Number of RR sets to draw: ceil((k + ell) * n * ln n / eps^2), floored and capped."""
    if node_count <= 1:
        return cfg.rr_set_floor
    raw = math.ceil((cfg.k + cfg.ell) * node_count * math.log(node_count)
                    / (cfg.epsilon ** 2))
    return max(cfg.rr_set_floor, min(raw, cfg.rr_set_cap))


def sample_rr_set(graph: DirectedGraph, probs: np.ndarray, rng: np.random.Generator,
                  root: int | None = None) -> set[int]:
    """One reverse-reachable set: walk reversed edges from a (uniform) root,
    including each in-edge independently with its probability."""
    probs = _clamped(probs, graph.edge_count)
    n = graph.node_count
    if n == 0:
        raise ValueError("graph has no nodes")
    if root is None:
        root = int(rng.integers(n))
    elif not 0 <= root < n:
        raise ValueError("root outside node range")

    member = np.zeros(n, dtype=bool)
    member[root] = True
    frontier = np.array([root], dtype=np.int64)
    while frontier.size:
        eids = gather_ranges(graph.in_indptr, graph.in_edge_ids, frontier)
        if eids.size == 0:
            break
        taken = rng.random(eids.size) < probs[eids]
        parents = graph.src[eids[taken]]
        fresh = np.unique(parents[~member[parents]])
        member[fresh] = True
        frontier = fresh
    return set(int(v) for v in np.flatnonzero(member))


# Mini-batch size for RR sampling; small enough that the per-batch flat
# membership matrix stays modest on any graph, large enough to amortize
# the vectorized BFS overhead.
_RR_BATCH_SETS = 512
_RR_BATCH_CELLS = 20_000_000


def _sample_rr_sets_flat(graph: DirectedGraph, probs: np.ndarray, count: int,
                         work_cap: int,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw up to ``count`` RR sets, level-synchronously across sets.

    Returns flat membership pairs (set_id, node) plus the number of sets
    actually drawn. Equivalent to calling :func:`sample_rr_set` repeatedly,
    but each BFS level is one vectorized pass over every live set, which is
    what makes large per-round RR budgets affordable. Drawing stops at the
    first whole mini-batch where the accumulated membership total reaches
    ``work_cap``, bounding the round's sampling effort whatever the
    estimated probabilities are.
    """
    n = graph.node_count
    chunk = max(1, min(count, _RR_BATCH_SETS, _RR_BATCH_CELLS // max(n, 1)))
    sid_parts: list[np.ndarray] = []
    node_parts: list[np.ndarray] = []
    done = 0
    work = 0
    while done < count and work < work_cap:
        size = min(chunk, count - done)
        roots = rng.integers(0, n, size=size).astype(np.int64)
        member = np.zeros(size * n, dtype=bool)  # flat (set, node) membership
        cells = np.arange(size, dtype=np.int64) * n + roots
        member[cells] = True
        f_sid = np.arange(size, dtype=np.int64)
        f_node = roots
        sid_parts.append(f_sid + done)
        node_parts.append(f_node)
        candidate = np.zeros(size * n, dtype=bool)
        while f_node.size:
            eids = gather_ranges(graph.in_indptr, graph.in_edge_ids, f_node)
            if eids.size == 0:
                break
            degs = graph.in_indptr[f_node + 1] - graph.in_indptr[f_node]
            owners = np.repeat(f_sid, degs)
            taken = rng.random(eids.size) < probs[eids]
            parents = graph.src[eids[taken]]
            owners = owners[taken]
            if parents.size == 0:
                break
            # scatter-dedup the (set, parent) pairs against current members
            cand_cells = owners * n + parents
            candidate[cand_cells] = True
            fresh_cells = np.flatnonzero(candidate & ~member)
            candidate[cand_cells] = False
            member[fresh_cells] = True
            f_sid = fresh_cells // n
            f_node = fresh_cells - f_sid * n
            if f_sid.size:
                sid_parts.append(f_sid + done)
                node_parts.append(f_node)
        done += size
        work = sum(part.size for part in node_parts)
    return np.concatenate(sid_parts), np.concatenate(node_parts), done


def select_seeds_ris(graph: DirectedGraph, probs: np.ndarray, cfg: OracleConfig,
                     rng: np.random.Generator) -> SeedSelection:
    """Reverse-reachable sampling followed by greedy maximum coverage.

    The estimated spread of the chosen set is node_count times the fraction
    of RR sets it covers.
    """
    n = graph.node_count
    if cfg.k > n:
        raise ValueError(f"seed budget {cfg.k} exceeds node count {n}")
    probs = _clamped(probs, graph.edge_count)
    target = rr_set_target(cfg, n)
    sids, nodes, theta = _sample_rr_sets_flat(graph, probs, target,
                                              cfg.rr_work_cap, rng)

    counts = np.bincount(nodes, minlength=n).astype(np.int64)
    node_order = np.argsort(nodes, kind="stable")
    sets_by_node = sids[node_order]
    node_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(nodes, minlength=n), out=node_indptr[1:])
    set_order = np.argsort(sids, kind="stable")
    nodes_by_set = nodes[set_order]
    set_indptr = np.zeros(theta + 1, dtype=np.int64)
    np.cumsum(np.bincount(sids, minlength=theta), out=set_indptr[1:])

    covered = np.zeros(theta, dtype=bool)
    covered_total = 0
    selected: list[int] = []
    for _ in range(cfg.k):
        u = int(np.argmax(counts))  # first max, i.e. smallest node id on ties
        selected.append(u)
        covering = sets_by_node[node_indptr[u]:node_indptr[u + 1]]
        fresh = covering[~covered[covering]]
        if fresh.size:
            covered[fresh] = True
            covered_total += int(fresh.size)
            lost = gather_ranges(set_indptr, nodes_by_set, fresh)
            counts -= np.bincount(lost, minlength=n)
        counts[u] = -1  # never reselect
    estimate = n * covered_total / theta
    return SeedSelection(seeds=frozenset(selected), estimated_spread=estimate)


def select_seeds(graph: DirectedGraph, probs: np.ndarray, cfg: OracleConfig,
                 rng: np.random.Generator) -> SeedSelection:
    """Dispatch on ``cfg.method``; ``auto`` uses RIS on graphs over
    GREEDY_EDGE_LIMIT edges and lazy greedy otherwise."""
    method = cfg.method
    if method == "auto":
        method = "ris" if graph.edge_count > GREEDY_EDGE_LIMIT else "greedy_celf"
    if method == "greedy_celf":
        return select_seeds_greedy(graph, probs, cfg, rng)
    return select_seeds_ris(graph, probs, cfg, rng)
