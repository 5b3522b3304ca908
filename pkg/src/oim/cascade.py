"""Independent-cascade diffusion, edge-level feedback, and spread evaluation."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph, check_probabilities, gather_ranges

# exact_spread enumerates all 2^edge_count activation patterns.
EXACT_SPREAD_EDGE_LIMIT = 20

_MC_CHUNK = 4096


@dataclass(frozen=True)
class CascadeOutcome:
    """One diffusion realization plus the edge-level feedback it exposes.

    ``observed_edges`` holds every edge whose source node became active,
    in activation order; ``activation_bit`` carries the matching Bernoulli
    outcomes. An edge is reported even when its target was already active.
    """

    activated: frozenset[int]
    observed_edges: np.ndarray  # (k,) edge ids
    activation_bit: np.ndarray  # (k,) uint8, aligned with observed_edges

    @property
    def spread(self) -> int:
        return len(self.activated)


def _check_seeds(graph: DirectedGraph, seeds) -> np.ndarray:
    arr = np.unique(np.asarray(sorted(int(s) for s in seeds), dtype=np.int64))
    if arr.size == 0:
        raise ValueError("seed set must be nonempty")
    if arr.min() < 0 or arr.max() >= graph.node_count:
        raise ValueError("seed ids outside node range")
    return arr


def simulate_cascade(graph: DirectedGraph, probs: np.ndarray, seeds,
                     rng: np.random.Generator) -> CascadeOutcome:
    """Run one independent cascade from ``seeds`` under edge probabilities ``probs``.

    Breadth-first: when a node activates, each of its outgoing edges is
    sampled exactly once with its own probability. Activated nodes never
    deactivate. Every sampled edge is recorded with its outcome bit, which
    is exactly the semi-bandit feedback a learner observes.
    """
    probs = check_probabilities(probs, graph.edge_count)
    frontier = _check_seeds(graph, seeds)

    active = np.zeros(graph.node_count, dtype=bool)
    active[frontier] = True
    observed_chunks: list[np.ndarray] = []
    bit_chunks: list[np.ndarray] = []

    while frontier.size:
        eids = gather_ranges(graph.out_indptr, graph.out_edge_ids, frontier)
        if eids.size == 0:
            break
        bits = rng.random(eids.size) < probs[eids]
        observed_chunks.append(eids)
        bit_chunks.append(bits)
        hit = graph.tgt[eids[bits]]
        fresh = np.unique(hit[~active[hit]])
        active[fresh] = True
        frontier = fresh

    if observed_chunks:
        observed = np.concatenate(observed_chunks)
        bit_arr = np.concatenate(bit_chunks).astype(np.uint8)
    else:
        observed = np.empty(0, dtype=np.int64)
        bit_arr = np.empty(0, dtype=np.uint8)
    return CascadeOutcome(
        activated=frozenset(int(v) for v in np.flatnonzero(active)),
        observed_edges=observed,
        activation_bit=bit_arr,
    )


def reachable_nodes(graph: DirectedGraph, seeds, live: np.ndarray) -> set[int]:
    """Nodes reachable from ``seeds`` using only edges flagged in ``live``."""
    live = np.asarray(live, dtype=bool)
    if live.shape != (graph.edge_count,):
        raise ValueError("live mask must have one entry per edge")
    seed_arr = _check_seeds(graph, seeds)
    active = set(int(s) for s in seed_arr)
    stack = list(active)
    pairs = graph.out_pairs
    while stack:
        u = stack.pop()
        for eid, v in pairs[u]:
            if live[eid] and v not in active:
                active.add(v)
                stack.append(v)
    return active


def exact_spread(graph: DirectedGraph, probs: np.ndarray, seeds) -> float:
    """Exact expected spread by enumerating every edge activation pattern.

    Only feasible up to EXACT_SPREAD_EDGE_LIMIT edges; beyond that a
    capacity error is raised. Deterministic edges (probability 0 or 1) are
    fixed, so enumeration runs over the uncertain edges only.
    """
    probs = check_probabilities(probs, graph.edge_count)
    seed_arr = _check_seeds(graph, seeds)
    m = graph.edge_count
    if m > EXACT_SPREAD_EDGE_LIMIT:
        raise ValueError(
            f"exact_spread enumerates 2^edges patterns; {m} edges exceeds the "
            f"limit of {EXACT_SPREAD_EDGE_LIMIT}")

    free = [e for e in range(m) if 0.0 < probs[e] < 1.0]
    base_live = probs >= 1.0
    p_free = [float(probs[e]) for e in free]
    total = 0.0
    for mask in range(1 << len(free)):
        live = base_live.copy()
        weight = 1.0
        for j, e in enumerate(free):
            if (mask >> j) & 1:
                live[e] = True
                weight *= p_free[j]
            else:
                weight *= 1.0 - p_free[j]
        total += weight * len(reachable_nodes(graph, seed_arr, live))
    return total


def _spread_once(pairs: list[list[tuple[int, int]]], probs_list: list[float],
                 seeds: list[int], rand: random.Random) -> int:
    """One sampled cascade, counting activations only (no feedback recording).

    Edges into already-active targets are skipped without drawing; by edge
    independence this does not change the distribution of the activated set.
    """
    active = set(seeds)
    stack = list(seeds)
    while stack:
        u = stack.pop()
        for eid, v in pairs[u]:
            if v not in active:
                p = probs_list[eid]
                if p >= 1.0 or (p > 0.0 and rand.random() < p):
                    active.add(v)
                    stack.append(v)
    return len(active)


def monte_carlo_spread(graph: DirectedGraph, probs: np.ndarray, seeds,
                       samples: int, rng: np.random.Generator) -> float:
    """Mean spread over ``samples`` independent cascades.

    Sampling is split into fixed-size chunks, each driven by its own child
    stream spawned from ``rng``, so the result does not depend on how
    chunks are scheduled.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    probs = check_probabilities(probs, graph.edge_count)
    seed_arr = _check_seeds(graph, seeds)
    seeds_list = [int(s) for s in seed_arr]
    probs_list = probs.tolist()
    pairs = graph.out_pairs

    n_chunks = (samples + _MC_CHUNK - 1) // _MC_CHUNK
    children = rng.spawn(n_chunks)
    total = 0
    remaining = samples
    for child in children:
        count = min(_MC_CHUNK, remaining)
        remaining -= count
        rand = random.Random(int(child.integers(0, 2**63)))
        for _ in range(count):
            total += _spread_once(pairs, probs_list, seeds_list, rand)
    return total / samples
