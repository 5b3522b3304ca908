"""Directed graphs, edge-list ingestion, ground-truth probabilities, spectral features."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Below this many nodes the Laplacian eigenproblem is solved densely;
# above it an iterative solver with residual tolerance 1e-8 is used.
DENSE_EIGEN_LIMIT = 2000


class GraphFormatError(ValueError):
    """Malformed edge-list input: bad tokens, self-loops, duplicate pairs."""


class DirectedGraph:
    """Immutable directed graph with indexed nodes and edges.

    Nodes are the integers ``0 .. node_count-1``; edge ``e`` runs from
    ``src[e]`` to ``tgt[e]``. Construction rejects self-loops and duplicate
    (source, target) pairs. Both out- and in-adjacency are kept in CSR form
    so that diffusion can walk forward edges and reverse-reachability
    sampling can walk backward edges.
    """

    def __init__(self, node_count: int, edges: Sequence[tuple[int, int]]):
        if node_count < 0:
            raise ValueError("node_count must be nonnegative")
        self.node_count = int(node_count)
        m = len(edges)
        src = np.empty(m, dtype=np.int64)
        tgt = np.empty(m, dtype=np.int64)
        seen: set[tuple[int, int]] = set()
        for i, (u, v) in enumerate(edges):
            u, v = int(u), int(v)
            if u == v:
                raise GraphFormatError(f"self-loop {u}->{v} is not allowed")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) outside node range 0..{node_count - 1}")
            if (u, v) in seen:
                raise GraphFormatError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            src[i] = u
            tgt[i] = v
        self.src = src
        self.tgt = tgt
        self.src.setflags(write=False)
        self.tgt.setflags(write=False)

        n = self.node_count
        out_order = np.argsort(src, kind="stable")
        self.out_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.out_indptr[1:])
        self.out_edge_ids = out_order.astype(np.int64)

        in_order = np.argsort(tgt, kind="stable")
        self.in_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(tgt, minlength=n), out=self.in_indptr[1:])
        self.in_edge_ids = in_order.astype(np.int64)

        self.in_degree = np.bincount(tgt, minlength=n).astype(np.int64)
        self.out_degree = np.bincount(src, minlength=n).astype(np.int64)
        for arr in (self.out_indptr, self.out_edge_ids, self.in_indptr,
                    self.in_edge_ids, self.in_degree, self.out_degree):
            arr.setflags(write=False)

        # Plain-python mirrors; scalar diffusion loops over these are several
        # times faster than elementwise indexing into numpy arrays.
        self.out_pairs: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e in range(m):
            self.out_pairs[int(src[e])].append((int(e), int(tgt[e])))

    @property
    def edge_count(self) -> int:
        return int(self.src.shape[0])

    def edges(self) -> Iterable[tuple[int, int]]:
        return zip(self.src.tolist(), self.tgt.tolist())

    def out_edges(self, node: int) -> np.ndarray:
        """Edge ids leaving ``node``."""
        return self.out_edge_ids[self.out_indptr[node]:self.out_indptr[node + 1]]

    def in_edges(self, node: int) -> np.ndarray:
        """Edge ids entering ``node``."""
        return self.in_edge_ids[self.in_indptr[node]:self.in_indptr[node + 1]]

    def __repr__(self) -> str:
        return f"DirectedGraph(node_count={self.node_count}, edge_count={self.edge_count})"


def gather_ranges(indptr: np.ndarray, flat: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Concatenate ``flat[indptr[v]:indptr[v+1]]`` for every ``v`` in ``nodes``.

    Vectorized multi-range gather used by both the cascade simulator and the
    reverse-reachability sampler to expand a BFS frontier in one shot.
    """
    counts = indptr[nodes + 1] - indptr[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=flat.dtype)
    starts = indptr[nodes]
    offsets = np.cumsum(counts) - counts
    idx = np.repeat(starts - offsets, counts) + np.arange(total, dtype=np.int64)
    return flat[idx]


def load_edge_list(source: IO[str] | str | Path, symmetrize: bool = False) -> DirectedGraph:
    """Read whitespace-separated ``source target`` pairs into a graph.

    Lines starting with ``#`` and blank lines are skipped. Node ids must be
    nonnegative integers; the graph spans ``0 .. max_id`` so ids absent from
    the file become isolated nodes. Duplicate pairs are dropped with a
    warning counter. With ``symmetrize`` each input pair also adds the
    reversed directed edge, which is how undirected datasets are ingested.

    Raises GraphFormatError on malformed lines or self-loops, reporting the
    line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return load_edge_list(handle, symmetrize=symmetrize)

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    duplicates = 0
    max_id = -1
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) < 2:
            raise GraphFormatError(f"line {lineno}: expected 'source target', got {text!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: non-integer node id in {text!r}") from exc
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: negative node id in {text!r}")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop {u}->{v} rejected")
        pairs = [(u, v), (v, u)] if symmetrize else [(u, v)]
        for pair in pairs:
            if pair in seen:
                duplicates += 1
            else:
                seen.add(pair)
                edges.append(pair)
        max_id = max(max_id, u, v)
    if duplicates:
        logger.warning("load_edge_list: dropped %d duplicate edge(s)", duplicates)
    return DirectedGraph(max_id + 1, edges)


def load_edge_list_text(text: str, symmetrize: bool = False) -> DirectedGraph:
    """Convenience wrapper around :func:`load_edge_list` for in-memory text."""
    return load_edge_list(io.StringIO(text), symmetrize=symmetrize)


def assign_weighted_cascade(graph: DirectedGraph) -> np.ndarray:
    """Ground-truth probabilities: edge (u, v) gets 1 / in_degree(v).

    Every edge's target has in-degree >= 1 by construction, so the result is
    finite and lies in (0, 1]. The probabilities on a node's incoming edges
    are all equal and sum to one.
    """
    probs = 1.0 / graph.in_degree[graph.tgt].astype(np.float64)
    probs.setflags(write=False)
    return probs


def check_probabilities(probs: np.ndarray, edge_count: int) -> np.ndarray:
    """Validate a per-edge probability vector: shape (edge_count,), values in [0, 1]."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.shape != (edge_count,):
        raise ValueError(f"expected {edge_count} edge probabilities, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise ValueError("edge probabilities must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """Spectral embedding of nodes plus per-edge features.

    ``edge_feature[e]`` is the elementwise product of the endpoint
    embeddings, so it is symmetric in the edge direction.
    """

    dimension: int
    node_embedding: np.ndarray  # (node_count, dimension)
    edge_feature: np.ndarray    # (edge_count, dimension)


def laplacian_features(graph: DirectedGraph, dimension: int) -> FeatureMap:
    """Embed nodes with the ``dimension`` lowest eigenvectors of the graph Laplacian.

    The Laplacian is the combinatorial L = D - A of the symmetrized simple
    graph (an undirected edge wherever either direction appears), so the
    features do not depend on edge orientation. Each eigenvector's sign is
    fixed by making its largest-magnitude entry positive.
    """
    n = graph.node_count
    if not 1 <= dimension <= n:
        raise ValueError(f"feature dimension must be in 1..{n}, got {dimension}")

    rows = np.concatenate([graph.src, graph.tgt])
    cols = np.concatenate([graph.tgt, graph.src])
    if n <= DENSE_EIGEN_LIMIT:
        adj = np.zeros((n, n), dtype=np.float64)
        adj[rows, cols] = 1.0
        lap = np.diag(adj.sum(axis=1)) - adj
        eigvals, eigvecs = np.linalg.eigh(lap)
    else:
        from scipy.sparse import coo_matrix, diags
        from scipy.sparse.linalg import eigsh

        data = np.ones(rows.shape[0], dtype=np.float64)
        adj = coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        adj.data[:] = 1.0  # collapse reciprocal pairs
        lap = diags(np.asarray(adj.sum(axis=1)).ravel()) - adj
        try:
            eigvals, eigvecs = eigsh(lap, k=dimension, which="SA", tol=1e-8)
        except Exception:  # no convergence; fall back to the dense path
            lap_dense = lap.toarray()
            eigvals, eigvecs = np.linalg.eigh(lap_dense)
        order = np.argsort(eigvals)
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    embedding = np.array(eigvecs[:, :dimension], dtype=np.float64)
    for j in range(dimension):
        col = embedding[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            embedding[:, j] = -col
    edge_feature = embedding[graph.src] * embedding[graph.tgt]
    embedding.setflags(write=False)
    edge_feature.setflags(write=False)
    return FeatureMap(dimension=dimension, node_embedding=embedding, edge_feature=edge_feature)


def preferential_attachment_graph(node_count: int, attach: int,
                                  rng: np.random.Generator) -> DirectedGraph:
    """Synthetic power-law digraph: preferential attachment, each undirected
    edge expanded into the two directed edges.

    Yields ``2 * attach * (node_count - attach)`` directed edges.
    """
    if attach < 1:
        raise ValueError("attach must be >= 1")
    if node_count <= attach:
        raise ValueError("node_count must exceed attach")
    edges: list[tuple[int, int]] = []
    repeated: list[int] = []
    targets = list(range(attach))
    for v in range(attach, node_count):
        for t in targets:
            edges.append((v, t))
            edges.append((t, v))
        repeated.extend(targets)
        repeated.extend([v] * attach)
        chosen: set[int] = set()
        while len(chosen) < attach:
            chosen.add(repeated[int(rng.integers(len(repeated)))])
        targets = sorted(chosen)
    return DirectedGraph(node_count, edges)


def write_edge_list(graph: DirectedGraph, path: str | Path, header: str | None = None) -> None:
    """Persist a graph as a plain ``source target`` edge list."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header:
            handle.write(f"# {header}\n")
        for u, v in graph.edges():
            handle.write(f"{u} {v}\n")
