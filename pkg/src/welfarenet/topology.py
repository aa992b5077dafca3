"""Small-world network construction and structural metrics.

Nodes are numbered ``0..n-1``. The generator builds a ring lattice in which
node ``i`` owns the ``k/2`` clockwise lines ``(i, i+1) .. (i, i+k/2)``, then
rewires owned lines in line-major order: line 1 of every node, then line 2 of
every node, and so on.  A rewired line keeps its owner endpoint and moves its
far endpoint to a uniformly chosen node that is neither the owner nor already
adjacent to it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class TopologyError(ValueError):
    """Raised for invalid generator parameters."""


class DisconnectedGraphError(TopologyError):
    """Raised when a metric needs a connected graph and did not get one."""


@dataclass(frozen=True)
class SmallWorldParams:
    n: int = 1000
    k: int = 10
    p: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.n < 3:
            raise TopologyError(f"n must be >= 3, got n={self.n}")
        if self.k <= 0 or self.k % 2:
            raise TopologyError(f"k must be a positive even integer, got k={self.k}")
        if self.k >= self.n:
            raise TopologyError(f"k must be < n, got k={self.k}, n={self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise TopologyError(f"p must lie in [0, 1], got p={self.p}")


@dataclass(frozen=True)
class Topology:
    """Immutable undirected simple graph."""

    node_count: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        norm = set()
        for u, v in edges:
            if u == v:
                raise TopologyError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"edge ({u}, {v}) out of range for n={n}")
            norm.add((u, v) if u < v else (v, u))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in norm:
            nbrs[u].append(v)
            nbrs[v].append(u)
        adjacency = tuple(tuple(sorted(x)) for x in nbrs)
        return cls(n, frozenset(norm), adjacency)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    @cached_property
    def csr(self) -> csr_matrix:
        if not self.edges:
            return csr_matrix((self.node_count, self.node_count), dtype=np.int8)
        uv = np.array(self.sorted_edges(), dtype=np.int64)
        rows = np.concatenate([uv[:, 0], uv[:, 1]])
        cols = np.concatenate([uv[:, 1], uv[:, 0]])
        data = np.ones(rows.size, dtype=np.int8)
        return csr_matrix((data, (rows, cols)), shape=(self.node_count, self.node_count))


def ring_lattice(n: int, k: int) -> Topology:
    SmallWorldParams(n=n, k=k, p=0.0).validate()
    half = k // 2
    return Topology.from_edges(n, ((i, (i + j) % n) for i in range(n) for j in range(1, half + 1)))


def generate_small_world(params: SmallWorldParams) -> Topology:
    """Build a small-world graph; a pure function of ``params``.

    A rewire is skipped (the original line kept) when the far endpoint would
    be left isolated or when no valid new endpoint turns up within ``n``
    draws.
    """
    params.validate()
    n, k, p = params.n, params.k, params.p
    half = k // 2
    rng = np.random.default_rng(params.seed)

    nbrs: list[set[int]] = [set() for _ in range(n)]
    # far[i][l] is the current far endpoint of node i's owned line l+1
    far = [[(i + j) % n for j in range(1, half + 1)] for i in range(n)]
    for i in range(n):
        for v in far[i]:
            nbrs[i].add(v)
            nbrs[v].add(i)

    if p > 0.0:
        for line in range(half):
            for i in range(n):
                if rng.random() >= p:
                    continue
                old = far[i][line]
                if len(nbrs[old]) <= 1:
                    continue
                if len(nbrs[i]) >= n - 1:
                    continue
                for _ in range(n):
                    cand = int(rng.integers(n))
                    if cand != i and cand not in nbrs[i]:
                        break
                else:
                    continue
                nbrs[i].discard(old)
                nbrs[old].discard(i)
                nbrs[i].add(cand)
                nbrs[cand].add(i)
                far[i][line] = cand

    edges = {(u, v) if u < v else (v, u) for u in range(n) for v in nbrs[u]}
    return Topology.from_edges(n, edges)


def clustering_coefficient(t: Topology) -> float:
    """Mean local clustering; nodes of degree < 2 count as zero."""
    if t.node_count == 0:
        return 0.0
    a = t.csr.astype(np.int64)
    tri2 = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()  # 2 * triangles at node
    deg = np.asarray(a.sum(axis=1)).ravel()
    pairs = deg * (deg - 1)
    local = np.zeros(t.node_count, dtype=float)
    mask = deg >= 2
    local[mask] = tri2[mask] / pairs[mask]
    return float(local.mean())


def average_path_length(t: Topology) -> float:
    """Mean hop distance over all unordered node pairs."""
    n = t.node_count
    if n < 2:
        raise DisconnectedGraphError("average path length needs at least two nodes")
    dist = shortest_path(t.csr, method="D", directed=False, unweighted=True)
    if np.isinf(dist).any():
        raise DisconnectedGraphError("graph is disconnected")
    return float(dist.sum() / (n * (n - 1)))


def is_connected(t: Topology) -> bool:
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(t.csr, directed=False)
    return ncomp == 1


def write_edge_csv(t: Topology, path: str | Path) -> None:
    """Write the edge list as ``u,v`` rows with 0-based node ids."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v"])
        w.writerows(t.sorted_edges())


def read_edge_csv(path: str | Path, n: int | None = None) -> Topology:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    edges = [(int(r["u"]), int(r["v"])) for r in rows]
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Topology.from_edges(n, edges)


def p_sweep(n: int, k: int, ps: Iterable[float], seeds: Iterable[int]) -> list[dict]:
    """Seed-averaged (C, L) for each rewiring probability."""
    seeds = list(seeds)
    rows = []
    for p in ps:
        cs, ls = [], []
        for s in seeds:
            g = generate_small_world(SmallWorldParams(n=n, k=k, p=p, seed=s))
            cs.append(clustering_coefficient(g))
            ls.append(average_path_length(g))
        rows.append({"p": p, "C": float(np.mean(cs)), "L": float(np.mean(ls)), "seeds": len(seeds)})
    return rows
