"""Directed acyclic graphs, random graph families and a d-separation oracle."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable

import numpy as np


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    """Immutable DAG over vertices ``0..d-1``; ``(j, i)`` in ``edges`` means j -> i."""

    d: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError(f"vertex count must be positive, got {self.d}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if not (0 <= j < self.d and 0 <= i < self.d):
                raise IndexError(f"edge {j}->{i} out of range for d={self.d}")
            if j == i:
                raise CycleError(f"self loop on vertex {i}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "edges", edges)
        # raises on cycles
        topological_order(self)

    @classmethod
    def empty(cls, d: int) -> "Dag":
        return cls(d, frozenset())

    @classmethod
    def from_adjacency(cls, adj) -> "Dag":
        adj = np.asarray(adj)
        js, is_ = np.nonzero(adj)
        return cls(adj.shape[0], frozenset(zip(js.tolist(), is_.tolist())))

    def adjacency(self) -> np.ndarray:
        """``adj[j, i] = 1`` iff j -> i."""
        adj = np.zeros((self.d, self.d), dtype=int)
        for j, i in self.edges:
            adj[j, i] = 1
        return adj

    def to_dict(self) -> dict:
        return {"d": self.d, "edges": sorted([j, i] for j, i in self.edges)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Dag":
        return cls(int(doc["d"]), frozenset(tuple(e) for e in doc["edges"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Dag":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __len__(self):
        return len(self.edges)


def _check_vertex(g: Dag, i: int) -> None:
    if not 0 <= i < g.d:
        raise IndexError(f"vertex {i} out of range for d={g.d}")


def parents(g: Dag, i: int) -> set[int]:
    _check_vertex(g, i)
    return {j for j, k in g.edges if k == i}


def children(g: Dag, i: int) -> set[int]:
    _check_vertex(g, i)
    return {k for j, k in g.edges if j == i}


def _parent_lists(g: Dag) -> list[list[int]]:
    pa = [[] for _ in range(g.d)]
    for j, i in sorted(g.edges):
        pa[i].append(j)
    return pa


def topological_order(g: Dag) -> list[int]:
    """Kahn's algorithm with smallest-index tie-breaking."""
    indeg = [0] * g.d
    ch = [[] for _ in range(g.d)]
    for j, i in g.edges:
        indeg[i] += 1
        ch[j].append(i)
    ready = sorted(v for v in range(g.d) if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in ch[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort()
    if len(order) != g.d:
        raise CycleError("graph contains a directed cycle")
    return order


def is_ancestral_set(g: Dag, c: Iterable[int]) -> bool:
    c = set(c)
    for v in c:
        _check_vertex(g, v)
    return all(j in c for j, i in g.edges if i in c)


def _check_permutation(pi, d: int) -> list[int]:
    pi = [int(v) for v in pi]
    if sorted(pi) != list(range(d)):
        raise ValueError(f"not a permutation of range({d}): {pi}")
    return pi


def is_valid_ordering(g: Dag, pi) -> bool:
    pi = _check_permutation(pi, g.d)
    pos = {v: k for k, v in enumerate(pi)}
    return all(pos[j] < pos[i] for j, i in g.edges)


def d_separated(g: Dag, x: int, y: int, z: Iterable[int]) -> bool:
    """Reachability (Bayes-ball) test of ``x _||_ y | z``."""
    z = set(z)
    for v in (x, y, *z):
        _check_vertex(g, v)
    if x == y or x in z or y in z:
        raise ValueError("x and y must be distinct and outside the conditioning set")
    pa = _parent_lists(g)
    ch = [[] for _ in range(g.d)]
    for j, i in g.edges:
        ch[j].append(i)

    # ancestors of z (inclusive): colliders in here are open
    anc = set()
    stack = list(z)
    while stack:
        v = stack.pop()
        if v not in anc:
            anc.add(v)
            stack.extend(pa[v])

    # (vertex, arrived travelling "up" from a child or "down" from a parent)
    queue = deque([(x, "up")])
    seen = set()
    while queue:
        v, direction = queue.popleft()
        if (v, direction) in seen:
            continue
        seen.add((v, direction))
        if v == y:
            return False
        if direction == "up":
            if v not in z:
                queue.extend((p, "up") for p in pa[v])
                queue.extend((c, "down") for c in ch[v])
        else:
            if v not in z:
                queue.extend((c, "down") for c in ch[v])
            if v in anc:
                queue.extend((p, "up") for p in pa[v])
    return True


def erdos_renyi(d: int, expected_in_degree: float, seed: int) -> Dag:
    """ER DAG whose expected edge count is ``expected_in_degree * d``.

    A hidden random permutation fixes the orientation, so every sampled
    edge points forward and the result is acyclic.
    """
    if d < 2:
        raise ValueError("erdos_renyi needs d >= 2")
    if not 0 < expected_in_degree <= (d - 1) / 2:
        raise ValueError(
            f"expected in-degree {expected_in_degree} infeasible for d={d} "
            f"(must lie in (0, {(d - 1) / 2}])"
        )
    rng = np.random.default_rng(seed)
    p = expected_in_degree * d / comb(d, 2)
    order = rng.permutation(d)
    mask = rng.random((d, d)) < p
    edges = set()
    for a in range(d):
        for b in range(a + 1, d):
            if mask[a, b]:
                edges.add((int(order[a]), int(order[b])))
    return Dag(d, frozenset(edges))


def scale_free(d: int, m: int, seed: int) -> Dag:
    """Barabasi-Albert style DAG with edges oriented old -> new.

    Convention: node 0 seeds the graph, node 1 attaches to node 0 with a
    single edge, and every node ``t >= 2`` draws ``min(m, t)`` distinct
    earlier nodes with probability proportional to current degree. For
    ``m = 1`` this is a tree with ``d - 1`` edges; for ``m >= 2`` the count
    is ``1 + sum_{t=2}^{d-1} min(m, t)``, i.e. ``m * (d - m) + 1`` when
    ``m = 2``. Vertex labels are randomly permuted afterwards so that index
    order carries no information about the causal order.
    """
    if m < 1 or d < m:
        raise ValueError(f"scale_free needs d >= m >= 1, got d={d}, m={m}")
    rng = np.random.default_rng(seed)
    degree = np.zeros(d)
    edges = set()
    if d >= 2:
        edges.add((0, 1))
        degree[[0, 1]] += 1
    for t in range(2, d):
        k = min(m, t)
        w = degree[:t] + 1e-12
        targets = rng.choice(t, size=k, replace=False, p=w / w.sum())
        for s in targets:
            edges.add((int(s), t))
            degree[s] += 1
        degree[t] += k
    label = rng.permutation(d)
    return Dag(d, frozenset((int(label[j]), int(label[i])) for j, i in edges))


GRAPH_FAMILIES = {
    "ER-1": ("er", 1),
    "ER-2": ("er", 2),
    "ER-4": ("er", 4),
    "SF-1": ("sf", 1),
    "SF-2": ("sf", 2),
    "SF-4": ("sf", 4),
}


def random_graph(family: str, d: int, seed: int) -> Dag:
    """Sample from a named family (``ER-k`` / ``SF-k``).

    For ER the in-degree is capped at ``(d - 1) / 2`` (the complete DAG) and
    for SF ``m`` at ``d``, so small ``d`` stays usable with every family.
    """
    try:
        kind, k = GRAPH_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown graph family {family!r}") from None
    if kind == "er":
        return erdos_renyi(d, min(k, (d - 1) / 2), seed)
    return scale_free(d, min(k, d), seed)
