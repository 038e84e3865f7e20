"""Graph data model, file I/O, threat-model semantics and receptive fields.

Graphs are binary-attributed: an ``N x D`` bit matrix plus a binary
adjacency over ``N`` nodes, directed or undirected. Perturbations flip
individual bits and are metered by four counters: attribute additions and
deletions, edge additions and deletions.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import InputError

AXES = ("x_add", "x_del", "a_add", "a_del")


@dataclass(frozen=True)
class BudgetVector:
    """Non-negative counts of flipped bits, one per perturbation type."""

    x_add: int = 0
    x_del: int = 0
    a_add: int = 0
    a_del: int = 0

    def __post_init__(self):
        for axis in AXES:
            v = getattr(self, axis)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise InputError(f"budget component {axis} must be a non-negative integer, got {v!r}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_add, self.x_del, self.a_add, self.a_del)

    @classmethod
    def from_tuple(cls, t) -> "BudgetVector":
        return cls(int(t[0]), int(t[1]), int(t[2]), int(t[3]))

    def covered_by(self, other: "BudgetVector") -> bool:
        """Componentwise ``self <= other``."""
        return all(a <= b for a, b in zip(self.as_tuple(), other.as_tuple()))

    def is_zero(self) -> bool:
        return self.as_tuple() == (0, 0, 0, 0)

    def with_axis(self, axis: str, value: int) -> "BudgetVector":
        if axis not in AXES:
            raise ValueError(f"unknown perturbation axis {axis!r}")
        return replace(self, **{axis: int(value)})


def _canonical_edge(i: int, j: int, directed: bool) -> tuple[int, int]:
    if directed or i < j:
        return (i, j)
    return (j, i)


@dataclass(frozen=True)
class Graph:
    """Immutable attributed graph.

    ``edges`` holds ordered pairs; for undirected graphs every pair is
    stored with ``i < j`` and interpreted symmetrically. ``attributes``
    holds the (node, feature) positions whose bit is 1.
    """

    num_nodes: int
    num_features: int
    directed: bool
    edges: frozenset
    attributes: frozenset
    labels: tuple | None = None

    def __post_init__(self):
        n, d = self.num_nodes, self.num_features
        if n < 0 or d < 0:
            raise InputError("num_nodes and num_features must be non-negative")
        for (i, j) in self.edges:
            if i == j:
                raise InputError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i},{j}) out of range for {n} nodes")
            if not self.directed and i > j:
                raise InputError(f"undirected edge ({i},{j}) not in canonical i<j order")
        for (m, f) in self.attributes:
            if not (0 <= m < n and 0 <= f < d):
                raise InputError(f"attribute position ({m},{f}) out of range")
        if self.labels is not None:
            if len(self.labels) != n:
                raise InputError(f"labels has length {len(self.labels)}, expected {n}")
            if any(c < 0 for c in self.labels):
                raise InputError("labels must be non-negative class ids")

    @classmethod
    def create(cls, num_nodes, num_features, directed, edges, attributes, labels=None) -> "Graph":
        """Build a graph from raw sequences, rejecting duplicates.

        For undirected graphs, duplication is checked after canonicalizing
        each pair to i<j, so [0,1] and [1,0] collide.
        """
        seen = set()
        canon = []
        for (i, j) in edges:
            if i == j:
                raise InputError(f"self-loop at node {i}")
            e = _canonical_edge(int(i), int(j), directed)
            if e in seen:
                raise InputError(f"duplicate edge ({i},{j}) under canonicalization")
            seen.add(e)
            canon.append(e)
        attrs = set()
        for (m, f) in attributes:
            a = (int(m), int(f))
            if a in attrs:
                raise InputError(f"duplicate attribute position ({m},{f})")
            attrs.add(a)
        return cls(
            num_nodes=int(num_nodes),
            num_features=int(num_features),
            directed=bool(directed),
            edges=frozenset(canon),
            attributes=frozenset(attrs),
            labels=None if labels is None else tuple(int(c) for c in labels),
        )

    @cached_property
    def sorted_edges(self) -> tuple:
        return tuple(sorted(self.edges))

    @cached_property
    def out_neighbors(self) -> tuple:
        """Successors per node (both directions for undirected graphs)."""
        adj = [[] for _ in range(self.num_nodes)]
        for (i, j) in self.sorted_edges:
            adj[i].append(j)
            if not self.directed:
                adj[j].append(i)
        return tuple(tuple(a) for a in adj)

    @cached_property
    def in_neighbors(self) -> tuple:
        """Predecessors per node (equals out_neighbors when undirected)."""
        if not self.directed:
            return self.out_neighbors
        adj = [[] for _ in range(self.num_nodes)]
        for (i, j) in self.sorted_edges:
            adj[j].append(i)
        return tuple(tuple(a) for a in adj)

    @cached_property
    def attribute_matrix(self) -> np.ndarray:
        x = np.zeros((self.num_nodes, self.num_features), dtype=np.uint8)
        for (m, f) in self.attributes:
            x[m, f] = 1
        return x

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=np.uint8)
        for (i, j) in self.sorted_edges:
            a[i, j] = 1
            if not self.directed:
                a[j, i] = 1
        return a

    def num_classes(self) -> int:
        """Class count: max label + 1 when labels exist, else D."""
        if self.labels is not None and len(self.labels) > 0:
            return max(self.labels) + 1
        return self.num_features

    def has_edge(self, i: int, j: int) -> bool:
        return _canonical_edge(i, j, self.directed) in self.edges


def load_graph(path) -> Graph:
    """Load a graph from its JSON file representation."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"graph file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"graph file {path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    return graph_from_dict(doc, context=str(path))


def graph_from_dict(doc, context="graph") -> Graph:
    if not isinstance(doc, dict):
        raise InputError(f"{context}: expected a JSON object")
    for key in ("num_nodes", "num_features", "directed", "edges", "attributes"):
        if key not in doc:
            raise InputError(f"{context}: missing field {key!r}")
    try:
        return Graph.create(
            num_nodes=doc["num_nodes"],
            num_features=doc["num_features"],
            directed=doc["directed"],
            edges=doc["edges"],
            attributes=doc["attributes"],
            labels=doc.get("labels"),
        )
    except InputError as e:
        raise InputError(f"{context}: {e}")
    except (TypeError, ValueError) as e:
        raise InputError(f"{context}: malformed field: {e}")


def save_graph(g: Graph, path) -> None:
    doc = {
        "num_nodes": g.num_nodes,
        "num_features": g.num_features,
        "directed": g.directed,
        "edges": [list(e) for e in g.sorted_edges],
        "attributes": [list(a) for a in sorted(g.attributes)],
    }
    if g.labels is not None:
        doc["labels"] = list(g.labels)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ThreatModel:
    """Admissible-perturbation limits: global box, per-node caps, attacker cap.

    Local vectors and sigma are None when unbounded. ``directed``, when
    set, must match the graph the model is applied to.
    """

    global_budget: BudgetVector = BudgetVector()
    local_x_add: tuple | None = None
    local_x_del: tuple | None = None
    local_a_add: tuple | None = None
    local_a_del: tuple | None = None
    sigma: int | None = None
    directed: bool | None = None

    def __post_init__(self):
        for name in ("local_x_add", "local_x_del", "local_a_add", "local_a_del"):
            vec = getattr(self, name)
            if vec is not None and any(v < 0 for v in vec):
                raise InputError(f"{name} entries must be non-negative")
        if self.sigma is not None and self.sigma < 0:
            raise InputError("sigma must be non-negative")

    def validate_for(self, g: Graph) -> None:
        for name in ("local_x_add", "local_x_del", "local_a_add", "local_a_del"):
            vec = getattr(self, name)
            if vec is not None and len(vec) != g.num_nodes:
                raise InputError(f"{name} has length {len(vec)}, expected {g.num_nodes}")
        if self.sigma is not None and self.sigma > g.num_nodes:
            raise InputError(f"sigma {self.sigma} exceeds node count {g.num_nodes}")
        if self.directed is not None and self.directed != g.directed:
            raise InputError("threat model directedness does not match graph")

    @property
    def allows_edge_addition(self) -> bool:
        """True iff some admissible perturbed graph contains a new edge."""
        if self.global_budget.a_add <= 0:
            return False
        if self.local_a_add is not None and all(v == 0 for v in self.local_a_add):
            return False
        return True

    @property
    def has_local_budgets(self) -> bool:
        return any(
            getattr(self, n) is not None
            for n in ("local_x_add", "local_x_del", "local_a_add", "local_a_del")
        )

    def with_global(self, axis: str, value: int) -> "ThreatModel":
        return replace(self, global_budget=self.global_budget.with_axis(axis, value))


def load_threat_model(path) -> ThreatModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"threat-model file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"threat-model file {path}: parse error at line {e.lineno}: {e.msg}")
    return threat_model_from_dict(doc, context=str(path))


def threat_model_from_dict(doc, context="threat model") -> ThreatModel:
    if not isinstance(doc, dict) or "global" not in doc:
        raise InputError(f"{context}: missing field 'global'")
    gb = doc["global"]
    try:
        global_budget = BudgetVector(
            int(gb.get("x_add", 0)), int(gb.get("x_del", 0)),
            int(gb.get("a_add", 0)), int(gb.get("a_del", 0)),
        )
        locals_ = {}
        for name in ("local_x_add", "local_x_del", "local_a_add", "local_a_del"):
            vec = doc.get(name)
            locals_[name] = None if vec is None else tuple(int(v) for v in vec)
        sigma = doc.get("sigma")
        return ThreatModel(
            global_budget=global_budget,
            sigma=None if sigma is None else int(sigma),
            **locals_,
        )
    except InputError as e:
        raise InputError(f"{context}: {e}")
    except (TypeError, ValueError, AttributeError) as e:
        raise InputError(f"{context}: malformed field: {e}")


def threat_model_to_dict(tm: ThreatModel) -> dict:
    return {
        "global": {
            "x_add": tm.global_budget.x_add,
            "x_del": tm.global_budget.x_del,
            "a_add": tm.global_budget.a_add,
            "a_del": tm.global_budget.a_del,
        },
        "local_x_add": None if tm.local_x_add is None else list(tm.local_x_add),
        "local_x_del": None if tm.local_x_del is None else list(tm.local_x_del),
        "local_a_add": None if tm.local_a_add is None else list(tm.local_a_add),
        "local_a_del": None if tm.local_a_del is None else list(tm.local_a_del),
        "sigma": tm.sigma,
    }


@dataclass(frozen=True)
class ReceptiveField:
    """Attribute rows and adjacency positions that can influence one prediction.

    ``global_field=True`` means every position is a member (the conservative
    answer whenever the threat model can insert edges). Otherwise ``nodes``
    lists the member rows and ``edge_positions`` the member adjacency
    positions, canonicalized to i<j for undirected graphs.
    """

    owner: int
    num_nodes: int
    directed: bool
    global_field: bool
    nodes: frozenset = frozenset()
    edge_positions: frozenset = frozenset()

    def __post_init__(self):
        if not self.global_field and self.owner not in self.nodes:
            raise ValueError("receptive field must contain its owning node")

    def contains_node(self, m: int) -> bool:
        return True if self.global_field else m in self.nodes

    def contains_edge(self, i: int, j: int) -> bool:
        if self.global_field:
            return True
        return _canonical_edge(i, j, self.directed) in self.edge_positions

    def node_indicator(self) -> np.ndarray:
        if self.global_field:
            return np.ones(self.num_nodes, dtype=bool)
        ind = np.zeros(self.num_nodes, dtype=bool)
        ind[list(self.nodes)] = True
        return ind


def hop_distances_to(g: Graph, n: int) -> np.ndarray:
    """BFS hop distance from every node to n (along edge direction).

    Unreachable nodes get -1. For undirected graphs this is the ordinary
    BFS distance from n.
    """
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[n] = 0
    queue = deque([n])
    preds = g.in_neighbors
    while queue:
        v = queue.popleft()
        for u in preds[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def receptive_field(g: Graph, n: int, k: int, tm: ThreatModel) -> ReceptiveField:
    """Union of all receptive fields of prediction n under the threat model.

    With edge insertions admissible the field is global: an adversary can
    wire arbitrary nodes into the k-hop neighborhood. Otherwise deletions
    only ever lengthen or remove paths, so the clean graph's k-hop
    neighborhood is a sound superset: member rows are the nodes within k
    hops of n, and member adjacency positions are the clean edges whose
    message-receiving endpoint lies within k-1 hops of n (either endpoint,
    for undirected graphs).
    """
    if k < 1:
        raise ValueError("layer count k must be >= 1")
    if not (0 <= n < g.num_nodes):
        raise ValueError(f"node {n} out of range")
    if tm.allows_edge_addition:
        return ReceptiveField(
            owner=n, num_nodes=g.num_nodes, directed=g.directed, global_field=True
        )
    dist = hop_distances_to(g, n)
    nodes = frozenset(int(m) for m in np.nonzero((dist >= 0) & (dist <= k))[0])
    edges = []
    for (i, j) in g.sorted_edges:
        if g.directed:
            member = 0 <= dist[j] <= k - 1
        else:
            member = (0 <= dist[i] <= k - 1) or (0 <= dist[j] <= k - 1)
        if member:
            edges.append((i, j))
    return ReceptiveField(
        owner=n,
        num_nodes=g.num_nodes,
        directed=g.directed,
        global_field=False,
        nodes=nodes,
        edge_positions=frozenset(edges),
    )


@dataclass(frozen=True)
class PerturbationCounts:
    """Exact flip tallies between a clean graph and a perturbed one."""

    global_counts: BudgetVector
    per_node_x_add: np.ndarray
    per_node_x_del: np.ndarray
    per_node_a_add: np.ndarray
    per_node_a_del: np.ndarray


def perturbation_counts(clean: Graph, perturbed: Graph) -> PerturbationCounts:
    """Count 0->1 and 1->0 flips globally and per node row.

    For undirected graphs an edge flip counts once globally and toward
    both endpoints' local tallies; for directed graphs an edge (i, j)
    counts toward row i only.
    """
    _check_shapes(clean, perturbed)
    n = clean.num_nodes
    x_add = np.zeros(n, dtype=np.int64)
    x_del = np.zeros(n, dtype=np.int64)
    a_add = np.zeros(n, dtype=np.int64)
    a_del = np.zeros(n, dtype=np.int64)

    for (m, f) in perturbed.attributes - clean.attributes:
        x_add[m] += 1
    for (m, f) in clean.attributes - perturbed.attributes:
        x_del[m] += 1

    added = perturbed.edges - clean.edges
    deleted = clean.edges - perturbed.edges
    for (i, j) in added:
        a_add[i] += 1
        if not clean.directed:
            a_add[j] += 1
    for (i, j) in deleted:
        a_del[i] += 1
        if not clean.directed:
            a_del[j] += 1

    global_counts = BudgetVector(
        int(x_add.sum()), int(x_del.sum()), len(added), len(deleted)
    )
    return PerturbationCounts(global_counts, x_add, x_del, a_add, a_del)


def _check_shapes(clean: Graph, perturbed: Graph) -> None:
    if (
        clean.num_nodes != perturbed.num_nodes
        or clean.num_features != perturbed.num_features
        or clean.directed != perturbed.directed
    ):
        raise InputError("graphs differ in node count, feature count or directedness")


def _min_vertex_cover_size(edges: frozenset, memo: dict) -> int:
    """Exact minimum vertex cover by branching on an endpoint of some edge."""
    if not edges:
        return 0
    cached = memo.get(edges)
    if cached is not None:
        return cached
    (u, v) = min(edges)
    rest_u = frozenset(e for e in edges if u not in e)
    rest_v = frozenset(e for e in edges if v not in e)
    best = 1 + min(
        _min_vertex_cover_size(rest_u, memo), _min_vertex_cover_size(rest_v, memo)
    )
    memo[edges] = best
    return best


def attacker_set_feasible(
    touched_nodes, flipped_edges, sigma: int | None
) -> bool:
    """Can sigma nodes cover all attribute rows and one endpoint per edge flip?

    Rows with attribute flips are forced into the attacker set; the
    remaining edge flips form a vertex-cover instance solved exactly.
    """
    if sigma is None:
        return True
    forced = set(touched_nodes)
    if len(forced) > sigma:
        return False
    uncovered = frozenset(
        (i, j) for (i, j) in flipped_edges if i not in forced and j not in forced
    )
    return len(forced) + _min_vertex_cover_size(uncovered, {}) <= sigma


def is_admissible(clean: Graph, perturbed: Graph, tm: ThreatModel) -> bool:
    """Check the eight budget conditions plus attacker-set existence."""
    _check_shapes(clean, perturbed)
    tm.validate_for(clean)
    counts = perturbation_counts(clean, perturbed)
    gb = tm.global_budget
    if not counts.global_counts.covered_by(gb):
        return False
    for vec, tallies in (
        (tm.local_x_add, counts.per_node_x_add),
        (tm.local_x_del, counts.per_node_x_del),
        (tm.local_a_add, counts.per_node_a_add),
        (tm.local_a_del, counts.per_node_a_del),
    ):
        if vec is not None and np.any(tallies > np.asarray(vec)):
            return False
    if tm.sigma is None:
        return True
    touched = set(
        np.nonzero(counts.per_node_x_add + counts.per_node_x_del > 0)[0].tolist()
    )
    flipped = (clean.edges - perturbed.edges) | (perturbed.edges - clean.edges)
    return attacker_set_feasible(touched, flipped, tm.sigma)
