"""Simple undirected graphs with components/connectivity via union-find.

Vertices are dense indices ``0..n-1``. Graphs are immutable after
construction and adjacency lists are sorted, so every downstream
"arbitrary" choice made by iterating neighbors is reproducible.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised for malformed graph input (out-of-range vertex, self-loop)."""


class Graph:
    """Immutable simple undirected graph on vertex set {0, ..., n-1}."""

    __slots__ = ("n", "edges", "adjacency", "_edge_set")

    def __init__(self, n: int, edges: frozenset[tuple[int, int]],
                 adjacency: tuple[tuple[int, ...], ...]):
        self.n = n
        self.edges = edges
        self.adjacency = adjacency
        self._edge_set = edges

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self._edge_set

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    """Build a Graph from an edge list.

    Edges are deduplicated; each adjacency list is sorted ascending.
    Raises GraphError on out-of-range endpoints or self-loops.
    """
    if n < 0:
        raise GraphError(f"vertex count must be nonnegative, got {n}")
    seen: set[tuple[int, int]] = set()
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u},{v}) out of range for n={n}")
        if u == v:
            raise GraphError(f"self-loop ({u},{v}) not allowed")
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            continue
        seen.add((u, v))
        adj[u].append(v)
        adj[v].append(u)
    adjacency = tuple(tuple(sorted(a)) for a in adj)
    return Graph(n, frozenset(seen), adjacency)


class DisjointSetUnion:
    """Union-find with union by size (smaller set merged under larger)."""

    __slots__ = ("parent", "size", "components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        # path compression
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of a and b. Returns True if a merge happened."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


def connected_components(g: Graph) -> list[list[int]]:
    """Partition vertices into maximal connected sets (BFS).

    Components are ordered by smallest contained vertex; each component
    is sorted ascending.
    """
    seen = [False] * g.n
    parts: list[list[int]] = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        q = deque([s])
        while q:
            x = q.popleft()
            for y in g.adjacency[x]:
                if not seen[y]:
                    seen[y] = True
                    comp.append(y)
                    q.append(y)
        parts.append(sorted(comp))
    return parts


def is_connected(g: Graph) -> bool:
    """True iff the graph has exactly one connected component."""
    if g.n == 0:
        return True
    if g.n == 1:
        return True
    return len(connected_components(g)) == 1


def largest_component(g: Graph) -> list[int]:
    """Vertices of a largest connected component (ties: smallest min vertex)."""
    parts = connected_components(g)
    return max(parts, key=len)


def parse_edge_list(text: str) -> Graph:
    """Parse the plain text edge-list format.

    First non-comment line is a header ``n m``; each following line is one
    edge ``u v``. Lines starting with '#' are ignored.
    """
    lines = [ln for ln in (raw.strip() for raw in text.splitlines())
             if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty edge-list input")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError(f"bad header {lines[0]!r}, expected 'n m'")
    n, m = int(head[0]), int(head[1])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if len(edges) != m:
        raise GraphError(f"header said m={m} but {len(edges)} edges given")
    return build_graph(n, edges)


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(lines) + "\n"


def to_dot(g: Graph, labels: dict[int, str] | None = None) -> str:
    """DOT export for debugging; optional per-vertex label strings."""
    out = ["graph G {"]
    if labels:
        for v in range(g.n):
            lab = labels.get(v)
            if lab:
                out.append(f'  {v} [label="{v}\\n{lab}"];')
    for u, v in sorted(g.edges):
        out.append(f"  {u} -- {v};")
    out.append("}")
    return "\n".join(out) + "\n"


def cycle_graph(n: int) -> Graph:
    """C_n. Requires n >= 3."""
    if n < 3:
        raise GraphError("cycle needs at least 3 vertices")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    """P_n (n vertices, n-1 edges)."""
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    """K_{1,leaves} with center 0."""
    return build_graph(leaves + 1, [(0, i + 1) for i in range(leaves)])


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
