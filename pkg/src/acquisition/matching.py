"""Bipartite maximum matching.

`hopcroft_karp` is the production algorithm; `max_matching_simple` is a
deliberately plain augmenting-path implementation kept as an independent
cross-check. Both take the left-side adjacency as a list of lists of
right-vertex indices and return (size, match_left) where match_left[u]
is the matched right vertex or -1.
"""

from __future__ import annotations

from collections import deque

INF = float("inf")


def hopcroft_karp(adj: list[list[int]], n_right: int) -> tuple[int, list[int]]:
    """Maximum matching via Hopcroft-Karp (layered BFS + DFS phases)."""
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    dist = [0] * n_left

    def bfs() -> bool:
        q = deque()
        for u in range(n_left):
            if match_l[u] == -1:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = INF
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w == -1:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return found

    def dfs(u: int) -> bool:
        for v in adj[u]:
            w = match_r[v]
            if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                match_l[u] = v
                match_r[v] = u
                return True
        dist[u] = INF
        return False

    size = 0
    while bfs():
        for u in range(n_left):
            if match_l[u] == -1 and dfs(u):
                size += 1
    return size, match_l


def max_matching_simple(adj: list[list[int]], n_right: int) -> tuple[int, list[int]]:
    """Plain one-augmenting-path-at-a-time maximum matching (Kuhn)."""
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right

    def try_augment(u: int, visited: list[bool]) -> bool:
        for v in adj[u]:
            if visited[v]:
                continue
            visited[v] = True
            if match_r[v] == -1 or try_augment(match_r[v], visited):
                match_l[u] = v
                match_r[v] = u
                return True
        return False

    size = 0
    for u in range(n_left):
        visited = [False] * n_right
        if try_augment(u, visited):
            size += 1
    return size, match_l
