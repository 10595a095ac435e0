"""Seeded Erdos-Renyi process machinery.

An EdgeStream is a random permutation e_1, ..., e_N of all N = n(n-1)/2
vertex pairs; the m-prefix realizes the process graph after m steps. For
small n the permutation is materialized outright (Fisher-Yates). For
large n a prefix is grown lazily by uniform without-replacement draws,
which has exactly the law of a permutation prefix while never holding
all N pairs in memory; connectivity arrives after ~(n/2)ln(n) edges, far
short of N.

The coupling with the binomial model: draw K ~ Bin(N, p) and take the
K-prefix, which is then distributed as G(n, p) while remaining a
subgraph of every longer prefix.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, DisjointSetUnion, build_graph

# Materialize the full permutation only while N stays modest.
_MATERIALIZE_MAX_N = 1500

# Refuse vertex counts whose pair count does not fit comfortably in 63 bits.
_MAX_N = 3_000_000_000


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


class EdgeStream:
    """Seeded random permutation of all vertex pairs, consumed by prefix.

    The same (n, seed) always yields the same sequence. ``edge(i)`` and
    ``prefix(m)`` may be called in any order; edges are generated once
    and cached.
    """

    def __init__(self, n: int, seed: int):
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        if n > _MAX_N:
            raise ValueError(f"n={n} too large: pair count would overflow")
        self.n = n
        self.seed = seed
        self.N = pair_count(n)
        self._rng = random.Random(seed)
        self._edges: list[tuple[int, int]] = []
        self._seen: set[int] = set()
        if n <= _MATERIALIZE_MAX_N:
            pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
            self._rng.shuffle(pairs)
            self._edges = pairs
            self._seen = set()  # not needed once materialized
            self._materialized = True
        else:
            self._materialized = False

    def _grow(self, upto: int) -> None:
        if upto > self.N:
            raise IndexError(f"prefix length {upto} exceeds N={self.N}")
        if self._materialized:
            return
        n = self.n
        rng = self._rng
        edges = self._edges
        seen = self._seen
        while len(edges) < upto:
            u = rng.randrange(n)
            v = rng.randrange(n)
            if u == v:
                continue
            if u > v:
                u, v = v, u
            key = u * n + v
            if key in seen:
                continue
            seen.add(key)
            edges.append((u, v))

    def edge(self, i: int) -> tuple[int, int]:
        """The i-th edge of the permutation, 0-based."""
        self._grow(i + 1)
        return self._edges[i]

    def prefix(self, m: int) -> list[tuple[int, int]]:
        """The first m edges."""
        self._grow(m)
        return self._edges[:m]

    def prefix_graph(self, m: int) -> Graph:
        """G(n, m): the graph spanned by the first m edges."""
        return build_graph(self.n, self.prefix(m))


def sample_edge_stream(n: int, seed: int) -> EdgeStream:
    """Uniform random edge permutation, deterministic per seed."""
    return EdgeStream(n, seed)


def gnp_prefix_length(stream: EdgeStream, p: float, seed: int) -> int:
    """Draw K ~ Binomial(N, p); the K-prefix of the stream is then G(n,p)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"need 0 <= p <= 1, got {p}")
    if p == 0.0:
        return 0
    if p == 1.0:
        return stream.N
    rng = np.random.Generator(np.random.PCG64(seed))
    return int(rng.binomial(stream.N, p))


def hitting_time_connectivity(stream: EdgeStream) -> int:
    """M = min { m : the m-prefix graph is connected }.

    Feeds edges into a union-find until one component remains. For n=1
    the empty graph is connected and M=0.
    """
    n = stream.n
    if n == 1:
        return 0
    dsu = DisjointSetUnion(n)
    m = 0
    while dsu.components > 1:
        u, v = stream.edge(m)
        m += 1
        dsu.union(u, v)
    return m


@dataclass
class DegreeStats:
    max_degree: int
    counts_by_degree: dict[int, int]

    @property
    def total_vertices(self) -> int:
        return sum(self.counts_by_degree.values())


def degree_stats(g: Graph) -> DegreeStats:
    """Exact maximum degree and degree histogram."""
    counts: dict[int, int] = {}
    max_deg = 0
    for v in range(g.n):
        d = g.degree(v)
        counts[d] = counts.get(d, 0) + 1
        if d > max_deg:
            max_deg = d
    return DegreeStats(max_degree=max_deg, counts_by_degree=counts)


@dataclass
class DegreeLemmaReport:
    n: int
    max_degree: int
    max_degree_bound: float
    max_degree_ok: bool
    count_checks: dict[int, tuple[int, float, bool]] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.max_degree_ok and all(ok for _, _, ok in self.count_checks.values())


def check_degree_lemmas(stats: DegreeStats, n: int,
                        ks: tuple[int, ...] = (0, 1, 2)) -> DegreeLemmaReport:
    """Check max-degree and degree-count bounds for a sparse-regime sample.

    Intended for graphs sampled just below the connectivity threshold:
    the maximum degree should stay within 4 ln(n), and for each small k
    the number of degree-k vertices within (ln n)^(k+1).
    """
    ln_n = math.log(n)
    max_bound = 4.0 * ln_n
    report = DegreeLemmaReport(
        n=n,
        max_degree=stats.max_degree,
        max_degree_bound=max_bound,
        max_degree_ok=stats.max_degree <= max_bound,
    )
    for k in ks:
        cnt = stats.counts_by_degree.get(k, 0)
        bound = ln_n ** (k + 1)
        report.count_checks[k] = (cnt, bound, cnt <= bound)
    return report


def p_minus(n: int, omega: float) -> float:
    return (math.log(n) - omega) / n


def p_plus(n: int, omega: float) -> float:
    return (math.log(n) + omega) / n


def default_omega(n: int) -> float:
    """Slow-growing window width; ln ln n is the conventional choice here."""
    return math.log(math.log(n))


def sample_gnp_edges(n: int, p: float, seed: int) -> list[tuple[int, int]]:
    """Directly sample G(n,p) edges via geometric skips (no stream).

    Equivalent in law to taking a Bin(N,p)-prefix of a random
    permutation, but O(edges) regardless of n; used for degree
    statistics at vertex counts where N is unmanageable.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"need 0 <= p <= 1, got {p}")
    rng = random.Random(seed)
    edges: list[tuple[int, int]] = []
    if p == 0.0 or n < 2:
        return edges
    if p == 1.0:
        return [(u, v) for u in range(n) for v in range(u + 1, n)]
    log_q = math.log1p(-p)
    N = pair_count(n)
    idx = -1
    while True:
        r = rng.random()
        idx += 1 + int(math.log(1.0 - r) / log_q)
        if idx >= N:
            break
        # unrank pair index: row u has (n-1-u) pairs
        u = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * idx)) / 2)
        # float guard: fix off-by-one at row boundaries
        while _row_start(n, u + 1) <= idx:
            u += 1
        while _row_start(n, u) > idx:
            u -= 1
        v = u + 1 + (idx - _row_start(n, u))
        edges.append((u, v))
    return edges


def _row_start(n: int, u: int) -> int:
    """Index of pair (u, u+1) in the lexicographic pair ordering."""
    return u * n - u * (u + 1) // 2
