"""Exact acquisition numbers on small graphs by reachable-state search.

The state space is the set of weight configurations reachable from
all-ones; states are weight tuples packed into integers (one nibble per
vertex while weights stay below 16, one byte otherwise). Breadth-first
traversal with a visited set finds every reachable terminal
configuration; the answer is the minimum support size, with a witness
protocol reconstructed through predecessor links.

No isomorphism reduction is attempted: the caps keep labeled state
counts in the low millions, and correctness beats cleverness here.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .engine import (Move, MoveTrace, UNIT, TOTAL, WeightConfig,
                     initial_config, legal_moves, residual_support)
from .graph import Graph

DEFAULT_CAPS = {UNIT: 12, TOTAL: 14}


class SolverCapError(ValueError):
    """Graph too large for exhaustive search; use the randomized oracle."""


@dataclass
class SolveResult:
    value: int
    witness: MoveTrace
    explored: int
    variant: str


def _pack(weights: list[int], bits: int) -> int:
    s = 0
    for i, w in enumerate(weights):
        s |= w << (bits * i)
    return s


def _unpack(state: int, n: int, bits: int) -> list[int]:
    mask = (1 << bits) - 1
    return [(state >> (bits * i)) & mask for i in range(n)]


def acquisition_number_exact(g: Graph, variant: str,
                             cap: int | None = None) -> SolveResult:
    """Minimum residual-set size over all unit/total protocols, exactly.

    Explores the full reachable configuration graph from all-ones.
    Early exit: a terminal configuration with support 1 is a global
    minimum (weight conservation forbids support 0 for n >= 1).
    """
    if variant not in (UNIT, TOTAL):
        raise ValueError(f"exact solver handles unit/total, not {variant!r}")
    if g.n == 0:
        raise ValueError("empty graph")
    limit = cap if cap is not None else DEFAULT_CAPS[variant]
    if g.n > limit:
        raise SolverCapError(
            f"n={g.n} exceeds cap {limit} for variant {variant}; "
            "use random_protocol_upper_bound for an upper bound")

    n = g.n
    bits = 4 if n < 16 else 8
    directed = [(u, v) for u, v in sorted(g.edges)]
    directed += [(v, u) for u, v in sorted(g.edges)]
    shifts_amt = [(u, v, 1 << (bits * u), 1 << (bits * v)) for u, v in directed]
    mask = (1 << bits) - 1

    start_weights = [1] * n
    start = _pack(start_weights, bits)
    # predecessor link: state -> (parent_state, src, dst, amount)
    parents: dict[int, tuple[int, int, int, int] | None] = {start: None}
    best_state = None
    best_value = n + 1
    explored = 0

    q = deque([start])
    while q:
        state = q.popleft()
        explored += 1
        is_term = True
        for u, v, su, sv in shifts_amt:
            wu = (state >> (bits * u)) & mask
            if wu == 0:
                continue
            wv = (state >> (bits * v)) & mask
            if wv < wu:
                continue
            is_term = False
            if variant == UNIT:
                child = state - su + sv
                amt = 1
            else:
                child = state - wu * su + wu * sv
                amt = wu
            if child not in parents:
                parents[child] = (state, u, v, amt)
                q.append(child)
        if is_term:
            support = 0
            s = state
            for _ in range(n):
                if s & mask:
                    support += 1
                s >>= bits
            if support < best_value:
                best_value = support
                best_state = state
                if best_value == 1:
                    break

    if best_state is None:  # unreachable: all-ones itself terminal => handled above
        raise RuntimeError("no terminal configuration found")

    # witness reconstruction
    moves: list[Move] = []
    s = best_state
    while True:
        link = parents[s]
        if link is None:
            break
        prev, u, v, amt = link
        moves.append(Move(variant, u, v, amt))
        s = prev
    moves.reverse()
    return SolveResult(value=best_value, witness=MoveTrace(moves),
                       explored=explored, variant=variant)


def random_protocol_upper_bound(g: Graph, variant: str, trials: int,
                                seed: int) -> int:
    """Min residual size over uniformly random maximal protocols.

    At each step one legal move is chosen uniformly; the result is an
    upper bound on the exact acquisition number. Independent of the
    exhaustive solver by construction.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = random.Random(seed)
    best = g.n
    for _ in range(trials):
        c = initial_config(g)
        while True:
            moves = legal_moves(g, c, variant)
            if not moves:
                break
            mv = rng.choice(moves)
            w = list(c.weights)
            w[mv.src] -= mv.amount
            w[mv.dst] += mv.amount
            c = WeightConfig(tuple(w))
        best = min(best, len(residual_support(c)))
        if best == 1:
            break
    return best
