"""Weight configurations and acquisition-move semantics.

Three move kinds are supported on a graph whose vertices carry
nonnegative weights:

* ``total``: the sender transfers its entire current weight,
* ``unit``: the sender transfers exactly one unit,
* ``fractional``: the sender transfers any positive amount up to its
  weight (exact rationals only; floats are rejected).

A move from u to a neighbor v is legal only when, immediately before the
move, v's weight is at least u's weight. Engine functions are pure: the
input configuration is never mutated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .graph import Graph

UNIT = "unit"
TOTAL = "total"
FRACTIONAL = "fractional"
KINDS = (UNIT, TOTAL, FRACTIONAL)

Weight = int | Fraction


class IllegalMoveError(ValueError):
    """Raised when applying a move that violates a legality condition."""


@dataclass(frozen=True)
class Move:
    kind: str
    src: int
    dst: int
    amount: Weight = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown move kind {self.kind!r}")
        if isinstance(self.amount, float):
            raise ValueError("float amounts are forbidden; use int or Fraction")


@dataclass(frozen=True)
class WeightConfig:
    """Per-vertex nonnegative weights with a cached total."""

    weights: tuple[Weight, ...]

    @property
    def total(self) -> Weight:
        return sum(self.weights)

    def __getitem__(self, v: int) -> Weight:
        return self.weights[v]

    def __len__(self) -> int:
        return len(self.weights)


def initial_config(g: Graph) -> WeightConfig:
    """All-ones configuration: every vertex starts with weight 1."""
    return WeightConfig((1,) * g.n)


def _legality_violation(g: Graph, c: Sequence[Weight], mv: Move) -> str | None:
    """Return a human-readable reason the move is illegal, or None."""
    u, v = mv.src, mv.dst
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise IllegalMoveError(f"vertex out of range in move {mv}")
    if not g.has_edge(u, v):
        return f"({u},{v}) is not an edge"
    wu, wv = c[u], c[v]
    amt = mv.amount
    if amt <= 0:
        return f"amount {amt} is not positive"
    if mv.kind == UNIT and amt != 1:
        return f"unit move must carry amount 1, got {amt}"
    if mv.kind == TOTAL and amt != wu:
        return f"total move must carry the sender's full weight {wu}, got {amt}"
    if amt > wu:
        return f"sender {u} holds {wu} < amount {amt}"
    if wv < wu:
        return f"receiver {v} holds {wv} < sender weight {wu}"
    return None


def is_legal(g: Graph, c: WeightConfig, mv: Move) -> bool:
    """True iff the move can be applied to configuration c on graph g."""
    return _legality_violation(g, c.weights, mv) is None


def apply_move(g: Graph, c: WeightConfig, mv: Move) -> WeightConfig:
    """Apply a legal move, returning the new configuration.

    Raises IllegalMoveError naming the violated condition otherwise.
    """
    reason = _legality_violation(g, c.weights, mv)
    if reason is not None:
        raise IllegalMoveError(f"illegal {mv.kind} move {mv.src}->{mv.dst}: {reason}")
    w = list(c.weights)
    w[mv.src] -= mv.amount
    w[mv.dst] += mv.amount
    return WeightConfig(tuple(w))


class MoveTrace:
    """An ordered, replayable sequence of moves."""

    __slots__ = ("moves",)

    def __init__(self, moves: Iterable[Move] = ()):
        self.moves = list(moves)

    def append(self, mv: Move) -> None:
        self.moves.append(mv)

    def __len__(self) -> int:
        return len(self.moves)

    def __iter__(self) -> Iterator[Move]:
        return iter(self.moves)

    def __eq__(self, other) -> bool:
        return isinstance(other, MoveTrace) and self.moves == other.moves

    # -- serialization -------------------------------------------------

    def to_text(self) -> str:
        """Line-oriented form: 'kind src dst amount', one move per line."""
        lines = []
        for mv in self.moves:
            lines.append(f"{mv.kind} {mv.src} {mv.dst} {mv.amount}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "MoveTrace":
        moves = []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            kind, src, dst, amount = ln.split()
            moves.append(Move(kind, int(src), int(dst), _parse_amount(amount)))
        return cls(moves)

    def to_json(self) -> str:
        return json.dumps([[mv.kind, mv.src, mv.dst, str(mv.amount)]
                           for mv in self.moves])

    @classmethod
    def from_json(cls, text: str) -> "MoveTrace":
        data = json.loads(text)
        return cls(Move(k, int(s), int(d), _parse_amount(a)) for k, s, d, a in data)


def _parse_amount(tok: str) -> Weight:
    if "/" in tok:
        return Fraction(tok)
    return int(tok)


def replay(g: Graph, c0: WeightConfig, trace: MoveTrace) -> WeightConfig:
    """Apply all moves of the trace in order.

    Fails atomically: on the first illegal move an IllegalMoveError is
    raised carrying the move index, and no configuration is returned.
    """
    w = list(c0.weights)
    has_edge = g.has_edge
    for i, mv in enumerate(trace.moves):
        u, v, amt = mv.src, mv.dst, mv.amount
        # inline legality for speed on long traces
        ok = (0 <= u < g.n and 0 <= v < g.n and has_edge(u, v)
              and amt > 0 and amt <= w[u] and w[v] >= w[u])
        if ok and mv.kind == UNIT:
            ok = amt == 1
        elif ok and mv.kind == TOTAL:
            ok = amt == w[u]
        if not ok:
            reason = _legality_violation(g, w, mv) or "unknown"
            raise IllegalMoveError(f"illegal move at index {i}: {mv} ({reason})")
        w[u] -= amt
        w[v] += amt
    return WeightConfig(tuple(w))


def residual_support(c: WeightConfig) -> set[int]:
    """Vertices retaining positive weight."""
    return {v for v, w in enumerate(c.weights) if w > 0}


def legal_moves(g: Graph, c: WeightConfig, kind: str) -> list[Move]:
    """All legal moves of the given kind, in deterministic edge order."""
    if kind not in KINDS:
        raise ValueError(f"unknown move kind {kind!r}")
    w = c.weights
    out = []
    for u, v in sorted(g.edges):
        for a, b in ((u, v), (v, u)):
            wa = w[a]
            if wa <= 0 or w[b] < wa:
                continue
            if kind == UNIT:
                out.append(Move(UNIT, a, b, 1))
            elif kind == TOTAL:
                out.append(Move(TOTAL, a, b, wa))
            else:
                # one representative; any amount in (0, wa] is legal
                out.append(Move(FRACTIONAL, a, b, Fraction(wa)))
    return out


def is_terminal(g: Graph, c: WeightConfig, kind: str) -> bool:
    """True iff no legal move of the given kind exists.

    For every kind this is equivalent to the support of c being an
    independent set of g: an edge with two positive endpoints always
    admits a move from the lighter (or equal) side to the heavier.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown move kind {kind!r}")
    w = c.weights
    for u, v in g.edges:
        if w[u] > 0 and w[v] > 0:
            return False
    return True
