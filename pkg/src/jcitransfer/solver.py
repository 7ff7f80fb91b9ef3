"""Exact min-loss confidence queries over the enumerated hypothesis space.

Every background-satisfying ADMG is scored by the summed weight of the
constraints it violates. The confidence of a statement is the best score among
graphs where it fails minus the best score among graphs where it holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .admg import (
    ENUMERATION_CAP,
    Admg,
    GraphError,
    JciBackground,
    SeparationQuery,
    VarId,
    batched_separation,
    edge_arrays,
    m_separated,
)
from .stats import WeightedConstraint


@dataclass(frozen=True)
class Confidence:
    value: float
    min_loss_false: float
    min_loss_true: float

    @property
    def certified(self) -> bool:
        return self.value > 0


def graph_loss(g: Admg, constraints: Iterable[WeightedConstraint]) -> float:
    loss = 0.0
    for c in constraints:
        if m_separated(g, c.query) != c.independent:
            loss += c.weight
    return loss


class HypothesisSpace:
    """All ADMGs allowed by a background, with a lazily filled separation table.

    Column ``q`` of the table holds ``m_separated(g, q)`` for every graph ``g``
    in enumeration order; columns are computed once and reused across calls.
    """

    def __init__(self, universe: Sequence[VarId], bg: JciBackground, cap: int = ENUMERATION_CAP):
        self.universe = tuple(universe)
        self.bg = bg
        self.directed, self.bidirected, self.pairs = edge_arrays(self.universe, bg, cap)
        self._table: dict[SeparationQuery, np.ndarray] = {}

    def __len__(self) -> int:
        return self.directed.shape[0]

    def graph(self, i: int) -> Admg:
        d = frozenset(map(tuple, np.argwhere(self.directed[i]).tolist()))
        b = frozenset(p for p, on in zip(self.pairs, self.bidirected[i]) if on)
        return Admg(self.universe, d, b)

    def separated(self, q: SeparationQuery) -> np.ndarray:
        q = q.canonical()
        col = self._table.get(q)
        if col is None:
            n = len(self.universe)
            if any(not 0 <= v < n for v in q.variables()):
                raise GraphError(f"query variable outside the universe of {n}")
            col = batched_separation(self.directed, self.bidirected, self.pairs, q)
            col.setflags(write=False)
            self._table[q] = col
        return col

    def losses(self, constraints: Iterable[WeightedConstraint]) -> np.ndarray:
        soft = np.zeros(len(self))
        hard = np.zeros(len(self), dtype=bool)
        for c in constraints:
            violated = self.separated(c.query) != c.independent
            if c.hard:
                hard |= violated
            else:
                soft += c.weight * violated
        soft[hard] = math.inf
        return soft


@lru_cache(maxsize=32)
def hypothesis_space(universe: tuple[VarId, ...], bg: JciBackground) -> HypothesisSpace:
    return HypothesisSpace(universe, bg)


def _min(x: np.ndarray) -> float:
    return float(x.min()) if x.size else math.inf


def confidence_from_losses(losses: np.ndarray, holds: np.ndarray) -> Confidence:
    lo_false, lo_true = _min(losses[~holds]), _min(losses[holds])
    if math.isinf(lo_false) and math.isinf(lo_true):
        value = 0.0
    else:
        value = lo_false - lo_true
    return Confidence(value, lo_false, lo_true)


def query_confidence(
    q: SeparationQuery,
    constraints: Sequence[WeightedConstraint],
    bg: JciBackground,
    universe: Sequence[VarId],
) -> Confidence:
    """Signed confidence that ``q`` holds given the constraints and background.

    Positive values mean the best graph violating ``q`` loses more than the
    best graph satisfying it. If every graph is ruled out by hard constraints
    the value is 0.
    """
    space = hypothesis_space(tuple(universe), bg)
    if len(space) == 0:
        raise GraphError("background knowledge admits no graph")
    return confidence_from_losses(space.losses(constraints), space.separated(q))
