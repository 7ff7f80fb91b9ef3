"""Turning a task dataset (or a known graph) into solver input.

Statements that avoid the target are tested on the pooled data. Statements
that involve the target but not the domain indicator are tested on the source
rows only and handed to the solver with the indicator added to the
conditioning set: a source-domain independence of that kind holds in every
domain, so it is an independence given the indicator. Statements involving
both are untestable because the target is unobserved where the indicator is 1.
"""

from __future__ import annotations

import itertools
import json
import math
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .admg import Admg, JciBackground, SeparationQuery, VarId, m_separated
from .stats import (
    DataError,
    DomainDataset,
    Untestable,
    WeightedConstraint,
    ci_test,
    to_constraint,
)


class Case(Enum):
    POOLED = 1
    LIFTED = 2
    UNTESTABLE = 3


def default_max_cond(n: int) -> int:
    return max(n - 2, 0)


def classify(q: SeparationQuery, c1: int, y: int) -> Case:
    mentioned = q.variables()
    if y not in mentioned:
        return Case.POOLED
    if c1 not in mentioned:
        return Case.LIFTED
    return Case.UNTESTABLE


def lift(q: SeparationQuery, c1: int) -> SeparationQuery:
    return SeparationQuery(q.a, q.b, q.cond | {c1})


def statements(n: int, c1: int, y: int, max_cond: int) -> Iterator[tuple[SeparationQuery, Case]]:
    """Every pairwise statement with ``|S| <= max_cond`` and how it is handled."""
    if max_cond > max(n - 2, 0):
        raise ValueError(f"max_cond={max_cond} exceeds {n - 2} for {n} variables")
    for a, b in itertools.combinations(range(n), 2):
        rest = [v for v in range(n) if v not in (a, b)]
        for k in range(max_cond + 1):
            for cond in itertools.combinations(rest, k):
                q = SeparationQuery(a, b, frozenset(cond))
                yield q, classify(q, c1, y)


def _sort_key(c: WeightedConstraint):
    q = c.query
    return (len(q.cond), q.a, q.b, sorted(q.cond))


def generate_constraints(
    ds: DomainDataset, alpha: float = 0.05, max_cond: int | None = None
) -> list[WeightedConstraint]:
    """Weighted constraints from every directly testable statement in ``ds``."""
    ds.validate_task()
    n = len(ds.universe)
    if max_cond is None:
        max_cond = default_max_cond(n)
    pooled, source = ds.rows, ds.source
    out = []
    for q, case in statements(n, ds.c1, ds.y, max_cond):
        if case is Case.UNTESTABLE:
            continue
        rows = pooled if case is Case.POOLED else source
        try:
            res = ci_test(rows, q.a, q.b, sorted(q.cond))
        except Untestable:
            continue
        target = q if case is Case.POOLED else lift(q, ds.c1)
        out.append(to_constraint(target, res.p, alpha))
    return sorted(out, key=_sort_key)


def oracle_constraints(
    g: Admg, bg: JciBackground, max_cond: int | None = None
) -> list[WeightedConstraint]:
    """Hard constraints read off a known graph with the same statement selection."""
    n = g.n
    if max_cond is None:
        max_cond = default_max_cond(n)
    out = []
    for q, case in statements(n, bg.c1, bg.y, max_cond):
        if case is Case.UNTESTABLE:
            continue
        target = q if case is Case.POOLED else lift(q, bg.c1)
        out.append(WeightedConstraint(target, m_separated(g, target), math.inf))
    return sorted(out, key=_sort_key)


# -- JSON-lines constraint files ----------------------------------------------


def constraint_to_record(c: WeightedConstraint, universe: Sequence[VarId]) -> dict:
    q = c.query
    return {
        "a": universe[q.a].name,
        "b": universe[q.b].name,
        "S": [universe[s].name for s in sorted(q.cond)],
        "independent": bool(c.independent),
        "weight": "inf" if c.hard else float(c.weight),
    }


def constraint_from_record(record: dict, universe: Sequence[VarId]) -> WeightedConstraint:
    index = {v.name: v.index for v in universe}
    try:
        q = SeparationQuery(
            index[record["a"]], index[record["b"]], frozenset(index[s] for s in record.get("S", []))
        )
        weight = record["weight"]
        weight = math.inf if weight in ("inf", "Infinity") else float(weight)
        return WeightedConstraint(q, bool(record["independent"]), weight)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed constraint record {record!r}: {exc}") from exc


def write_constraints(
    constraints: Iterable[WeightedConstraint], universe: Sequence[VarId], path: str | Path
) -> None:
    lines = [json.dumps(constraint_to_record(c, universe)) for c in constraints]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_constraints(path: str | Path, universe: Sequence[VarId]) -> list[WeightedConstraint]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        out.append(constraint_from_record(record, universe))
    return out


def pooled_lifted_agreement(full: DomainDataset, alpha: float = 0.05, max_cond: int | None = None) -> float:
    """Fraction of lifted statements whose source-only verdict matches a direct pooled test.

    ``full`` must have the target observed in every domain.
    """
    n = len(full.universe)
    if max_cond is None:
        max_cond = default_max_cond(n)
    if np.isnan(full.rows).any():
        raise DataError("agreement check needs a fully observed dataset")
    source = full.source
    agree = total = 0
    for q, case in statements(n, full.c1, full.y, max_cond):
        if case is not Case.LIFTED:
            continue
        lifted = lift(q, full.c1)
        try:
            p_src = ci_test(source, q.a, q.b, sorted(q.cond)).p
            p_all = ci_test(full.rows, lifted.a, lifted.b, sorted(lifted.cond)).p
        except Untestable:
            continue
        total += 1
        agree += (p_src >= alpha) == (p_all >= alpha)
    return agree / total if total else 1.0
