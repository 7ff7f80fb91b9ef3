"""Acyclic directed mixed graphs over context and system variables.

Graphs are small (at most a handful of observed variables), so everything is
kept as plain Python sets of integer index pairs. m-separation is decided on
the canonical DAG, in which every bidirected edge ``u <-> v`` is replaced by a
fresh latent parent of ``u`` and ``v``.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

CONTEXT = "context"
SYSTEM = "system"

#: Largest universe accepted by :func:`enumerate_admgs`.
ENUMERATION_CAP = 7


class GraphError(ValueError):
    """Raised for malformed graphs, queries or universes."""


@dataclass(frozen=True, order=True)
class VarId:
    index: int
    role: str
    name: str = ""

    def __post_init__(self):
        if self.index < 0:
            raise GraphError(f"negative variable index {self.index}")
        if self.role not in (CONTEXT, SYSTEM):
            raise GraphError(f"unknown role {self.role!r}")
        if not self.name:
            prefix = "C" if self.role == CONTEXT else "X"
            object.__setattr__(self, "name", f"{prefix}{self.index}")


def make_universe(context: Sequence[str], system: Sequence[str]) -> tuple[VarId, ...]:
    """Build a dense universe with the context variables first."""
    names = list(context) + list(system)
    if len(set(names)) != len(names):
        raise GraphError(f"duplicate variable names in {names}")
    roles = [CONTEXT] * len(context) + [SYSTEM] * len(system)
    return tuple(VarId(i, r, n) for i, (r, n) in enumerate(zip(roles, names)))


def _check_universe(universe: Sequence[VarId]) -> None:
    for i, v in enumerate(universe):
        if v.index != i:
            raise GraphError(f"universe indices must be dense 0..n-1, got {v.index} at {i}")


def is_acyclic(directed: Iterable[tuple[int, int]], n: int) -> bool:
    """True iff the directed relation on ``n`` nodes admits a topological order."""
    indeg = [0] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for tail, head in directed:
        if not (0 <= tail < n and 0 <= head < n):
            raise GraphError(f"edge ({tail}, {head}) out of range for {n} nodes")
        children[tail].append(head)
        indeg[head] += 1
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for c in children[u]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen == n


def _bi(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Admg:
    universe: tuple[VarId, ...]
    directed: frozenset[tuple[int, int]] = frozenset()
    bidirected: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        _check_universe(self.universe)
        n = len(self.universe)
        directed = frozenset((int(a), int(b)) for a, b in self.directed)
        bidirected = frozenset(_bi(int(a), int(b)) for a, b in self.bidirected)
        for a, b in itertools.chain(directed, bidirected):
            if a == b:
                raise GraphError(f"self-loop on {self.universe[a].name if a < n else a}")
        if not is_acyclic(directed, n):
            raise GraphError("directed part contains a cycle")
        for a, b in bidirected:
            if not (0 <= a < n and 0 <= b < n):
                raise GraphError(f"bidirected edge ({a}, {b}) out of range")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)

    @property
    def n(self) -> int:
        return len(self.universe)

    def index(self, name: str) -> int:
        for v in self.universe:
            if v.name == name:
                return v.index
        raise GraphError(f"unknown variable {name!r}")

    def with_edges(self, directed=(), bidirected=()) -> "Admg":
        return Admg(
            self.universe,
            self.directed | {tuple(e) for e in directed},
            self.bidirected | {_bi(*e) for e in bidirected},
        )

    def canonical_dag(self) -> tuple[int, list[list[int]]]:
        """Children lists of the canonical DAG.

        Returns the total node count and a children list; nodes ``n..`` are the
        latent parents introduced for bidirected edges, in sorted edge order.
        """
        n = self.n
        children: list[list[int]] = [[] for _ in range(n)]
        for tail, head in sorted(self.directed):
            children[tail].append(head)
        for u, v in sorted(self.bidirected):
            children.append([u, v])
        return len(children), children

    def __str__(self):
        names = [v.name for v in self.universe]
        parts = [f"{names[a]}->{names[b]}" for a, b in sorted(self.directed)]
        parts += [f"{names[a]}<->{names[b]}" for a, b in sorted(self.bidirected)]
        return "Admg(" + ", ".join(parts) + ")"


@dataclass(frozen=True)
class SeparationQuery:
    a: int
    b: int
    cond: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        cond = frozenset(int(s) for s in self.cond)
        object.__setattr__(self, "cond", cond)
        if self.a == self.b:
            raise GraphError(f"query endpoints coincide ({self.a})")
        if self.a in cond or self.b in cond:
            raise GraphError("query endpoint inside the conditioning set")

    def canonical(self) -> "SeparationQuery":
        if self.a <= self.b:
            return self
        return SeparationQuery(self.b, self.a, self.cond)

    def variables(self) -> frozenset[int]:
        return self.cond | {self.a, self.b}

    def render(self, universe: Sequence[VarId]) -> str:
        cond = ", ".join(universe[s].name for s in sorted(self.cond))
        return f"{universe[self.a].name} _||_ {universe[self.b].name} | {{{cond}}}"


@dataclass(frozen=True)
class JciBackground:
    """Background knowledge for one domain adaptation task.

    ``c1`` is the source/target indicator and ``y`` the target variable. The
    three JCI flags switch exogeneity (no system -> context edge),
    randomization (no system <-> context edge) and genericity (every context
    pair purely confounded).
    """

    c1: int
    y: int
    forbid_c1_to_y: bool = True
    exogeneity: bool = True
    randomization: bool = True
    genericity: bool = True

    def check(self, universe: Sequence[VarId]) -> None:
        if universe[self.c1].role != CONTEXT:
            raise GraphError(f"c1={universe[self.c1].name} is not a context variable")
        if universe[self.y].role != SYSTEM:
            raise GraphError(f"y={universe[self.y].name} is not a system variable")


def satisfies_background(g: Admg, bg: JciBackground) -> bool:
    roles = [v.role for v in g.universe]
    for tail, head in g.directed:
        if bg.exogeneity and roles[tail] == SYSTEM and roles[head] == CONTEXT:
            return False
        if bg.genericity and roles[tail] == CONTEXT and roles[head] == CONTEXT:
            return False
        if bg.forbid_c1_to_y and (tail, head) == (bg.c1, bg.y):
            return False
    for u, v in g.bidirected:
        if bg.randomization and roles[u] != roles[v]:
            return False
    if bg.genericity:
        ctx = [i for i, r in enumerate(roles) if r == CONTEXT]
        for pair in itertools.combinations(ctx, 2):
            if pair not in g.bidirected:
                return False
    return True


def _ancestors(children: list[list[int]], targets: Iterable[int]) -> set[int]:
    parents: list[list[int]] = [[] for _ in children]
    for u, ch in enumerate(children):
        for c in ch:
            parents[c].append(u)
    out = set(targets)
    stack = list(out)
    while stack:
        v = stack.pop()
        for p in parents[v]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def m_separated(g: Admg, q: SeparationQuery) -> bool:
    """Decide ``q.a _||_ q.b | q.cond`` in ``g`` by Bayes-ball on the canonical DAG."""
    n = g.n
    for v in q.variables():
        if not 0 <= v < n:
            raise GraphError(f"query variable {v} not in graph")
    total, children = g.canonical_dag()
    parents: list[list[int]] = [[] for _ in range(total)]
    for u, ch in enumerate(children):
        for c in ch:
            parents[c].append(u)
    cond = q.cond
    anc = _ancestors(children, cond)

    # state: (node, arrived_from_child); from_child means the ball travels "up"
    visited: set[tuple[int, bool]] = set()
    queue = deque([(q.a, True)])
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == q.b:
            return False
        if up and v not in cond:
            queue.extend((p, True) for p in parents[v])
            queue.extend((c, False) for c in children[v])
        elif not up:
            if v not in cond:
                queue.extend((c, False) for c in children[v])
            if v in anc:
                queue.extend((p, True) for p in parents[v])
    return True


def implied_statements(g: Admg, max_cond: int) -> dict[SeparationQuery, bool]:
    """Every canonical pairwise query with ``|cond| <= max_cond`` and its truth value."""
    return {q: m_separated(g, q) for q in all_queries(g.n, max_cond)}


def all_queries(n: int, max_cond: int) -> Iterator[SeparationQuery]:
    for a, b in itertools.combinations(range(n), 2):
        rest = [v for v in range(n) if v not in (a, b)]
        for k in range(min(max_cond, len(rest)) + 1):
            for cond in itertools.combinations(rest, k):
                yield SeparationQuery(a, b, frozenset(cond))


# -- hypothesis space -------------------------------------------------------


def allowed_edges(
    universe: Sequence[VarId], bg: JciBackground
) -> tuple[list[tuple[int, int]], list[tuple[int, int]], list[tuple[int, int]]]:
    """Optional directed pairs, optional bidirected pairs and forced bidirected pairs."""
    n = len(universe)
    roles = [v.role for v in universe]
    directed = []
    for tail, head in itertools.permutations(range(n), 2):
        if bg.exogeneity and roles[tail] == SYSTEM and roles[head] == CONTEXT:
            continue
        if bg.genericity and roles[tail] == CONTEXT and roles[head] == CONTEXT:
            continue
        if bg.forbid_c1_to_y and (tail, head) == (bg.c1, bg.y):
            continue
        directed.append((tail, head))
    optional_bi, forced_bi = [], []
    for u, v in itertools.combinations(range(n), 2):
        if roles[u] == CONTEXT and roles[v] == CONTEXT and bg.genericity:
            forced_bi.append((u, v))
        elif bg.randomization and roles[u] != roles[v]:
            continue
        else:
            optional_bi.append((u, v))
    return sorted(directed), optional_bi, forced_bi


def _acyclic_masks(pairs: list[tuple[int, int]], n: int) -> list[int]:
    """All bitmasks over ``pairs`` whose edge set is acyclic, ascending.

    Grows masks one edge at a time and prunes any mask containing a cycle,
    which keeps the search proportional to the number of acyclic subsets.
    """
    bits = len(pairs)
    masks = [0]
    for k in range(bits):
        tail, head = pairs[k]
        grown = []
        for m in masks:
            grown.append(m)
            edges = [pairs[i] for i in range(k) if m >> i & 1] + [(tail, head)]
            if is_acyclic(edges, n):
                grown.append(m | 1 << k)
        masks = grown
    return sorted(masks)


def enumerate_admgs(
    universe: Sequence[VarId], bg: JciBackground, cap: int = ENUMERATION_CAP
) -> Iterator[Admg]:
    """Yield every background-satisfying ADMG once, ordered by (directed, bidirected) bitmask."""
    universe = tuple(universe)
    _check_universe(universe)
    if len(universe) > cap:
        raise GraphError(f"universe of {len(universe)} variables exceeds the cap of {cap}")
    bg.check(universe)
    directed, optional_bi, forced_bi = allowed_edges(universe, bg)
    n = len(universe)
    for dmask in _acyclic_masks(directed, n):
        d = frozenset(directed[i] for i in range(len(directed)) if dmask >> i & 1)
        for bmask in range(1 << len(optional_bi)):
            b = frozenset(optional_bi[i] for i in range(len(optional_bi)) if bmask >> i & 1)
            yield Admg(universe, d, b | frozenset(forced_bi))


def edge_arrays(
    universe: Sequence[VarId], bg: JciBackground, cap: int = ENUMERATION_CAP
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Whole hypothesis space as dense arrays, in :func:`enumerate_admgs` order.

    Returns a ``(G, n, n)`` boolean directed adjacency, a ``(G, L)`` boolean
    matrix of bidirected edge presence and the ``L`` bidirected pairs it indexes.
    """
    universe = tuple(universe)
    _check_universe(universe)
    if len(universe) > cap:
        raise GraphError(f"universe of {len(universe)} variables exceeds the cap of {cap}")
    bg.check(universe)
    directed, optional_bi, forced_bi = allowed_edges(universe, bg)
    n = len(universe)
    dmasks = np.array(_acyclic_masks(directed, n), dtype=np.int64)
    nb = len(optional_bi)
    bmasks = np.arange(1 << nb, dtype=np.int64)

    dbits = (dmasks[:, None] >> np.arange(len(directed))) & 1
    dadj = np.zeros((len(dmasks), n, n), dtype=bool)
    for i, (tail, head) in enumerate(directed):
        dadj[:, tail, head] = dbits[:, i].astype(bool)
    bbits = ((bmasks[:, None] >> np.arange(nb)) & 1).astype(bool)

    g = len(dmasks) * len(bmasks)
    pairs = optional_bi + forced_bi
    bi = np.ones((g, len(pairs)), dtype=bool)
    bi[:, :nb] = np.tile(bbits, (len(dmasks), 1))
    return np.repeat(dadj, len(bmasks), axis=0), bi, pairs


def batched_separation(
    dadj: np.ndarray, bi: np.ndarray, pairs: Sequence[tuple[int, int]], q: SeparationQuery
) -> np.ndarray:
    """m-separation of one query across a stack of graphs.

    Uses the ancestral moral graph of the canonical DAG: ``a`` and ``b`` are
    separated by ``S`` iff they are disconnected in the moralized ancestral
    subgraph of ``{a, b} | S`` once ``S`` is deleted.
    """
    g, n, _ = dadj.shape
    nl = len(pairs)
    total = n + nl
    adj = np.zeros((g, total, total), dtype=bool)
    adj[:, :n, :n] = dadj
    for k, (u, v) in enumerate(pairs):
        adj[:, n + k, u] = bi[:, k]
        adj[:, n + k, v] = bi[:, k]

    anc = np.zeros((g, total), dtype=bool)
    anc[:, list(q.variables())] = True
    for _ in range(total):
        grown = anc | np.any(adj & anc[:, None, :], axis=2)
        if np.array_equal(grown, anc):
            break
        anc = grown

    sub = adj & anc[:, :, None] & anc[:, None, :]
    moral = sub | sub.transpose(0, 2, 1)
    subi = sub.astype(np.uint8)
    moral |= np.matmul(subi, subi.transpose(0, 2, 1)) > 0
    keep = np.ones(total, dtype=bool)
    keep[list(q.cond)] = False
    moral &= keep[None, :, None] & keep[None, None, :]

    reach = np.zeros((g, total), dtype=bool)
    reach[:, q.a] = True
    for _ in range(total):
        grown = reach | np.any(moral & reach[:, :, None], axis=1)
        if np.array_equal(grown, reach):
            break
        reach = grown
    return ~reach[:, q.b]


# -- JSON graph format ------------------------------------------------------


def admg_to_dict(g: Admg) -> dict:
    names = [v.name for v in g.universe]
    return {
        "context": [v.name for v in g.universe if v.role == CONTEXT],
        "system": [v.name for v in g.universe if v.role == SYSTEM],
        "directed": [[names[a], names[b]] for a, b in sorted(g.directed)],
        "bidirected": [[names[a], names[b]] for a, b in sorted(g.bidirected)],
    }


def admg_from_dict(data: Mapping) -> Admg:
    try:
        universe = make_universe(data["context"], data["system"])
        index = {v.name: v.index for v in universe}
        directed = [(index[a], index[b]) for a, b in data.get("directed", [])]
        bidirected = [(index[a], index[b]) for a, b in data.get("bidirected", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph description: {exc}") from exc
    return Admg(universe, frozenset(directed), frozenset(bidirected))


def admg_to_json(g: Admg) -> str:
    return json.dumps(admg_to_dict(g), indent=2)


def admg_from_json(text: str) -> Admg:
    return admg_from_dict(json.loads(text))
