"""Random linear acyclic models with latent confounders and soft interventions.

Each model has three system variables, two binary context variables and up to
two latent confounders. Data are drawn in three regimes: observational and one
per context variable (that variable set to 1, the other to 0).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .admg import Admg, JciBackground, make_universe
from .stats import DomainDataset

NOISE_SD = 0.08
COEF_MEAN = 0.2
COEF_SD = 0.8


@dataclass(frozen=True)
class LinearScm:
    """Linear SCM over contexts, system variables and latents.

    ``weights`` maps ``(parent, child)`` name pairs to coefficients; context
    coefficients already include the ``gamma`` scaling. Latent names start
    with ``L``. ``noise_sd`` is one value for every variable or a per-name
    mapping.
    """

    context: tuple[str, ...]
    system: tuple[str, ...]
    latents: tuple[str, ...]
    order: tuple[str, ...]
    weights: dict[tuple[str, str], float] = field(hash=False)
    gamma: float = 1.0
    noise_sd: float | dict[str, float] = field(default=NOISE_SD, hash=False)

    def noise(self, name: str) -> float:
        if isinstance(self.noise_sd, dict):
            return self.noise_sd.get(name, NOISE_SD)
        return self.noise_sd

    def parents(self, child: str) -> list[str]:
        return [p for (p, c) in self.weights if c == child]

    def children(self, parent: str) -> list[str]:
        return [c for (p, c) in self.weights if p == parent]

    def graph(self) -> Admg:
        """Ground-truth ADMG with latents projected to bidirected edges and contexts confounded."""
        universe = make_universe(self.context, self.system)
        index = {v.name: v.index for v in universe}
        directed = {(index[p], index[c]) for (p, c) in self.weights if p in index}
        bidirected = set(itertools.combinations([index[c] for c in self.context], 2))
        for lat in self.latents:
            kids = sorted(index[c] for c in self.children(lat))
            bidirected.update(itertools.combinations(kids, 2))
        return Admg(universe, frozenset(directed), frozenset(bidirected))


@dataclass(frozen=True)
class SimConfig:
    n_models: int = 200
    n_samples: int = 1000
    gamma: float = 10.0
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        if self.n_models <= 0 or self.n_samples <= 0:
            raise ValueError("n_models and n_samples must be positive")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


def _coefficient(rng: np.random.Generator) -> float:
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return float(rng.normal(sign * COEF_MEAN, COEF_SD))


def _uniform_subset(rng: np.random.Generator, items: list[str], exclude_full: bool = False) -> list[str]:
    subsets = [s for k in range(len(items) + 1) for s in itertools.combinations(items, k)]
    if exclude_full:
        subsets = subsets[:-1]
    return list(subsets[rng.integers(len(subsets))])


def random_model(
    rng: np.random.Generator,
    gamma: float = 1.0,
    n_system: int = 3,
    n_context: int = 2,
) -> LinearScm:
    system = [f"X{i + 1}" for i in range(n_system)]
    context = [f"C{i + 1}" for i in range(n_context)]
    u = rng.random()
    n_latent = 1 if u < 0.25 else 2 if u < 0.5 else 0
    latents = [f"L{i + 1}" for i in range(n_latent)]
    order = [system[i] for i in rng.permutation(n_system)]

    weights: dict[tuple[str, str], float] = {}
    for lat in latents:
        for child in sorted(rng.choice(system, size=2, replace=False)):
            weights[(lat, str(child))] = _coefficient(rng)
    for c in context:
        for child in _uniform_subset(rng, system, exclude_full=True):
            weights[(c, child)] = gamma * _coefficient(rng)
    for pos, parent in enumerate(order):
        for child in _uniform_subset(rng, order[pos + 1:]):
            weights[(parent, child)] = _coefficient(rng)
    return LinearScm(tuple(context), tuple(system), tuple(latents), tuple(order), weights, gamma)


def regimes(n_context: int) -> np.ndarray:
    """Context settings: all zero, then each context switched on alone."""
    return np.vstack([np.zeros(n_context), np.eye(n_context)])


def sample(scm: LinearScm, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rows ``(contexts..., system...)`` with ``n`` samples per regime, latents dropped."""
    settings = regimes(len(scm.context))
    ctx = np.repeat(settings, n, axis=0)
    total = ctx.shape[0]
    values = {name: ctx[:, i] for i, name in enumerate(scm.context)}
    for name in list(scm.latents) + list(scm.order):
        x = rng.normal(0.0, scm.noise(name), size=total)
        for parent in scm.parents(name):
            x = x + scm.weights[(parent, name)] * values[parent]
        values[name] = x
    return np.column_stack([values[name] for name in scm.context + scm.system])


@dataclass(frozen=True)
class Task:
    """A masked task with its held-out answers."""

    dataset: DomainDataset
    truth: np.ndarray
    graph: Admg
    background: JciBackground

    @property
    def full(self) -> DomainDataset:
        rows = self.dataset.rows.copy()
        rows[self.dataset.y_mask, self.dataset.y] = self.truth
        return DomainDataset(self.dataset.universe, rows, self.dataset.c1, self.dataset.y)


def admissible_pairs(scm: LinearScm) -> list[tuple[str, str]]:
    return [
        (c, x) for c in scm.context for x in scm.system if (c, x) not in scm.weights
    ]


def make_task(rows: np.ndarray, scm: LinearScm, rng: np.random.Generator) -> Task:
    """Pick ``(C1, Y)`` without a direct C1 -> Y edge and hide Y wherever C1 = 1."""
    pairs = admissible_pairs(scm)
    if not pairs:
        raise ValueError("every context directly affects every system variable")
    c1_name, y_name = pairs[rng.integers(len(pairs))]
    g = scm.graph()
    c1, y = g.index(c1_name), g.index(y_name)
    full = DomainDataset(g.universe, rows, c1, y)
    masked = full.masked()
    truth = rows[masked.y_mask, y].copy()
    return Task(masked, truth, g, JciBackground(c1, y))


def model_rngs(seed: int, n_models: int) -> list[np.random.Generator]:
    """Independent per-model generators spawned from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_models)]


def generate_task(rng: np.random.Generator, gamma: float, n: int) -> tuple[LinearScm, Task]:
    """Draw a model, sample it and turn it into a task.

    Model, data and task choice use separate child streams of ``rng``, so the
    same seed gives the same model and (C1, Y) pair at every sample size.
    ``random_model`` always leaves an admissible pair, so no model is rejected.
    """
    model_rng, data_rng, task_rng = rng.spawn(3)
    scm = random_model(model_rng, gamma)
    rows = sample(scm, n, data_rng)
    return scm, make_task(rows, scm, task_rng)


def shifted_chain_model(shift: float = 3.0, noise_sd: float = NOISE_SD) -> LinearScm:
    """Fixed model C1 <-> C2, C2 -> X1 -> X2 -> X3 <- C1 with Y = X2 as the natural target."""
    weights = {
        ("C2", "X1"): 1.0,
        ("X1", "X2"): 1.0,
        ("X2", "X3"): 1.0,
        ("C1", "X3"): shift,
    }
    return LinearScm(("C1", "C2"), ("X1", "X2", "X3"), (), ("X1", "X2", "X3"), weights, 1.0, noise_sd)


def task_for(scm: LinearScm, rows: np.ndarray, c1: str, y: str) -> Task:
    g = scm.graph()
    full = DomainDataset(g.universe, rows, g.index(c1), g.index(y))
    masked = full.masked()
    return Task(masked, rows[masked.y_mask, full.y].copy(), g, JciBackground(full.c1, full.y))
