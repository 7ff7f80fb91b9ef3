"""End-to-end runs: constraints, ranking, selection, prediction and scoring."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .admg import JciBackground, SeparationQuery, m_separated
from .jci import generate_constraints
from .predict import (
    SubsetScore,
    TransferDecision,
    baseline,
    evaluate,
    fit_predict,
    rank_subsets,
    select_separating,
)
from .simulate import generate_task
from .stats import DomainDataset, WeightedConstraint


@dataclass(frozen=True)
class RunResult:
    decision: TransferDecision
    ranked: list[SubsetScore]
    predictions: np.ndarray | None
    baseline_predictions: np.ndarray
    seconds: float
    constraints: list[WeightedConstraint]


def run(
    ds: DomainDataset,
    alpha: float = 0.05,
    max_cond: int | None = None,
    n_folds: int = 5,
    seed: int = 0,
) -> RunResult:
    start = time.perf_counter()
    ds.validate_task()
    bg = JciBackground(ds.c1, ds.y)
    candidates = [i for i in range(len(ds.universe)) if i not in (ds.c1, ds.y)]
    source, target = ds.source, ds.target
    # ranking first: its row-count check gives the clearer error on tiny sources
    ranked = rank_subsets(source, ds.y, candidates, n_folds=n_folds, seed=seed)
    constraints = generate_constraints(ds, alpha, max_cond)
    decision = select_separating(ranked, constraints, bg, ds.universe)
    preds = None
    if not decision.abstained:
        preds = fit_predict(source, ds.y, decision.subset, target)
    base = baseline(ranked, source, ds.y, target)
    return RunResult(decision, ranked, preds, base, time.perf_counter() - start, constraints)


def result_json(ds: DomainDataset, result: RunResult) -> dict:
    d = result.decision
    names = ds.names
    return {
        "decision": "abstain" if d.abstained else "chosen",
        "subset": [] if d.abstained else [names[i] for i in d.subset],
        "confidence": _num(d.confidence),
        "source_cv_risk": _num(d.source_cv_risk),
        "predictions": [] if result.predictions is None else [float(v) for v in result.predictions],
        "seconds": round(result.seconds, 6),
    }


def _num(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


BENCHMARK_FIELDS = [
    "task",
    "c1",
    "y",
    "decision",
    "subset",
    "confidence",
    "method_loss",
    "baseline_subset",
    "baseline_loss",
    "source_cv_risk",
    "truly_separating",
    "error",
]


def benchmark_task(index: int, rng: np.random.Generator, gamma: float, n: int, alpha: float, max_cond):
    """One benchmark row; failures are reported in the ``error`` column."""
    row = dict.fromkeys(BENCHMARK_FIELDS, "")
    row["task"] = index
    try:
        _, task = generate_task(rng, gamma, n)
        ds = task.dataset
        names = ds.names
        row["c1"], row["y"] = names[ds.c1], names[ds.y]
        res = run(ds, alpha, max_cond)
        row["baseline_subset"] = "+".join(names[i] for i in res.ranked[0].subset)
        row["baseline_loss"] = evaluate(res.baseline_predictions, task.truth)
        d = res.decision
        if d.abstained:
            row["decision"] = "abstain"
        else:
            row["decision"] = "chosen"
            row["subset"] = "+".join(names[i] for i in d.subset)
            row["confidence"] = d.confidence
            row["method_loss"] = evaluate(res.predictions, task.truth)
            row["source_cv_risk"] = d.source_cv_risk
            q = SeparationQuery(ds.c1, ds.y, frozenset(d.subset))
            row["truly_separating"] = m_separated(task.graph, q)
    except Exception as exc:  # recorded per task; the sweep continues
        row["decision"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def summarize(rows: list[dict]) -> dict:
    chosen = [r for r in rows if r["decision"] == "chosen"]
    ok = [r for r in rows if r["decision"] != "error"]

    def quartiles(values):
        if not values:
            return None
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        return {"q1": float(q1), "median": float(med), "q3": float(q3), "n": len(values)}

    return {
        "n_tasks": len(rows),
        "n_errors": len(rows) - len(ok),
        "n_abstain": sum(r["decision"] == "abstain" for r in rows),
        "abstain_rate": (sum(r["decision"] == "abstain" for r in ok) / len(ok)) if ok else None,
        "method": quartiles([r["method_loss"] for r in chosen]),
        "baseline_on_chosen": quartiles([r["baseline_loss"] for r in chosen]),
        "baseline_all": quartiles([r["baseline_loss"] for r in ok]),
        "chosen_truly_separating": sum(bool(r["truly_separating"]) for r in chosen),
    }
