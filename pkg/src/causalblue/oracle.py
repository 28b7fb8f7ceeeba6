"""Brute-force ground truth: grid search for the optimal intervention."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .optim import HistoryEntry, InterventionSet, evaluate_intervention
from .scenario import NetworkGraph, ScenarioConfig

DEFAULT_RESOLUTION = 21
DEFAULT_ORACLE_ROLLOUTS = 50

_SUBSETS = (("P",), ("I",), ("P", "I"))


@dataclass(frozen=True)
class OracleResult:
    t: int
    best_set: InterventionSet
    y_star: float
    grid_resolution: int
    full_grid: tuple[tuple[InterventionSet, float], ...]


def grid_search_optimum(
    config: ScenarioConfig,
    graph: NetworkGraph,
    t: int,
    history: Sequence[HistoryEntry] = (),
    resolution: int = DEFAULT_RESOLUTION,
    n_rollouts: int = DEFAULT_ORACLE_ROLLOUTS,
    base_seed: int | None = None,
) -> OracleResult:
    """Exhaustively evaluate every nonempty subset of {P, I} on a uniform grid.

    All grid points share common random numbers, so the argmin is a pure
    comparison of Monte-Carlo means over identical episode streams.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axis = np.linspace(0.0, 1.0, resolution)
    grid: list[tuple[InterventionSet, float]] = []
    best: tuple[InterventionSet, float] | None = None
    for variables in _SUBSETS:
        if len(variables) == 1:
            points = axis[:, None]
        else:
            a, b = np.meshgrid(axis, axis, indexing="ij")
            points = np.column_stack([a.ravel(), b.ravel()])
        for row in points:
            iset = InterventionSet(variables, tuple(float(v) for v in row))
            value = evaluate_intervention(
                config, graph, iset, t, history, n_rollouts, base_seed
            )
            grid.append((iset, value))
            if best is None or value < best[1]:
                best = (iset, value)
    return OracleResult(
        t=t,
        best_set=best[0],
        y_star=best[1],
        grid_resolution=resolution,
        full_grid=tuple(grid),
    )


def write_oracle(results: Sequence[OracleResult], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "set", "p_value", "i_value", "mean_objective", "best"])
    for result in results:
        for iset, value in result.full_grid:
            vals = iset.as_dict()
            writer.writerow(
                [
                    result.t,
                    iset.label(),
                    repr(vals["P"]) if "P" in vals else "",
                    repr(vals["I"]) if "I" in vals else "",
                    repr(value),
                    int(iset == result.best_set and value == result.y_star),
                ]
            )
