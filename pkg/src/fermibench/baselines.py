"""Answer-only baselines.

The only baseline that needs no model at all: predict one constant for every
question and sweep that constant over a log grid from 1e-10 to 1e10, keeping
whichever maximizes the mean order-of-magnitude score. Published numbers put
this around 0.22 on the real dataset at a constant of 1000, which is the bar
any actual model has to clear; reproducing that exact figure requires the
real gold answers, so it is documented rather than tested here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .metrics import EmptyInput, InvalidGold

# grid rows are chunked so the (constants x golds) score matrix stays small
_CHUNK_CELLS = 5_000_000


@dataclass(frozen=True)
class ConstantSweepResult:
    best_constant: float
    best_score: float
    grid: tuple[tuple[float, float], ...]  # (constant, mean score), ascending


def constant_sweep(golds: Iterable, grid_points_per_decade: int = 10) -> ConstantSweepResult:
    """Mean score of each grid constant against the golds; argmax wins.

    golds may be Quantities or bare magnitudes; only magnitudes matter. On
    ties the smaller constant is returned. 10 points per decade (201 grid
    points) resolves the optimum to well under the 1/30 score step a tenth
    of a decade can cause.
    """
    magnitudes = np.array(
        [getattr(g, "magnitude", g) for g in golds], dtype=float
    )
    if magnitudes.size == 0:
        raise EmptyInput("constant sweep needs at least one gold answer")
    if not np.all(np.isfinite(magnitudes)) or np.any(magnitudes <= 0.0):
        raise InvalidGold("gold magnitudes must be positive and finite")
    if grid_points_per_decade < 1:
        raise ValueError("grid_points_per_decade must be at least 1")

    ppd = grid_points_per_decade
    exponents = np.arange(-10 * ppd, 10 * ppd + 1, dtype=float) / ppd
    gold_logs = np.log10(magnitudes)

    scores = np.empty(exponents.shape)
    rows = max(1, _CHUNK_CELLS // magnitudes.size)
    for start in range(0, exponents.size, rows):
        block = exponents[start : start + rows, None] - gold_logs[None, :]
        scores[start : start + rows] = np.clip(
            1.0 - np.abs(block) / 3.0, 0.0, 1.0
        ).mean(axis=1)

    constants = np.power(10.0, exponents)
    best = int(np.argmax(scores))  # first max, so ties go to the smaller constant
    return ConstantSweepResult(
        best_constant=float(constants[best]),
        best_score=float(scores[best]),
        grid=tuple(zip(constants.tolist(), scores.tolist())),
    )


def render_sweep_text(result: ConstantSweepResult) -> str:
    """The sweep as a plain table plus a best-constant summary line."""
    lines = ["constant mean_score"]
    for constant, score in result.grid:
        lines.append(f"{constant:.6g} {score:.4f}")
    lines.append(
        f"best {result.best_constant:.6g} scores {result.best_score:.4f}"
    )
    return "\n".join(lines) + "\n"
