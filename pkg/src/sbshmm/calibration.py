"""Dimension-jump calibration of the penalty constant.

For a penalty ``rho * pen_shape(M)``, the selected dimension ``M_k(rho)`` drops
sharply once ``rho`` exceeds the minimal penalty constant.  The constant is set
to twice the abscissa of the largest drop, per state (``eachjump``) or pooled
over states (``jumpmax``, ``jumpmean``).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .selection import (EstimatorFamily, PenaltyKind, SelectionResult, Variant, _check_aligned,
                        criterion_curve, penalty_shape, select_models)

log = logging.getLogger(__name__)


class CalibrationMode(str, enum.Enum):
    EACH_JUMP = "eachjump"
    JUMP_MAX = "jumpmax"
    JUMP_MEAN = "jumpmean"


@dataclass
class JumpCurve:
    state: int
    rho_grid: np.ndarray
    M_hat_of_rho: np.ndarray
    rho_jump: float
    jump_size: int
    has_jump: bool


def shape_vector(family: EstimatorFamily, pen_shape) -> np.ndarray:
    """Penalty shape over the family's grid; ``pen_shape`` is a kind or an array."""
    if isinstance(pen_shape, (str, PenaltyKind)):
        return penalty_shape(pen_shape, np.array(family.model_grid), family.n)
    if callable(pen_shape):
        return np.array([pen_shape(M) for M in family.model_grid], dtype=float)
    return np.asarray(pen_shape, dtype=float)


def default_rho_grid(family: EstimatorFamily, pen_shape, points: int = 64) -> np.ndarray:
    """Geometric grid over ``[1e-3, 1e2] * median pairwise distance / pen_shape(M_max)``."""
    shape = shape_vector(family, pen_shape)
    D = family.distances()
    G = D.shape[1]
    iu = np.triu_indices(G, k=1)
    dists = D[:, iu[0], iu[1]].ravel()
    med = float(np.median(dists)) if dists.size else 0.0
    scale = med / shape[-1] if med > 0 else 1.0
    return scale * np.geomspace(1e-3, 1e2, points)


def _selected_index(D_k, shape, rho, variant):
    _, crit = criterion_curve(D_k, rho * shape, variant)
    return int(np.argmin(crit))


def jump_curve(family: EstimatorFamily, pen_shape, k: int, rho_grid=None,
               variant=Variant.STANDARD) -> JumpCurve:
    """``M_k(rho)`` over the grid and the position of its largest drop.

    The drop is measured in grid-model positions; the earliest largest drop
    wins, and ``rho_jump`` is the right end of that grid interval.
    """
    _check_aligned(family)
    if rho_grid is None:
        rho_grid = default_rho_grid(family, pen_shape)
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid.size == 0:
        raise ValueError("rho_grid must be nonempty")
    if np.any(rho_grid <= 0) or np.any(np.diff(rho_grid) <= 0):
        raise ValueError("rho_grid must be positive and strictly increasing")
    shape = shape_vector(family, pen_shape)
    D_k = family.distances()[k]
    idx = np.array([_selected_index(D_k, shape, rho, variant) for rho in rho_grid])
    grid = np.array(family.model_grid)
    drops = idx[:-1] - idx[1:]
    if drops.size == 0 or drops.max() <= 0:
        return JumpCurve(k, rho_grid, grid[idx], float(rho_grid[0]), 0, False)
    i = int(np.argmax(drops))
    return JumpCurve(k, rho_grid, grid[idx], float(rho_grid[i + 1]), int(drops[i]), True)


@dataclass
class Calibration:
    mode: CalibrationMode
    constants: np.ndarray
    curves: list

    @property
    def rho_jumps(self) -> np.ndarray:
        return np.array([c.rho_jump if c.has_jump else 0.5 for c in self.curves])


def constants_from_jumps(jumps, mode) -> np.ndarray:
    jumps = np.asarray(jumps, dtype=float)
    mode = CalibrationMode(mode)
    if mode is CalibrationMode.EACH_JUMP:
        return 2.0 * jumps
    if mode is CalibrationMode.JUMP_MAX:
        return np.full(jumps.shape, 2.0 * jumps.max())
    return np.full(jumps.shape, 2.0 * jumps.mean())


def calibrate(family: EstimatorFamily, pen_shape, mode=CalibrationMode.EACH_JUMP,
              rho_grid=None, variant=Variant.STANDARD) -> Calibration:
    """Penalty constants per state, twice the jump position (pooled per ``mode``).

    A state whose curve never drops falls back to the constant 1.
    """
    if rho_grid is None:
        rho_grid = default_rho_grid(family, pen_shape)
    curves = [jump_curve(family, pen_shape, k, rho_grid, variant) for k in range(family.K)]
    for c in curves:
        if not c.has_jump:
            log.warning("no dimension jump for state %d; falling back to constant 1", c.state)
    jumps = [c.rho_jump if c.has_jump else 0.5 for c in curves]
    return Calibration(CalibrationMode(mode), constants_from_jumps(jumps, mode), curves)


def calibrated_selection(family: EstimatorFamily, pen_shape="spectral",
                         mode=CalibrationMode.EACH_JUMP, variant=Variant.STANDARD,
                         rho_grid=None) -> tuple[SelectionResult, Calibration]:
    """Calibrate with dimension jumps, then select with ``constant * pen_shape``."""
    cal = calibrate(family, pen_shape, mode, rho_grid, variant)
    shape = shape_vector(family, pen_shape)
    sigma = cal.constants[:, None] * shape[None, :]
    kind = pen_shape.value if isinstance(pen_shape, PenaltyKind) else (
        pen_shape if isinstance(pen_shape, str) else "custom")
    info = {"shape": kind, "rho": cal.constants.tolist(), "calibration": cal.mode.value}
    return select_models(family, sigma, variant, info), cal
