"""Exhaustive grid references for the projection and the safe-control set."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from issakit.core import Dynamics, Obstacle, RobotState
from issakit.safety_index import SafetyStatus, StatusOracle


def control_grid(box: Sequence[tuple[float, float]], resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _mask(status, pts):
    fast = getattr(status, "safe_mask", None)
    if fast is not None:
        return np.asarray(fast(pts), dtype=bool)
    return np.array([status(p) == SafetyStatus.SAFE for p in pts], dtype=bool)


def brute_force_project(
    status, u_r: Sequence[float], box: Sequence[tuple[float, float]], resolution: int = 201
) -> np.ndarray | None:
    """Nearest SAFE grid control to ``u_r``, or ``None`` if the grid has none."""
    if resolution < 11:
        raise ValueError("resolution must be >= 11")
    pts = control_grid(box, resolution)
    safe = _mask(status, pts)
    if not safe.any():
        return None
    cand = pts[safe]
    d = np.sum((cand - np.asarray(u_r, dtype=float)) ** 2, axis=1)
    return cand[int(np.argmin(d))]


@dataclass(frozen=True)
class SafeSetScan:
    fraction: float
    controls: np.ndarray
    delta_phi: np.ndarray
    safe: np.ndarray


def safe_control_fraction(
    x: RobotState,
    model: Dynamics,
    index,
    obstacles: Sequence[Obstacle],
    dt: float,
    resolution: int = 41,
    margin: float | None = None,
) -> SafeSetScan:
    """Share of a ``resolution``-per-axis control grid that is SAFE, with the ``delta phi`` grid."""
    if len(model.control_box) != 2:
        raise ValueError("safe-set scans need a 2D control space")
    oracle = StatusOracle(x, model, index, obstacles, dt, margin)
    pts = control_grid(model.control_box, resolution)
    nxt = oracle.next_phi_many(pts) if hasattr(model, "step_many") else np.array([oracle.next_phi(p) for p in pts])
    safe = nxt <= oracle.threshold
    return SafeSetScan(float(np.mean(safe)), pts, nxt - oracle.phi, safe)
