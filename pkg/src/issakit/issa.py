"""Two-phase projection of an unsafe nominal control onto the set of safe controls.

Phase 1 runs boundary searches from the nominal control along random
directions and keeps the closest SAFE boundary point. If every direction
misses, phase 2 scans a grid of growing resolution for any SAFE anchor and
searches the segment between the nominal control and the anchor.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from issakit.adamba import AdamBAConfig, BoundaryPoint, adamba, sample_directions
from issakit.core import Dynamics, Obstacle, RobotState, check_control
from issakit.safety_index import InfeasibleError, SafetyStatus, StatusOracle

SAFE = SafetyStatus.SAFE
UNSAFE = SafetyStatus.UNSAFE


class AnchorNotFoundError(InfeasibleError):
    """Grid refinement cap reached without a SAFE control."""


class Phase(enum.Enum):
    PASS_THROUGH = "PASS_THROUGH"
    PHASE1 = "PHASE1"
    PHASE2 = "PHASE2"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class IssaConfig:
    adamba: AdamBAConfig = field(default_factory=AdamBAConfig)
    grid_initial_divisions: int = 3
    grid_growth: int = 2
    grid_max_refinements: int = 12

    def __post_init__(self):
        if self.grid_initial_divisions < 2:
            raise ValueError("grid_initial_divisions must be >= 2")
        if self.grid_growth < 2:
            raise ValueError("grid_growth must be >= 2")
        if self.grid_max_refinements < 0:
            raise ValueError("grid_max_refinements must be >= 0")


@dataclass(frozen=True)
class ProjectionResult:
    control: np.ndarray
    deviation: float
    phase: Phase
    queries: int
    candidates: int = 0


# -- grid anchor -----------------------------------------------------------------------------


def _nodes_per_dim(config: IssaConfig, level: int) -> int:
    # odd node counts keep the box center on every level; levels are nested
    base = config.grid_initial_divisions
    if base % 2 == 0:
        base += 1
    return (base - 1) * config.grid_growth**level + 1


def _ring(center: int, j: int, n_u: int) -> np.ndarray:
    """Index tuples with Chebyshev distance exactly ``j`` from ``center``, row-major."""
    if j == 0:
        return np.full((1, n_u), center, dtype=np.int64)
    full = np.arange(center - j, center + j + 1)
    inner = full[1:-1]
    parts = []
    for d in range(n_u):
        axes = [inner] * d + [np.array([center - j, center + j])] + [full] * (n_u - d - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        parts.append(np.stack([m.ravel() for m in mesh], axis=1))
    rows = np.concatenate(parts, axis=0)
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def grid_scan(box: Sequence[tuple[float, float]], config: IssaConfig) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(level, controls)`` batches in scan order.

    Each level is a nested grid; points are visited in Chebyshev rings from the
    box center outward, row-major within a ring, skipping points already seen
    on a coarser level.
    """
    box_arr = np.asarray(box, dtype=float)
    lo, hi = box_arr[:, 0], box_arr[:, 1]
    n_u = len(box_arr)
    g = config.grid_growth
    for level in range(config.grid_max_refinements + 1):
        m = _nodes_per_dim(config, level)
        center = (m - 1) // 2
        spacing = (hi - lo) / (m - 1)
        for j in range(center + 1):
            idx = _ring(center, j, n_u)
            if level > 0:
                idx = idx[~np.all(idx % g == 0, axis=1)]
                if len(idx) == 0:
                    continue
            yield level, lo + idx * spacing


def grid_anchor(
    status: Callable[[np.ndarray], SafetyStatus],
    box: Sequence[tuple[float, float]],
    config: IssaConfig,
    batch: Callable[[np.ndarray], np.ndarray] | None = None,
    chunk: int = 4096,
) -> tuple[np.ndarray, int]:
    """First SAFE grid control in scan order and its scan position (1-based).

    ``batch`` maps an ``(N, n_u)`` array to a boolean SAFE mask and is used
    instead of point-wise ``status`` calls when given.
    """
    scanned = 0
    pending: list[np.ndarray] = []
    pending_n = 0

    def flush():
        nonlocal scanned, pending, pending_n
        pts = np.concatenate(pending, axis=0)
        pending, pending_n = [], 0
        if batch is not None:
            mask = np.asarray(batch(pts), dtype=bool)
            hits = np.flatnonzero(mask)
            if len(hits):
                return pts[hits[0]], scanned + int(hits[0]) + 1
        else:
            for i, p in enumerate(pts):
                if status(p) == SAFE:
                    return p, scanned + i + 1
        scanned += len(pts)
        return None

    size = 1
    for _, pts in grid_scan(box, config):
        pending.append(pts)
        pending_n += len(pts)
        if pending_n >= size:
            found = flush()
            if found is not None:
                return found
            size = min(size * 4, chunk)
    if pending:
        found = flush()
        if found is not None:
            return found
    raise AnchorNotFoundError(
        f"no SAFE control on the grid after {config.grid_max_refinements} refinements ({scanned} points)"
    )


# -- projection --------------------------------------------------------------------------------


def _segment_bisect(status, u_safe, u_unsafe, eps):
    while np.linalg.norm(u_unsafe - u_safe) >= eps:
        mid = 0.5 * (u_safe + u_unsafe)
        if status(mid) == SAFE:
            u_safe = mid
        else:
            u_unsafe = mid
    return u_safe


def phase1(
    status: Callable[[np.ndarray], SafetyStatus],
    u_r: np.ndarray,
    box: Sequence[tuple[float, float]],
    cfg: AdamBAConfig,
    rng: np.random.Generator | None = None,
) -> list[BoundaryPoint]:
    """SAFE boundary points reached from ``u_r`` along ``cfg.n_dirs`` random directions."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    dirs = sample_directions(cfg, len(u_r), rng)
    return adamba(cfg, u_r, dirs, UNSAFE, SAFE, status, box, check_reference=False)


def project(
    status: Callable[[np.ndarray], SafetyStatus],
    u_r: Sequence[float],
    box: Sequence[tuple[float, float]],
    config: IssaConfig,
    rng: np.random.Generator | None = None,
    batch: Callable[[np.ndarray], np.ndarray] | None = None,
    state: RobotState | None = None,
) -> ProjectionResult:
    """Project an UNSAFE ``u_r`` onto the boundary of the SAFE set of ``status``.

    ``status`` may be any control classifier; for counting queries pass an
    object with a ``queries`` attribute such as :class:`StatusOracle`.
    """
    u_r = np.asarray(u_r, dtype=float)
    cfg = config.adamba
    q0 = getattr(status, "queries", 0)

    def used():
        return getattr(status, "queries", 0) - q0

    found = phase1(status, u_r, box, cfg, rng)
    if found:
        devs = [float(np.sum((bp.control - u_r) ** 2)) for bp in found]
        best = found[int(np.argmin(devs))]  # argmin keeps the lowest direction index on ties
        return ProjectionResult(
            best.control, float(np.sqrt(min(devs))), Phase.PHASE1, used(), len(found)
        )

    try:
        u_a, _ = grid_anchor(status, box, config, batch=batch)
    except AnchorNotFoundError as exc:
        where = f" at state {state}" if state is not None else ""
        raise AnchorNotFoundError(f"{exc}{where}") from None
    gap = u_a - u_r
    length = float(np.linalg.norm(gap))
    beta = length / 4.0
    toward = adamba(cfg, u_r, [gap], UNSAFE, SAFE, status, box, check_reference=False, beta0=beta)
    if toward:
        u = toward[0].control
    else:
        back = adamba(cfg, u_a, [-gap], SAFE, SAFE, status, box, check_reference=False, beta0=beta)
        if back:
            u = back[0].control
        else:
            # anchor SAFE and u_r UNSAFE bracket a flip on the segment
            u = _segment_bisect(status, u_a, u_r.copy(), cfg.epsilon)
    return ProjectionResult(u, float(np.linalg.norm(u - u_r)), Phase.PHASE2, used(), 0)


def safeguard(
    x: RobotState,
    u_r: Sequence[float],
    dynamics: Dynamics,
    index,
    obstacles: Sequence[Obstacle],
    dt: float,
    config: IssaConfig,
    rng: np.random.Generator | None = None,
    margin: float | None = None,
) -> ProjectionResult:
    """Pass a SAFE nominal control through unchanged; otherwise project it."""
    u_r = np.asarray(u_r, dtype=float)
    check_control(u_r, dynamics.control_box)
    if not obstacles:
        return ProjectionResult(u_r, 0.0, Phase.PASS_THROUGH, 0, 0)
    oracle = StatusOracle(x, dynamics, index, obstacles, dt, margin)
    if oracle(u_r) == SAFE:
        return ProjectionResult(u_r, 0.0, Phase.PASS_THROUGH, oracle.queries, 0)
    batch = oracle.safe_mask if hasattr(dynamics, "step_many") else None
    res = project(oracle, u_r, dynamics.control_box, config, rng=rng, batch=batch, state=x)
    return ProjectionResult(res.control, res.deviation, res.phase, oracle.queries, res.candidates)
