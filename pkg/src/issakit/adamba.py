"""Adaptive momentum boundary approximation.

Locates points on the boundary between controls of different safety status
using only status queries: march along a ray with a step that doubles after
every same-status point (outreach), then bisect the bracketing pair once the
status flips (decay).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from issakit.safety_index import SafetyStatus

log = logging.getLogger(__name__)

StatusFn = Callable[[np.ndarray], SafetyStatus]


@dataclass(frozen=True)
class AdamBAConfig:
    epsilon: float = 1e-3
    beta0: float = 0.2
    n_dirs: int = 10
    cov_scale: float = 1.0
    max_outreach_doublings: int = 60
    seed: int = 0
    scale: tuple[float, ...] | None = None
    workers: int = 1
    #: on leaving the box, halve the step and stop doubling instead of giving up at once
    edge_backoff: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.n_dirs < 1:
            raise ValueError(f"n_dirs must be >= 1, got {self.n_dirs}")
        if not self.cov_scale > 0:
            raise ValueError("cov_scale must be positive")


@dataclass(frozen=True)
class BoundaryPoint:
    control: np.ndarray
    status: SafetyStatus
    queries_used: int
    direction_index: int


def sample_directions(
    config: AdamBAConfig,
    n_u: int,
    rng: np.random.Generator | None = None,
    reference: Sequence[float] | None = None,
    max_redraws: int = 100,
) -> list[np.ndarray]:
    """Unit search directions.

    With ``reference`` given, returns that single direction normalised.
    Otherwise draws ``n_dirs`` isotropic Gaussian vectors. Row ``i`` only
    depends on the first ``i + 1`` draws, so smaller ``n_dirs`` give a prefix
    of larger ones under the same generator state.
    """
    if reference is not None:
        v = np.asarray(reference, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("reference direction has zero length")
        return [v / norm]
    if rng is None:
        rng = np.random.default_rng(config.seed)
    sd = np.sqrt(config.cov_scale)
    out = []
    for _ in range(config.n_dirs):
        for _ in range(max_redraws):
            v = rng.normal(0.0, sd, n_u)
            norm = np.linalg.norm(v)
            if norm > 1e-300:
                break
        else:
            raise RuntimeError("could not draw a nonzero direction")
        out.append(v / norm)
    return out


def _inside(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    return bool(np.all(p >= lo) and np.all(p <= hi))


def search_direction(
    config: AdamBAConfig,
    u_r: np.ndarray,
    direction: np.ndarray,
    S: SafetyStatus,
    S_goal: SafetyStatus,
    status: StatusFn,
    lo: np.ndarray,
    hi: np.ndarray,
    index: int = 0,
    beta0: float | None = None,
) -> BoundaryPoint | None:
    """Outreach then bisection along one ray; ``None`` if the ray leaves the box first."""
    weights = None if config.scale is None else np.asarray(config.scale, dtype=float)

    def dist(a, b):
        diff = a - b
        if weights is not None:
            diff = diff * weights
        return float(np.linalg.norm(diff))

    beta = config.beta0 if beta0 is None else beta0
    p = np.array(u_r, dtype=float)
    p_s = p
    queries = 0
    doublings = 0
    growing = True
    while doublings <= config.max_outreach_doublings:
        cand = p + direction * beta
        if not _inside(cand, lo, hi):
            # the step overshoots the box; shrink it until the box edge is within epsilon
            if not config.edge_backoff or beta * 0.5 < config.epsilon:
                return None
            beta *= 0.5
            growing = False
            continue
        p_s, p = p, cand
        queries += 1
        if status(p) != S:
            p_ns = p
            break
        if growing:
            beta *= 2.0
            doublings += 1
    else:
        log.debug("direction %d abandoned after %d doublings", index, config.max_outreach_doublings)
        return None

    # bracket: status(p_s) == S, status(p_ns) != S
    while dist(p_ns, p_s) >= config.epsilon:
        mid = 0.5 * (p_s + p_ns)
        queries += 1
        if status(mid) == S:
            p_s = mid
        else:
            p_ns = mid
    if S_goal == S:
        return BoundaryPoint(p_s, S, queries, index)
    flipped = SafetyStatus.SAFE if S == SafetyStatus.UNSAFE else SafetyStatus.UNSAFE
    return BoundaryPoint(p_ns, flipped, queries, index)


def adamba(
    config: AdamBAConfig,
    u_r: Sequence[float],
    directions: Sequence[np.ndarray],
    S: SafetyStatus,
    S_goal: SafetyStatus,
    status_oracle: StatusFn,
    box: Sequence[tuple[float, float]],
    check_reference: bool = True,
    beta0: float | None = None,
) -> list[BoundaryPoint]:
    """Boundary points found along each direction, ordered by direction index.

    Points are reported with status ``S_goal``; directions that leave the
    control box before the status flips contribute nothing.
    """
    u_r = np.asarray(u_r, dtype=float)
    box_arr = np.asarray(box, dtype=float)
    lo, hi = box_arr[:, 0], box_arr[:, 1]
    if check_reference:
        got = status_oracle(u_r)
        if got != S:
            raise AssertionError(f"reference control has status {got}, caller claimed {S}")

    def run(item):
        i, v = item
        return search_direction(config, u_r, np.asarray(v, dtype=float), S, S_goal, status_oracle, lo, hi, i, beta0)

    items = list(enumerate(directions))
    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            found = list(pool.map(run, items))
    else:
        found = [run(it) for it in items]
    return [bp for bp in found if bp is not None]
