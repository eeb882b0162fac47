"""Phase-1 success-rate benchmark over sampled unsafe situations."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from issakit.core import Dynamics, Obstacle, RobotState, SystemLimits
from issakit.harness.oracles import control_grid
from issakit.harness.scenarios import unsafe_start
from issakit.issa import IssaConfig, phase1
from issakit.safety_index import SafetyIndex, SafetyIndexParams, SafetyStatus, StatusOracle


@dataclass(frozen=True)
class Phase1Summary:
    n_dirs: int
    success_rate: float
    mean_candidates: float
    mean_queries: float
    wall_ms: float


def sample_unsafe_cases(
    model: Dynamics,
    params: SafetyIndexParams,
    limits: SystemLimits,
    trials: int,
    seed: int = 0,
    max_rejections: int = 100_000,
) -> list[tuple[RobotState, Obstacle, np.ndarray]]:
    """``(state, obstacle, u_r)`` triples with ``phi(x) > 0`` and an UNSAFE nominal control.

    States whose SAFE set is empty on a 41 x 41 control grid are rejected too:
    no search can succeed there and they are unreachable under the safeguard.
    """
    rng = np.random.default_rng(seed)
    box = np.asarray(model.control_box, dtype=float)
    index = SafetyIndex(params)
    out = []
    rejected = 0
    while len(out) < trials:
        state, obs = unsafe_start(rng, params, limits)
        u_r = rng.uniform(box[:, 0], box[:, 1])
        oracle = StatusOracle(state, model, index, [obs], limits.dt)
        if oracle(u_r) == SafetyStatus.UNSAFE and _has_safe(oracle, model.control_box):
            out.append((state, obs, u_r))
        else:
            rejected += 1
            if rejected > max_rejections:
                raise RuntimeError("too many rejections while sampling unsafe cases")
    return out


def _has_safe(oracle, box) -> bool:
    pts = control_grid(box, 41)
    return bool(np.any(oracle.safe_mask(pts))) if hasattr(oracle.model, "step_many") else any(
        oracle(p) == SafetyStatus.SAFE for p in pts
    )


def bench_phase1(
    model: Dynamics,
    params: SafetyIndexParams,
    limits: SystemLimits,
    config: IssaConfig,
    trials: int = 200,
    n_dirs: Sequence[int] = (3, 5, 10, 20),
    seed: int = 0,
) -> list[Phase1Summary]:
    """Phase-1 statistics per direction count on one shared sample of unsafe cases.

    Case ``i`` uses the same direction generator for every count, so a smaller
    direction set is a prefix of a larger one.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cases = sample_unsafe_cases(model, params, limits, trials, seed)
    index = SafetyIndex(params)
    rows = []
    for n in n_dirs:
        cfg = replace(config.adamba, n_dirs=n)
        hits = cands = queries = 0
        t0 = time.perf_counter()
        for i, (state, obs, u_r) in enumerate(cases):
            oracle = StatusOracle(state, model, index, [obs], limits.dt)
            found = phase1(oracle, u_r, model.control_box, cfg, np.random.default_rng([seed, i]))
            hits += bool(found)
            cands += len(found)
            queries += oracle.queries
        wall = (time.perf_counter() - t0) * 1e3
        rows.append(Phase1Summary(n, hits / trials, cands / trials, queries / trials, wall))
    return rows
