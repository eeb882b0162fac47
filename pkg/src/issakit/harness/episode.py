"""Closed-loop episodes: nominal policy, safeguard stack, dynamics, trace."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from issakit.core import (
    Dynamics,
    Obstacle,
    RobotState,
    SingularGeometryError,
    advance_obstacles,
    relative_kinematics,
)
from issakit.ctrigger import TriggerProps, ctrigger, require_trigger_support
from issakit.harness.policies import Policy
from issakit.harness.trace import EpisodeTrace, StepRecord
from issakit.issa import IssaConfig, Phase, safeguard
from issakit.safety_index import InfeasibleError, SafetyIndex, SafetyStatus, StatusOracle, phi_terms

log = logging.getLogger(__name__)

STREAMS = ("directions", "grid", "trigger")


def substreams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from one root seed."""
    root = np.random.SeedSequence(seed)
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, root.spawn(len(STREAMS)))}


class EpisodeInfeasible(InfeasibleError):
    def __init__(self, step: int, trace: EpisodeTrace, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.trace = trace
        self.cause = cause


@dataclass
class Env:
    model: Dynamics
    index: object
    obstacles: Sequence[Obstacle]
    dt: float
    start: RobotState
    #: model used by the status check; a sub-stepped wrapper emulates continuous time
    status_model: Dynamics | None = None
    w_bound: float | None = None

    @property
    def checker(self) -> Dynamics:
        return self.status_model if self.status_model is not None else self.model


@dataclass
class SafeguardStack:
    issa: IssaConfig | None = field(default_factory=IssaConfig)
    trigger: TriggerProps | None = None
    trigger_budget: int = 10_000


def _critical_alpha(state, obstacles, index) -> float:
    rk = relative_kinematics(state, obstacles[index.critical(state, obstacles)])
    return rk.alpha


def _index_terms(state, obstacles, index) -> list[float]:
    if isinstance(index, SafetyIndex):
        return phi_terms(state, obstacles, index.params)
    return [index.value(state, [o]) for o in obstacles]


def run_episode(
    env: Env, policy: Policy, stack: SafeguardStack, steps: int, seed: int = 0
) -> EpisodeTrace:
    """Run ``steps`` closed-loop steps; deterministic for a fixed ``seed``."""
    if stack.trigger is not None:
        require_trigger_support(env.model)
    rngs = substreams(seed)
    trace = EpisodeTrace(meta={"seed": seed, "model": getattr(env.model, "name", type(env.model).__name__)})
    x = env.start
    obstacles = tuple(env.obstacles)
    box = np.asarray(env.model.control_box, dtype=float)
    crowded = 0
    fast_turns = 0
    for t in range(steps):
        u_r = np.clip(np.asarray(policy(x), dtype=float), box[:, 0], box[:, 1])
        phi_x = env.index.value(x, obstacles)
        phi0_x = env.index.spec_value(x, obstacles)
        fired = False
        try:
            if stack.issa is None:
                oracle = StatusOracle(x, env.checker, env.index, obstacles, env.dt) if obstacles else None
                status = oracle(u_r) if oracle else SafetyStatus.SAFE
                u_app, phase, queries = u_r, Phase.PASS_THROUGH, (oracle.queries if oracle else 0)
            else:
                res = safeguard(x, u_r, env.checker, env.index, obstacles, env.dt, stack.issa,
                                rng=rngs["directions"])
                status = SafetyStatus.SAFE if res.phase == Phase.PASS_THROUGH else SafetyStatus.UNSAFE
                u_app, phase, queries = res.control, res.phase, res.queries
                if stack.trigger is not None and obstacles:
                    oracle = StatusOracle(x, env.checker, env.index, obstacles, env.dt)
                    u_app, fired = ctrigger(x, u_app, _critical_alpha(x, obstacles, env.index), stack.trigger,
                                            oracle, rngs["trigger"], budget=stack.trigger_budget)
                    queries += oracle.queries
        except (InfeasibleError, RuntimeError) as exc:
            trace.flags.append(f"infeasible at step {t}")
            raise EpisodeInfeasible(t, trace, exc) from exc
        trace.records.append(StepRecord(
            t, x.px, x.py, x.theta, x.v,
            float(u_r[0]), float(u_r[1]), float(u_app[0]), float(u_app[1]),
            float(phi_x), float(phi0_x), str(status), str(phase), bool(fired), int(queries),
        ))
        if stack.trigger is not None and len(obstacles) > 1:
            band = -stack.trigger.delta_phi_max
            if sum(1 for p in _index_terms(x, obstacles, env.index) if p >= band) > 1:
                crowded += 1
        x_next = env.model.step(x, u_app, env.dt)
        if env.w_bound is not None and obstacles and x.v > 0:
            try:
                a0 = _critical_alpha(x, obstacles, env.index)
                a1 = relative_kinematics(x_next, obstacles[env.index.critical(x, obstacles)]).alpha
                if abs(math.remainder(a1 - a0, 2 * math.pi)) / env.dt > env.w_bound:
                    fast_turns += 1
            except SingularGeometryError:
                pass
        x = x_next
        obstacles = advance_obstacles(obstacles, env.dt)
    if crowded:
        log.info("%d steps with more than one safety-critical obstacle", crowded)
        trace.flags.append(f"sparse-obstacle assumption violated at {crowded} steps")
    if fast_turns:
        trace.flags.append(f"measured bearing rate above w bound at {fast_turns} steps")
    return trace
