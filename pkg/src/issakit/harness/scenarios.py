"""Ready-made environments: the toy unicycle comparison and random second-order layouts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from issakit.core import Obstacle, RobotState, SecondOrderRobot, SubsteppedDynamics, SystemLimits, ToyUnicycle
from issakit.harness.episode import Env
from issakit.safety_index import SafetyIndex, SafetyIndexParams, ToyIndex

TOY_MODES = ("discrete", "continuous-approx")


@dataclass(frozen=True)
class ToyScenario:
    """Unicycle driving straight at a slightly offset obstacle.

    The obstacle sits close enough that the heading line starts inside the
    clearance band, so the index is positive at ``t = 0``.
    """

    obstacle: tuple[float, float] = (0.7, 0.2)
    r: float = 0.25
    R: float = 0.25
    eta0: float = 0.006
    v_c: float = 0.8
    dt: float = 0.01
    micro_dt: float = 1e-5
    steps: int = 100

    def env(self, mode: str) -> Env:
        if mode not in TOY_MODES:
            raise ValueError(f"toy mode must be one of {TOY_MODES}, got {mode!r}")
        model = ToyUnicycle()
        obs = [Obstacle(self.obstacle[0], self.obstacle[1], self.R)]
        start = RobotState(0.0, 0.0, 0.0)
        if mode == "discrete":
            return Env(model, ToyIndex(self.r, self.R, self.eta0), obs, self.dt, start)
        # the status check sees one micro-step, so the per-check decay shrinks with it
        index = ToyIndex(self.r, self.R, self.eta0, eta_scale=self.micro_dt / self.dt)
        return Env(model, index, obs, self.dt, start, status_model=SubsteppedDynamics(model, self.micro_dt))


#: second-order robot and index used by the verification experiments
DEFAULT_LIMITS = SystemLimits(v_max=1.0, a_min=-2.0, a_max=2.0, w_min=-2.0, w_max=2.0, dt=0.05)
DEFAULT_PARAMS = SafetyIndexParams(
    sigma=0.1, n=1, k=6.0, eta0=0.2, d_min=0.4, sigma_star=0.06, mode="discrete"
)
OBSTACLE_RADIUS = 0.25


def random_layout(
    rng: np.random.Generator,
    n_obstacles: int,
    d_min: float,
    radius: float = OBSTACLE_RADIUS,
    arena: tuple[float, float] = (1.0, 5.0),
    min_gap: float | None = None,
    start_clear: float | None = None,
) -> tuple[Obstacle, ...]:
    """Static obstacles scattered between the origin and ``(6, 0)``, pairwise well separated."""
    min_gap = 3.0 * d_min if min_gap is None else min_gap
    start_clear = 2.0 * d_min if start_clear is None else start_clear
    out: list[Obstacle] = []
    for _ in range(10_000):
        if len(out) == n_obstacles:
            break
        c = np.array([rng.uniform(*arena), rng.uniform(-1.0, 1.0)])
        if math.hypot(*c) < start_clear or math.hypot(c[0] - 6.0, c[1]) < start_clear:
            continue
        if any(math.hypot(c[0] - o.cx, c[1] - o.cy) < min_gap for o in out):
            continue
        out.append(Obstacle(float(c[0]), float(c[1]), radius))
    if len(out) < n_obstacles:
        raise RuntimeError("could not place obstacles")
    return tuple(out)


def second_order_env(
    obstacles, start: RobotState | None = None, limits: SystemLimits = DEFAULT_LIMITS,
    params: SafetyIndexParams = DEFAULT_PARAMS,
) -> Env:
    model = SecondOrderRobot(limits)
    start = RobotState(0.0, 0.0, 0.0, 0.0) if start is None else start
    return Env(model, SafetyIndex(params), tuple(obstacles), limits.dt, start, w_bound=limits.w_m)


def unsafe_start(
    rng: np.random.Generator, params: SafetyIndexParams, limits: SystemLimits, radius: float = OBSTACLE_RADIUS,
    max_tries: int = 100_000,
) -> tuple[RobotState, Obstacle]:
    """Robot state with ``phi > 0`` w.r.t. a single obstacle at the origin, by rejection."""
    obs = Obstacle(0.0, 0.0, radius)
    index = SafetyIndex(params)
    for _ in range(max_tries):
        d = rng.uniform(params.d_min, params.d_min + params.sigma + params.k * limits.v_max)
        b = rng.uniform(-math.pi, math.pi)
        s = RobotState(d * math.cos(b), d * math.sin(b), float(rng.uniform(-math.pi, math.pi)),
                       float(rng.uniform(0.0, limits.v_max)))
        if index.value(s, [obs]) > 0:
            return s, obs
    raise RuntimeError("no unsafe start found")


def approaching_start(
    rng: np.random.Generator, params: SafetyIndexParams, limits: SystemLimits, clearance: float = 0.2,
    radius: float = OBSTACLE_RADIUS, max_tries: int = 100_000,
) -> tuple[RobotState, Obstacle]:
    """State with ``phi > 0`` only because it closes in on the obstacle, not because it is too close.

    The range is at least ``d_min + sigma + clearance``, so braking alone can
    bring ``phi`` below zero before the clearance is used up.
    """
    obs = Obstacle(0.0, 0.0, radius)
    index = SafetyIndex(params)
    lo = params.d_min + params.sigma + clearance
    hi = max(lo, params.d_min + params.sigma + params.k * limits.v_max)
    for _ in range(max_tries):
        d = rng.uniform(lo, hi)
        b = rng.uniform(-math.pi, math.pi)
        heading = b + math.pi + rng.uniform(-math.pi / 3, math.pi / 3)
        s = RobotState(d * math.cos(b), d * math.sin(b), math.remainder(heading, 2 * math.pi),
                       float(rng.uniform(limits.v_max / 2, limits.v_max)))
        if index.value(s, [obs]) > 0:
            return s, obs
    raise RuntimeError("no approaching start found")
