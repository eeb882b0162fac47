"""Safety specification, energy-function safety indices and their design rules.

The index family is ``phi_i = sigma + d_min^n - d_i^n - k * d_dot_i`` with
``phi = max_i phi_i``. A control ``u`` is SAFE at ``x`` when

    phi(f(x, u)) <= max(phi(x) - eta, 0) - margin

where ``eta`` is zero in continuous mode and ``eta0 * |cos(alpha)|`` in
discrete mode, and ``margin`` is the extra boundary ``sigma_star``.
"""
from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from issakit import kernels
from issakit.core import (
    Dynamics,
    Obstacle,
    RobotState,
    SystemLimits,
    advance_obstacles,
    check_control,
    obstacles_array,
    relative_kinematics,
    step_many,
)

#: value of phi and phi0 with no obstacles; finite so traces stay ordered
SENTINEL = -1e18

MODES = ("continuous", "discrete")


class SafetyStatus(enum.Enum):
    SAFE = "SAFE"
    UNSAFE = "UNSAFE"

    def __str__(self):
        return self.value


class InfeasibleError(RuntimeError):
    """No parameter or control satisfies the requested safety condition."""


class UnsupportedExponentError(ValueError):
    pass


@dataclass(frozen=True)
class SafetyIndexParams:
    sigma: float
    n: float
    k: float
    eta0: float = 0.0
    d_min: float = 1.0
    sigma_star: float = 0.0
    mode: str = "continuous"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sigma < 0 or not self.n > 0 or self.k < 0:
            raise ValueError("need sigma >= 0, n > 0, k >= 0")
        if self.eta0 < 0 or not self.d_min > 0 or self.sigma_star < 0:
            raise ValueError("need eta0 >= 0, d_min > 0, sigma_star >= 0")
        if self.sigma_star > 0:
            reach = (self.sigma + self.d_min**self.n) ** (1.0 / self.n)
            if not reach > self.d_min + self.sigma_star:
                raise ValueError(
                    f"sigma_star={self.sigma_star} too large: need (sigma + d_min^n)^(1/n) = {reach:.6g}"
                    f" > d_min + sigma_star = {self.d_min + self.sigma_star:.6g}"
                )


def phi0(state: RobotState, obstacles: Sequence[Obstacle], d_min: float) -> float:
    """Static specification ``max_i (d_min - d_i)``."""
    if not obstacles:
        return SENTINEL
    return max(d_min - math.hypot(o.cx - state.px, o.cy - state.py) for o in obstacles)


def phi_terms(state: RobotState, obstacles: Sequence[Obstacle], params: SafetyIndexParams) -> list[float]:
    base = params.sigma + params.d_min ** float(params.n)
    out = []
    for o in obstacles:
        rk = relative_kinematics(state, o)
        out.append(base - rk.d ** float(params.n) - params.k * rk.d_dot)
    return out


def phi(state: RobotState, obstacles: Sequence[Obstacle], params: SafetyIndexParams) -> float:
    if not obstacles:
        return SENTINEL
    return max(phi_terms(state, obstacles, params))


def toy_phi(state: RobotState, obstacle: Obstacle, r: float, R: float) -> float:
    """Heading-line clearance index: positive when the heading line passes within ``r + R``."""
    p = (obstacle.cx - state.px) * math.sin(state.theta) - (obstacle.cy - state.py) * math.cos(state.theta)
    return (r + R) ** 2 - p * p


def eta_online(eta0: float, alpha: float) -> float:
    return eta0 * abs(math.cos(alpha))


# -- design rules --------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleCheck:
    name: str
    ok: bool
    lhs: float
    rhs: float
    note: str = ""
    #: "<=" rules pass when lhs <= rhs, ">" rules when lhs > rhs
    relation: str = "<="

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.relation == "<=" else self.lhs - self.rhs


@dataclass(frozen=True)
class RuleReport:
    checks: tuple[RuleCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failing(self) -> tuple[RuleCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)

    def __bool__(self):
        return self.ok


CONTINUOUS_RULE = "continuous rule: n(sigma + d_min^n + k v_max)^((n-1)/n) / k <= -a_min / v_max"
RANGE_RATE_RULE = "range-rate margin: sigma > -d_dot*_min dt"
BRAKING_RULE = "braking authority: (eta0/dt + v_max) / k <= min(-a_min, a_max)"
SIGMA_STAR_STEP_RULE = "boundary layer covers one step: sigma_star > -d_dot*_min dt"
SIGMA_STAR_REACH_RULE = "boundary layer inside index margin: (sigma + d_min^n)^(1/n) > d_min + sigma_star"
TIME_STEP_RULE = (
    "time step: a_min/2 + v_max/(4 dt) > (a_m + v_max w_m)(-a_min/v_max + w_m) dt"
)


def _continuous_lhs(n: float, sigma: float, d_min: float, k: float, v_max: float) -> float:
    return n * (sigma + d_min**n + k * v_max) ** ((n - 1.0) / n) / k


def validate_continuous_rule(params: SafetyIndexParams, limits: SystemLimits) -> RuleCheck:
    rhs = -limits.a_min / limits.v_max
    if limits.a_min >= 0:
        return RuleCheck(CONTINUOUS_RULE, False, math.inf, rhs, "a_min = 0: no braking authority")
    if params.k <= 0:
        return RuleCheck(CONTINUOUS_RULE, False, math.inf, rhs, "k must be positive")
    lhs = _continuous_lhs(float(params.n), params.sigma, params.d_min, params.k, limits.v_max)
    return RuleCheck(CONTINUOUS_RULE, lhs <= rhs, lhs, rhs)


def validate_discrete_rule(
    params: SafetyIndexParams, limits: SystemLimits, d_dot_star_min: float
) -> RuleReport:
    if params.n != 1:
        raise UnsupportedExponentError(f"discrete-time rule requires n = 1, got n = {params.n}")
    dt = limits.dt
    checks = [
        RuleCheck(RANGE_RATE_RULE, params.sigma > -d_dot_star_min * dt, params.sigma,
                  -d_dot_star_min * dt, relation=">"),
    ]
    authority = limits.a_sym
    if params.k <= 0:
        checks.append(RuleCheck(BRAKING_RULE, False, math.inf, authority, "k must be positive"))
    else:
        lhs = (params.eta0 / dt + limits.v_max) / params.k
        checks.append(RuleCheck(BRAKING_RULE, lhs <= authority, lhs, authority))
    if params.sigma_star > 0:
        step = -d_dot_star_min * dt
        checks.append(RuleCheck(SIGMA_STAR_STEP_RULE, params.sigma_star > step, params.sigma_star, step,
                                relation=">"))
        reach = params.sigma + params.d_min
        checks.append(
            RuleCheck(SIGMA_STAR_REACH_RULE, reach > params.d_min + params.sigma_star,
                      reach, params.d_min + params.sigma_star, relation=">")
        )
    return RuleReport(tuple(checks))


def validate_discrete_assumptions(limits: SystemLimits) -> RuleCheck:
    dt = limits.dt
    lhs = limits.a_min / 2.0 + limits.v_max / (4.0 * dt)
    rhs = (limits.a_m + limits.v_max * limits.w_m) * (-limits.a_min / limits.v_max + limits.w_m) * dt
    return RuleCheck(TIME_STEP_RULE, lhs > rhs, lhs, rhs, relation=">")


def min_braking_gain(eta0: float, limits: SystemLimits) -> float:
    """Smallest ``k`` passing the braking-authority clause."""
    return (eta0 / limits.dt + limits.v_max) / limits.a_sym


def synthesize_k(
    limits: SystemLimits, n: float, sigma: float, d_min: float, k_cap: float = 1e6, rtol: float = 1e-9
) -> float:
    """Smallest ``k`` satisfying the continuous-time rule.

    The left side of the rule is strictly decreasing in ``k``; this is checked on
    a sample of the bracket before bisecting.
    """
    if limits.a_min >= 0:
        raise InfeasibleError("a_min = 0: no braking authority, no k satisfies the rule")
    rhs = -limits.a_min / limits.v_max
    if n == 1:
        return limits.v_max / -limits.a_min

    def g(k):
        return _continuous_lhs(float(n), sigma, d_min, k, limits.v_max) - rhs

    hi = 1e-6
    while g(hi) > 0:
        hi *= 2.0
        if hi > k_cap:
            raise InfeasibleError(f"no k <= {k_cap} satisfies the continuous rule")
    lo = hi / 2.0 if hi > 1e-6 else 0.0
    if lo > 0:
        probe = np.linspace(lo, hi, 65)
        vals = [g(k) for k in probe]
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise InfeasibleError("rule left side is not decreasing in k on the bracket")
    else:
        return hi
    while (hi - lo) > rtol * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def estimate_d_dot_star_min(
    model: Dynamics,
    limits: SystemLimits,
    d_range: tuple[float, float],
    samples: int = 100_000,
    seed: int = 0,
    safety_factor: float = 1.1,
) -> float:
    """Minimum one-step finite-difference range rate ``(d_{t+1} - d_t) / dt`` over random pairs.

    States are drawn around an obstacle at the origin with distance in
    ``d_range``; the result is scaled by ``safety_factor`` (more negative).
    """
    rng = np.random.default_rng(seed)
    states, controls = _sample_pairs(rng, model, limits, d_range, samples)
    nxt = step_many(model, states, controls, limits.dt)
    d0 = np.hypot(states[:, 0], states[:, 1])
    d1 = np.hypot(nxt[:, 0], nxt[:, 1])
    rate = float(np.min((d1 - d0) / limits.dt))
    return rate * safety_factor if rate < 0 else rate


def _sample_pairs(rng, model, limits, d_range, samples):
    d = rng.uniform(d_range[0], d_range[1], samples)
    bearing = rng.uniform(-math.pi, math.pi, samples)
    states = np.empty((samples, 4))
    states[:, 0] = d * np.cos(bearing)
    states[:, 1] = d * np.sin(bearing)
    states[:, 2] = rng.uniform(-math.pi, math.pi, samples)
    states[:, 3] = rng.uniform(0.0, limits.v_max, samples) if model.has_speed else 0.0
    box = np.asarray(model.control_box, dtype=float)
    controls = rng.uniform(box[:, 0], box[:, 1], (samples, len(box)))
    return states, controls


# -- indices as objects the safeguard can query ------------------------------------------------


@dataclass(frozen=True)
class SafetyIndex:
    """The parameterised index with its mode-dependent decay and margin."""

    params: SafetyIndexParams

    @property
    def margin(self) -> float:
        return self.params.sigma_star if self.params.mode == "discrete" else 0.0

    def value(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        return phi(state, obstacles, self.params)

    def critical(self, state: RobotState, obstacles: Sequence[Obstacle]) -> int:
        terms = phi_terms(state, obstacles, self.params)
        return max(range(len(terms)), key=terms.__getitem__)

    def eta(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        if self.params.mode == "continuous" or not obstacles:
            return 0.0
        alpha = relative_kinematics(state, obstacles[self.critical(state, obstacles)]).alpha
        return eta_online(self.params.eta0, alpha)

    def value_many(self, states: np.ndarray, obstacles: Sequence[Obstacle]) -> np.ndarray:
        p = self.params
        return kernels.phi_index(states, obstacles_array(obstacles), p.sigma, p.n, p.k, p.d_min)

    def spec_value(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        return phi0(state, obstacles, self.params.d_min)


@dataclass(frozen=True)
class ToyIndex:
    """Heading-line index of the toy unicycle problem.

    ``eta_scale`` rescales the per-step decay when the status check runs on a
    shorter internal step than the world (continuous-time emulation).
    """

    r: float = 0.25
    R: float = 0.25
    eta0: float = 0.006
    eta_scale: float = 1.0
    margin: float = field(default=0.0)

    def value(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        if not obstacles:
            return SENTINEL
        return max(toy_phi(state, o, self.r, self.R) for o in obstacles)

    def critical(self, state: RobotState, obstacles: Sequence[Obstacle]) -> int:
        vals = [toy_phi(state, o, self.r, self.R) for o in obstacles]
        return max(range(len(vals)), key=vals.__getitem__)

    def eta(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        if not obstacles:
            return 0.0
        alpha = relative_kinematics(state, obstacles[self.critical(state, obstacles)]).alpha
        return eta_online(self.eta0, alpha) * self.eta_scale

    def value_many(self, states: np.ndarray, obstacles: Sequence[Obstacle]) -> np.ndarray:
        if not obstacles:
            return np.full(len(states), SENTINEL)
        rr = self.r + self.R
        return np.max([kernels.phi_toy(states, o.cx, o.cy, rr) for o in obstacles], axis=0)

    def spec_value(self, state: RobotState, obstacles: Sequence[Obstacle]) -> float:
        if not obstacles:
            return SENTINEL
        return max(self.r + self.R - math.hypot(o.cx - state.px, o.cy - state.py) for o in obstacles)


# -- one-step status ---------------------------------------------------------------------------


class StatusOracle:
    """SAFE/UNSAFE classifier for controls at a fixed state.

    Each call spends exactly one dynamics query. ``queries`` counts them.
    """

    def __init__(
        self,
        state: RobotState,
        model: Dynamics,
        index,
        obstacles: Sequence[Obstacle],
        dt: float,
        margin: float | None = None,
    ):
        self.state = state
        self.model = model
        self.index = index
        self.obstacles = tuple(obstacles)
        self.next_obstacles = advance_obstacles(self.obstacles, getattr(model, "micro_dt", dt))
        self.dt = dt
        self.margin = index.margin if margin is None else margin
        self.phi = index.value(state, self.obstacles)
        self.eta = index.eta(state, self.obstacles)
        self.threshold = max(self.phi - self.eta, 0.0) - self.margin
        self.queries = 0
        self._lock = threading.Lock()

    def _count(self, n: int) -> None:
        with self._lock:
            self.queries += n

    def next_phi(self, control: Sequence[float]) -> float:
        self._count(1)
        nxt = self.model.step(self.state, control, self.dt)
        return self.index.value(nxt, self.next_obstacles)

    def __call__(self, control: Sequence[float]) -> SafetyStatus:
        # ties count as SAFE
        return SafetyStatus.SAFE if self.next_phi(control) <= self.threshold else SafetyStatus.UNSAFE

    def next_phi_many(self, controls: np.ndarray) -> np.ndarray:
        controls = np.asarray(controls, dtype=float).reshape(-1, len(self.model.control_box))
        states = np.repeat(self.state.as_array()[None, :], len(controls), axis=0)
        nxt = step_many(self.model, states, controls, self.dt)
        self._count(len(controls))
        return self.index.value_many(nxt, self.next_obstacles)

    def safe_mask(self, controls: np.ndarray) -> np.ndarray:
        return self.next_phi_many(controls) <= self.threshold


def safety_status(
    x: RobotState,
    u: Sequence[float],
    dynamics: Dynamics,
    index,
    obstacles: Sequence[Obstacle],
    dt: float,
    margin: float | None = None,
) -> SafetyStatus:
    check_control(u, dynamics.control_box)
    return StatusOracle(x, dynamics, index, obstacles, dt, margin)(u)


StatusFn = Callable[[Sequence[float]], SafetyStatus]
