"""Domain types, the black-box dynamics contract and the built-in 2D robot models.

Two simulators ship with the package:

``ToyUnicycle``
    First-order unicycle, state ``(px, py, theta)``, control ``(v_cmd, w_cmd)``.
``SecondOrderRobot``
    State ``(px, py, theta, v)``, control ``(a_cmd, w_cmd)``. Speed is integrated
    and clamped to ``[0, v_max]``; position advances with the pre-update speed and
    heading (explicit Euler under zero-order hold).

Every model is used only through point-wise queries ``step(state, control)``;
nothing downstream inspects its equations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from issakit import kernels

BOX_TOL = 1e-12


class DomainError(ValueError):
    """A control lies outside the control box of the active model."""


class SingularGeometryError(ValueError):
    """Robot and obstacle centers coincide; relative angles are undefined."""


def wrap_angle(theta: float) -> float:
    """Wrap to ``[-pi, pi)``; angles already in range are returned unchanged."""
    if -math.pi <= theta < math.pi:
        return theta
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def _signed_angle(a: float) -> float:
    """Wrap to ``(-pi, pi]``."""
    w = wrap_angle(a)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class RobotState:
    px: float
    py: float
    theta: float
    v: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.theta, self.v], dtype=float)

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "RobotState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]) if len(arr) > 3 else 0.0)


@dataclass(frozen=True)
class Obstacle:
    cx: float
    cy: float
    radius: float
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")

    def advanced(self, dt: float) -> "Obstacle":
        if self.vx == 0.0 and self.vy == 0.0:
            return self
        return Obstacle(self.cx + self.vx * dt, self.cy + self.vy * dt, self.radius, self.vx, self.vy)


def advance_obstacles(obstacles: Sequence[Obstacle], dt: float) -> tuple[Obstacle, ...]:
    return tuple(o.advanced(dt) for o in obstacles)


def obstacles_array(obstacles: Sequence[Obstacle]) -> np.ndarray:
    """``(M, 4)`` array of ``cx, cy, vx, vy`` rows for the batch kernels."""
    if not obstacles:
        return np.zeros((0, 4))
    return np.array([[o.cx, o.cy, o.vx, o.vy] for o in obstacles], dtype=float)


@dataclass(frozen=True)
class SystemLimits:
    v_max: float
    a_min: float
    a_max: float
    w_min: float
    w_max: float
    dt: float
    control_box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.a_min <= 0 <= self.a_max:
            raise ValueError("need a_min <= 0 <= a_max")
        if not self.w_min <= 0 <= self.w_max:
            raise ValueError("need w_min <= 0 <= w_max")
        box = tuple((float(lo), float(hi)) for lo, hi in self.control_box)
        for lo, hi in box:
            if lo > hi:
                raise ValueError(f"empty control box interval [{lo}, {hi}]")
        object.__setattr__(self, "control_box", box)

    @property
    def a_m(self) -> float:
        return max(-self.a_min, self.a_max)

    @property
    def w_m(self) -> float:
        return max(-self.w_min, self.w_max)

    @property
    def a_sym(self) -> float:
        """``min{-a_min, a_max}``, the symmetric acceleration authority."""
        return min(-self.a_min, self.a_max)


@dataclass(frozen=True)
class RelativeKinematics:
    d: float
    d_dot: float
    alpha: float
    v_rel: float


def relative_kinematics(state: RobotState, obs: Obstacle) -> RelativeKinematics:
    """Distance, range rate and bearing of ``obs`` seen from ``state``.

    Velocities are taken in the obstacle frame, so a moving obstacle's
    velocity is subtracted before projecting onto the line of sight.
    """
    rx = obs.cx - state.px
    ry = obs.cy - state.py
    d = math.hypot(rx, ry)
    if d == 0.0:
        raise SingularGeometryError(f"robot center coincides with obstacle at ({obs.cx}, {obs.cy})")
    c = math.cos(state.theta)
    s = math.sin(state.theta)
    vx = state.v * c - obs.vx
    vy = state.v * s - obs.vy
    d_dot = -(rx * vx + ry * vy) / d
    alpha = _signed_angle(math.atan2(ry, rx) - state.theta)
    return RelativeKinematics(d=d, d_dot=d_dot, alpha=alpha, v_rel=math.hypot(vx, vy))


class Dynamics(Protocol):
    """What the safeguard is allowed to know about a robot model."""

    control_box: tuple[tuple[float, float], ...]
    has_speed: bool

    def step(self, state: RobotState, control: Sequence[float], dt: float) -> RobotState: ...


def in_box(control: Sequence[float], box: Sequence[tuple[float, float]], tol: float = BOX_TOL) -> bool:
    return all(lo - tol <= u <= hi + tol for u, (lo, hi) in zip(control, box))


def check_control(control: Sequence[float], box: Sequence[tuple[float, float]]) -> None:
    if len(control) != len(box):
        raise DomainError(f"control has {len(control)} components, box has {len(box)}")
    if not in_box(control, box):
        raise DomainError(f"control {tuple(control)} outside box {tuple(box)}")


def dynamics_eval(model: Dynamics, state: RobotState, control: Sequence[float], dt: float) -> RobotState:
    """One black-box query ``x_{t+1} = f(x_t, u_t)`` with the box precondition enforced."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    check_control(control, model.control_box)
    return model.step(state, control, dt)


@dataclass(frozen=True)
class ToyUnicycle:
    """Kinematic unicycle commanded directly in speed and turn rate."""

    control_box: tuple[tuple[float, float], ...] = ((0.0, 2.0), (-5.0, 5.0))
    has_speed: bool = field(default=False, init=False)
    name: str = field(default="toy", init=False)

    def step(self, state: RobotState, control: Sequence[float], dt: float) -> RobotState:
        v_cmd, w_cmd = float(control[0]), float(control[1])
        return RobotState(
            state.px + math.cos(state.theta) * v_cmd * dt,
            state.py + math.sin(state.theta) * v_cmd * dt,
            wrap_angle(state.theta + w_cmd * dt),
            0.0,
        )

    def step_many(self, states: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
        return kernels.step_toy(states, controls, dt)

    def actuation(self, control: Sequence[float]) -> tuple[float, float]:
        return 0.0, float(control[1])


@dataclass(frozen=True)
class SecondOrderRobot:
    """Planar robot with speed state, commanded in acceleration and turn rate."""

    limits: SystemLimits
    has_speed: bool = field(default=True, init=False)
    name: str = field(default="second_order", init=False)

    @property
    def control_box(self) -> tuple[tuple[float, float], ...]:
        lim = self.limits
        return lim.control_box or ((lim.a_min, lim.a_max), (lim.w_min, lim.w_max))

    def step(self, state: RobotState, control: Sequence[float], dt: float) -> RobotState:
        lim = self.limits
        a = min(max(float(control[0]), lim.a_min), lim.a_max)
        w = min(max(float(control[1]), lim.w_min), lim.w_max)
        v_new = min(max(state.v + a * dt, 0.0), lim.v_max)
        return RobotState(
            state.px + math.cos(state.theta) * state.v * dt,
            state.py + math.sin(state.theta) * state.v * dt,
            wrap_angle(state.theta + w * dt),
            v_new,
        )

    def step_many(self, states: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
        lim = self.limits
        return kernels.step_second_order(
            states, controls, dt, lim.v_max, lim.a_min, lim.a_max, lim.w_min, lim.w_max
        )

    def actuation(self, control: Sequence[float]) -> tuple[float, float]:
        """Commanded ``(a, w)``; used as the conservative stand-in for obstacle-frame rates."""
        return float(control[0]), float(control[1])


def step_many(model: Dynamics, states: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    """Batch query, using the model's vectorised path when it has one."""
    fast = getattr(model, "step_many", None)
    if fast is not None:
        return fast(np.ascontiguousarray(states, dtype=float), np.ascontiguousarray(controls, dtype=float), dt)
    out = np.empty((len(states), 4))
    for i, (s, u) in enumerate(zip(states, controls)):
        out[i] = model.step(RobotState.from_array(s), u, dt).as_array()
    return out


@dataclass(frozen=True)
class SubsteppedDynamics:
    """Wraps a model so that ``step`` integrates with a fixed internal ``dt``.

    Used to emulate a continuous-time safety check: the status oracle sees the
    state one micro-step ahead while the world advances the full ``dt``.
    """

    inner: Dynamics
    micro_dt: float

    @property
    def control_box(self):
        return self.inner.control_box

    @property
    def has_speed(self):
        return self.inner.has_speed

    def step(self, state: RobotState, control: Sequence[float], dt: float) -> RobotState:
        return self.inner.step(state, control, self.micro_dt)

    def actuation(self, control):
        return self.inner.actuation(control)
