"""Nominal (safety-unaware) controllers."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from issakit.core import Dynamics, RobotState

Policy = Callable[[RobotState], np.ndarray]


def _clip(u, box):
    box_arr = np.asarray(box, dtype=float)
    return np.clip(np.asarray(u, dtype=float), box_arr[:, 0], box_arr[:, 1])


def nominal_constant_forward(control: Sequence[float]) -> Policy:
    """Always the same command, e.g. ``(v_c, 0)`` for the toy unicycle."""
    u = np.asarray(control, dtype=float)

    def policy(state: RobotState) -> np.ndarray:
        return u.copy()

    return policy


def nominal_goal_seek(
    goal: Sequence[float],
    model: Dynamics,
    gains: Sequence[float] = (1.0, 2.0),
    v_max: float | None = None,
) -> Policy:
    """Proportional controller on heading error and distance to ``goal``.

    ``gains = (k_dist, k_heading)``. With a speed state the first control is an
    acceleration tracking ``min(v_max, k_dist * dist)``; otherwise it is the
    speed itself.
    """
    gx, gy = float(goal[0]), float(goal[1])
    k_d, k_h = float(gains[0]), float(gains[1])
    box = model.control_box
    has_speed = model.has_speed

    def policy(state: RobotState) -> np.ndarray:
        dx, dy = gx - state.px, gy - state.py
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            err = 0.0
        else:
            err = math.remainder(math.atan2(dy, dx) - state.theta, 2.0 * math.pi)
        speed_ref = k_d * dist
        if v_max is not None:
            speed_ref = min(speed_ref, v_max)
        first = (speed_ref - state.v) * k_d if has_speed else speed_ref
        return _clip((first, k_h * err), box)

    return policy
