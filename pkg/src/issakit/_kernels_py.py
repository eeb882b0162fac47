"""Vectorised numpy versions of the batch kernels, used when the extension is not built."""
import numpy as np


def _wrap(theta):
    inside = (theta >= -np.pi) & (theta < np.pi)
    return np.where(inside, theta, np.mod(theta + np.pi, 2.0 * np.pi) - np.pi)


def step_toy(states, controls, dt):
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    th = states[:, 2]
    out = np.empty((len(states), 4))
    out[:, 0] = states[:, 0] + np.cos(th) * controls[:, 0] * dt
    out[:, 1] = states[:, 1] + np.sin(th) * controls[:, 0] * dt
    out[:, 2] = _wrap(th + controls[:, 1] * dt)
    out[:, 3] = 0.0
    return out


def step_second_order(states, controls, dt, v_max, a_min, a_max, w_min, w_max):
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    th = states[:, 2]
    v = states[:, 3]
    a = np.clip(controls[:, 0], a_min, a_max)
    w = np.clip(controls[:, 1], w_min, w_max)
    out = np.empty((len(states), 4))
    out[:, 0] = states[:, 0] + np.cos(th) * v * dt
    out[:, 1] = states[:, 1] + np.sin(th) * v * dt
    out[:, 2] = _wrap(th + w * dt)
    out[:, 3] = np.clip(v + a * dt, 0.0, v_max)
    return out


def phi_index(states, obstacles, sigma, n_exp, k, d_min):
    states = np.asarray(states, dtype=float)
    obstacles = np.asarray(obstacles, dtype=float).reshape(-1, 4)
    if len(obstacles) == 0:
        return np.full(len(states), -1e18)
    c = np.cos(states[:, 2])[:, None]
    s = np.sin(states[:, 2])[:, None]
    rx = obstacles[None, :, 0] - states[:, 0:1]
    ry = obstacles[None, :, 1] - states[:, 1:2]
    d = np.hypot(rx, ry)
    vx = states[:, 3:4] * c - obstacles[None, :, 2]
    vy = states[:, 3:4] * s - obstacles[None, :, 3]
    d_dot = -(rx * vx + ry * vy) / d
    vals = (sigma + d_min ** n_exp) - d ** n_exp - k * d_dot
    return vals.max(axis=1)


def phi_toy(states, ox, oy, rr):
    states = np.asarray(states, dtype=float)
    p = (ox - states[:, 0]) * np.sin(states[:, 2]) - (oy - states[:, 1]) * np.cos(states[:, 2])
    return rr * rr - p * p
