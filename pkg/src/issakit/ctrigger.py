"""Convergence trigger and the offline estimators of the quantities it needs.

When the robot is unsafe but nearly tangent to the critical obstacle
(``|cos alpha|`` small) the required decrease ``eta0 |cos alpha|`` vanishes and
the projected control may let it orbit forever. The trigger then replaces the
projected control by a SAFE control that either changes speed (slow robot) or
turns hard (fast robot), which moves ``alpha`` away from tangency.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from issakit.core import (
    Dynamics,
    Obstacle,
    RobotState,
    SystemLimits,
    _signed_angle,
    relative_kinematics,
    step_many,
)
from issakit.safety_index import (
    SafetyIndex,
    SafetyIndexParams,
    StatusOracle,
    _sample_pairs,
)

COS_GUARD = math.sqrt(3.0) / 2.0


class TriggerFailure(RuntimeError):
    """No admissible SAFE control found within the sampling budget."""


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TriggerProps:
    w_trigger: float
    delta_min: float
    delta_phi_max: float
    a_min: float
    a_max: float
    v_max: float
    cos_guard: float = COS_GUARD
    divisor: float = 2.0

    def __post_init__(self):
        if not self.w_trigger > 0:
            raise ValueError("w_trigger must be positive; the model cannot turn and the trigger is unusable")
        if not self.delta_min > 0:
            raise ValueError("delta_min must be positive")
        if self.delta_phi_max < 0:
            raise ValueError("delta_phi_max must be >= 0")

    @property
    def a_sym(self) -> float:
        return min(-self.a_min, self.a_max)

    @property
    def cos_threshold(self) -> float:
        return min(self.cos_guard, self.delta_min / self.divisor)


def require_trigger_support(model: Dynamics) -> None:
    if not getattr(model, "has_speed", False):
        raise ValueError("the convergence trigger needs a model with a speed state")


def guard_active(alpha: float, phi_x: float, props: TriggerProps) -> bool:
    return abs(math.cos(alpha)) < props.cos_threshold and phi_x > 0


def trigger_region(
    state: RobotState, alpha: float, props: TriggerProps, box: Sequence[tuple[float, float]]
) -> tuple[str, list[tuple[np.ndarray, np.ndarray]]]:
    """Branch name and the admissible control region as a list of sub-boxes ``(lo, hi)``."""
    box_arr = np.asarray(box, dtype=float)
    lo, hi = box_arr[:, 0].copy(), box_arr[:, 1].copy()
    if state.v < props.v_max / 2.0:
        bound = props.a_sym / props.divisor
        if math.cos(alpha) < 0:
            lo[0] = max(lo[0], bound)
            return "accelerate", [(lo, hi)]
        hi[0] = min(hi[0], -bound)
        return "brake", [(lo, hi)]
    wt = abs(props.w_trigger) / props.divisor
    lo_n, hi_n = lo.copy(), hi.copy()
    hi_n[1] = min(hi_n[1], -wt)
    lo_p, hi_p = lo.copy(), hi.copy()
    lo_p[1] = max(lo_p[1], wt)
    return "turn", [(lo_n, hi_n), (lo_p, hi_p)]


def branch_satisfied(branch: str, actuation: tuple[float, float], state: RobotState, alpha: float,
                     props: TriggerProps) -> bool:
    a, w = actuation
    if branch == "accelerate":
        return a >= props.a_sym / props.divisor
    if branch == "brake":
        return a <= -props.a_sym / props.divisor
    return abs(w) >= abs(props.w_trigger) / props.divisor


def _sample_region(rng, parts, n):
    widths = np.array([np.prod(np.maximum(h - l, 0.0)) for l, h in parts])
    if widths.sum() == 0:
        return None
    pick = rng.choice(len(parts), size=n, p=widths / widths.sum())
    out = np.empty((n, len(parts[0][0])))
    for j, (l, h) in enumerate(parts):
        m = pick == j
        out[m] = rng.uniform(l, h, (int(m.sum()), len(l)))
    return out


def ctrigger(
    x: RobotState,
    u: Sequence[float],
    alpha: float,
    props: TriggerProps,
    oracle: StatusOracle,
    rng: np.random.Generator,
    budget: int = 10_000,
    batch: int = 250,
) -> tuple[np.ndarray, bool]:
    """Filter a SAFE control; returns ``(control, fired)``.

    ``oracle`` is the status classifier at ``x`` (it carries ``phi(x)``).
    Outside the guard the input array is returned as is.
    """
    if not guard_active(alpha, oracle.phi, props):
        return u, False
    model = oracle.model
    branch, parts = trigger_region(x, alpha, props, model.control_box)
    drawn = 0
    while drawn < budget:
        n = min(batch, budget - drawn)
        cand = _sample_region(rng, parts, n)
        if cand is None:
            break
        drawn += n
        safe = oracle.safe_mask(cand)
        for i in np.flatnonzero(safe):
            if branch_satisfied(branch, model.actuation(cand[i]), x, alpha, props):
                return cand[i], True
    raise TriggerFailure(
        f"no SAFE control in the '{branch}' region after {drawn} draws at state {x}"
        " (speed/turn authority or time-step assumptions may be violated)"
    )


# -- offline estimators ------------------------------------------------------------------------


def _control_grid(box, per_dim):
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _alpha_rates(model, limits, v, alphas, d_ref, controls):
    """Per (alpha, control) one-step ``(alpha, alpha')`` with the obstacle at range ``d_ref``."""
    out_a0, out_a1 = [], []
    for al in alphas:
        obs = Obstacle(d_ref * math.cos(al), d_ref * math.sin(al), 1.0)
        s = RobotState(0.0, 0.0, 0.0, v)
        states = np.repeat(s.as_array()[None, :], len(controls), axis=0)
        nxt = step_many(model, states, controls, limits.dt)
        a1 = np.arctan2(obs.cy - nxt[:, 1], obs.cx - nxt[:, 0]) - nxt[:, 2]
        a1 = (a1 + math.pi) % (2 * math.pi) - math.pi
        out_a0.append(np.full(len(controls), _signed_angle(al)))
        out_a1.append(a1)
    return np.array(out_a0), np.array(out_a1)


def _wrap_diff(a, b):
    return (a - b + np.pi) % (2 * np.pi) - np.pi


def estimate_w_trigger(
    model: Dynamics,
    limits: SystemLimits,
    d_ref: float,
    n_v: int = 5,
    n_alpha: int = 24,
    per_dim: int = 21,
) -> float:
    """``min`` over speed slices in ``[v_max/2, v_max]`` and bearings of the ``max`` one-step ``|alpha_dot|``.

    The bearing rate is measured by finite difference through the dynamics with
    a static obstacle at range ``d_ref``; the value depends on that placement.
    """
    controls = _control_grid(model.control_box, per_dim)
    alphas = np.linspace(-math.pi, math.pi, n_alpha, endpoint=False)
    best = math.inf
    speeds = np.linspace(limits.v_max / 2.0, limits.v_max, n_v) if model.has_speed else [0.0]
    for v in speeds:
        a0, a1 = _alpha_rates(model, limits, float(v), alphas, d_ref, controls)
        rate = np.abs(_wrap_diff(a1, a0)) / limits.dt
        best = min(best, float(np.min(np.max(rate, axis=1))))
    return best


def estimate_delta_min(
    model: Dynamics,
    limits: SystemLimits,
    w_trigger: float,
    d_ref: float,
    n_v: int = 5,
    n_alpha: int = 48,
    per_dim: int = 21,
    safety_factor: float = 0.9,
    cos_guard: float = COS_GUARD,
) -> float:
    """Smallest one-step ``|delta cos(alpha)|`` among near-tangent states and hard-turn controls."""
    controls = _control_grid(model.control_box, per_dim)
    alphas = np.linspace(-math.pi, math.pi, n_alpha, endpoint=False)
    alphas = alphas[np.abs(np.cos(alphas)) <= cos_guard + 1e-12]
    speeds = np.linspace(0.0, limits.v_max, n_v) if model.has_speed else [0.0]
    best = math.inf
    for v in speeds:
        a0, a1 = _alpha_rates(model, limits, float(v), alphas, d_ref, controls)
        rate = np.abs(_wrap_diff(a1, a0)) / limits.dt
        ok = rate >= abs(w_trigger) / 2.0
        if ok.any():
            best = min(best, float(np.min(np.abs(np.cos(a1) - np.cos(a0))[ok])))
    if not math.isfinite(best):
        raise EstimationError("no sampled state/control reaches |alpha_dot| >= w_trigger / 2")
    out = best * safety_factor
    if out < 1e-6:
        warnings.warn(f"delta_min = {out:.3g} is tiny; the trigger threshold has collapsed", RuntimeWarning)
    return out


def estimate_delta_phi_max(
    model: Dynamics,
    limits: SystemLimits,
    params: SafetyIndexParams,
    d_range: tuple[float, float] | None = None,
    samples: int = 100_000,
    seed: int = 0,
    safety_factor: float = 1.1,
) -> float:
    """Largest one-step ``|phi_{t+1} - phi_t|`` over random pairs around one static obstacle, inflated."""
    if d_range is None:
        d_range = (0.5 * params.d_min, 3.0 * params.d_min)
    rng = np.random.default_rng(seed)
    states, controls = _sample_pairs(rng, model, limits, d_range, samples)
    nxt = step_many(model, states, controls, limits.dt)
    index = SafetyIndex(params)
    obs = [Obstacle(0.0, 0.0, 1.0)]
    dphi = index.value_many(nxt, obs) - index.value_many(states, obs)
    return float(np.max(np.abs(dphi))) * safety_factor


def delta_phi_ceiling(limits: SystemLimits, params: SafetyIndexParams, d_lo: float) -> float:
    """Triangle-inequality bound on ``|delta phi|`` for ``n = 1`` with obstacle-frame turn rate."""
    w_frame = limits.w_m + limits.v_max / d_lo
    dt = limits.dt
    return limits.v_max * dt + params.k * (limits.a_m * dt + limits.v_max * w_frame * dt)


def estimate_props(
    model: Dynamics, limits: SystemLimits, params: SafetyIndexParams, seed: int = 0, samples: int = 100_000
) -> TriggerProps:
    d_ref = 2.0 * params.d_min
    wt = estimate_w_trigger(model, limits, d_ref)
    dm = estimate_delta_min(model, limits, wt, d_ref)
    dp = estimate_delta_phi_max(model, limits, params, seed=seed, samples=samples)
    return TriggerProps(wt, dm, dp, limits.a_min, limits.a_max, limits.v_max)
