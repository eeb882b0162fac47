import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from issakit.core import Obstacle, RobotState, SecondOrderRobot, SystemLimits, ToyUnicycle, relative_kinematics
from issakit.ctrigger import (
    COS_GUARD,
    EstimationError,
    TriggerFailure,
    TriggerProps,
    branch_satisfied,
    ctrigger,
    delta_phi_ceiling,
    estimate_delta_min,
    estimate_delta_phi_max,
    estimate_props,
    estimate_w_trigger,
    guard_active,
    require_trigger_support,
    trigger_region,
)
from issakit.harness.scenarios import DEFAULT_LIMITS, DEFAULT_PARAMS
from issakit.safety_index import SafetyIndex, SafetyIndexParams, SafetyStatus, StatusOracle

MODEL = SecondOrderRobot(DEFAULT_LIMITS)
PROPS = TriggerProps(w_trigger=2.0, delta_min=0.5, delta_phi_max=2.0, a_min=-2.0, a_max=2.0, v_max=1.0)
# threshold min(sqrt(3)/2, 0.5/2) = 0.25


def state_with_bearing(alpha, d, v):
    """Robot at the origin heading +x with an obstacle at bearing ``alpha`` and range ``d``."""
    return RobotState(0.0, 0.0, 0.0, v), Obstacle(d * math.cos(alpha), d * math.sin(alpha), 0.25)


def oracle_for(x, obs, params=DEFAULT_PARAMS, margin=None):
    return StatusOracle(x, MODEL, SafetyIndex(params), [obs], DEFAULT_LIMITS.dt, margin)


@dataclass(frozen=True)
class RotateOnly:
    """Turns in place; the speed state is ignored."""

    control_box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    has_speed: bool = True

    def step(self, state, control, dt):
        return RobotState(state.px, state.py, state.theta + control[1] * dt, state.v)


@dataclass(frozen=True)
class Frozen:
    control_box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    has_speed: bool = True

    def step(self, state, control, dt):
        return state


class TestGuard:
    def test_large_cosine_passes(self):
        x, obs = state_with_bearing(math.acos(0.9), 0.5, 0.5)
        o = oracle_for(x, obs)
        u = np.array([0.3, 0.1])
        out, fired = ctrigger(x, u, math.acos(0.9), PROPS, o, np.random.default_rng(0))
        assert out is u and not fired

    def test_negative_phi_passes(self):
        x, obs = state_with_bearing(math.pi / 2 - 0.01, 5.0, 0.2)
        o = oracle_for(x, obs)
        assert o.phi < 0
        u = np.array([0.3, 0.1])
        out, fired = ctrigger(x, u, math.pi / 2 - 0.01, PROPS, o, np.random.default_rng(0))
        assert out is u and not fired

    def test_threshold(self):
        assert PROPS.cos_threshold == 0.25
        wide = replace(PROPS, delta_min=5.0)
        assert wide.cos_threshold == pytest.approx(COS_GUARD)
        assert guard_active(math.acos(0.2), 0.1, PROPS)
        assert not guard_active(math.acos(0.25), 0.1, PROPS)
        assert not guard_active(math.acos(0.2), 0.0, PROPS)

    @given(st.floats(-math.pi, math.pi), st.floats(-1, 1), st.floats(-2, 2), st.floats(-2, 2))
    def test_pass_through_exact(self, alpha, phi_x, a, w):
        if guard_active(alpha, phi_x, PROPS):
            return

        class Stub:
            phi = phi_x

        u = np.array([a, w])
        out, fired = ctrigger(RobotState(0, 0, 0, 0.5), u, alpha, PROPS, Stub(), np.random.default_rng(0))
        assert out is u and not fired


class TestBranches:
    def test_slow_approaching_accelerates(self):
        # cos(alpha) = -0.05: obstacle almost abeam, slightly behind
        alpha = math.acos(-0.05)
        x, obs = state_with_bearing(alpha, 0.45, 0.1 * DEFAULT_LIMITS.v_max)
        o = oracle_for(x, obs)
        assert o.phi > 0
        u, fired = ctrigger(x, np.zeros(2), alpha, PROPS, o, np.random.default_rng(0))
        assert fired
        assert u[0] >= PROPS.a_sym / 2
        assert oracle_for(x, obs)(u) == SafetyStatus.SAFE
        # the commanded acceleration shows up in the next speed
        nxt = MODEL.step(x, u, DEFAULT_LIMITS.dt)
        assert (nxt.v - x.v) / DEFAULT_LIMITS.dt == pytest.approx(u[0])

    def test_slow_closing_brakes(self):
        region = trigger_region(RobotState(0, 0, 0, 0.1), math.acos(0.05), PROPS, MODEL.control_box)
        assert region[0] == "brake"
        (lo, hi), = region[1]
        assert hi[0] == -PROPS.a_sym / 2

    def test_fast_turns(self):
        name, parts = trigger_region(RobotState(0, 0, 0, 0.9), math.acos(0.05), PROPS, MODEL.control_box)
        assert name == "turn" and len(parts) == 2
        assert parts[0][1][1] == -1.0 and parts[1][0][1] == 1.0

    def test_fast_trigger_sound(self):
        alpha = math.acos(0.1)
        x, obs = state_with_bearing(alpha, 0.5, 0.8)
        o = oracle_for(x, obs)
        assert o.phi > 0
        u, fired = ctrigger(x, np.zeros(2), alpha, PROPS, o, np.random.default_rng(2))
        assert fired and abs(u[1]) >= PROPS.w_trigger / 2
        assert branch_satisfied("turn", MODEL.actuation(u), x, alpha, PROPS)
        assert oracle_for(x, obs)(u) == SafetyStatus.SAFE

    @given(st.floats(-math.pi, math.pi), st.floats(0.42, 0.8), st.floats(0.0, 1.0), st.integers(0, 1000))
    def test_soundness(self, alpha, d, v, seed):
        x, obs = state_with_bearing(alpha, d, v)
        o = oracle_for(x, obs, margin=0.0)
        if not guard_active(alpha, o.phi, PROPS):
            return
        try:
            u, fired = ctrigger(x, np.zeros(2), alpha, PROPS, o, np.random.default_rng(seed), budget=2000)
        except TriggerFailure:
            return
        assert fired
        branch, _ = trigger_region(x, alpha, PROPS, MODEL.control_box)
        assert branch_satisfied(branch, MODEL.actuation(u), x, alpha, PROPS)
        assert oracle_for(x, obs, margin=0.0)(u) == SafetyStatus.SAFE

    def test_budget_exhaustion(self):
        alpha = math.acos(0.05)
        x, obs = state_with_bearing(alpha, 0.45, 0.9)

        class Never:
            phi = 1.0
            model = MODEL

            def safe_mask(self, pts):
                return np.zeros(len(pts), dtype=bool)

        with pytest.raises(TriggerFailure):
            ctrigger(x, np.zeros(2), alpha, PROPS, Never(), np.random.default_rng(0), budget=500)

    def test_needs_speed_state(self):
        with pytest.raises(ValueError):
            require_trigger_support(ToyUnicycle())

    @pytest.mark.parametrize("kw", [dict(w_trigger=0.0), dict(delta_min=0.0), dict(delta_phi_max=-1.0)])
    def test_props_validation(self, kw):
        with pytest.raises(ValueError):
            replace(PROPS, **kw)


class TestEstimators:
    def test_w_trigger_matches_turn_authority(self):
        wt = estimate_w_trigger(MODEL, DEFAULT_LIMITS, 2 * DEFAULT_PARAMS.d_min)
        assert wt == pytest.approx(DEFAULT_LIMITS.w_max, rel=1e-6)

    def test_w_trigger_zero_without_turning(self):
        lim = SystemLimits(v_max=1.0, a_min=-1.0, a_max=1.0, w_min=0.0, w_max=0.0, dt=0.05)
        m = SecondOrderRobot(lim)
        assert estimate_w_trigger(m, lim, 0.8) == pytest.approx(0.0, abs=1e-9)
        with pytest.raises(ValueError):
            TriggerProps(0.0, 0.1, 1.0, -1.0, 1.0, 1.0)

    def test_w_trigger_on_toy_runs(self):
        lim = SystemLimits(v_max=2.0, a_min=0.0, a_max=0.0, w_min=-5.0, w_max=5.0, dt=0.01)
        assert estimate_w_trigger(ToyUnicycle(), lim, 1.0) > 0

    def test_delta_min_rotation_oracle(self):
        lim = SystemLimits(v_max=1.0, a_min=-1.0, a_max=1.0, w_min=-1.0, w_max=1.0, dt=0.1)
        model = RotateOnly()
        wt = estimate_w_trigger(model, lim, 0.8)
        assert wt == pytest.approx(1.0)
        got = estimate_delta_min(model, lim, wt, 0.8, n_alpha=48, per_dim=21)
        # analytic: heading turns by w dt, so cos(alpha) moves to cos(alpha - w dt)
        alphas = np.linspace(-math.pi, math.pi, 48, endpoint=False)
        alphas = alphas[np.abs(np.cos(alphas)) <= COS_GUARD + 1e-12]
        ws = np.linspace(-1, 1, 21)
        ws = ws[np.abs(ws) >= wt / 2 - 1e-12]
        ref = min(abs(math.cos(a - w * lim.dt) - math.cos(a)) for a in alphas for w in ws)
        assert got == pytest.approx(0.9 * ref, rel=1e-6)

    def test_delta_min_first_order(self):
        # w = w_trigger / 2 at alpha = pi/2: |d cos| ~ (w_trigger / 2) dt
        wt, dt = 2.0, 0.1
        x, obs = state_with_bearing(math.pi / 2, 1.0, 0.0)
        nxt = RotateOnly(((-1, 1), (-2, 2))).step(x, (0.0, -wt / 2), dt)
        dc = abs(math.cos(relative_kinematics(nxt, obs).alpha) - math.cos(math.pi / 2))
        assert dc == pytest.approx(wt / 2 * dt, abs=(wt / 2 * dt) ** 3)

    def test_delta_min_small_step_warns(self):
        lim = SystemLimits(v_max=1.0, a_min=-1.0, a_max=1.0, w_min=-1.0, w_max=1.0, dt=1e-8)
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            val = estimate_delta_min(RotateOnly(), lim, 1.0, 0.8)
        assert val < 1e-6
        assert any("collapsed" in str(w.message) for w in rec)

    def test_delta_min_empty_region(self):
        lim = SystemLimits(v_max=1.0, a_min=-1.0, a_max=1.0, w_min=-1.0, w_max=1.0, dt=0.1)
        with pytest.raises(EstimationError):
            estimate_delta_min(RotateOnly(), lim, 10.0, 0.8)

    def test_delta_phi_zero_dynamics(self):
        assert estimate_delta_phi_max(Frozen(), DEFAULT_LIMITS, DEFAULT_PARAMS, samples=2000) == 0.0

    def test_delta_phi_under_ceiling(self):
        est = estimate_delta_phi_max(MODEL, DEFAULT_LIMITS, DEFAULT_PARAMS, samples=50_000)
        d_lo = 0.5 * DEFAULT_PARAMS.d_min
        assert 0 < est / 1.1 <= delta_phi_ceiling(DEFAULT_LIMITS, DEFAULT_PARAMS, d_lo)

    def test_delta_phi_grows_with_step(self):
        a = estimate_delta_phi_max(MODEL, DEFAULT_LIMITS, DEFAULT_PARAMS, samples=20_000)
        lim2 = replace(DEFAULT_LIMITS, dt=2 * DEFAULT_LIMITS.dt)
        b = estimate_delta_phi_max(SecondOrderRobot(lim2), lim2, DEFAULT_PARAMS, samples=20_000)
        assert b > a

    def test_estimate_props_bundle(self):
        p = estimate_props(MODEL, DEFAULT_LIMITS, DEFAULT_PARAMS, samples=5000)
        assert p.w_trigger > 0 and p.delta_min > 0 and p.delta_phi_max > 0
        assert (p.a_min, p.a_max, p.v_max) == (-2.0, 2.0, 1.0)
