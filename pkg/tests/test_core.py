import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from issakit.core import (
    DomainError,
    Obstacle,
    RobotState,
    SecondOrderRobot,
    SingularGeometryError,
    SubsteppedDynamics,
    SystemLimits,
    ToyUnicycle,
    dynamics_eval,
    relative_kinematics,
    step_many,
    wrap_angle,
)

LIMITS = SystemLimits(v_max=1.0, a_min=-2.0, a_max=2.0, w_min=-2.0, w_max=2.0, dt=0.1)
finite = st.floats(-10, 10, allow_nan=False)


def close_state(a, b, tol=1e-12):
    assert a.px == pytest.approx(b.px, abs=tol)
    assert a.py == pytest.approx(b.py, abs=tol)
    assert a.theta == pytest.approx(b.theta, abs=tol)
    assert a.v == pytest.approx(b.v, abs=tol)


class TestToyStep:
    def test_straight_line(self):
        out = dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (1, 0), 0.01)
        close_state(out, RobotState(0.01, 0, 0))

    def test_zero_control_fixed_point(self):
        out = dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (0, 0), 0.01)
        close_state(out, RobotState(0, 0, 0))

    def test_heading_north(self):
        out = dynamics_eval(ToyUnicycle(), RobotState(0, 0, math.pi / 2), (2, 0), 0.01)
        close_state(out, RobotState(0.0, 0.02, math.pi / 2))

    def test_pure_turn(self):
        out = dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (0, 3), 0.01)
        close_state(out, RobotState(0, 0, 0.03))

    @given(finite, finite, st.floats(-math.pi, math.pi, exclude_max=True))
    def test_zero_control_any_state(self, px, py, th):
        s = RobotState(px, py, th)
        assert ToyUnicycle().step(s, (0.0, 0.0), 0.01) == s

    def test_box_violation(self):
        with pytest.raises(DomainError):
            dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (-0.1, 0), 0.01)
        with pytest.raises(DomainError):
            dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (1, 0, 0), 0.01)

    def test_nonpositive_dt(self):
        with pytest.raises(ValueError):
            dynamics_eval(ToyUnicycle(), RobotState(0, 0, 0), (1, 0), 0.0)


class TestSecondOrderStep:
    def test_pre_update_speed_integration(self):
        out = dynamics_eval(SecondOrderRobot(LIMITS), RobotState(0, 0, 0, 1.0), (1.0, 0.0), 0.1)
        # hand integration: position uses the speed before the update
        assert out.v == pytest.approx(1.1 if LIMITS.v_max >= 1.1 else LIMITS.v_max)
        assert out.px == pytest.approx(0.1)

    def test_unclamped_speed_update(self):
        lim = SystemLimits(v_max=2.0, a_min=-2.0, a_max=2.0, w_min=-2.0, w_max=2.0, dt=0.1)
        out = dynamics_eval(SecondOrderRobot(lim), RobotState(0, 0, 0, 1.0), (1.0, 0.0), 0.1)
        assert out.v == pytest.approx(1.1, abs=1e-12)
        assert out.px == pytest.approx(0.1, abs=1e-12)
        assert out.py == 0.0 and out.theta == 0.0

    def test_turn_rate(self):
        out = SecondOrderRobot(LIMITS).step(RobotState(0, 0, 0, 0.5), (0.0, 1.0), 0.1)
        assert out.theta == pytest.approx(0.1)
        assert out.px == pytest.approx(0.05)

    def test_box_from_limits(self):
        assert SecondOrderRobot(LIMITS).control_box == ((-2.0, 2.0), (-2.0, 2.0))

    def test_speed_clamp_long_rollout(self):
        model = SecondOrderRobot(LIMITS)
        rng = np.random.default_rng(3)
        s = RobotState(0, 0, 0, 0.5)
        for u in rng.uniform(-2, 2, (10_000, 2)):
            s = model.step(s, u, LIMITS.dt)
            assert 0.0 <= s.v <= LIMITS.v_max
            assert -math.pi <= s.theta < math.pi

    @given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=200))
    def test_speed_clamp_property(self, controls):
        model = SecondOrderRobot(LIMITS)
        s = RobotState(0, 0, 0, 0)
        for u in controls:
            s = model.step(s, u, LIMITS.dt)
            assert 0.0 <= s.v <= LIMITS.v_max

    def test_purity(self):
        model = SecondOrderRobot(LIMITS)
        s = RobotState(0.3, -0.2, 1.1, 0.7)
        first = model.step(s, (0.4, -1.3), 0.05)
        assert all(model.step(s, (0.4, -1.3), 0.05) == first for _ in range(10_000))

    def test_batch_matches_pointwise(self):
        model = SecondOrderRobot(LIMITS)
        rng = np.random.default_rng(0)
        states = np.column_stack([rng.normal(size=50), rng.normal(size=50),
                                  rng.uniform(-3, 3, 50), rng.uniform(0, 1, 50)])
        controls = rng.uniform(-2, 2, (50, 2))
        batch = step_many(model, states, controls, 0.05)
        for s, u, b in zip(states, controls, batch):
            p = model.step(RobotState.from_array(s), u, 0.05).as_array()
            np.testing.assert_allclose(b, p, atol=1e-12)


class TestSubstepped:
    def test_sees_one_micro_step(self):
        inner = ToyUnicycle()
        sub = SubsteppedDynamics(inner, 1e-3)
        s = RobotState(0, 0, 0.3)
        assert sub.step(s, (1.0, 2.0), 0.5) == inner.step(s, (1.0, 2.0), 1e-3)
        assert sub.control_box == inner.control_box


class TestRelativeKinematics:
    def test_head_on(self):
        rk = relative_kinematics(RobotState(0, 0, 0, 1.0), Obstacle(2, 0, 0.2))
        assert (rk.d, rk.alpha, rk.d_dot) == (pytest.approx(2), pytest.approx(0), pytest.approx(-1))

    def test_tangential(self):
        rk = relative_kinematics(RobotState(0, 0, 0, 1.0), Obstacle(0, 2, 0.2))
        assert rk.alpha == pytest.approx(math.pi / 2)
        assert rk.d_dot == pytest.approx(0, abs=1e-12)

    def test_receding(self):
        s = RobotState(0, 0, math.pi, 1.0)
        obs = Obstacle(2, 0, 0.2)
        rk = relative_kinematics(s, obs)
        assert abs(rk.alpha) == pytest.approx(math.pi)
        assert rk.d_dot == pytest.approx(1.0)
        # finite-difference cross-check through the dynamics
        dt = 1e-6
        nxt = SecondOrderRobot(LIMITS).step(s, (0.0, 0.0), dt)
        assert (math.hypot(2 - nxt.px, nxt.py) - 2) / dt == pytest.approx(1.0, abs=1e-6)

    def test_moving_obstacle_frame(self):
        rk = relative_kinematics(RobotState(0, 0, 0, 1.0), Obstacle(2, 0, 0.2, vx=1.0))
        assert rk.d_dot == pytest.approx(0.0, abs=1e-12)
        assert rk.v_rel == pytest.approx(0.0, abs=1e-12)

    def test_coincident(self):
        with pytest.raises(SingularGeometryError):
            relative_kinematics(RobotState(1, 1, 0, 1), Obstacle(1, 1, 0.2))

    @given(finite, finite, st.floats(-math.pi, math.pi), st.floats(0, 1), finite, finite)
    def test_static_range_rate(self, px, py, th, v, ox, oy):
        if math.hypot(ox - px, oy - py) < 1e-3:
            return
        rk = relative_kinematics(RobotState(px, py, th, v), Obstacle(ox, oy, 0.1))
        assert rk.d >= 0
        assert abs(rk.d_dot) <= rk.v_rel + 1e-12
        assert rk.d_dot == pytest.approx(-rk.v_rel * math.cos(rk.alpha), abs=1e-9)
        assert -math.pi < rk.alpha <= math.pi

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi), st.floats(0, 1))
    def test_finite_difference(self, px, py, th, v):
        obs = Obstacle(0.0, 0.0, 0.1)
        if math.hypot(px, py) < 0.2:
            return
        s = RobotState(px, py, th, v)
        dt = 1e-4
        nxt = SecondOrderRobot(LIMITS).step(s, (0.0, 0.0), dt)
        fd = (math.hypot(nxt.px, nxt.py) - math.hypot(px, py)) / dt
        assert fd == pytest.approx(relative_kinematics(s, obs).d_dot, abs=1e-2 * LIMITS.v_max)


class TestTypes:
    @given(st.floats(-100, 100))
    def test_wrap_range(self, a):
        w = wrap_angle(a)
        assert -math.pi <= w < math.pi
        assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-9)

    @pytest.mark.parametrize("kw", [
        dict(v_max=0.0), dict(dt=0.0), dict(a_min=0.5), dict(a_max=-0.5), dict(w_min=0.1), dict(w_max=-0.1),
        dict(control_box=((1.0, 0.0), (0.0, 1.0))),
    ])
    def test_limits_validation(self, kw):
        base = dict(v_max=1.0, a_min=-1.0, a_max=1.0, w_min=-1.0, w_max=1.0, dt=0.1)
        base.update(kw)
        with pytest.raises(ValueError):
            SystemLimits(**base)

    def test_obstacle_radius(self):
        with pytest.raises(ValueError):
            Obstacle(0, 0, 0.0)

    def test_limit_aggregates(self):
        lim = SystemLimits(v_max=1.0, a_min=-3.0, a_max=1.0, w_min=-0.5, w_max=2.0, dt=0.1)
        assert (lim.a_m, lim.w_m, lim.a_sym) == (3.0, 2.0, 1.0)
