import math

import pytest
from hypothesis import given, strategies as st

from mergesim.dynamics import (
    ControlInput,
    ControllerGains,
    HighLevelAction,
    VehicleState,
    VehicleKind,
    available_actions,
    execute_action,
    pid_speed,
    steer_to_lane,
    step_bicycle,
)
from mergesim.geometry import MERGE, RAMP, THROUGH, build_layout

LAYOUT = build_layout()


def cav(x=100.0, lane=THROUGH, y=None, v=25.0, heading=0.0):
    if y is None:
        y = LAYOUT.centerline_y(lane)
    return VehicleState(id=0, x=x, y=y, v=v, heading=heading, lane=lane, kind=VehicleKind.CAV)


class TestStepBicycle:
    def test_straight_line(self):
        s = step_bicycle(cav(x=0.0, v=20.0), ControlInput(0.0, 0.0), 0.1)
        assert s.x == pytest.approx(2.0)
        assert s.y == 0.0
        assert s.heading == 0.0
        assert s.v == 20.0

    def test_from_rest_position_uses_pre_update_speed(self):
        s = step_bicycle(cav(x=0.0, v=0.0), ControlInput(2.0, 0.0), 0.1)
        assert s.v == pytest.approx(0.2)
        assert s.x == 0.0

    def test_steering_update_equations(self):
        # frozen from an independent scalar evaluation of the three update
        # equations with beta = atan(0.5 tan 0.05)
        s = step_bicycle(cav(x=0.0, v=20.0), ControlInput(0.0, 0.05), 0.1)
        assert s.x == pytest.approx(1.999374250649959, abs=1e-15)
        assert s.y == pytest.approx(0.05002605159229332, abs=1e-15)
        assert s.heading == pytest.approx(0.02001042063691733, abs=1e-15)

    def test_deterministic_bit_identical(self):
        a = step_bicycle(cav(v=23.7, heading=0.01), ControlInput(1.3, -0.07), 0.1)
        b = step_bicycle(cav(v=23.7, heading=0.01), ControlInput(1.3, -0.07), 0.1)
        assert (a.x, a.y, a.v, a.heading) == (b.x, b.y, b.v, b.heading)

    def test_inputs_clamped_not_rejected(self):
        s = step_bicycle(cav(v=20.0), ControlInput(99.0, 0.0), 0.1)
        assert s.v == pytest.approx(20.5)  # accel clamped to 5

    def test_speed_clamped_to_physical_range(self):
        s = step_bicycle(cav(v=0.1), ControlInput(-5.0, 0.0), 0.1)
        assert s.v == 0.0
        s = step_bicycle(cav(v=44.9), ControlInput(5.0, 0.0), 0.1)
        assert s.v == 45.0

    @given(
        st.floats(min_value=0.0, max_value=45.0),
        st.floats(min_value=-math.pi / 3, max_value=math.pi / 3),
    )
    def test_zero_input_preserves_speed_and_heading(self, v, heading):
        s = step_bicycle(cav(v=v, heading=heading), ControlInput(0.0, 0.0), 0.1)
        assert s.v == v
        assert s.heading == heading

    @given(
        st.floats(min_value=0.0, max_value=45.0),
        st.floats(min_value=-5.0, max_value=5.0),
        st.floats(min_value=-1.0, max_value=1.0),
    )
    def test_heading_rate_bound(self, v, a, steer):
        before = cav(v=v)
        s = step_bicycle(before, ControlInput(a, steer), 0.1)
        l_r = before.length / 2
        assert abs(s.heading - before.heading) <= (v / l_r) * 0.1 + 1e-12


class TestPidSpeed:
    def test_zero_error(self):
        assert pid_speed(25.0, 25.0) == 0.0

    def test_clamped_high(self):
        assert pid_speed(30.0, 20.0, ControllerGains(kp_speed=0.5)) == 5.0

    def test_clamped_low(self):
        assert pid_speed(10.0, 30.0, ControllerGains(kp_speed=0.5)) == -5.0

    def test_proportional_inside_clamp(self):
        assert pid_speed(26.0, 25.0, ControllerGains(kp_speed=0.5)) == pytest.approx(0.5)


class TestSteerToLane:
    def test_centered_zero_command(self):
        assert steer_to_lane(cav(lane=THROUGH, y=0.0), THROUGH, LAYOUT) == 0.0

    def test_left_of_target_steers_right(self):
        # positive y is left; 4 m left of the target centerline -> negative steer
        state = cav(x=350.0, lane=THROUGH, y=4.0)
        assert steer_to_lane(state, THROUGH, LAYOUT) < 0.0

    def test_unreachable_lane_rejected(self):
        state = cav(x=150.0, lane=RAMP, y=-4.0)
        with pytest.raises(ValueError):
            steer_to_lane(state, THROUGH, LAYOUT)

    def test_clamped_to_quarter_pi(self):
        state = cav(x=350.0, lane=MERGE, y=-4.0, v=0.5, heading=-1.0)
        assert abs(steer_to_lane(state, THROUGH, LAYOUT)) <= math.pi / 4


class TestExecuteAction:
    def test_cruising_identity(self):
        t = execute_action(cav(v=25.0), HighLevelAction.CRUISING, LAYOUT)
        assert t.target_v == 25.0
        assert t.target_lane == THROUGH
        assert not t.masked

    def test_speed_up_clamped_to_30(self):
        t = execute_action(cav(v=28.0), HighLevelAction.SPEED_UP, LAYOUT)
        assert t.target_v == 30.0

    def test_slow_down_clamped_to_10(self):
        t = execute_action(cav(v=12.0), HighLevelAction.SLOW_DOWN, LAYOUT)
        assert t.target_v == 10.0

    def test_masked_turn_degrades_to_cruising(self):
        t = execute_action(cav(x=100.0, lane=THROUGH, v=25.0), HighLevelAction.TURN_RIGHT, LAYOUT)
        assert t.effective == HighLevelAction.CRUISING
        assert t.masked
        assert t.target_lane == THROUGH
        assert t.target_v == 25.0

    def test_action_by_lane_table(self):
        # exhaustive masking table for the default layout
        cases = {
            (THROUGH, 100.0): {HighLevelAction.TURN_LEFT: True, HighLevelAction.TURN_RIGHT: True},
            (THROUGH, 350.0): {HighLevelAction.TURN_LEFT: True, HighLevelAction.TURN_RIGHT: False},
            (RAMP, 150.0): {HighLevelAction.TURN_LEFT: True, HighLevelAction.TURN_RIGHT: True},
            (MERGE, 350.0): {HighLevelAction.TURN_LEFT: False, HighLevelAction.TURN_RIGHT: True},
        }
        for (lane, x), masks in cases.items():
            state = cav(x=x, lane=lane)
            for action, masked in masks.items():
                assert execute_action(state, action, LAYOUT).masked == masked
            for action in (
                HighLevelAction.CRUISING,
                HighLevelAction.SPEED_UP,
                HighLevelAction.SLOW_DOWN,
            ):
                assert not execute_action(state, action, LAYOUT).masked

    def test_available_actions(self):
        assert HighLevelAction.TURN_LEFT in available_actions(cav(x=350.0, lane=MERGE, y=-4.0), LAYOUT)
        assert HighLevelAction.TURN_LEFT not in available_actions(cav(x=150.0, lane=RAMP, y=-4.0), LAYOUT)
        acts = available_actions(cav(x=100.0, lane=THROUGH), LAYOUT)
        assert set(acts) == {
            HighLevelAction.CRUISING,
            HighLevelAction.SPEED_UP,
            HighLevelAction.SLOW_DOWN,
        }

    @given(st.floats(min_value=0.0, max_value=45.0), st.sampled_from(list(HighLevelAction)))
    def test_target_speed_always_in_bounds(self, v, action):
        t = execute_action(cav(v=v), action, LAYOUT)
        assert 10.0 <= t.target_v <= 30.0
