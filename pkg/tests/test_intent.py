import math

import pytest
from hypothesis import given, settings, strategies as st

from mergesim.behavior import IdmParams, LongState, MobilParams, mobil_decide
from mergesim.dynamics import (
    DT_SIM,
    HighLevelAction,
    VehicleKind,
    VehicleState,
    advance_bicycle,
    lane_steer,
    speed_control,
)
from mergesim.geometry import MERGE, RAMP, THROUGH, LaneKind, build_layout
from mergesim.intent import generate_intent, predict_hv, static_trajectory
from mergesim.scene import merge_end_barrier

LAYOUT = build_layout()


def cav(x=100.0, lane=THROUGH, v=25.0, vid=0):
    return VehicleState(id=vid, x=x, y=LAYOUT.centerline_y(lane), v=v, heading=0.0, lane=lane,
                        kind=VehicleKind.CAV)


def hv(x=100.0, lane=THROUGH, v=25.0, vid=1):
    return VehicleState(id=vid, x=x, y=LAYOUT.centerline_y(lane), v=v, heading=0.0, lane=lane,
                        kind=VehicleKind.HV)


class TestGenerateIntent:
    def test_cruising_steady_state(self):
        traj = generate_intent(cav(v=25.0), HighLevelAction.CRUISING, LAYOUT)
        assert traj.horizon == 8
        xs = [s.x for s in traj.samples]
        for s in traj.samples:
            assert s.v == pytest.approx(25.0)
            assert s.y == 0.0
        spacings = [b - a for a, b in zip([100.0] + xs, xs)]
        for d in spacings:
            assert d == pytest.approx(25.0)

    def test_speed_up_monotone_capped(self):
        traj = generate_intent(cav(v=28.0), HighLevelAction.SPEED_UP, LAYOUT)
        speeds = [s.v for s in traj.samples]
        assert all(b >= a for a, b in zip(speeds, speeds[1:]))
        assert all(v <= 30.0 + 1e-12 for v in speeds)
        assert speeds[-1] > 29.5  # proportional control closes on the cap

    def test_turn_left_converges_to_target_centerline(self):
        # closed-loop rollout against a dt/10 reference integration
        state = cav(x=330.0, lane=MERGE, v=25.0)
        traj = generate_intent(state, HighLevelAction.TURN_LEFT, LAYOUT)
        assert abs(traj.samples[-1].y - 0.0) <= 0.2
        # reference: same cascade integrated at dt/10
        x, y, v, heading = state.x, state.y, state.v, state.heading
        fine_dt = DT_SIM / 10.0
        for _ in range(8 * 10 * 10):
            a = speed_control(25.0, v, 0.5)
            d = lane_steer(y, v, heading, 0.0, 0.5, 2.0)
            x, y, v, heading = advance_bicycle(x, y, v, heading, a, d, fine_dt, state.length)
        assert traj.samples[-1].y == pytest.approx(y, abs=0.05)

    def test_masked_turn_rolls_cruising_fallback(self):
        state = cav(x=100.0, lane=THROUGH, v=25.0)
        masked = generate_intent(state, HighLevelAction.TURN_RIGHT, LAYOUT)
        cruise = generate_intent(state, HighLevelAction.CRUISING, LAYOUT)
        assert masked.samples == cruise.samples

    def test_side_effect_free(self):
        state = cav(x=330.0, lane=MERGE, v=22.0)
        snapshot = (state.x, state.y, state.v, state.heading, state.lane)
        for action in HighLevelAction:
            generate_intent(state, action, LAYOUT)
        assert (state.x, state.y, state.v, state.heading, state.lane) == snapshot

    def test_actions_differ_pairwise_unless_masked(self):
        state = cav(x=330.0, lane=MERGE, v=25.0)
        trajs = {a: generate_intent(state, a, LAYOUT) for a in HighLevelAction}
        # on the merge lane only TURN_RIGHT collapses onto CRUISING
        assert trajs[HighLevelAction.TURN_RIGHT].samples == trajs[HighLevelAction.CRUISING].samples
        distinct = [
            trajs[HighLevelAction.TURN_LEFT],
            trajs[HighLevelAction.CRUISING],
            trajs[HighLevelAction.SPEED_UP],
            trajs[HighLevelAction.SLOW_DOWN],
        ]
        for i in range(len(distinct)):
            for j in range(i + 1, len(distinct)):
                assert distinct[i].samples != distinct[j].samples

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(min_value=10.0, max_value=30.0),
        st.sampled_from(list(HighLevelAction)),
        st.sampled_from([(THROUGH, 150.0), (RAMP, 150.0), (MERGE, 340.0)]),
    )
    def test_sample_spacing_bounded_by_speed_clamp(self, v, action, lane_x):
        lane, x = lane_x
        traj = generate_intent(cav(x=x, lane=lane, v=v), action, LAYOUT)
        prev = (x, LAYOUT.centerline_y(lane))
        for s in traj.samples:
            dist = math.hypot(s.x - prev[0], s.y - prev[1])
            assert dist <= 45.0 * 1.0 + 1e-9
            prev = (s.x, s.y)


class TestPredictHv:
    def test_lone_hv_at_desired_speed_constant(self):
        state = hv(x=50.0, v=25.0)  # NORMAL style, v0 = 25
        traj = predict_hv(state, [], LAYOUT)
        for k, s in enumerate(traj.samples):
            assert s.v == pytest.approx(25.0, abs=1e-9)
            assert s.y == 0.0
            assert s.x == pytest.approx(50.0 + 25.0 * (k + 1), abs=1e-6)

    def test_hv_behind_stopped_leader_decelerates_without_overlap(self):
        leader = hv(x=105.0, v=0.0, vid=9)
        state = hv(x=60.0, v=15.0, vid=1)  # 40 m bumper gap
        traj = predict_hv(state, [leader], LAYOUT)
        speeds = [s.v for s in traj.samples]
        # strictly decreasing until (near) standstill, then it may idle
        prev = 15.0
        for v in speeds:
            assert v < prev or prev < 0.1
            prev = v
        assert speeds[-1] < 1.0
        for s in traj.samples:
            assert leader.x - s.x - 5.0 >= 0.0  # bumper gap never closes

    def test_blocked_hv_changes_lane_when_mobil_fires(self):
        leader = hv(x=360.0, v=0.0, vid=9, lane=MERGE)
        state = hv(x=335.0, v=20.0, vid=1, lane=MERGE)
        # oracle: MOBIL criteria fire immediately for the frozen snapshot
        ego = LongState(state.x, state.v, state.length)
        lead = LongState(leader.x, leader.v, leader.length)
        assert mobil_decide(ego, lead, None, None, None, IdmParams(), MobilParams())
        traj = predict_hv(state, [leader], LAYOUT)
        assert any(s.lane.kind is LaneKind.THROUGH for s in traj.samples)

    def test_prediction_sees_barrier(self):
        barrier = merge_end_barrier(LAYOUT)
        state = hv(x=370.0, v=25.0, vid=1, lane=MERGE)
        # a through-lane convoy keeps MOBIL's safety criterion failing
        convoy = [hv(x=392.0 - 20.0 * i, v=25.0, vid=10 + i, lane=THROUGH) for i in range(8)]
        traj = predict_hv(state, convoy, LAYOUT, barrier=barrier)
        assert all(s.lane.kind is not LaneKind.THROUGH for s in traj.samples)
        # must brake for the lane end instead of sailing through it
        assert traj.samples[-1].v < 5.0
        assert traj.samples[-1].x + state.length / 2 <= LAYOUT.merge_end

    def test_static_trajectory_constant(self):
        barrier = merge_end_barrier(LAYOUT)
        traj = static_trajectory(barrier, horizon=8)
        assert len({(s.x, s.y) for s in traj.samples}) == 1
        assert traj.samples[0].v == 0.0
