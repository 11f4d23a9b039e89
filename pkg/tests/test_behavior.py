import math

import pytest
from hypothesis import given, strategies as st

from mergesim.behavior import (
    IdmParams,
    LongState,
    MobilParams,
    idm_accel,
    mobil_decide,
    style_params,
)
from mergesim.dynamics import DrivingStyle

IDM = IdmParams()
MOBIL = MobilParams()


class TestIdm:
    def test_equilibrium_at_desired_speed_free_road(self):
        assert idm_accel(IDM.v0, math.inf, 0.0, IDM) == 0.0

    def test_full_acceleration_from_rest(self):
        assert idm_accel(0.0, math.inf, 0.0, IDM) == IDM.a_max

    def test_formula_value(self):
        # frozen from an independent scalar evaluation:
        # s* = 5 + 20*1.5 + 20*5/(2 sqrt(15)) = 47.909944487358054
        # a = 3 (1 - (20/25)^4 - (s*/30)^2) = -5.880009269272437
        p = IdmParams(v0=25.0, T=1.5, s0=5.0, a_max=3.0, b=5.0, delta=4.0)
        a = idm_accel(20.0, 30.0, 5.0, p)
        assert a == pytest.approx(-5.880009269272437, abs=1e-12)

    def test_nonpositive_gap_rejected(self):
        with pytest.raises(ValueError):
            idm_accel(10.0, 0.0, 0.0, IDM)
        with pytest.raises(ValueError):
            idm_accel(10.0, -3.0, 0.0, IDM)

    def test_decel_floor(self):
        assert idm_accel(30.0, 0.5, 10.0, IDM) == -10.0

    @given(
        st.floats(min_value=0.0, max_value=40.0),
        st.floats(min_value=0.0, max_value=40.0),
        st.floats(min_value=1.0, max_value=200.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_monotone_in_speed(self, v1, v2, s, dv):
        lo, hi = sorted((v1, v2))
        assert idm_accel(hi, s, dv, IDM) <= idm_accel(lo, s, dv, IDM) + 1e-12

    @given(
        st.floats(min_value=0.0, max_value=40.0),
        st.floats(min_value=1.0, max_value=200.0),
        st.floats(min_value=1.0, max_value=200.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_monotone_in_gap(self, v, s1, s2, dv):
        lo, hi = sorted((s1, s2))
        assert idm_accel(v, hi, dv, IDM) >= idm_accel(v, lo, dv, IDM) - 1e-12


class TestMobil:
    def test_empty_road_no_change(self):
        # zero incentive on an empty road never exceeds a positive threshold
        ego = LongState(x=100.0, v=25.0, length=5.0)
        assert not mobil_decide(ego, None, None, None, None, IDM, MOBIL)

    def test_escape_from_stopped_leader(self):
        ego = LongState(x=100.0, v=20.0, length=5.0)
        leader = LongState(x=120.0, v=0.0, length=5.0)
        assert mobil_decide(ego, leader, None, None, None, IDM, MOBIL)

    def test_close_fast_follower_blocks_change(self):
        ego = LongState(x=100.0, v=20.0, length=5.0)
        follower = LongState(x=93.0, v=28.0, length=5.0)  # 2 m bumper gap, closing
        leader = LongState(x=115.0, v=5.0, length=5.0)
        assert not mobil_decide(ego, leader, None, None, follower, IDM, MOBIL)

    def test_far_neighbors_match_absent(self):
        ego = LongState(x=100.0, v=20.0, length=5.0)
        leader = LongState(x=110.0, v=10.0, length=5.0)
        far = LongState(x=100.0 + 1e9, v=25.0, length=5.0)
        far_back = LongState(x=100.0 - 1e9, v=25.0, length=5.0)
        with_far = mobil_decide(ego, leader, far_back, far, far_back, IDM, MOBIL)
        without = mobil_decide(ego, leader, None, None, None, IDM, MOBIL)
        assert with_far == without

    def test_politeness_penalizes_imposed_braking(self):
        ego = LongState(x=100.0, v=20.0, length=5.0)
        leader = LongState(x=112.0, v=12.0, length=5.0)
        follower_tgt = LongState(x=92.0, v=20.0, length=5.0)
        selfish = mobil_decide(ego, leader, None, None, follower_tgt, IDM, MobilParams(politeness=0.0))
        polite = mobil_decide(ego, leader, None, None, follower_tgt, IDM, MobilParams(politeness=1.0))
        assert selfish or not polite  # politeness can only remove changes


class TestStyleTable:
    def test_normal_is_default(self):
        idm, mobil = style_params(DrivingStyle.NORMAL)
        assert idm == IdmParams()
        assert mobil == MobilParams()

    def test_aggressive_ordering(self):
        idm, mobil = style_params(DrivingStyle.AGGRESSIVE)
        base, base_mobil = style_params(DrivingStyle.NORMAL)
        assert idm.v0 > base.v0
        assert idm.a_max > base.a_max
        assert idm.T < base.T
        assert mobil.gain_threshold < base_mobil.gain_threshold

    def test_timid_ordering(self):
        idm, mobil = style_params(DrivingStyle.TIMID)
        base, base_mobil = style_params(DrivingStyle.NORMAL)
        assert idm.T > base.T
        assert mobil.b_safe < base_mobil.b_safe

    @given(
        st.sampled_from(list(DrivingStyle)),
        st.floats(min_value=0.0, max_value=40.0),
        st.floats(min_value=0.5, max_value=300.0),
        st.floats(min_value=-15.0, max_value=15.0),
    )
    def test_all_styles_bounded(self, style, v, s, dv):
        idm, _ = style_params(style)
        a = idm_accel(v, s, dv, idm)
        assert -10.0 <= a <= idm.a_max
