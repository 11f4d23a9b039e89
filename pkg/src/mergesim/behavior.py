"""Human-driver models: IDM car following, MOBIL lane changes, style table.

The same models drive live HVs and the safety layer's HV predictions.
Gaps passed to ``idm_accel`` are bumper-to-bumper; no leader is encoded as
an infinite gap with zero closing speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .dynamics import DrivingStyle
from .geometry import LaneRef, RoadLayout, adjacent_lane, same_centerline

IDM_DECEL_FLOOR = -10.0  # emergency braking clamp [m/s^2]
_GAP_FLOOR = 0.01  # MOBIL evaluates hypothetical overlaps with a tiny gap


@dataclass(frozen=True)
class IdmParams:
    v0: float = 25.0  # desired speed [m/s]
    T: float = 1.5  # desired time gap [s]
    s0: float = 5.0  # jam distance [m]
    a_max: float = 3.0  # max acceleration [m/s^2]
    b: float = 5.0  # comfortable deceleration [m/s^2]
    delta: float = 4.0  # acceleration exponent

    def __post_init__(self):
        if min(self.v0, self.T, self.s0, self.a_max, self.b) <= 0 or self.delta < 1:
            raise ValueError("IDM parameters must be positive with delta >= 1")


@dataclass(frozen=True)
class MobilParams:
    politeness: float = 0.0  # weight of imposed accelerations [0, 1]
    gain_threshold: float = 0.2  # minimum net gain to change [m/s^2]
    b_safe: float = 2.0  # max braking imposed on the new follower [m/s^2]

    def __post_init__(self):
        if not 0.0 <= self.politeness <= 1.0:
            raise ValueError("politeness must lie in [0, 1]")
        if self.gain_threshold < 0 or self.b_safe <= 0:
            raise ValueError("gain_threshold must be >= 0 and b_safe > 0")


class LongState(NamedTuple):
    """Longitudinal snapshot of one participant in a MOBIL evaluation."""

    x: float
    v: float
    length: float


def idm_accel(ego_v: float, gap: float, closing_speed: float, params: IdmParams) -> float:
    """IDM acceleration for bumper gap ``gap`` and closing speed v_ego - v_leader.

    Clamped to [-10, a_max].  A non-positive gap means the pair already
    overlaps; that is a collision, not a car-following situation.
    """
    if gap <= 0.0:
        raise ValueError("non-positive gap: vehicles overlap")
    free = 1.0 - (ego_v / params.v0) ** params.delta
    if math.isinf(gap):
        interaction = 0.0
    else:
        s_star = params.s0 + max(
            0.0, ego_v * params.T + ego_v * closing_speed / (2.0 * math.sqrt(params.a_max * params.b))
        )
        interaction = (s_star / gap) ** 2
    a = params.a_max * (free - interaction)
    if a < IDM_DECEL_FLOOR:
        return IDM_DECEL_FLOOR
    if a > params.a_max:
        return params.a_max
    return a


def _bumper_gap(rear: LongState, front: LongState) -> float:
    return front.x - rear.x - 0.5 * (front.length + rear.length)


def _accel_between(rear: LongState | None, front: LongState | None, idm: IdmParams) -> float:
    """IDM acceleration of ``rear`` following ``front`` (either may be absent)."""
    if rear is None:
        return 0.0
    if front is None:
        return idm_accel(rear.v, math.inf, 0.0, idm)
    gap = max(_bumper_gap(rear, front), _GAP_FLOOR)
    return idm_accel(rear.v, gap, rear.v - front.v, idm)


def mobil_decide(
    ego: LongState,
    leader_cur: LongState | None,
    follower_cur: LongState | None,
    leader_tgt: LongState | None,
    follower_tgt: LongState | None,
    idm: IdmParams,
    mobil: MobilParams,
) -> bool:
    """MOBIL lane-change decision.

    Change only if the new follower is not forced below -b_safe and the
    politeness-weighted acceleration gain exceeds the threshold.  All
    accelerations are evaluated with the supplied IDM parameter set.
    """
    a_nf_new = _accel_between(follower_tgt, ego, idm)
    if a_nf_new < -mobil.b_safe:
        return False
    a_ego = _accel_between(ego, leader_cur, idm)
    a_ego_new = _accel_between(ego, leader_tgt, idm)
    gain = a_ego_new - a_ego
    if mobil.politeness > 0.0:
        a_nf = _accel_between(follower_tgt, leader_tgt, idm)
        a_of = _accel_between(follower_cur, ego, idm)
        a_of_new = _accel_between(follower_cur, leader_cur, idm)
        gain += mobil.politeness * ((a_nf_new - a_nf) + (a_of_new - a_of))
    return gain > mobil.gain_threshold


_NORMAL_IDM = IdmParams()
_NORMAL_MOBIL = MobilParams()

_STYLE_TABLE: dict[DrivingStyle, tuple[IdmParams, MobilParams]] = {
    DrivingStyle.NORMAL: (_NORMAL_IDM, _NORMAL_MOBIL),
    DrivingStyle.AGGRESSIVE: (
        replace(_NORMAL_IDM, v0=30.0, T=1.0, a_max=4.0),
        replace(_NORMAL_MOBIL, gain_threshold=0.1),
    ),
    DrivingStyle.TIMID: (
        replace(_NORMAL_IDM, v0=20.0, T=2.0, a_max=2.0),
        replace(_NORMAL_MOBIL, b_safe=1.5, gain_threshold=0.4),
    ),
}

StyleTable = dict[DrivingStyle, tuple[IdmParams, MobilParams]]


def default_style_table() -> StyleTable:
    return dict(_STYLE_TABLE)


def style_params(style: DrivingStyle, table: StyleTable | None = None) -> tuple[IdmParams, MobilParams]:
    """Per-style driver parameters; NORMAL returns the defaults."""
    return (_STYLE_TABLE if table is None else table)[style]


class LaneEntry(NamedTuple):
    """Longitudinal state of a traffic participant, tagged with its lane."""

    x: float
    v: float
    length: float
    lane: LaneRef


def lane_leader_follower(x: float, lane: LaneRef, entries) -> tuple[LongState | None, LongState | None]:
    """Nearest entries ahead of / behind x on the given centerline."""
    leader = None
    follower = None
    lead_dx = math.inf
    follow_dx = math.inf
    for e in entries:
        if not same_centerline(lane, e.lane):
            continue
        dx = e.x - x
        if dx > 0.0:
            if dx < lead_dx:
                leader, lead_dx = LongState(e.x, e.v, e.length), dx
        elif dx < 0.0:
            if -dx < follow_dx:
                follower, follow_dx = LongState(e.x, e.v, e.length), -dx
    return leader, follower


def hv_lane_decision(
    x: float,
    v: float,
    length: float,
    lane: LaneRef,
    entries,
    layout: RoadLayout,
    idm: IdmParams,
    mobil: MobilParams,
) -> LaneRef | None:
    """MOBIL over the adjacent lanes; leftward change checked first.

    ``entries`` must not contain the deciding vehicle itself.  Returns the
    target lane, or None when no change fires.
    """
    ego = LongState(x, v, length)
    leader_cur, follower_cur = lane_leader_follower(x, lane, entries)
    for direction in (+1, -1):
        target = adjacent_lane(layout, lane, x, direction)
        if target is None:
            continue
        leader_tgt, follower_tgt = lane_leader_follower(x, target, entries)
        if mobil_decide(ego, leader_cur, follower_cur, leader_tgt, follower_tgt, idm, mobil):
            return target
    return None


def idm_accel_toward(x: float, v: float, length: float, lane: LaneRef, entries, idm: IdmParams) -> float:
    """IDM acceleration against the nearest leader on the vehicle's centerline."""
    leader, _ = lane_leader_follower(x, lane, entries)
    if leader is None:
        return idm_accel(v, math.inf, 0.0, idm)
    gap = leader.x - x - 0.5 * (leader.length + length)
    if gap <= 0.0:
        return IDM_DECEL_FLOOR
    return idm_accel(v, gap, v - leader.v, idm)
