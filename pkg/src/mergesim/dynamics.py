"""Kinematic bicycle propagation and the low-level controllers.

High-level actions fix a target speed and target lane once per decision
interval; a proportional speed controller and a two-stage lateral cascade
then produce (acceleration, steering) every simulation substep, and the
bicycle model integrates them.  All functions here are pure; the scalar
kernels at the bottom are shared by the live simulator and the intent
rollouts so both follow bit-identical code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

from .geometry import LaneKind, LaneRef, RoadLayout, adjacent_lane

V_MAX = 45.0  # hard physical speed clamp [m/s]
ACCEL_MAX = 5.0  # |a| clamp [m/s^2]
STEER_MAX = math.pi / 4  # |delta_f| clamp [rad]
TARGET_V_MIN = 10.0  # action target-speed bounds [m/s]
TARGET_V_MAX = 30.0
DV_CMD = 5.0  # speed-up / slow-down command increment [m/s]
V_FLOOR = 0.1  # speed floor for divisions (headway terms, steering cascade)

DT_SIM = 0.1  # simulation substep [s]
SUBSTEPS_PER_DECISION = 10  # policy decides at 1 Hz


class VehicleKind(IntEnum):
    CAV = 0
    HV = 1


class DrivingStyle(IntEnum):
    AGGRESSIVE = 0
    NORMAL = 1
    TIMID = 2


class HighLevelAction(IntEnum):
    """Discrete policy actions, in the fixed order used by the policy head."""

    TURN_LEFT = 0
    TURN_RIGHT = 1
    CRUISING = 2
    SPEED_UP = 3
    SLOW_DOWN = 4


#: Priority order for breaking safety-margin ties (most conservative first).
TIE_BREAK_ORDER = (
    HighLevelAction.SLOW_DOWN,
    HighLevelAction.CRUISING,
    HighLevelAction.SPEED_UP,
    HighLevelAction.TURN_RIGHT,
    HighLevelAction.TURN_LEFT,
)


@dataclass(slots=True)
class VehicleState:
    """Pose, speed and lane affiliation of one vehicle."""

    id: int
    x: float
    y: float
    v: float
    heading: float
    lane: LaneRef
    length: float = 5.0
    width: float = 2.0
    kind: VehicleKind = VehicleKind.CAV
    style: DrivingStyle = DrivingStyle.NORMAL

    def copy(self) -> "VehicleState":
        return replace(self)


@dataclass(frozen=True)
class ControlInput:
    """Low-level control signals; clamped, never rejected."""

    accel: float
    steer: float


@dataclass(frozen=True)
class ControllerGains:
    kp_speed: float = 0.5  # speed error -> acceleration
    k_lat: float = 0.5  # lateral error -> commanded lateral speed
    k_head: float = 2.0  # heading error -> steering


DEFAULT_GAINS = ControllerGains()


class ActionTargets:
    """Resolved outcome of a high-level action: target speed, target lane,
    and the effective action after masking."""

    __slots__ = ("target_v", "target_lane", "effective", "masked")

    def __init__(self, target_v: float, target_lane: LaneRef, effective: HighLevelAction, masked: bool):
        self.target_v = target_v
        self.target_lane = target_lane
        self.effective = effective
        self.masked = masked


def step_bicycle(state: VehicleState, u: ControlInput, dt: float) -> VehicleState:
    """One kinematic bicycle step.

    Slip angle beta = atan(0.5 tan(delta_f)) with l_r = l_f = length/2;
    position advances with the pre-update speed, then speed integrates the
    (clamped) acceleration and is clamped to [0, V_MAX].
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    accel = min(max(u.accel, -ACCEL_MAX), ACCEL_MAX)
    steer = min(max(u.steer, -STEER_MAX), STEER_MAX)
    x, y, v, heading = advance_bicycle(state.x, state.y, state.v, state.heading, accel, steer, dt, state.length)
    out = state.copy()
    out.x = x
    out.y = y
    out.v = v
    out.heading = heading
    return out


def pid_speed(target_v: float, current_v: float, gains: ControllerGains = DEFAULT_GAINS) -> float:
    """Proportional speed controller, clamped to the acceleration bounds."""
    return speed_control(target_v, current_v, gains.kp_speed)


def steer_to_lane(
    state: VehicleState,
    target_lane: LaneRef,
    layout: RoadLayout,
    gains: ControllerGains = DEFAULT_GAINS,
) -> float:
    """Steering command toward a lane centerline.

    Cascade: lateral position error -> commanded lateral speed (k_lat) ->
    commanded heading (kinematic inversion) -> steering (k_head), clamped
    to +-pi/4.  The target lane must be the current lane or adjacent to it.
    """
    if target_lane != state.lane:
        if adjacent_lane(layout, state.lane, state.x, +1) != target_lane and adjacent_lane(
            layout, state.lane, state.x, -1
        ) != target_lane:
            raise ValueError(f"lane {target_lane} is not reachable from {state.lane}")
    target_y = layout.centerline_y(target_lane)
    return lane_steer(state.y, state.v, state.heading, target_y, gains.k_lat, gains.k_head)


def execute_action(state: VehicleState, action: HighLevelAction, layout: RoadLayout) -> ActionTargets:
    """Resolve a high-level action into (target speed, target lane).

    Speed targets are clamped to [10, 30] m/s.  A lane change toward a
    nonexistent lane degrades to CRUISING and is flagged as masked.
    """
    target_v = state.v
    target_lane = state.lane
    effective = action
    masked = False
    if action is HighLevelAction.SPEED_UP:
        target_v = state.v + DV_CMD
    elif action is HighLevelAction.SLOW_DOWN:
        target_v = state.v - DV_CMD
    elif action is HighLevelAction.TURN_LEFT or action is HighLevelAction.TURN_RIGHT:
        direction = +1 if action is HighLevelAction.TURN_LEFT else -1
        lane = adjacent_lane(layout, state.lane, state.x, direction)
        if lane is None:
            effective = HighLevelAction.CRUISING
            masked = True
        else:
            target_lane = lane
    target_v = min(max(target_v, TARGET_V_MIN), TARGET_V_MAX)
    return ActionTargets(target_v, target_lane, effective, masked)


def available_actions(state: VehicleState, layout: RoadLayout) -> tuple[HighLevelAction, ...]:
    """All five actions minus lane changes into nonexistent lanes."""
    out = [HighLevelAction.CRUISING, HighLevelAction.SPEED_UP, HighLevelAction.SLOW_DOWN]
    if adjacent_lane(layout, state.lane, state.x, +1) is not None:
        out.append(HighLevelAction.TURN_LEFT)
    if adjacent_lane(layout, state.lane, state.x, -1) is not None:
        out.append(HighLevelAction.TURN_RIGHT)
    out.sort()
    return tuple(out)


# --- scalar kernels -------------------------------------------------------
# Kept free of object construction; the simulator and the intent generator
# run these in tight loops.


def advance_bicycle(
    x: float, y: float, v: float, heading: float, accel: float, steer: float, dt: float, length: float
) -> tuple[float, float, float, float]:
    """Raw bicycle integrator.  Callers own the input clamps: the controller
    pipeline bounds accel to +-5 (ControlInput), while IDM braking may reach
    -10; only the physical speed range is enforced here."""
    l_r = 0.5 * length
    beta = math.atan(0.5 * math.tan(steer))
    x = x + v * math.cos(heading + beta) * dt
    y = y + v * math.sin(heading + beta) * dt
    heading = heading + (v / l_r) * math.sin(beta) * dt
    v = v + accel * dt
    if v < 0.0:
        v = 0.0
    elif v > V_MAX:
        v = V_MAX
    return x, y, v, heading


def speed_control(target_v: float, v: float, kp: float) -> float:
    a = kp * (target_v - v)
    if a > ACCEL_MAX:
        return ACCEL_MAX
    if a < -ACCEL_MAX:
        return -ACCEL_MAX
    return a


def lane_steer(y: float, v: float, heading: float, target_y: float, k_lat: float, k_head: float) -> float:
    v_lat_cmd = k_lat * (target_y - y)
    ratio = v_lat_cmd / max(v, V_FLOOR)
    if ratio > 1.0:
        ratio = 1.0
    elif ratio < -1.0:
        ratio = -1.0
    heading_cmd = math.asin(ratio)
    err = heading_cmd - heading
    # wrap to (-pi, pi]
    if err > math.pi:
        err -= 2.0 * math.pi
    elif err <= -math.pi:
        err += 2.0 * math.pi
    delta = k_head * err
    if delta > STEER_MAX:
        return STEER_MAX
    if delta < -STEER_MAX:
        return -STEER_MAX
    return delta


def roll_control_interval(
    x: float,
    y: float,
    v: float,
    heading: float,
    length: float,
    target_v: float,
    target_y: float,
    gains: ControllerGains,
    dt: float,
    substeps: int,
) -> tuple[float, float, float, float]:
    """Run the controller + bicycle pipeline for one decision interval."""
    kp = gains.kp_speed
    k_lat = gains.k_lat
    k_head = gains.k_head
    for _ in range(substeps):
        a = speed_control(target_v, v, kp)
        d = lane_steer(y, v, heading, target_y, k_lat, k_head)
        x, y, v, heading = advance_bicycle(x, y, v, heading, a, d, dt, length)
    return x, y, v, heading
