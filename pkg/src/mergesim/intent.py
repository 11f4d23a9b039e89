"""Intent trajectories: rollouts of chosen actions and predicted HV motion.

A CAV's intent is produced by holding one high-level action fixed and
running the exact controller + bicycle pipeline the simulator uses, for a
horizon of decision steps; sample k is the pose one decision interval
after sample k-1.  HV predictions roll IDM + MOBIL against a frozen
neighbor snapshot whose members move at constant speed.  Neither rollout
touches live simulation state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .behavior import IDM_DECEL_FLOOR, LaneEntry, hv_lane_decision, idm_accel, style_params
from .dynamics import (
    DEFAULT_GAINS,
    DT_SIM,
    SUBSTEPS_PER_DECISION,
    ControllerGains,
    HighLevelAction,
    VehicleState,
    advance_bicycle,
    execute_action,
    lane_steer,
    roll_control_interval,
)
from .geometry import MERGE, THROUGH, LaneKind, LaneRef, RoadLayout, lane_at

DEFAULT_HORIZON = 8  # intent horizon in decision steps


class TrajectorySample(NamedTuple):
    x: float
    y: float
    v: float
    heading: float
    lane: LaneRef


@dataclass(frozen=True)
class IntentTrajectory:
    """Shared V2V message: one pose/speed sample per future decision step.

    ``origin`` is the owner's pose when the trajectory was generated; it
    anchors the first prediction segment for interpolation.
    """

    owner: int
    samples: tuple[TrajectorySample, ...]
    created_at: int
    length: float
    width: float
    origin: TrajectorySample

    @property
    def horizon(self) -> int:
        return len(self.samples)

    def to_record(self, step: int) -> dict:
        return {
            "type": "intent",
            "step": step,
            "id": self.owner,
            "samples": [{"x": s.x, "y": s.y, "v": s.v, "theta": s.heading} for s in self.samples],
        }


def generate_intent(
    state: VehicleState,
    action: HighLevelAction,
    layout: RoadLayout,
    gains: ControllerGains = DEFAULT_GAINS,
    horizon: int = DEFAULT_HORIZON,
    dt: float = DT_SIM,
    substeps: int = SUBSTEPS_PER_DECISION,
    created_at: int = 0,
) -> IntentTrajectory:
    """Roll one action through the controller pipeline for the full horizon.

    The action is resolved to (target speed, target lane) once; masked lane
    changes roll out their CRUISING fallback.  Sample 1 is exactly the pose
    one real decision step would produce under the same action.
    """
    targets = execute_action(state, action, layout)
    target_y = layout.centerline_y(targets.target_lane)
    x, y, v, heading = state.x, state.y, state.v, state.heading
    lane = state.lane
    origin = TrajectorySample(x, y, v, heading, lane)
    samples = []
    for _ in range(horizon):
        x, y, v, heading = roll_control_interval(
            x, y, v, heading, state.length, targets.target_v, target_y, gains, dt, substeps
        )
        lane = lane_at(layout, x, y, lane)
        samples.append(TrajectorySample(x, y, v, heading, lane))
    return IntentTrajectory(
        owner=state.id,
        samples=tuple(samples),
        created_at=created_at,
        length=state.length,
        width=state.width,
        origin=origin,
    )


def predict_hv(
    state: VehicleState,
    neighbors,
    layout: RoadLayout,
    gains: ControllerGains = DEFAULT_GAINS,
    horizon: int = DEFAULT_HORIZON,
    dt: float = DT_SIM,
    substeps: int = SUBSTEPS_PER_DECISION,
    barrier=None,
    target_lane: LaneRef | None = None,
    created_at: int = 0,
    styles=None,
) -> IntentTrajectory:
    """Predict an HV with IDM (longitudinal) and MOBIL (lateral).

    ``neighbors`` is frozen at call time; each member advances at constant
    speed on its own centerline.  MOBIL is evaluated once per decision
    interval and suspended while a change is in progress.  ``target_lane``
    carries over a change already underway.
    """
    idm, mobil = style_params(state.style, styles)
    # frozen ghosts: parallel arrays, ramp-side flag replaces full lane refs
    gx: list[float] = []
    gv: list[float] = []
    glen: list[float] = []
    gramp: list[bool] = []
    for nb in neighbors:
        if nb.id == state.id:
            continue
        gx.append(nb.x)
        gv.append(nb.v)
        glen.append(nb.length)
        gramp.append(nb.lane.kind is not LaneKind.THROUGH)
    if barrier is not None:
        gx.append(barrier.x)
        gv.append(0.0)
        glen.append(barrier.length)
        gramp.append(True)
    n = len(gx)

    x, y, v, heading = state.x, state.y, state.v, state.heading
    lane = state.lane
    origin = TrajectorySample(x, y, v, heading, lane)
    tgt_lane = target_lane if target_lane is not None else state.lane
    length = state.length
    k_lat, k_head = gains.k_lat, gains.k_head
    samples = []
    for k in range(horizon):
        t0 = k * dt * substeps
        if tgt_lane == lane:
            entries = [
                LaneEntry(gx[i] + gv[i] * t0, gv[i], glen[i], MERGE if gramp[i] else THROUGH)
                for i in range(n)
            ]
            decision = hv_lane_decision(x, v, length, lane, entries, layout, idm, mobil)
            if decision is not None:
                tgt_lane = decision
        target_y = layout.centerline_y(tgt_lane)
        for s in range(substeps):
            t = t0 + s * dt
            ego_ramp = lane.kind is not LaneKind.THROUGH
            best = math.inf
            bi = -1
            for i in range(n):
                if gramp[i] != ego_ramp:
                    continue
                dxi = gx[i] + gv[i] * t - x
                if 0.0 < dxi < best:
                    best = dxi
                    bi = i
            if bi < 0:
                a = idm_accel(v, math.inf, 0.0, idm)
            else:
                gap = best - 0.5 * (glen[bi] + length)
                a = IDM_DECEL_FLOOR if gap <= 0.0 else idm_accel(v, gap, v - gv[bi], idm)
            d = lane_steer(y, v, heading, target_y, k_lat, k_head)
            x, y, v, heading = advance_bicycle(x, y, v, heading, a, d, dt, length)
            lane = lane_at(layout, x, y, lane)
        samples.append(TrajectorySample(x, y, v, heading, lane))
    return IntentTrajectory(
        owner=state.id,
        samples=tuple(samples),
        created_at=created_at,
        length=length,
        width=state.width,
        origin=origin,
    )


def static_trajectory(obj, horizon: int = DEFAULT_HORIZON, created_at: int = 0) -> IntentTrajectory:
    """Constant trajectory for a stationary object (the merge-end barrier)."""
    sample = TrajectorySample(obj.x, obj.y, 0.0, obj.heading, obj.lane)
    return IntentTrajectory(
        owner=obj.id,
        samples=(sample,) * horizon,
        created_at=created_at,
        length=obj.length,
        width=obj.width,
        origin=sample,
    )

